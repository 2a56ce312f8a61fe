use std::fmt;
use std::str::FromStr;

use super::SparseAdjacency;

/// Order in which the SDDMM kernel visits edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Traversal {
    #[default]
    RowMajor,
    Hilbert,
}

impl fmt::Display for Traversal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Traversal::RowMajor => "row",
            Traversal::Hilbert => "hilbert",
        })
    }
}

impl FromStr for Traversal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "row" | "row-major" => Ok(Traversal::RowMajor),
            "hilbert" => Ok(Traversal::Hilbert),
            _ => Err(format!("unknown traversal `{s}` (expected row|hilbert)")),
        }
    }
}

/// A permutation of CSR positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeOrder {
    pub order: Vec<u32>,
    pub kind: Traversal,
}

impl EdgeOrder {
    pub fn row_major(adj: &SparseAdjacency) -> Self {
        Self {
            order: (0..adj.nnz() as u32).collect(),
            kind: Traversal::RowMajor,
        }
    }

    pub fn for_traversal(adj: &SparseAdjacency, kind: Traversal) -> Self {
        match kind {
            Traversal::RowMajor => Self::row_major(adj),
            Traversal::Hilbert => hilbert_order(adj),
        }
    }
}

/// Distance of cell `(x, y)` along the Hilbert curve filling a `side x side`
/// grid (`side` a power of two, origin at the lower-left corner).
pub fn hilbert_xy2d(side: u64, mut x: u64, mut y: u64) -> u64 {
    debug_assert!(side.is_power_of_two() && x < side && y < side);
    let mut d = 0;
    let mut s = side / 2;
    while s > 0 {
        let rx = u64::from(x & s != 0);
        let ry = u64::from(y & s != 0);
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = side - 1 - x;
                y = side - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

/// Sorts edge positions by the Hilbert index of `(dst, src)` on the smallest
/// power-of-two grid covering both vertex ranges.
pub fn hilbert_order(adj: &SparseAdjacency) -> EdgeOrder {
    let side = adj.num_src().max(adj.num_dst()).max(1).next_power_of_two() as u64;
    let mut keyed: Vec<(u64, u32)> = Vec::with_capacity(adj.nnz());
    for v in 0..adj.num_dst() {
        for p in adj.row_ptr()[v]..adj.row_ptr()[v + 1] {
            let u = adj.col_idx()[p];
            keyed.push((hilbert_xy2d(side, v as u64, u.into()), p as u32));
        }
    }
    keyed.sort_unstable();
    EdgeOrder {
        order: keyed.into_iter().map(|(_, p)| p).collect(),
        kind: Traversal::Hilbert,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_curve() {
        // lower-left, upper-left, upper-right, lower-right
        assert_eq!(hilbert_xy2d(2, 0, 0), 0);
        assert_eq!(hilbert_xy2d(2, 0, 1), 1);
        assert_eq!(hilbert_xy2d(2, 1, 1), 2);
        assert_eq!(hilbert_xy2d(2, 1, 0), 3);
    }

    #[test]
    fn indices_are_a_bijection() {
        let side = 16;
        let mut seen = vec![false; (side * side) as usize];
        for x in 0..side {
            for y in 0..side {
                let d = hilbert_xy2d(side, x, y) as usize;
                assert!(!seen[d]);
                seen[d] = true;
            }
        }
    }

    #[test]
    fn single_edge() {
        let g = SparseAdjacency::from_coo(3, 3, &[(2, 1)], None).unwrap();
        assert_eq!(hilbert_order(&g).order, vec![0]);
    }

    #[test]
    fn traversal_parse() {
        assert_eq!("hilbert".parse::<Traversal>().unwrap(), Traversal::Hilbert);
        assert_eq!("row".parse::<Traversal>().unwrap(), Traversal::RowMajor);
        assert!("zigzag".parse::<Traversal>().is_err());
    }
}
