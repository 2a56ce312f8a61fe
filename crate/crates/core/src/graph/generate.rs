use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SparseAdjacency, MAX_NNZ};
use crate::error::{Error, Result};

/// Two-block skewed graph over `n_high + n_low` vertices.
///
/// Destinations `0..n_high` each draw `deg_high` distinct in-neighbors
/// uniformly from all vertices; the remaining destinations draw `deg_low`.
/// Edge ids follow CSR order.
pub fn gen_skewed(
    n_high: usize,
    deg_high: usize,
    n_low: usize,
    deg_low: usize,
    seed: u64,
) -> Result<SparseAdjacency> {
    let n = n_high + n_low;
    for degree in [deg_high, deg_low] {
        if degree > n {
            return Err(Error::DegreeExceedsPopulation {
                degree,
                population: n,
            });
        }
    }
    let nnz = n_high * deg_high + n_low * deg_low;
    if nnz > MAX_NNZ {
        return Err(Error::TooLarge(format!("{nnz} edges")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(nnz);
    let mut marks = vec![false; n];
    row_ptr.push(0);
    for v in 0..n {
        let degree = if v < n_high { deg_high } else { deg_low };
        let start = col_idx.len();
        sample_distinct(&mut rng, n, degree, &mut marks, &mut col_idx);
        col_idx[start..].sort_unstable();
        row_ptr.push(col_idx.len());
    }
    let edge_id = (0..nnz as u32).collect();
    Ok(SparseAdjacency::from_parts_unchecked(
        n, n, row_ptr, col_idx, edge_id, None,
    ))
}

/// Uniform graph: every destination draws exactly `avg_degree` distinct in-neighbors.
pub fn gen_uniform(n: usize, avg_degree: usize, seed: u64) -> Result<SparseAdjacency> {
    gen_skewed(0, 0, n, avg_degree, seed)
}

/// Appends `k` distinct values from `0..n` to `out`. `marks` is all-false on entry and exit.
fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize, marks: &mut [bool], out: &mut Vec<u32>) {
    if k == 0 {
        return;
    }
    let start = out.len();
    if 2 * k <= n {
        while out.len() - start < k {
            let x = rng.gen_range(0..n as u32);
            if !std::mem::replace(&mut marks[x as usize], true) {
                out.push(x);
            }
        }
        for &x in &out[start..] {
            marks[x as usize] = false;
        }
    } else {
        // Dense case: reject the complement instead.
        let mut excluded = 0;
        while excluded < n - k {
            let x = rng.gen_range(0..n as u32) as usize;
            if !std::mem::replace(&mut marks[x], true) {
                excluded += 1;
            }
        }
        for (x, m) in marks.iter_mut().enumerate() {
            if !std::mem::replace(m, false) {
                out.push(x as u32);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_row_degrees() {
        let g = gen_uniform(100, 5, 3).unwrap();
        assert_eq!(g.nnz(), 500);
        assert!((0..100).all(|v| g.in_degree(v) == 5));

        let g = gen_skewed(0, 0, 4, 1, 9).unwrap();
        assert_eq!(g.nnz(), 4);
        assert!((0..4).all(|v| g.in_degree(v) == 1));
    }

    #[test]
    fn empty_and_full_rows() {
        assert_eq!(gen_uniform(100, 0, 1).unwrap().nnz(), 0);
        let g = gen_uniform(6, 6, 1).unwrap();
        assert_eq!(g.nnz(), 36);
        assert!((0..6).all(|v| g.in_neighbors(v) == [0, 1, 2, 3, 4, 5]));
        let g = gen_uniform(10, 8, 1).unwrap();
        assert!((0..10).all(|v| g.in_degree(v) == 8));
    }

    #[test]
    fn deterministic_for_seed() {
        let a = gen_skewed(10, 4, 90, 2, 7).unwrap();
        let b = gen_skewed(10, 4, 90, 2, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_skewed(10, 4, 90, 2, 8).unwrap());
    }

    #[test]
    fn degree_exceeding_population() {
        assert!(matches!(
            gen_skewed(2, 5, 2, 1, 0),
            Err(Error::DegreeExceedsPopulation {
                degree: 5,
                population: 4
            })
        ));
        assert!(gen_uniform(3, 4, 0).is_err());
    }

    #[test]
    fn five_percent_density() {
        let g = gen_uniform(2000, 100, 11).unwrap();
        assert!((g.sparsity() - 0.95).abs() < 1e-12);
    }
}
