//! Sparse graph topology and the structural transforms the kernels schedule over.
//!
//! The adjacency is stored destination-major: row `v` of the CSR lists the
//! in-neighbors of `v` in strictly increasing order, so aggregation over
//! `N(v)` is a pull over one row. Every edge keeps a canonical edge id that
//! is independent of storage order; per-edge data (edge values, edge feature
//! tensors, SDDMM outputs) is always indexed by that id.

mod generate;
mod hilbert;
pub mod io;
mod partition;
mod reorder;

pub use generate::{gen_skewed, gen_uniform};
pub use hilbert::{hilbert_order, hilbert_xy2d, EdgeOrder, Traversal};
pub use partition::{
    hybrid_boundaries, partition_1d, partition_with_boundaries, partitions_for_cache, CsrSlice,
    PartitionPlan,
};
pub use reorder::{hybrid_reorder, VertexPermutation};

use crate::error::{Error, Result};

/// Upper bound on stored edges; ids are 32-bit.
pub const MAX_NNZ: usize = 1 << 31;

/// Immutable sparse adjacency in destination-major CSR with canonical edge ids.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdjacency {
    num_src: usize,
    num_dst: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    edge_id: Vec<u32>,
    edge_value: Option<Vec<f32>>,
}

impl SparseAdjacency {
    /// Builds the canonical CSR from `(src, dst)` pairs. Edge ids follow input order.
    pub fn from_coo(
        num_src: usize,
        num_dst: usize,
        edges: &[(u32, u32)],
        values: Option<&[f32]>,
    ) -> Result<Self> {
        if edges.len() > MAX_NNZ {
            return Err(Error::TooLarge(format!("{} edges", edges.len())));
        }
        if let Some(v) = values {
            if v.len() != edges.len() {
                return Err(Error::LengthMismatch {
                    what: "edge values",
                    expected: edges.len(),
                    got: v.len(),
                });
            }
        }
        for &(s, d) in edges {
            if s as usize >= num_src || d as usize >= num_dst {
                return Err(Error::IndexOutOfRange {
                    src: s.into(),
                    dst: d.into(),
                    num_src,
                    num_dst,
                });
            }
        }

        let mut row_ptr = vec![0usize; num_dst + 1];
        for &(_, d) in edges {
            row_ptr[d as usize + 1] += 1;
        }
        for v in 0..num_dst {
            row_ptr[v + 1] += row_ptr[v];
        }
        let mut fill = row_ptr.clone();
        let mut slots = vec![(0u32, 0u32); edges.len()];
        for (eid, &(s, d)) in edges.iter().enumerate() {
            let p = &mut fill[d as usize];
            slots[*p] = (s, eid as u32);
            *p += 1;
        }
        for v in 0..num_dst {
            let row = &mut slots[row_ptr[v]..row_ptr[v + 1]];
            row.sort_unstable_by_key(|&(s, _)| s);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateEdge {
                    src: w[0].0,
                    dst: v as u32,
                });
            }
        }
        let (col_idx, edge_id) = slots.into_iter().unzip();
        Ok(Self {
            num_src,
            num_dst,
            row_ptr,
            col_idx,
            edge_id,
            edge_value: values.map(<[f32]>::to_vec),
        })
    }

    /// Assembles an adjacency from raw CSR arrays, checking every structural invariant.
    pub fn from_parts(
        num_src: usize,
        num_dst: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        edge_id: Vec<u32>,
        edge_value: Option<Vec<f32>>,
    ) -> Result<Self> {
        let nnz = col_idx.len();
        if nnz > MAX_NNZ {
            return Err(Error::TooLarge(format!("{nnz} edges")));
        }
        if row_ptr.len() != num_dst + 1 {
            return Err(Error::Format(format!(
                "row_ptr has {} entries, expected {}",
                row_ptr.len(),
                num_dst + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[num_dst] != nnz {
            return Err(Error::Format("row_ptr must start at 0 and end at nnz".into()));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("row_ptr is not non-decreasing".into()));
        }
        if edge_id.len() != nnz {
            return Err(Error::Format("edge_id length differs from nnz".into()));
        }
        if let Some(v) = &edge_value {
            if v.len() != nnz {
                return Err(Error::Format("edge_value length differs from nnz".into()));
            }
        }
        for v in 0..num_dst {
            let row = &col_idx[row_ptr[v]..row_ptr[v + 1]];
            if row.iter().any(|&s| s as usize >= num_src) {
                return Err(Error::Format(format!("row {v} has a source index out of range")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!("row {v} is not strictly increasing")));
            }
        }
        let mut seen = vec![false; nnz];
        for &e in &edge_id {
            let e = e as usize;
            if e >= nnz || seen[e] {
                return Err(Error::Format("edge_id is not a permutation".into()));
            }
            seen[e] = true;
        }
        Ok(Self {
            num_src,
            num_dst,
            row_ptr,
            col_idx,
            edge_id,
            edge_value,
        })
    }

    /// Internal constructor for transforms that preserve the invariants by construction.
    pub(crate) fn from_parts_unchecked(
        num_src: usize,
        num_dst: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        edge_id: Vec<u32>,
        edge_value: Option<Vec<f32>>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), num_dst + 1);
        debug_assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        debug_assert_eq!(col_idx.len(), edge_id.len());
        Self {
            num_src,
            num_dst,
            row_ptr,
            col_idx,
            edge_id,
            edge_value,
        }
    }

    pub fn num_src(&self) -> usize {
        self.num_src
    }

    pub fn num_dst(&self) -> usize {
        self.num_dst
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn edge_id(&self) -> &[u32] {
        &self.edge_id
    }

    /// Scalar edge data indexed by canonical edge id.
    pub fn edge_value(&self) -> Option<&[f32]> {
        self.edge_value.as_deref()
    }

    /// Sources of the in-edges of `dst`, ascending.
    pub fn in_neighbors(&self, dst: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[dst]..self.row_ptr[dst + 1]]
    }

    pub fn in_degree(&self, dst: usize) -> usize {
        self.row_ptr[dst + 1] - self.row_ptr[dst]
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_src];
        for &s in &self.col_idx {
            deg[s as usize] += 1;
        }
        deg
    }

    /// Destination vertex of every CSR position.
    pub fn row_of_positions(&self) -> Vec<u32> {
        let mut rows = Vec::with_capacity(self.nnz());
        for v in 0..self.num_dst {
            rows.extend(std::iter::repeat_n(v as u32, self.in_degree(v)));
        }
        rows
    }

    /// `(src, dst)` pairs indexed by canonical edge id.
    pub fn to_coo(&self) -> Vec<(u32, u32)> {
        let mut out = vec![(0, 0); self.nnz()];
        for v in 0..self.num_dst {
            for p in self.row_ptr[v]..self.row_ptr[v + 1] {
                out[self.edge_id[p] as usize] = (self.col_idx[p], v as u32);
            }
        }
        out
    }

    /// Replaces the edge values (indexed by canonical edge id).
    pub fn with_edge_values(mut self, values: Option<Vec<f32>>) -> Result<Self> {
        if let Some(v) = &values {
            if v.len() != self.nnz() {
                return Err(Error::LengthMismatch {
                    what: "edge values",
                    expected: self.nnz(),
                    got: v.len(),
                });
            }
        }
        self.edge_value = values;
        Ok(self)
    }

    /// Swaps the roles of sources and destinations; edge ids and values are kept.
    pub fn transpose(&self) -> Self {
        let mut row_ptr = vec![0usize; self.num_src + 1];
        for &s in &self.col_idx {
            row_ptr[s as usize + 1] += 1;
        }
        for u in 0..self.num_src {
            row_ptr[u + 1] += row_ptr[u];
        }
        let mut fill = row_ptr.clone();
        let mut col_idx = vec![0u32; self.nnz()];
        let mut edge_id = vec![0u32; self.nnz()];
        // Rows are visited in ascending order, so each transposed row comes out sorted.
        for v in 0..self.num_dst {
            for p in self.row_ptr[v]..self.row_ptr[v + 1] {
                let slot = &mut fill[self.col_idx[p] as usize];
                col_idx[*slot] = v as u32;
                edge_id[*slot] = self.edge_id[p];
                *slot += 1;
            }
        }
        Self::from_parts_unchecked(
            self.num_dst,
            self.num_src,
            row_ptr,
            col_idx,
            edge_id,
            self.edge_value.clone(),
        )
    }

    /// Fraction of absent entries in the `num_dst x num_src` adjacency matrix.
    pub fn sparsity(&self) -> f64 {
        let cells = self.num_src as f64 * self.num_dst as f64;
        if cells == 0.0 {
            return 1.0;
        }
        1.0 - self.nnz() as f64 / cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_layout() {
        let g = SparseAdjacency::from_coo(2, 2, &[(0, 1)], None).unwrap();
        assert_eq!(g.row_ptr(), &[0, 0, 1]);
        assert_eq!(g.col_idx(), &[0]);
        assert_eq!(g.edge_id(), &[0]);
    }

    #[test]
    fn identity_pattern() {
        let g = SparseAdjacency::from_coo(3, 3, &[(0, 0), (1, 1), (2, 2)], None).unwrap();
        assert_eq!(g.row_ptr(), &[0, 1, 2, 3]);
        assert_eq!(g.col_idx(), &[0, 1, 2]);
    }

    #[test]
    fn edge_ids_follow_input_order() {
        let g = SparseAdjacency::from_coo(3, 2, &[(2, 0), (0, 0), (1, 1)], Some(&[1.0, 2.0, 3.0]))
            .unwrap();
        assert_eq!(g.col_idx(), &[0, 2, 1]);
        assert_eq!(g.edge_id(), &[1, 0, 2]);
        assert_eq!(g.edge_value().unwrap(), &[1.0, 2.0, 3.0]);
        assert_eq!(g.to_coo(), vec![(2, 0), (0, 0), (1, 1)]);
    }

    #[test]
    fn rejects_out_of_range_and_duplicates() {
        assert!(matches!(
            SparseAdjacency::from_coo(2, 2, &[(2, 0)], None),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            SparseAdjacency::from_coo(2, 2, &[(0, 1), (1, 1), (0, 1)], None),
            Err(Error::DuplicateEdge { src: 0, dst: 1 })
        ));
        assert!(matches!(
            SparseAdjacency::from_coo(2, 2, &[(0, 1)], Some(&[])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn from_parts_checks_invariants() {
        assert!(SparseAdjacency::from_parts(2, 1, vec![0, 2], vec![1, 0], vec![0, 1], None).is_err());
        assert!(SparseAdjacency::from_parts(2, 1, vec![0, 2], vec![0, 1], vec![1, 1], None).is_err());
        assert!(SparseAdjacency::from_parts(2, 1, vec![0, 2], vec![0, 1], vec![1, 0], None).is_ok());
    }

    #[test]
    fn transpose_keeps_edge_ids() {
        let g = SparseAdjacency::from_coo(3, 2, &[(2, 0), (0, 0), (1, 1), (2, 1)], None).unwrap();
        let t = g.transpose();
        assert_eq!(t.num_src(), 2);
        assert_eq!(t.num_dst(), 3);
        let swapped: Vec<_> = g.to_coo().into_iter().map(|(s, d)| (d, s)).collect();
        assert_eq!(t.to_coo(), swapped);
        assert_eq!(t.transpose(), g);
    }
}
