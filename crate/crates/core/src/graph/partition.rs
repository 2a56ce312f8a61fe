//! 1D partitioning of the source range.
//!
//! Each partition keeps a CSR over the full destination set restricted to
//! sources in `[boundaries[p], boundaries[p + 1])`. Processing one partition
//! at a time bounds the slice of source features touched per pass.

use super::SparseAdjacency;
use crate::error::{Error, Result};

/// Destination-major CSR restricted to one source segment.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrSlice {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub edge_id: Vec<u32>,
}

impl CsrSlice {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row(&self, dst: usize) -> (&[u32], &[u32]) {
        let r = self.row_ptr[dst]..self.row_ptr[dst + 1];
        (&self.col_idx[r.clone()], &self.edge_id[r])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPlan {
    pub boundaries: Vec<usize>,
    pub slices: Vec<CsrSlice>,
    pub num_src: usize,
    pub num_dst: usize,
    pub parent_nnz: usize,
}

impl PartitionPlan {
    pub fn num_partitions(&self) -> usize {
        self.slices.len()
    }
}

/// Splits `[0, num_src)` into `num_partitions` contiguous chunks whose sizes differ by at most one.
pub fn partition_1d(adj: &SparseAdjacency, num_partitions: usize) -> Result<PartitionPlan> {
    let n = adj.num_src();
    // A graph without sources still admits the trivial single partition.
    if num_partitions == 0 || (num_partitions > n && num_partitions != 1) {
        return Err(Error::InvalidPartitionCount {
            requested: num_partitions,
            num_src: n,
        });
    }
    let boundaries = (0..=num_partitions)
        .map(|i| i * n / num_partitions)
        .collect();
    partition_with_boundaries(adj, boundaries)
}

/// Boundaries for hybrid partitioning: the high-degree block `[0, split)` is cut
/// into up to `num_partitions` near-equal chunks, the low-degree block stays whole.
pub fn hybrid_boundaries(num_src: usize, split: usize, num_partitions: usize) -> Vec<usize> {
    assert!(split <= num_src);
    let p = num_partitions.clamp(1, split.max(1));
    let mut b: Vec<usize> = if split == 0 {
        vec![0]
    } else {
        (0..=p).map(|i| i * split / p).collect()
    };
    if split < num_src || num_src == 0 {
        b.push(num_src);
    }
    b
}

/// Partitions by explicit source boundaries (must start at 0, end at num_src, be strictly increasing).
pub fn partition_with_boundaries(
    adj: &SparseAdjacency,
    boundaries: Vec<usize>,
) -> Result<PartitionPlan> {
    let n = adj.num_src();
    let valid = boundaries.len() >= 2
        && boundaries[0] == 0
        && *boundaries.last().unwrap() == n
        && (boundaries.windows(2).all(|w| w[0] < w[1]) || (n == 0 && boundaries.len() == 2));
    if !valid {
        return Err(Error::InvalidPartitionCount {
            requested: boundaries.len().saturating_sub(1),
            num_src: n,
        });
    }
    let parts = boundaries.len() - 1;
    let num_dst = adj.num_dst();

    let mut counts = vec![vec![0usize; num_dst + 1]; parts];
    for v in 0..num_dst {
        let row = adj.in_neighbors(v);
        let mut lo = 0;
        for (p, c) in counts.iter_mut().enumerate() {
            let hi = lo + row[lo..].partition_point(|&s| (s as usize) < boundaries[p + 1]);
            c[v + 1] = hi - lo;
            lo = hi;
        }
    }
    let mut slices = Vec::with_capacity(parts);
    for mut row_ptr in counts {
        for v in 0..num_dst {
            row_ptr[v + 1] += row_ptr[v];
        }
        let nnz = row_ptr[num_dst];
        slices.push(CsrSlice {
            row_ptr,
            col_idx: Vec::with_capacity(nnz),
            edge_id: Vec::with_capacity(nnz),
        });
    }
    // Rows are visited in order and each row is sorted, so appending keeps slices canonical.
    let (cols, eids, rp) = (adj.col_idx(), adj.edge_id(), adj.row_ptr());
    for (v, &start) in rp[..num_dst].iter().enumerate() {
        let mut pos = start;
        for slice in &mut slices {
            let len = slice.row_ptr[v + 1] - slice.row_ptr[v];
            slice.col_idx.extend_from_slice(&cols[pos..pos + len]);
            slice.edge_id.extend_from_slice(&eids[pos..pos + len]);
            pos += len;
        }
    }
    Ok(PartitionPlan {
        boundaries,
        slices,
        num_src: n,
        num_dst,
        parent_nnz: adj.nnz(),
    })
}

/// Number of source partitions so each segment's feature tiles fit in `cache_scalars`.
pub fn partitions_for_cache(num_src: usize, tile_width: usize, cache_scalars: usize) -> usize {
    let per_segment = (cache_scalars / tile_width.max(1)).max(1);
    num_src.div_ceil(per_segment).max(1)
}
