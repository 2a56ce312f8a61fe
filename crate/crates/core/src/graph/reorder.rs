use super::SparseAdjacency;

/// Source relabeling that places high out-degree vertices first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexPermutation {
    /// old label -> new label
    pub forward: Vec<u32>,
    /// new label -> old label
    pub backward: Vec<u32>,
    /// New labels below this index have out-degree >= the threshold.
    pub threshold_split: usize,
}

impl VertexPermutation {
    pub fn identity(n: usize) -> Self {
        let ids: Vec<u32> = (0..n as u32).collect();
        Self {
            forward: ids.clone(),
            backward: ids,
            threshold_split: n,
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &f)| i as u32 == f)
    }

    /// Rows of `data` (row width `width`) in new-label order.
    pub fn permute_rows<T: Copy>(&self, data: &[T], width: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(data.len());
        for &old in &self.backward {
            let o = old as usize * width;
            out.extend_from_slice(&data[o..o + width]);
        }
        out
    }

    /// Inverse of [`permute_rows`](Self::permute_rows).
    pub fn restore_rows<T: Copy>(&self, data: &[T], width: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(data.len());
        for &new in &self.forward {
            let o = new as usize * width;
            out.extend_from_slice(&data[o..o + width]);
        }
        out
    }
}

/// Relabels sources so that those with out-degree >= `degree_threshold` come
/// first (each block keeps ascending original order). Destinations, edge ids and
/// edge values are unchanged.
pub fn hybrid_reorder(
    adj: &SparseAdjacency,
    degree_threshold: usize,
) -> (SparseAdjacency, VertexPermutation) {
    let degrees = adj.out_degrees();
    let (high, low): (Vec<u32>, Vec<u32>) =
        (0..adj.num_src() as u32).partition(|&u| degrees[u as usize] >= degree_threshold);
    let threshold_split = high.len();
    let backward: Vec<u32> = high.into_iter().chain(low).collect();
    let mut forward = vec![0u32; backward.len()];
    for (new, &old) in backward.iter().enumerate() {
        forward[old as usize] = new as u32;
    }
    let perm = VertexPermutation {
        forward,
        backward,
        threshold_split,
    };
    if perm.is_identity() {
        return (adj.clone(), perm);
    }

    let mut col_idx = Vec::with_capacity(adj.nnz());
    let mut edge_id = Vec::with_capacity(adj.nnz());
    let mut row = Vec::new();
    for v in 0..adj.num_dst() {
        let r = adj.row_ptr()[v]..adj.row_ptr()[v + 1];
        row.clear();
        row.extend(
            adj.col_idx()[r.clone()]
                .iter()
                .zip(&adj.edge_id()[r])
                .map(|(&s, &e)| (perm.forward[s as usize], e)),
        );
        row.sort_unstable_by_key(|&(s, _)| s);
        for &(s, e) in &row {
            col_idx.push(s);
            edge_id.push(e);
        }
    }
    let relabeled = SparseAdjacency::from_parts_unchecked(
        adj.num_src(),
        adj.num_dst(),
        adj.row_ptr().to_vec(),
        col_idx,
        edge_id,
        adj.edge_value().map(<[f32]>::to_vec),
    );
    (relabeled, perm)
}
