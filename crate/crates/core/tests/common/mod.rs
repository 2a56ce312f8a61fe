#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spgnn::SparseAdjacency;

/// Random graph with about `avg_deg` in-edges per destination, edges given to
/// the constructor in shuffled order so edge ids differ from CSR order.
pub fn random_graph(
    num_src: usize,
    num_dst: usize,
    avg_deg: f64,
    weighted: bool,
    seed: u64,
) -> SparseAdjacency {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = num_src * num_dst;
    let target = ((avg_deg * num_dst as f64).round() as usize).min(cells);
    let mut set = BTreeSet::new();
    if target * 2 > cells {
        let mut all: Vec<usize> = (0..cells).collect();
        all.shuffle(&mut rng);
        set.extend(all.into_iter().take(target));
    } else {
        while set.len() < target {
            set.insert(rng.gen_range(0..cells));
        }
    }
    let mut edges: Vec<(u32, u32)> = set
        .into_iter()
        .map(|c| ((c % num_src) as u32, (c / num_src) as u32))
        .collect();
    edges.shuffle(&mut rng);
    let values: Option<Vec<f32>> =
        weighted.then(|| (0..edges.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    SparseAdjacency::from_coo(num_src, num_dst, &edges, values.as_deref()).unwrap()
}

/// Sort-based reference: the edge set as sorted `(dst, src)` pairs.
pub fn sorted_edges(adj: &SparseAdjacency) -> Vec<(u32, u32)> {
    let mut e: Vec<(u32, u32)> = adj.to_coo().into_iter().map(|(u, v)| (v, u)).collect();
    e.sort_unstable();
    e
}

pub fn widen<T: spgnn::Scalar>(t: &spgnn::FeatureTensor<T>) -> Vec<f64> {
    t.data().iter().map(|x| x.as_f64()).collect()
}
