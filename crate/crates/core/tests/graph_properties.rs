mod common;

use std::collections::BTreeSet;

use common::random_graph;
use proptest::prelude::*;
use spgnn::graph::{
    gen_skewed, gen_uniform, hilbert_order, hybrid_reorder, io, partition_1d, SparseAdjacency,
};

fn graph_strategy() -> impl Strategy<Value = SparseAdjacency> {
    (1usize..64, 1usize..64, 0.0f64..8.0, any::<bool>(), any::<u64>())
        .prop_map(|(s, d, deg, w, seed)| random_graph(s, d, deg, w, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csr_coo_round_trip(g in graph_strategy()) {
        let coo = g.to_coo();
        let again = SparseAdjacency::from_coo(
            g.num_src(), g.num_dst(), &coo, g.edge_value(),
        ).unwrap();
        prop_assert_eq!(&again, &g);
        for v in 0..g.num_dst() {
            let row = g.in_neighbors(v);
            prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
        let mut ids: Vec<u32> = g.edge_id().to_vec();
        ids.sort_unstable();
        prop_assert!(ids.iter().enumerate().all(|(i, &e)| i == e as usize));
    }

    #[test]
    fn partitions_concatenate_to_parent(g in graph_strategy(), p in 1usize..16) {
        let p = p.min(g.num_src());
        let plan = partition_1d(&g, p).unwrap();
        prop_assert_eq!(plan.boundaries[0], 0);
        prop_assert_eq!(*plan.boundaries.last().unwrap(), g.num_src());
        let total: usize = plan.slices.iter().map(|s| s.nnz()).sum();
        prop_assert_eq!(total, g.nnz());
        let mut seen = BTreeSet::new();
        for (k, slice) in plan.slices.iter().enumerate() {
            let seg = plan.boundaries[k]..plan.boundaries[k + 1];
            for v in 0..g.num_dst() {
                let (us, es) = slice.row(v);
                for (&u, &e) in us.iter().zip(es) {
                    prop_assert!(seg.contains(&(u as usize)));
                    prop_assert!(seen.insert((v as u32, u, e)));
                }
            }
        }
        let parent: BTreeSet<(u32, u32, u32)> = (0..g.num_dst())
            .flat_map(|v| {
                let r = g.row_ptr()[v]..g.row_ptr()[v + 1];
                g.col_idx()[r.clone()].iter().zip(&g.edge_id()[r])
                    .map(move |(&u, &e)| (v as u32, u, e)).collect::<Vec<_>>()
            })
            .collect();
        prop_assert_eq!(seen, parent);
    }

    #[test]
    fn hybrid_reorder_is_an_isomorphism(g in graph_strategy(), t in 0usize..10) {
        let (r, perm) = hybrid_reorder(&g, t);
        let mut d0 = g.out_degrees();
        let mut d1 = r.out_degrees();
        let degrees = g.out_degrees();
        for (new, &old) in perm.backward.iter().enumerate() {
            prop_assert_eq!(degrees[old as usize], d1[new]);
            prop_assert_eq!(perm.forward[old as usize] as usize, new);
            prop_assert_eq!(new < perm.threshold_split, degrees[old as usize] >= t);
        }
        d0.sort_unstable();
        d1.sort_unstable();
        prop_assert_eq!(d0, d1);
        // Relabel back and compare edge sets including edge ids.
        let back: Vec<(u32, u32)> = r.to_coo().into_iter()
            .map(|(u, v)| (perm.backward[u as usize], v)).collect();
        prop_assert_eq!(back, g.to_coo());
        prop_assert_eq!(r.edge_value(), g.edge_value());
    }

    #[test]
    fn hilbert_order_is_a_deterministic_permutation(g in graph_strategy()) {
        let a = hilbert_order(&g);
        let b = hilbert_order(&g);
        prop_assert_eq!(&a, &b);
        let mut sorted = a.order.clone();
        sorted.sort_unstable();
        prop_assert!(sorted.iter().enumerate().all(|(i, &p)| i == p as usize));
    }
}

#[test]
fn round_trip_on_generated_graphs_up_to_512() {
    for (n, deg, seed) in [(512, 8, 1), (300, 0, 2), (17, 17, 3), (512, 32, 4)] {
        let g = gen_uniform(n, deg, seed).unwrap();
        let again = SparseAdjacency::from_coo(n, n, &g.to_coo(), None).unwrap();
        assert_eq!(again, g);
    }
}

#[test]
fn hundred_random_edges_match_sort_reference() {
    let g = random_graph(40, 40, 2.5, false, 11);
    assert_eq!(g.nnz(), 100);
    let mut reference = g.to_coo();
    reference.sort_unstable_by_key(|&(u, v)| (v, u));
    let csr: Vec<(u32, u32)> = (0..g.num_dst())
        .flat_map(|v| g.in_neighbors(v).iter().map(move |&u| (u, v as u32)))
        .collect();
    assert_eq!(csr, reference);
}

#[test]
fn text_and_binary_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = random_graph(60, 50, 20.0, true, 5);
    assert_eq!(g.nnz(), 1000);
    let text = dir.path().join("g.txt");
    io::save_edge_list(&g, &text).unwrap();
    assert_eq!(io::load_edge_list(&text).unwrap(), g);
    let bin = dir.path().join("g.fgk");
    io::save_binary(&g, &bin).unwrap();
    assert_eq!(io::load_binary(&bin).unwrap(), g);
    assert_eq!(io::load_graph(&bin).unwrap(), g);
    assert_eq!(io::load_graph(&text).unwrap(), g);
    let bytes = std::fs::read(&bin).unwrap();
    io::save_binary(&io::load_binary(&bin).unwrap(), &bin).unwrap();
    assert_eq!(std::fs::read(&bin).unwrap(), bytes);
}

#[test]
fn text_file_matches_from_coo() {
    let g = io::parse_edge_list("2 2\n0 1\n".as_bytes()).unwrap();
    assert_eq!(g, SparseAdjacency::from_coo(2, 2, &[(0, 1)], None).unwrap());
}

#[test]
fn skewed_edge_count_is_exact() {
    for (a, b, c, d) in [(10, 4, 90, 2), (0, 0, 4, 1), (5, 11, 7, 3), (3, 0, 3, 0)] {
        let g = gen_skewed(a, b, c, d, 9).unwrap();
        assert_eq!(g.nnz(), a * b + c * d);
        assert_eq!(g.num_src(), a + c);
    }
    assert_eq!(gen_skewed(10, 4, 90, 2, 7).unwrap(), gen_skewed(10, 4, 90, 2, 7).unwrap());
    let tiny = gen_skewed(0, 0, 4, 1, 3).unwrap();
    assert!((0..4).all(|v| tiny.in_degree(v) == 1));
}

#[test]
fn uniform_rows_have_exact_degree() {
    assert_eq!(gen_uniform(100, 0, 1).unwrap().nnz(), 0);
    let g = gen_uniform(100, 5, 1).unwrap();
    assert_eq!(g.nnz(), 500);
    assert!((0..100).all(|v| g.in_degree(v) == 5));
}

#[test]
fn hybrid_threshold_on_skewed_graph() {
    // Skewed generation fixes in-degrees; the hybrid threshold reads source
    // out-degree, so the 10 heavy vertices are sources of the transpose.
    let g = gen_skewed(10, 50, 90, 2, 4).unwrap().transpose();
    let (_, perm) = hybrid_reorder(&g, 25);
    assert_eq!(perm.threshold_split, 10);
    let degrees = g.out_degrees();
    let heavy: Vec<u32> = (0..100).filter(|&u| degrees[u as usize] >= 25).collect();
    assert_eq!(perm.backward[..10], heavy[..]);
}

/// Textbook d2xy, independent of the engine's xy2d.
fn d2xy(side: u64, d: u64) -> (u64, u64) {
    let (mut x, mut y, mut t) = (0, 0, d);
    let mut s = 1;
    while s < side {
        let rx = 1 & (t / 2);
        let ry = 1 & (t ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    (x, y)
}

#[test]
fn all_ones_2x2_follows_first_order_curve() {
    let g = SparseAdjacency::from_coo(2, 2, &[(0, 0), (1, 0), (0, 1), (1, 1)], None).unwrap();
    let order = hilbert_order(&g).order;
    let rows = g.row_of_positions();
    let visited: Vec<(u64, u64)> = order
        .iter()
        .map(|&p| (rows[p as usize] as u64, g.col_idx()[p as usize] as u64))
        .collect();
    let expected: Vec<(u64, u64)> = (0..4).map(|d| d2xy(2, d)).collect();
    assert_eq!(visited, expected);
    assert_eq!(expected, vec![(0, 0), (0, 1), (1, 1), (1, 0)]);
}

#[test]
fn larger_grid_matches_textbook_curve() {
    let n = 8u32;
    let edges: Vec<(u32, u32)> = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).collect();
    let g = SparseAdjacency::from_coo(8, 8, &edges, None).unwrap();
    let rows = g.row_of_positions();
    let visited: Vec<(u64, u64)> = hilbert_order(&g)
        .order
        .iter()
        .map(|&p| (rows[p as usize] as u64, g.col_idx()[p as usize] as u64))
        .collect();
    let expected: Vec<(u64, u64)> = (0..64).map(|d| d2xy(8, d)).collect();
    assert_eq!(visited, expected);
}
