mod common;

use common::{graph_of, random_edges, DenseGraph};
use nlcs_core::graph::clustering_coefficients;
use nlcs_core::{Graph, NormalizedAdjacency, TriangleSet, TriangleWeight};
use proptest::prelude::*;

#[test]
fn normalized_adjacency_matches_dense_formula() {
    for seed in 0..20 {
        let n = 5 + seed as usize * 2;
        let edges = random_edges(n, 0.3, true, seed);
        if edges.is_empty() {
            continue;
        }
        let s = NormalizedAdjacency::new(&graph_of(n, &edges)).to_dense();
        let dense = DenseGraph::new(n, &edges).normalized();
        assert!(common::max_abs_diff(&s, &dense) < 1e-14, "seed {seed}");
    }
}

#[test]
fn isolated_nodes_have_zero_rows() {
    let g = Graph::from_edges(&[(0, 1), (1, 2)], Some(5)).unwrap();
    let s = NormalizedAdjacency::new(&g);
    for i in 3..5 {
        assert!(s.row(i).next().is_none());
    }
    assert_eq!(g.degrees()[4], 0.0);
}

#[test]
fn duplicates_are_summed_and_self_loops_counted() {
    let g = Graph::from_edges(&[(0, 1, 1.0), (1, 0, 2.0), (2, 2, 1.0), (1, 2, 0.5)], None).unwrap();
    assert_eq!(g.edge_weight(0, 1), Some(3.0));
    assert_eq!(g.edge_weight(1, 0), Some(3.0));
    assert_eq!(g.self_loops_dropped(), 1);
    assert_eq!(g.num_edges(), 2);
    assert_eq!(g.degrees(), &[3.0, 3.5, 0.5]);
}

#[test]
fn rejects_bad_input() {
    let none: [(usize, usize); 0] = [];
    assert!(Graph::from_edges(&none, None).is_err());
    assert!(Graph::from_edges(&[(0, 1, -1.0)], None).is_err());
    assert!(Graph::from_edges(&[(0, 1, f64::NAN)], None).is_err());
    assert!(Graph::from_edges(&[(0, 7)], Some(3)).is_err());
}

#[test]
fn complete_graph_triangle_counts() {
    for n in 3..9usize {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        let g = Graph::from_edges(&edges, None).unwrap();
        let tri = TriangleSet::enumerate(&g, TriangleWeight::default());
        assert_eq!(tri.len(), n * (n - 1) * (n - 2) / 6);
        // each node sits in C(n-1, 2) triangles, each contributing 2
        let per_node = ((n - 1) * (n - 2)) as f64;
        assert!(tri.hyperdegrees().iter().all(|&d| d == per_node));
        assert!(clustering_coefficients(&g, &tri).iter().all(|&c| c == 1.0));
    }
}

#[test]
fn triangle_free_graphs() {
    // a 6-cycle and a star
    let cycle: Vec<(usize, usize)> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
    let star: Vec<(usize, usize)> = (1..6).map(|i| (0, i)).collect();
    for edges in [cycle, star] {
        let g = Graph::from_edges(&edges, None).unwrap();
        let tri = TriangleSet::enumerate(&g, TriangleWeight::default());
        assert!(tri.is_empty());
        assert!(tri.hyperdegrees().iter().all(|&d| d == 0.0));
    }
}

#[test]
fn triangle_weight_rules() {
    let g = Graph::from_edges(&[(0, 1, 1.0), (1, 2, 8.0), (0, 2, 1.0)], None).unwrap();
    let w = |rule| TriangleSet::enumerate(&g, rule).weights()[0];
    assert_eq!(w(TriangleWeight::Unit), 1.0);
    assert!((w(TriangleWeight::GeometricMean) - 2.0).abs() < 1e-15);
    assert_eq!(w(TriangleWeight::Minimum), 1.0);
}

#[test]
fn explicit_triangle_list_is_order_independent() {
    let edges = random_edges(20, 0.4, true, 5);
    let g = graph_of(20, &edges);
    let found = TriangleSet::enumerate(&g, TriangleWeight::GeometricMean);
    let mut list: Vec<([usize; 3], f64)> = found
        .triangles()
        .iter()
        .zip(found.weights())
        .map(|(&[a, b, c], &w)| ([c, a, b], w))
        .collect();
    list.reverse();
    let rebuilt = TriangleSet::from_triangles(&g, &list).unwrap();
    assert_eq!(rebuilt, found);

    assert!(TriangleSet::from_triangles(&g, &[([0, 0, 1], 1.0)]).is_err());
}

#[test]
fn clustering_matches_brute_force() {
    for seed in 0..10 {
        let edges = random_edges(30, 0.2, false, 100 + seed);
        let g = graph_of(30, &edges);
        let tri = TriangleSet::enumerate(&g, TriangleWeight::default());
        let fast = clustering_coefficients(&g, &tri);
        let slow = DenseGraph::new(30, &edges).clustering();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangles_equal_triple_scan(n in 3usize..40, p in 0.05f64..0.9, seed in 0u64..1_000) {
        let edges = random_edges(n, p, false, seed);
        prop_assume!(!edges.is_empty());
        let g = graph_of(n, &edges);
        let tri = TriangleSet::enumerate(&g, TriangleWeight::default());
        let brute = DenseGraph::new(n, &edges).triangles();
        prop_assert_eq!(tri.triangles(), brute.as_slice());
    }

    #[test]
    fn tensor_masses_match_dense_tensor(n in 3usize..18, p in 0.2f64..0.9, seed in 0u64..1_000) {
        let edges = random_edges(n, p, true, seed);
        prop_assume!(!edges.is_empty());
        let g = graph_of(n, &edges);
        let tri = TriangleSet::enumerate(&g, TriangleWeight::GeometricMean);
        let dense = DenseGraph::new(n, &edges).tensor();
        for i in 0..n {
            prop_assert!((tri.hyperdegrees()[i] - dense.hyperdegree(i)).abs() < 1e-12);
            for j in 0..n {
                prop_assert!((tri.codegree(i, j) - dense.codegree(i, j)).abs() < 1e-12);
            }
        }
        let total: f64 = tri.weights().iter().sum();
        let delta: f64 = tri.hyperdegrees().iter().sum();
        let b: f64 = (0..n).flat_map(|i| tri.codegree_row(i).map(|(_, v)| v).collect::<Vec<_>>()).sum();
        prop_assert!((delta - 6.0 * total).abs() < 1e-9 * (1.0 + total));
        prop_assert!((b - 6.0 * total).abs() < 1e-9 * (1.0 + total));
    }

    #[test]
    fn triangles_survive_relabeling(n in 4usize..30, p in 0.1f64..0.8, seed in 0u64..1_000) {
        let edges = random_edges(n, p, false, seed);
        prop_assume!(!edges.is_empty());
        // reverse the node ids
        let flip = |v: usize| n - 1 - v;
        let flipped: Vec<(usize, usize, f64)> = edges.iter().map(|&(a, b, w)| (flip(a), flip(b), w)).collect();
        let a = TriangleSet::enumerate(&graph_of(n, &edges), TriangleWeight::default());
        let b = TriangleSet::enumerate(&graph_of(n, &flipped), TriangleWeight::default());
        let mut mapped: Vec<[usize; 3]> = b.triangles().iter().map(|t| {
            let mut m = t.map(flip);
            m.sort_unstable();
            m
        }).collect();
        mapped.sort_unstable();
        prop_assert_eq!(a.triangles(), mapped.as_slice());
    }
}
