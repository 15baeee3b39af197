#![allow(dead_code)]

use hihgnn::graph::{
    build_relation_graph, gen_synthetic, Csc, DatasetShape, HetGraph, RelationType, SemanticGraph,
    SyntheticSpec, VertexType,
};
use hihgnn::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> FeatureMatrix {
    let data = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
    FeatureMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// A semantic graph over `n_src` sources and `n_dst` targets with the given
/// `(src, dst)` edges.
pub fn bipartite(n_src: usize, n_dst: usize, edges: &[(u32, u32)]) -> SemanticGraph {
    let g = HetGraph::new(
        vec![
            VertexType { name: "S".into(), count: n_src, feature_dim: 0 },
            VertexType { name: "D".into(), count: n_dst, feature_dim: 0 },
        ],
        vec![RelationType { name: "SD".into(), src: 0, dst: 1 }],
        vec![Csc::from_edges(n_src, n_dst, edges).unwrap()],
        vec![None, None],
        vec![],
    )
    .unwrap();
    build_relation_graph(&g, 0).unwrap()
}

pub fn random_edges(r: &mut impl Rng, n_src: usize, n_dst: usize, p: f64) -> Vec<(u32, u32)> {
    let mut e = Vec::new();
    for v in 0..n_dst {
        for u in 0..n_src {
            if r.random::<f64>() < p {
                e.push((u as u32, v as u32));
            }
        }
    }
    e
}

/// The reduced DBLP-shaped graph used by the whole-model suites.
pub fn dblp_small(seed: u64) -> HetGraph {
    gen_synthetic(&DatasetShape::Dblp.spec(0.05, 0.02, seed)).unwrap()
}

pub fn random_small(seed: u64) -> HetGraph {
    gen_synthetic(&SyntheticSpec::random_small(seed, 400)).unwrap()
}

pub fn assert_close(a: f64, b: f64, tol: f64) {
    let d = (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
    assert!(d <= tol || (a - b).abs() <= tol * 1e-3, "{a} vs {b} (rel {d})");
}
