mod common;

use std::collections::HashMap;

use common::*;
use hihgnn::fusion::*;
use hihgnn::graph::{build_metapath_graph, parse_hetgraph, HetGraph, SemanticGraph};
use hihgnn::model::*;
use hihgnn::schedule::{build_hypergraph, random_order, shortest_hamilton_path, ExecutionOrder};
use proptest::prelude::*;
use rand::Rng;

const TOY: &str = "vtypes\nA 2 3\nP 1 2\nrelations\nAP A P\nPA P A\n\
    edges AP\n0 0\n1 0\nedges PA\n0 0\n0 1\n\
    features A\n1 0 -1\n0.5 2 0\nfeatures P\n0.25 -4\nmetapaths\nAPA AP PA\n";

fn setup(g: &HetGraph, kind: ModelKind, seed: u64) -> (Vec<SemanticGraph>, ModelParams) {
    let sgs = default_semantic_graphs(g, kind).unwrap();
    let p = ModelParams::generate(kind, g, &sgs, seed).unwrap();
    (sgs, p)
}

fn compare(g: &HetGraph, sgs: &[SemanticGraph], p: &ModelParams, order: &ExecutionOrder, cfg: &EngineConfig) -> f64 {
    let oracle = run_oracle(g, sgs, p).unwrap();
    let fused = run_fused(g, sgs, order, p, cfg).unwrap();
    fused.result.max_relative_error(&oracle).unwrap()
}

fn identity_order(sgs: &[SemanticGraph]) -> ExecutionOrder {
    ExecutionOrder { ids: sgs.iter().map(|s| s.id.clone()).collect(), cost: 0.0 }
}

#[test]
fn single_edge_event_counts() {
    let text = "vtypes\nA 1 2\nP 1 2\nrelations\nAP A P\nedges AP\n0 0\n\
        features A\n1 2\nfeatures P\n3 4\nmetapaths\nAP AP\n";
    let g = parse_hetgraph(text).unwrap();
    let (sgs, p) = setup(&g, ModelKind::Han, 1);
    let run = run_fused(&g, &sgs, &identity_order(&sgs), &p, &EngineConfig::default()).unwrap();
    let t = &run.trace;
    assert_eq!(
        [Stage::FP, Stage::Theta, Stage::NA, Stage::LSF, Stage::GSF, Stage::Final].map(|s| t.count(s)),
        [2, 2, 1, 1, 1, 1]
    );
    let oracle = run_oracle(&g, &sgs, &p).unwrap();
    assert!(run.result.max_relative_error(&oracle).unwrap() <= 1e-12);
    assert_eq!(run.result.beta["AP"], 1.0);
}

#[test]
fn toy_apa_matches_oracle() {
    let g = parse_hetgraph(TOY).unwrap();
    for kind in ModelKind::ALL {
        let (sgs, p) = setup(&g, kind, 3);
        for lanes in [1, 2, 4] {
            let cfg = EngineConfig { num_lanes: lanes, threshold: 1, ..Default::default() };
            let err = compare(&g, &sgs, &p, &identity_order(&sgs), &cfg);
            assert!(err <= 1e-9, "{kind} lanes {lanes}: {err}");
        }
    }
}

#[test]
fn random_graphs_all_models_lanes_orders_match_oracle() {
    for seed in 0..5 {
        let g = random_small(seed);
        for kind in ModelKind::ALL {
            let (sgs, p) = setup(&g, kind, seed);
            let h = build_hypergraph(&sgs).unwrap();
            for (lanes, thr, balance, rab) in [(1, 256, true, true), (3, 7, true, true), (4, 5, false, true), (2, 3, true, false)] {
                for order in [shortest_hamilton_path(&h), random_order(&h, seed + 100)] {
                    let cfg = EngineConfig { num_lanes: lanes, threshold: thr, balance, rab, ..Default::default() };
                    let err = compare(&g, &sgs, &p, &order, &cfg);
                    assert!(err <= 1e-9, "seed {seed} {kind} lanes {lanes}: {err}");
                }
            }
        }
    }
}

#[test]
fn dblp_shaped_han_matches_oracle() {
    let g = dblp_small(2);
    let (sgs, p) = setup(&g, ModelKind::Han, 2);
    assert_eq!(sgs.len(), 3);
    let order = shortest_hamilton_path(&build_hypergraph(&sgs).unwrap());
    let err = compare(&g, &sgs, &p, &order, &EngineConfig::default());
    assert!(err <= 1e-9, "{err}");
}

/// Projection events per `(layer, key, vertex)` and attention events per
/// `(layer, graph, vertex)` read straight from the trace.
fn reuse_violations(trace: &EventTrace) -> (usize, usize) {
    let mut fp: HashMap<(u32, ProjectionKey, u32), usize> = HashMap::new();
    let mut th: HashMap<(u32, u32, u32, Role), usize> = HashMap::new();
    for e in &trace.events {
        match e.stage {
            Stage::FP => *fp.entry((e.layer, e.key.unwrap(), e.vertex.unwrap())).or_default() += 1,
            Stage::Theta => {
                *th.entry((e.layer, e.sg.unwrap(), e.vertex.unwrap(), e.role.unwrap())).or_default() += 1
            }
            _ => {}
        }
    }
    let mut per_vertex: HashMap<(u32, u32, u32), usize> = HashMap::new();
    for ((l, sg, v, _), n) in &th {
        *per_vertex.entry((*l, *sg, *v)).or_default() += n;
    }
    (
        fp.values().filter(|&&n| n != 1).count(),
        th.values().filter(|&&n| n != 1).count() + per_vertex.values().filter(|&&n| n > 2).count(),
    )
}

#[test]
fn rab_projects_each_vertex_once_per_scope() {
    for seed in 0..3 {
        let g = random_small(seed);
        for kind in ModelKind::ALL {
            let (sgs, p) = setup(&g, kind, seed);
            let cfg = EngineConfig { num_lanes: 2, threshold: 4, ..Default::default() };
            let run = run_fused(&g, &sgs, &identity_order(&sgs), &p, &cfg).unwrap();
            assert_eq!(reuse_violations(&run.trace), (0, 0), "seed {seed} {kind}");
        }
    }
}

#[test]
fn rab_off_projects_per_edge() {
    let g = random_small(1);
    let (sgs, p) = setup(&g, ModelKind::Han, 1);
    let cfg = EngineConfig { rab: false, ..Default::default() };
    let run = run_fused(&g, &sgs, &identity_order(&sgs), &p, &cfg).unwrap();
    let edges: usize = sgs.iter().map(|s| s.num_edges()).sum();
    assert_eq!(run.trace.count(Stage::FP), 2 * edges);
    assert_eq!(run.trace.count(Stage::Defer), 0);
    let on = run_fused(&g, &sgs, &identity_order(&sgs), &p, &EngineConfig::default()).unwrap();
    assert!(on.trace.count(Stage::FP) < run.trace.count(Stage::FP));
}

#[test]
fn reuse_outcomes_follow_bitmap_codes() {
    // Two edges into P0 from A0 and A1, then a second graph over the same
    // types: its edges find every vertex projected.
    let text = "vtypes\nA 2 2\nP 1 2\nrelations\nAP A P\nPA P A\nedges AP\n0 0\n1 0\nedges PA\n0 0\n0 1\n\
        features A\n1 2\n3 4\nfeatures P\n5 6\nmetapaths\nAPx AP\nAPy AP\n";
    let g = parse_hetgraph(text).unwrap();
    let sgs: Vec<SemanticGraph> =
        g.metapaths().iter().map(|m| build_metapath_graph(&g, m).unwrap()).collect();
    let p = ModelParams::generate(ModelKind::Han, &g, &sgs, 4).unwrap();
    let cfg = EngineConfig { num_lanes: 1, ..Default::default() };
    let run = run_fused(&g, &sgs, &identity_order(&sgs), &p, &cfg).unwrap();
    let na: Vec<(u32, Reuse)> = run
        .trace
        .events
        .iter()
        .filter(|e| e.stage == Stage::NA)
        .map(|e| (e.sg.unwrap(), e.reuse.unwrap()))
        .collect();
    // First graph: code 000 everywhere, both edges deferred.
    assert_eq!(na[..2], [(0, Reuse::Miss), (0, Reuse::Miss)]);
    // Second graph: projected but no attention yet (100) on the first edge;
    // the second edge reuses the target half computed by the first.
    assert_eq!(na[2..], [(1, Reuse::FpHit), (1, Reuse::FpHit)]);
    assert_eq!(run.trace.count(Stage::Defer), 2);
    assert_eq!(run.trace.count(Stage::FP), 3);
}

#[test]
fn rab_codes_reachable_only() {
    let mut rab = Rab::new();
    let k = ProjectionKey::Type(0);
    rab.activate(0, 3, 3);
    let code = |rab: &Rab| rab.code(0, 1, Some(k), Some(k));
    assert_eq!(code(&rab).to_string(), "000");
    rab.set_projected(k, 1, 3);
    assert_eq!(code(&rab).to_string(), "100");
    rab.set_theta(0, Role::Src, k, 1);
    assert_eq!(code(&rab).to_string(), "110");
    rab.set_theta(0, Role::Dst, k, 1);
    assert_eq!(code(&rab).to_string(), "111");
    rab.retire(0);
    assert_eq!(code(&rab).to_string(), "100");
    for c in 0..8u8 {
        assert_eq!(RabCode(c).is_reachable(), [0, 4, 5, 6, 7].contains(&c));
    }
}

#[test]
#[should_panic(expected = "attention before projection")]
fn attention_bit_requires_projection() {
    let mut rab = Rab::new();
    rab.activate(0, 2, 2);
    rab.set_theta(0, Role::Dst, ProjectionKey::Type(0), 0);
}

#[test]
fn trace_closes_and_roundtrips() {
    let g = random_small(7);
    let (sgs, p) = setup(&g, ModelKind::Rgat, 7);
    let run = run_fused(&g, &sgs, &identity_order(&sgs), &p, &EngineConfig::default()).unwrap();
    run.trace.check_closure().unwrap();
    let edges: usize = sgs.iter().map(|s| s.num_edges()).sum();
    assert_eq!(run.trace.count(Stage::NA), edges * p.num_layers);
    let mut buf = Vec::new();
    run.trace.write_ndjson(&mut buf).unwrap();
    let back = EventTrace::read_ndjson(buf.as_slice()).unwrap();
    assert_eq!(back, run.trace);
    let mut broken = run.trace.clone();
    let i = broken.events.iter().position(|e| e.stage == Stage::NA).unwrap();
    broken.events.remove(i);
    assert!(broken.check_closure().is_err());
}

#[test]
fn incomplete_order_rejected() {
    let g = random_small(2);
    let (sgs, p) = setup(&g, ModelKind::Han, 2);
    let mut order = identity_order(&sgs);
    order.ids.pop();
    assert!(matches!(
        run_fused(&g, &sgs, &order, &p, &EngineConfig::default()),
        Err(hihgnn::Error::InvalidOrder(_))
    ));
}

#[test]
fn single_precision_stays_close() {
    let g = random_small(5);
    let (sgs, p) = setup(&g, ModelKind::Han, 5);
    let cfg = EngineConfig { precision: Precision::F32, ..Default::default() };
    let err = compare(&g, &sgs, &p, &identity_order(&sgs), &cfg);
    assert!(err > 0.0 && err < 1e-3, "{err}");
}

#[test]
fn split_lanes_merge_to_single_lane_result() {
    let g = random_small(9);
    let (sgs, p) = setup(&g, ModelKind::Han, 9);
    let one = run_fused(&g, &sgs, &identity_order(&sgs), &p, &EngineConfig { num_lanes: 1, threshold: 3, ..Default::default() })
        .unwrap();
    let many = run_fused(&g, &sgs, &identity_order(&sgs), &p, &EngineConfig { num_lanes: 4, threshold: 3, ..Default::default() })
        .unwrap();
    assert!(many.trace.count(Stage::Sync) > 0);
    assert_eq!(one.trace.count(Stage::Sync), 0);
    assert!(many.result.max_relative_error(&one.result).unwrap() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_order_does_not_change_embeddings(seed in any::<u64>(), lanes in 1usize..5, thr in 1usize..9) {
        let g = random_small(seed % 16);
        let (sgs, p) = setup(&g, ModelKind::Han, seed);
        let h = build_hypergraph(&sgs).unwrap();
        let a = run_fused(&g, &sgs, &random_order(&h, seed), &p, &EngineConfig { num_lanes: lanes, threshold: thr, ..Default::default() }).unwrap();
        let b = run_fused(&g, &sgs, &random_order(&h, seed ^ 1), &p, &EngineConfig { num_lanes: 1, threshold: 256, ..Default::default() }).unwrap();
        prop_assert!(a.result.max_relative_error(&b.result).unwrap() <= 1e-9);
    }

    #[test]
    fn decomposed_softmax_identity(seed in any::<u64>(), n in 1usize..20) {
        let mut r = rng(seed);
        let theta: Vec<f64> = (0..n).map(|_| r.random_range(-60.0..60.0)).collect();
        let h = random_matrix(&mut r, n, 4);
        let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = theta.iter().map(|t| (t - m).exp()).sum();
        let mut num = [0.0; 4];
        let mut den = 0.0;
        let mut direct = [0.0; 4];
        for u in 0..n {
            let e = theta[u].exp();
            den += e;
            for c in 0..4 {
                num[c] += e * h.get(u, c);
                direct[c] += (theta[u] - m).exp() / s * h.get(u, c);
            }
        }
        for c in 0..4 {
            let d = num[c] / den;
            prop_assert!((d - direct[c]).abs() <= 1e-12 * d.abs().max(direct[c].abs()).max(1e-300) + 1e-300);
        }
    }
}
