mod common;

use std::collections::{BTreeSet, HashMap};

use common::rng;
use hihgnn::schedule::*;
use itertools::Itertools;
use proptest::prelude::*;
use rand::Rng;

fn hyper(nodes: &[(&str, &[&str])]) -> SimilarityHypergraph {
    SimilarityHypergraph::from_type_sets(
        nodes
            .iter()
            .map(|(id, types)| (id.to_string(), types.iter().map(|t| t.to_string()).collect::<BTreeSet<_>>()))
            .collect(),
    )
    .unwrap()
}

/// Endpoint types of the five example graphs.
fn example() -> SimilarityHypergraph {
    hyper(&[
        ("AP", &["A", "P"]),
        ("PT", &["P", "T"]),
        ("PP", &["P"]),
        ("APA", &["A"]),
        ("AVA", &["A"]),
    ])
}

fn brute_force(h: &SimilarityHypergraph) -> (f64, Vec<String>) {
    let mut best: Option<(u64, Vec<String>)> = None;
    for perm in (0..h.len()).permutations(h.len()) {
        let c: u64 = perm
            .windows(2)
            .map(|w| u64::from(h.weight_numerator(w[0], w[1])))
            .sum();
        let ids: Vec<String> = perm.iter().map(|&i| h.nodes[i].clone()).collect();
        if best.as_ref().is_none_or(|(b, p)| c < *b || (c == *b && ids < *p)) {
            best = Some((c, ids));
        }
    }
    let (c, ids) = best.unwrap();
    (c as f64 / f64::from(h.denom), ids)
}

fn random_hypergraph(seed: u64, n: usize) -> SimilarityHypergraph {
    let mut r = rng(seed);
    let types = r.random_range(2..7u32);
    let nodes = (0..n)
        .map(|i| {
            let k = r.random_range(1..=2);
            let set: BTreeSet<u32> = (0..k).map(|_| r.random_range(0..types)).collect();
            (format!("g{i:02}"), set)
        })
        .collect();
    SimilarityHypergraph::from_type_sets(nodes).unwrap()
}

#[test]
fn example_order_is_optimal() {
    let h = example();
    assert!(h.shared.iter().all(|s| s.2 == 1));
    assert_eq!(h.denom, 6);
    let o = shortest_hamilton_path(&h);
    let expected: Vec<String> = ["APA", "AVA", "AP", "PP", "PT"].map(String::from).to_vec();
    assert_eq!(o.cost, path_cost(&h, &expected).unwrap());
    assert_eq!(o.ids, expected);
    assert!((o.cost - 20.0 / 6.0).abs() < 1e-12);
}

#[test]
fn hypergraph_edge_cases() {
    let h = hyper(&[("X", &["A"]), ("Y", &["B"])]);
    assert!(h.shared.is_empty());
    assert_eq!(h.weight(0, 1), 1.0);
    let h = hyper(&[("X", &["A", "B"]), ("Y", &["B", "A"])]);
    assert_eq!(h.weight(0, 1), 0.0);
    let aug = example().augmented();
    let n = aug.len() - 2;
    for i in 0..aug.len() {
        for j in 0..aug.len() {
            assert!((0.0..=1.0).contains(&aug[i][j]));
            if i >= n || j >= n {
                assert_eq!(aug[i][j], 0.0);
            }
        }
    }
    let single = hyper(&[("only", &["A"])]);
    assert_eq!(shortest_hamilton_path(&single).ids, vec!["only".to_string()]);
    assert!(SimilarityHypergraph::from_type_sets::<u32>(vec![]).is_err());
}

#[test]
fn dp_matches_factorial_search() {
    for seed in 0..100 {
        let n = 1 + (seed as usize % 8);
        let h = random_hypergraph(seed, n);
        let o = shortest_hamilton_path(&h);
        let (c, ids) = brute_force(&h);
        assert_eq!(o.cost, c, "seed {seed}");
        assert_eq!(o.ids, ids, "seed {seed}");
    }
}

#[test]
fn heuristic_beyond_exact_limit_is_a_permutation() {
    let h = random_hypergraph(3, EXACT_LIMIT + 4);
    let o = shortest_hamilton_path(&h);
    let mut ids = o.ids.clone();
    ids.sort();
    assert_eq!(ids, h.nodes);
    assert!((path_cost(&h, &o.ids).unwrap() - o.cost).abs() < 1e-12);
    // Never worse than the sorted order.
    assert!(o.cost <= path_cost(&h, &h.nodes).unwrap() + 1e-12);
}

#[test]
fn random_order_deterministic_and_uniform() {
    let h = example();
    assert_eq!(random_order(&h, 4), random_order(&h, 4));
    let one = hyper(&[("x", &["A"])]);
    assert_eq!(random_order(&one, 9).ids, vec!["x".to_string()]);

    let three = hyper(&[("a", &["A"]), ("b", &["A"]), ("c", &["B"])]);
    let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
    let draws = 10_000;
    for seed in 0..draws {
        *counts.entry(random_order(&three, seed).ids).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    let e = draws as f64 / 6.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 5 degrees of freedom, p = 0.001.
    assert!(chi2 < 20.52, "chi2 = {chi2}");
}

#[test]
fn figure_example_lane_assignment() {
    let p = balance_workloads(&[5, 2, 1], 4, 3, true);
    let first: Vec<usize> = p.rounds[0]
        .lanes
        .iter()
        .map(|l| l.iter().map(|x| x.len).sum())
        .collect();
    assert_eq!(first, vec![3, 2, 1, 2]);
    assert_eq!(p.rounds[0].lanes[3], vec![TaskRange { list: 0, start: 3, len: 2 }]);
    assert_eq!(p.rounds.len(), 1);
    p.check().unwrap();
}

#[test]
fn single_list_single_lane_passthrough() {
    let p = balance_workloads(&[10], 1, 3, true);
    assert_eq!(p.rounds.len(), 4);
    assert_eq!(p.lane_totals(), vec![10]);
    p.check().unwrap();
}

#[test]
fn dblp_loads_balance_within_one_percent() {
    let loads = [7_043_571, 5_000_496, 11_113];
    let p = balance_workloads(&loads, 4, 256, true);
    p.check().unwrap();
    let total: usize = loads.iter().sum();
    let bound = total.div_ceil(4);
    assert!((p.max_lane_total() as f64) <= 1.01 * bound as f64, "{} vs {bound}", p.max_lane_total());
    let unbalanced = balance_workloads(&loads, 4, 256, false);
    assert_eq!(unbalanced.max_lane_total(), loads[0]);
}

#[test]
fn plan_json_roundtrip() {
    let p = balance_workloads(&[7, 0, 3, 9], 2, 4, true);
    assert_eq!(LanePlan::from_json(&p.to_json().unwrap()).unwrap(), p);
    let o = shortest_hamilton_path(&example());
    assert_eq!(ExecutionOrder::from_json(&o.to_json().unwrap()).unwrap(), o);
}

#[test]
fn sync_merges_once() {
    let mut lanes: Vec<HashMap<u32, Partial>> = vec![HashMap::new(); 3];
    lanes[0].insert(7, Partial { num: vec![1.0, 2.0], den: 0.5 });
    lanes[2].insert(7, Partial { num: vec![3.0, -1.0], den: 0.25 });
    lanes[1].insert(8, Partial { num: vec![4.0, 4.0], den: 1.0 });
    let (m, from) = sync_partials(0, &mut lanes, &7).unwrap();
    assert_eq!(m, Partial { num: vec![4.0, 1.0], den: 0.75 });
    assert_eq!(from, vec![2]);
    assert!(sync_partials(0, &mut lanes, &7).is_err());
    let (m, from) = sync_partials(1, &mut lanes, &8).unwrap();
    assert_eq!((m.den, from.len()), (1.0, 0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn plans_conserve_and_respect_threshold(
        sizes in prop::collection::vec(0usize..60, 1..8),
        lanes in 1usize..6,
        threshold in 1usize..10,
        balance in any::<bool>(),
    ) {
        let p = balance_workloads(&sizes, lanes, threshold, balance);
        prop_assert!(p.check().is_ok(), "{:?}", p.check());
        prop_assert_eq!(p.lane_totals().iter().sum::<usize>(), sizes.iter().sum::<usize>());
    }
}
