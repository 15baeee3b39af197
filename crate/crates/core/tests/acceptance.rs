//! One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use hihgnn::fusion::*;
use hihgnn::graph::{gen_synthetic, DatasetShape, HetGraph, SyntheticSpec};
use hihgnn::model::*;
use hihgnn::perf::{replay, HardwareConfig, Mode};
use hihgnn::schedule::*;
use itertools::Itertools;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The five seeded synthetic graphs plus the DBLP-shaped one.
fn suite() -> Vec<(String, HetGraph)> {
    let mut v: Vec<(String, HetGraph)> = (0..5u64)
        .map(|s| {
            let spec = match s % 3 {
                0 => DatasetShape::Imdb.spec(0.2, 0.02, s),
                1 => DatasetShape::Acm.spec(0.11, 0.02, s),
                _ => SyntheticSpec::random_small(s, 2000),
            };
            (format!("synthetic-{s}"), gen_synthetic(&spec).unwrap())
        })
        .collect();
    v.push(("dblp".into(), dblp_small(7)));
    v
}

fn similarity(sgs: &[hihgnn::graph::SemanticGraph]) -> ExecutionOrder {
    shortest_hamilton_path(&build_hypergraph(sgs).unwrap())
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let mut cases = 0;
    let mut max_edges = 0;
    for (name, g) in suite() {
        for kind in ModelKind::ALL {
            let t = Instant::now();
            let sgs = default_semantic_graphs(&g, kind).unwrap();
            let edges: usize = sgs.iter().map(|s| s.num_edges()).sum();
            if name != "dblp" {
                ensure(edges <= 50_000, || format!("{name} has {edges} edges"))?;
                max_edges = max_edges.max(edges);
            }
            let p = ModelParams::generate(kind, &g, &sgs, 17).unwrap();
            let oracle = run_oracle(&g, &sgs, &p).unwrap();
            let fused = run_fused(&g, &sgs, &similarity(&sgs), &p, &EngineConfig::default()).unwrap();
            let err = fused.result.max_relative_error(&oracle).unwrap();
            ensure(err <= 1e-9, || format!("{name} {kind}: error {err:e}"))?;
            worst = worst.max(err);
            slowest = slowest.max(t.elapsed());
            cases += 1;
        }
    }
    ensure(slowest <= Duration::from_secs(60), || format!("slowest case {slowest:?}"))?;
    Ok(format!(
        "{cases} cases, synthetic graphs up to {max_edges} edges, max error {worst:.2e}, slowest {:.2}s",
        slowest.as_secs_f64()
    ))
}

fn random_hypergraph(seed: u64, n: usize) -> SimilarityHypergraph {
    let mut r = rng(seed);
    let types = r.random_range(2..7u32);
    let nodes = (0..n)
        .map(|i| {
            let k = r.random_range(1..=3);
            let set: BTreeSet<u32> = (0..k).map(|_| r.random_range(0..types)).collect();
            (format!("g{i}"), set)
        })
        .collect();
    SimilarityHypergraph::from_type_sets(nodes).unwrap()
}

fn hamilton_scheduling() -> Outcome {
    let t = Instant::now();
    for seed in 0..100u64 {
        let h = random_hypergraph(seed, 1 + seed as usize % 8);
        let best = (0..h.len())
            .permutations(h.len())
            .map(|p| p.windows(2).map(|w| h.weight_numerator(w[0], w[1])).sum::<u32>())
            .min()
            .unwrap();
        let o = shortest_hamilton_path(&h);
        let got: u32 = o
            .positions(&h.nodes)
            .unwrap()
            .windows(2)
            .map(|w| h.weight_numerator(w[0], w[1]))
            .sum();
        ensure(got == best, || format!("seed {seed}: {got} vs optimum {best}"))?;
    }
    let set = |ts: &[&str]| ts.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let h = SimilarityHypergraph::from_type_sets(vec![
        ("AP".into(), set(&["A", "P"])),
        ("PT".into(), set(&["P", "T"])),
        ("PP".into(), set(&["P"])),
        ("APA".into(), set(&["A"])),
        ("AVA".into(), set(&["A"])),
    ])
    .unwrap();
    let o = shortest_hamilton_path(&h);
    let reference: Vec<String> = ["APA", "AVA", "AP", "PP", "PT"].map(String::from).to_vec();
    let want = path_cost(&h, &reference).unwrap();
    ensure(o.cost == want, || format!("example cost {} vs {want}", o.cost))?;
    let secs = t.elapsed().as_secs_f64();
    ensure(secs <= 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!("100 instances exact, example order {} cost {:.4}, {secs:.2}s", o.ids.join("-"), o.cost))
}

fn rab_dedup() -> Outcome {
    let mut violations = 0;
    let mut fp_events = 0;
    for (_, g) in suite() {
        for kind in ModelKind::ALL {
            let sgs = default_semantic_graphs(&g, kind).unwrap();
            let p = ModelParams::generate(kind, &g, &sgs, 3).unwrap();
            let run = run_fused(&g, &sgs, &similarity(&sgs), &p, &EngineConfig::default()).unwrap();
            let mut fp: HashMap<(u32, ProjectionKey, u32), usize> = HashMap::new();
            let mut th: HashMap<(u32, u32, u32), usize> = HashMap::new();
            for e in &run.trace.events {
                match e.stage {
                    Stage::FP => *fp.entry((e.layer, e.key.unwrap(), e.vertex.unwrap())).or_default() += 1,
                    Stage::Theta => *th.entry((e.layer, e.sg.unwrap(), e.vertex.unwrap())).or_default() += 1,
                    _ => {}
                }
            }
            fp_events += fp.len();
            violations += fp.values().filter(|&&n| n != 1).count();
            violations += th.values().filter(|&&n| n > 2).count();
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("0 violations over {fp_events} projected (scope, vertex) pairs"))
}

fn workload_balance() -> Outcome {
    let mut r = rng(2024);
    for case in 0..1000 {
        let sizes: Vec<usize> = (0..r.random_range(1..8)).map(|_| r.random_range(0..500)).collect();
        let lanes = r.random_range(1..9);
        let thr = r.random_range(1..64);
        let plan = balance_workloads(&sizes, lanes, thr, r.random());
        plan.check().map_err(|e| format!("case {case}: {e}"))?;
        let total: usize = plan.lane_totals().iter().sum();
        ensure(total == sizes.iter().sum::<usize>(), || format!("case {case}: tasks not conserved"))?;
    }
    let loads = [7_043_571, 5_000_496, 11_113];
    let plan = balance_workloads(&loads, 4, 256, true);
    let bound = loads.iter().sum::<usize>().div_ceil(4);
    let ratio = plan.max_lane_total() as f64 / bound as f64;
    ensure(ratio <= 1.01, || format!("max lane {ratio:.4} x ideal"))?;
    Ok(format!("1000 fuzz cases clean, DBLP max lane {ratio:.5} x ideal"))
}

fn fusion_trend() -> Outcome {
    let g = dblp_small(7);
    let mut log_sum = 0.0;
    let mut parts = Vec::new();
    for kind in ModelKind::ALL {
        let sgs = default_semantic_graphs(&g, kind).unwrap();
        let p = ModelParams::generate(kind, &g, &sgs, 1).unwrap();
        let order = similarity(&sgs);
        let run = run_fused(&g, &sgs, &order, &p, &EngineConfig::default()).unwrap();
        let hw = HardwareConfig::default();
        let f = replay(&run.trace, &order, &run.plan, &hw, Mode::Fused).unwrap().total_cycles;
        let s = replay(&run.trace, &order, &run.plan, &hw, Mode::Staged).unwrap().total_cycles;
        ensure(f < s, || format!("{kind}: fused {f} >= staged {s}"))?;
        let ratio = f as f64 / s as f64;
        log_sum += ratio.ln();
        parts.push(format!("{kind} {:.1}%", 100.0 * (1.0 - ratio)));
    }
    let reduction = 1.0 - (log_sum / 4.0).exp();
    ensure((0.2..=0.5).contains(&reduction), || format!("geomean reduction {reduction:.3}"))?;
    Ok(format!("{}; geomean {:.1}%", parts.join(", "), 100.0 * reduction))
}

fn scale_up() -> Outcome {
    let g = dblp_small(7);
    let sgs = default_semantic_graphs(&g, ModelKind::Han).unwrap();
    let p = ModelParams::generate(ModelKind::Han, &g, &sgs, 1).unwrap();
    let order = similarity(&sgs);
    let mut cycles = Vec::new();
    for lanes in [1, 2, 4, 8] {
        let run = run_fused(&g, &sgs, &order, &p, &EngineConfig { num_lanes: lanes, ..Default::default() }).unwrap();
        let m = replay(&run.trace, &order, &run.plan, &HardwareConfig::with_lanes(lanes), Mode::Fused).unwrap();
        cycles.push(m.total_cycles);
    }
    ensure(cycles.windows(2).all(|w| w[1] < w[0]), || format!("cycles {cycles:?}"))?;
    let eff = cycles[0] as f64 / (4.0 * cycles[2] as f64);
    ensure(eff >= 0.6, || format!("4-lane efficiency {eff:.3}"))?;
    Ok(format!("cycles {cycles:?}, 4-lane efficiency {eff:.3}"))
}

fn similarity_trend() -> Outcome {
    let kind = ModelKind::Shgn;
    let mut saved = Vec::new();
    let mut parts = Vec::new();
    for k in [4, 8, 12] {
        let g = gen_synthetic(&SyntheticSpec::relation_family(3, 6, k, 1000, 2000, 32).unwrap()).unwrap();
        let sgs = default_semantic_graphs(&g, kind).unwrap();
        let p = ModelParams::generate_with(kind, &g, &sgs, 1, 64, 1).unwrap();
        let h = build_hypergraph(&sgs).unwrap();
        let cfg = EngineConfig::default();
        let sim = shortest_hamilton_path(&h);
        let probe = run_fused(&g, &sgs, &sim, &p, &cfg).unwrap();
        let projected = probe.trace.count(Stage::FP) as u64 * 64 * 4;
        let hw = HardwareConfig { fp_buf_bytes: projected / 2, ..Default::default() };
        ensure(projected >= 2 * hw.fp_buf_bytes, || "buffer not under pressure".into())?;
        let dram = |o: &ExecutionOrder| {
            let r = run_fused(&g, &sgs, o, &p, &cfg).unwrap();
            replay(&r.trace, o, &r.plan, &hw, Mode::Fused).unwrap().dram_bytes() as f64
        };
        let s = dram(&sim);
        let mean = (0..10).map(|seed| dram(&random_order(&h, seed))).sum::<f64>() / 10.0;
        ensure(s <= mean, || format!("{k} graphs: similarity {s} > random mean {mean}"))?;
        saved.push(mean - s);
        parts.push(format!("{k} graphs {:.2}% ({:.0} B)", 100.0 * (mean - s) / mean, mean - s));
    }
    ensure(saved.windows(2).all(|w| w[1] >= w[0]), || format!("advantage not monotone: {saved:?}"))?;
    Ok(format!("saved vs random mean: {}", parts.join(", ")))
}

fn softmax_decomposition() -> Outcome {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    const DIM: usize = 8;
    for case in 0..10_000 {
        let n = r.random_range(1..40);
        let lanes = r.random_range(1..5);
        let theta: Vec<f64> = (0..n).map(|_| r.random_range(-60.0..60.0)).collect();
        let h = random_matrix(&mut r, n, DIM);
        let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = theta.iter().map(|t| (t - m).exp()).sum();
        let mut direct = [0.0; DIM];
        // Weighted magnitude of the terms: the scale rounding error is
        // proportional to when the signed sum cancels.
        let mut magnitude = [0.0; DIM];
        for u in 0..n {
            let w = (theta[u] - m).exp() / z;
            for c in 0..DIM {
                direct[c] += w * h.get(u, c);
                magnitude[c] += w * h.get(u, c).abs();
            }
        }
        // Edges scattered over lanes, each lane accumulating its own partial.
        let mut parts: Vec<HashMap<u32, Partial>> = vec![HashMap::new(); lanes];
        for u in 0..n {
            let lane = r.random_range(0..lanes);
            let p = parts[lane].entry(0).or_insert_with(|| Partial::zeros(DIM));
            let e = theta[u].exp();
            p.den += e;
            for c in 0..DIM {
                p.num[c] += e * h.get(u, c);
            }
        }
        let native = r.random_range(0..lanes);
        parts[native].entry(0).or_insert_with(|| Partial::zeros(DIM));
        let (merged, _) = sync_partials(native, &mut parts, &0).map_err(|e| e.to_string())?;
        for c in 0..DIM {
            let d = merged.num[c] / merged.den;
            let err = (d - direct[c]).abs() / d.abs().max(direct[c].abs()).max(magnitude[c]);
            ensure(err <= 1e-12, || format!("case {case}: relative error {err:e}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("10000 cases, max relative error {worst:.2e}"))
}

fn hihgnn(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hihgnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    let base = ["--seed", "21", "--preset", "dblp", "--scale", "0.03", "--feature-scale", "0.03"];
    let with = |cmd: &str, out: &str, extra: &[&str]| {
        let mut a = vec![cmd];
        a.extend(base);
        a.extend(["--out", out]);
        a.extend(extra);
        hihgnn(d, &a)
    };
    let mut compared = 0;
    for run in ["a", "b"] {
        with("gen", run, &[])?;
        with("run", run, &[])?;
        with("schedule", run, &["--schedule", "random:4"])?;
        with("sweep", &format!("{run}-sweep"), &["--axis", "lanes", "--jobs", "3"])?;
    }
    let files = ["graph.txt", "metrics.json", "metrics.csv", "embeddings.csv", "schedule.json", "order.json"];
    for f in files {
        let (x, y) = (std::fs::read(d.join("a").join(f)), std::fs::read(d.join("b").join(f)));
        ensure(matches!((&x, &y), (Ok(x), Ok(y)) if x == y), || format!("{f} differs"))?;
        compared += 1;
    }
    let (x, y) = (std::fs::read(d.join("a-sweep/sweep.csv")), std::fs::read(d.join("b-sweep/sweep.csv")));
    ensure(matches!((&x, &y), (Ok(x), Ok(y)) if x == y), || "sweep.csv differs".into())?;
    let c1 = with("compare", "a", &["--model", "rgcn"])?;
    let c2 = with("compare", "b", &["--model", "rgcn"])?;
    ensure(c1 == c2, || "compare output differs".into())?;
    Ok(format!("{} artifacts and compare output byte-identical across reruns", compared + 1))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("hamilton scheduling", hamilton_scheduling),
        ("RAB dedup", rab_dedup),
        ("workload balance", workload_balance),
        ("stage-fusion trend", fusion_trend),
        ("scale-up trend", scale_up),
        ("similarity scheduling trend", similarity_trend),
        ("softmax decomposition", softmax_decomposition),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}) [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
