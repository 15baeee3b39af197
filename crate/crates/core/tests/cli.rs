use std::fs;
use std::path::Path;
use std::process::Command;

use hihgnn::cli::*;
use hihgnn::model::ModelKind;
use hihgnn::perf::{MetricsReport, Mode};
use tempfile::TempDir;

fn small(dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::parse(
        r#"
        seed = 11
        model = "HAN"
        [dataset]
        kind = "preset"
        shape = "dblp"
        scale = 0.03
        feature_scale = 0.03
        "#,
    )
    .unwrap();
    c.out_dir = dir.to_path_buf();
    c.validate().unwrap();
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hihgnn"))
}

#[test]
fn config_parses_every_dataset_kind() {
    for ds in [
        "kind = \"file\"\npath = \"g.txt\"",
        "kind = \"preset\"\nshape = \"acm\"",
        "kind = \"family\"\ntypes = 4\ngraphs = 5\nvertices = 20\nedges = 40\nfeature_dim = 3",
        "kind = \"synthetic\"\n[dataset.spec]\nseed = 1\nvertex_types = []\nrelations = []",
    ] {
        let text = format!("seed = 1\n[dataset]\n{ds}\n");
        let c = ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{ds}: {e}"));
        let back = ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }
    assert!(ExperimentConfig::parse("seed = 1\nbogus = 2\n").is_err());
    assert!(ExperimentConfig::parse("seed = 1\n[engine]\nschedule = \"sideways\"\n").is_err());
    let mut c = ExperimentConfig::default();
    assert!(c.validate().is_err(), "seed is mandatory");
    c.seed = Some(1);
    c.engine.schedule = ScheduleChoice::Given("/definitely/missing.json".into());
    assert!(c.validate().is_err());
}

#[test]
fn schedule_choice_syntax() {
    for s in ["similarity", "random:42", "given:out/schedule.json"] {
        assert_eq!(s.parse::<ScheduleChoice>().unwrap().to_string(), s);
    }
    for s in ["random:", "random:x", "given:", "hamilton"] {
        assert!(s.parse::<ScheduleChoice>().is_err(), "{s}");
    }
}

#[test]
fn hardware_overrides() {
    let mut c = ExperimentConfig { seed: Some(1), ..Default::default() };
    c.set_hardware("fp_buf_bytes=4096").unwrap();
    c.set_hardware("power.systolic = 2.5").unwrap();
    assert_eq!(c.hardware.fp_buf_bytes, 4096);
    assert_eq!(c.hardware.power.systolic, 2.5);
    assert!(c.set_hardware("warp_drive=1").is_err());
    assert!(c.set_hardware("fp_buf_bytes").is_err());
    assert!(c.set_hardware("fp_buf_bytes=\"big\"").is_err());
    c.set_hardware("fp_buf_bytes=8").unwrap();
    assert!(c.validate().is_err(), "buffer smaller than a row");
}

#[test]
fn run_writes_all_artifacts_deterministically() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        cmd_run(&small(d.path())).unwrap();
    }
    for f in ["metrics.json", "metrics.csv", "embeddings.csv", "schedule.json", "manifest.json"] {
        assert!(a.path().join(f).is_file(), "{f}");
    }
    for f in ["metrics.json", "metrics.csv", "embeddings.csv", "schedule.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let m = MetricsReport::from_json(&fs::read_to_string(a.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m.mode, Mode::Fused);
    assert!(m.baseline.as_ref().unwrap().speedup >= 1.0);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 11);
    assert_eq!(manifest["metrics_schema"], 1);
    let csv = fs::read_to_string(a.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn fusion_flag_selects_mode() {
    let d = TempDir::new().unwrap();
    let mut c = small(d.path());
    let on = cmd_run(&c).unwrap().metrics;
    c.engine.fusion = false;
    let off = cmd_run(&c).unwrap().metrics;
    assert_eq!(off.mode, Mode::Staged);
    assert!(on.total_cycles <= off.total_cycles);
}

#[test]
fn given_schedule_replays_run() {
    let d = TempDir::new().unwrap();
    let mut c = small(d.path());
    c.engine.schedule = ScheduleChoice::Random(3);
    let first = cmd_run(&c).unwrap();
    let copy = d.path().join("saved.json");
    fs::copy(d.path().join("schedule.json"), &copy).unwrap();
    c.engine.schedule = ScheduleChoice::Given(copy);
    let again = cmd_run(&c).unwrap();
    assert_eq!(again.order.ids, first.order.ids);
    assert_eq!(again.metrics, first.metrics);
    // The bare order written by `schedule` is accepted too.
    let order = cmd_schedule(&c).unwrap();
    c.engine.schedule = ScheduleChoice::Given(d.path().join("order.json"));
    assert_eq!(cmd_schedule(&c).unwrap().ids, order.ids);
}

#[test]
fn compare_all_models_within_tolerance() {
    let d = TempDir::new().unwrap();
    for kind in ModelKind::ALL {
        let mut c = small(d.path());
        c.model = kind;
        let err = cmd_compare(&c).unwrap();
        assert!(err <= COMPARE_TOLERANCE, "{kind}: {err}");
    }
}

#[test]
fn lane_sweep_speeds_up() {
    let d = TempDir::new().unwrap();
    let rows = cmd_sweep(&small(d.path()), SweepAxis::Lanes, None, Some(2)).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].speedup, 1.0);
    assert!(rows.windows(2).all(|w| w[1].speedup > w[0].speedup));
    let csv = fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), SWEEP_COLUMNS);
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn sweep_rejects_empty_and_mismatched_axes() {
    let d = TempDir::new().unwrap();
    let c = small(d.path());
    assert!(cmd_sweep(&c, SweepAxis::Lanes, Some(vec![]), None).is_err());
    assert!(cmd_sweep(&c, SweepAxis::Lanes, Some(vec![" ".into()]), None).is_err());
    assert!(cmd_sweep(&c, SweepAxis::Lanes, Some(vec!["0".into()]), None).is_err());
    assert!(cmd_sweep(&c, SweepAxis::GraphCount, None, None).is_err(), "needs a family dataset");
}

fn family(dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::parse(
        r#"
        seed = 3
        model = "S-HGN"
        [dataset]
        kind = "family"
        types = 6
        graphs = 12
        vertices = 300
        edges = 600
        feature_dim = 16
        [engine]
        layers = 1
        random_orders = 4
        [hardware]
        fp_buf_bytes = 60000
        "#,
    )
    .unwrap();
    c.out_dir = dir.to_path_buf();
    c.validate().unwrap();
    c
}

#[test]
fn schedule_sweep_reports_random_mean() {
    let d = TempDir::new().unwrap();
    let rows = cmd_sweep(&family(d.path()), SweepAxis::Schedules, None, None).unwrap();
    assert_eq!(rows.len(), 1 + 4 + 1);
    assert_eq!(rows[0].schedule, "similarity");
    let mean = rows.last().unwrap();
    assert_eq!(mean.schedule, "random-mean");
    assert_eq!(mean.normalized_dram, 1.0);
    let avg = rows[1..5].iter().map(|r| r.dram_bytes).sum::<f64>() / 4.0;
    assert!((avg - mean.dram_bytes).abs() < 1e-6);
}

#[test]
fn graph_count_sweep_pairs_rows() {
    let d = TempDir::new().unwrap();
    let rows = cmd_sweep(&family(d.path()), SweepAxis::GraphCount, Some(vec!["4".into(), "8".into()]), None).unwrap();
    let labels: Vec<(&str, usize)> = rows.iter().map(|r| (r.schedule.as_str(), r.graphs)).collect();
    assert_eq!(labels, [("similarity", 4), ("random-mean", 4), ("similarity", 8), ("random-mean", 8)]);
}

#[test]
fn binary_end_to_end() {
    let d = TempDir::new().unwrap();
    let out = d.path().to_str().unwrap();
    let common = ["--seed", "5", "--preset", "dblp", "--scale", "0.03", "--feature-scale", "0.03", "--out", out];
    let st = bin().arg("run").args(common).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let st = bin().arg("compare").args(common).args(["--model", "rgat"]).output().unwrap();
    assert!(st.status.success());
    assert!(String::from_utf8_lossy(&st.stdout).starts_with("max relative error"));
    let graph = d.path().join("g.txt");
    let st = bin().arg("gen").args(common).arg("--output").arg(&graph).output().unwrap();
    assert!(st.status.success() && graph.is_file());
    let st = bin()
        .args(["schedule", "--seed", "1", "--graph", graph.to_str().unwrap(), "--out", out])
        .output()
        .unwrap();
    assert!(st.status.success());
    let st = bin().args(["run", "--out", out]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let err = String::from_utf8_lossy(&st.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));
    let st = bin().args(["sweep", "--seed", "1", "--axis", "lanes", "--values", "", "--out", out]).output().unwrap();
    assert!(!st.status.success());
}

#[test]
fn sweep_output_independent_of_thread_count() {
    let d = TempDir::new().unwrap();
    let out = d.path().to_str().unwrap();
    let args = ["sweep", "--seed", "2", "--preset", "acm", "--scale", "0.03", "--feature-scale", "0.03"];
    let run = |jobs: &str, cap: &str| {
        let st = bin()
            .args(args)
            .args(["--axis", "schedules", "--jobs", jobs, "--out", out])
            .env("HIHGNN_SIM_THREADS", cap)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        st.stdout
    };
    assert_eq!(run("4", "1"), run("4", "4"));
}
