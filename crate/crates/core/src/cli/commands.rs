use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig, ScheduleChoice};
use crate::error::{Error, Result};
use crate::fusion::{run_fused, FusedRun};
use crate::graph::{write_hetgraph, HetGraph, SemanticGraph};
use crate::model::{default_semantic_graphs, run_oracle, ModelParams};
use crate::perf::{replay, MetricsReport, Mode, METRICS_SCHEMA_VERSION};
use crate::schedule::{build_hypergraph, random_order, shortest_hamilton_path, ExecutionOrder, LanePlan};

/// Graph, semantic graphs and weights for one configuration.
pub struct Prepared {
    pub graph: HetGraph,
    pub graphs: Vec<SemanticGraph>,
    pub params: ModelParams,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let seed = cfg.seed()?;
    let graph = cfg.dataset.load(seed)?;
    let graphs = default_semantic_graphs(&graph, cfg.model)?;
    let params = ModelParams::generate_with(cfg.model, &graph, &graphs, seed, cfg.engine.hidden, cfg.layers())?;
    Ok(Prepared { graph, graphs, params })
}

/// The file written next to every run: the order and the lane plan it
/// produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub order: ExecutionOrder,
    pub plan: LanePlan,
}

fn read_order(path: &Path) -> Result<ExecutionOrder> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    if let Ok(f) = serde_json::from_str::<ScheduleFile>(&text) {
        return Ok(f.order);
    }
    ExecutionOrder::from_json(&text)
}

pub fn resolve_order(choice: &ScheduleChoice, graphs: &[SemanticGraph]) -> Result<ExecutionOrder> {
    let h = build_hypergraph(graphs)?;
    match choice {
        ScheduleChoice::Similarity => Ok(shortest_hamilton_path(&h)),
        ScheduleChoice::Random(seed) => Ok(random_order(&h, *seed)),
        ScheduleChoice::Given(path) => read_order(path),
    }
}

pub struct RunOutcome {
    pub order: ExecutionOrder,
    pub run: FusedRun,
    /// For the mode the config selects; fused reports carry the staged
    /// speedup.
    pub metrics: MetricsReport,
}

pub fn simulate(cfg: &ExperimentConfig, prep: &Prepared) -> Result<RunOutcome> {
    let order = resolve_order(&cfg.engine.schedule, &prep.graphs)?;
    let run = run_fused(&prep.graph, &prep.graphs, &order, &prep.params, &cfg.engine_config())?;
    let staged = replay(&run.trace, &order, &run.plan, &cfg.hardware, Mode::Staged)?;
    let metrics = if cfg.engine.fusion {
        replay(&run.trace, &order, &run.plan, &cfg.hardware, Mode::Fused)?.with_baseline("staged", &staged)
    } else {
        staged
    };
    Ok(RunOutcome { order, run, metrics })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::file(path, e))
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::file(&cfg.out_dir, e))?;
    Ok(&cfg.out_dir)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    metrics_schema: u32,
    created_unix: u64,
    files: &'a [&'a str],
    config: &'a ExperimentConfig,
}

fn write_manifest(cfg: &ExperimentConfig, command: &str, files: &[&str]) -> Result<()> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        metrics_schema: METRICS_SCHEMA_VERSION,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        files,
        config: cfg,
    };
    write(&out_dir(cfg)?.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")
}

/// Writes the generated or loaded graph in the text format.
pub fn cmd_gen(cfg: &ExperimentConfig, output: Option<&Path>) -> Result<PathBuf> {
    let g = cfg.dataset.load(cfg.seed()?)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => out_dir(cfg)?.join("graph.txt"),
    };
    let mut buf = Vec::new();
    write_hetgraph(&g, &mut buf)?;
    write(&path, buf)?;
    Ok(path)
}

/// Functional run plus replay; writes metrics, embeddings, schedule and a
/// manifest into the output directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let prep = prepare(cfg)?;
    let out = simulate(cfg, &prep)?;
    let dir = out_dir(cfg)?;
    write(&dir.join("metrics.json"), out.metrics.to_json()? + "\n")?;
    write(
        &dir.join("metrics.csv"),
        format!("{}\n{}\n", MetricsReport::csv_header(), out.metrics.csv_row()),
    )?;
    let mut emb = Vec::new();
    out.run.result.write_csv(&mut emb)?;
    write(&dir.join("embeddings.csv"), emb)?;
    let sched = ScheduleFile { order: out.order.clone(), plan: out.run.plan.clone() };
    write(&dir.join("schedule.json"), serde_json::to_string_pretty(&sched)? + "\n")?;
    let mut files = vec!["metrics.json", "metrics.csv", "embeddings.csv", "schedule.json"];
    if cfg.engine.trace {
        let mut t = Vec::new();
        out.run.trace.write_ndjson(&mut t)?;
        write(&dir.join("trace.ndjson"), t)?;
        files.push("trace.ndjson");
    }
    write_manifest(cfg, "run", &files)?;
    Ok(out)
}

/// Largest relative difference between the reference and fused outputs,
/// over final embeddings and every per-graph aggregate.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<f64> {
    let prep = prepare(cfg)?;
    let order = resolve_order(&cfg.engine.schedule, &prep.graphs)?;
    let oracle = run_oracle(&prep.graph, &prep.graphs, &prep.params)?;
    let fused = run_fused(&prep.graph, &prep.graphs, &order, &prep.params, &cfg.engine_config())?;
    fused.result.max_relative_error(&oracle)
}

pub fn cmd_schedule(cfg: &ExperimentConfig) -> Result<ExecutionOrder> {
    let seed = cfg.seed()?;
    let g = cfg.dataset.load(seed)?;
    let graphs = default_semantic_graphs(&g, cfg.model)?;
    let order = resolve_order(&cfg.engine.schedule, &graphs)?;
    write(&out_dir(cfg)?.join("order.json"), order.to_json()? + "\n")?;
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Lanes,
    Schedules,
    GraphCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub schedule: String,
    pub lanes: usize,
    pub graphs: usize,
    pub total_cycles: f64,
    pub dram_bytes: f64,
    pub energy_j: f64,
    /// Baseline cycles over these cycles.
    pub speedup: f64,
    /// These DRAM bytes over the baseline's.
    pub normalized_dram: f64,
}

pub const SWEEP_COLUMNS: &str =
    "value,schedule,lanes,graphs,total_cycles,dram_bytes,energy_j,speedup,normalized_dram";

impl SweepRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{:.3},{:.9e},{:.6},{:.6}",
            self.value,
            self.schedule,
            self.lanes,
            self.graphs,
            self.total_cycles,
            self.dram_bytes,
            self.energy_j,
            self.speedup,
            self.normalized_dram
        )
    }
}

/// Thread budget for sweeps: `jobs` (default: all cores), capped by
/// `HIHGNN_SIM_THREADS`.
pub fn sweep_threads(jobs: Option<usize>) -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let n = jobs.unwrap_or(cores).max(1);
    match std::env::var("HIHGNN_SIM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(cap) if cap > 0 => n.min(cap),
        _ => n,
    }
}

struct Point {
    value: String,
    schedule: String,
    lanes: usize,
    graphs: usize,
    cycles: f64,
    dram: f64,
    energy: f64,
}

impl Point {
    fn row(&self, base: &Point) -> SweepRow {
        let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
        SweepRow {
            value: self.value.clone(),
            schedule: self.schedule.clone(),
            lanes: self.lanes,
            graphs: self.graphs,
            total_cycles: self.cycles,
            dram_bytes: self.dram,
            energy_j: self.energy,
            speedup: ratio(base.cycles, self.cycles),
            normalized_dram: ratio(self.dram, base.dram),
        }
    }
}

fn mean_point(value: &str, schedule: &str, pts: &[&Point]) -> Point {
    let n = pts.len() as f64;
    Point {
        value: value.to_string(),
        schedule: schedule.to_string(),
        lanes: pts[0].lanes,
        graphs: pts[0].graphs,
        cycles: pts.iter().map(|p| p.cycles).sum::<f64>() / n,
        dram: pts.iter().map(|p| p.dram).sum::<f64>() / n,
        energy: pts.iter().map(|p| p.energy).sum::<f64>() / n,
    }
}

fn measure(value: String, cfg: &ExperimentConfig, prep: &Prepared) -> Result<Point> {
    let m = simulate(cfg, prep)?.metrics;
    Ok(Point {
        value,
        schedule: cfg.engine.schedule.to_string(),
        lanes: cfg.engine.lanes,
        graphs: prep.graphs.len(),
        cycles: m.total_cycles as f64,
        dram: m.dram_bytes() as f64,
        energy: m.energy_total,
    })
}

fn default_values(axis: SweepAxis, cfg: &ExperimentConfig) -> Vec<String> {
    match axis {
        SweepAxis::Lanes => ["1", "2", "4", "8"].map(String::from).to_vec(),
        SweepAxis::GraphCount => ["4", "8", "12"].map(String::from).to_vec(),
        SweepAxis::Schedules => std::iter::once("similarity".to_string())
            .chain((0..cfg.engine.random_orders).map(|s| format!("random:{s}")))
            .collect(),
    }
}

fn parse_counts(values: &[String]) -> Result<Vec<usize>> {
    values
        .iter()
        .map(|v| match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("sweep value `{v}` is not a positive integer"))),
        })
        .collect()
}

/// Similarity plus the mean of the configured random orders, per prepared
/// graph family member.
fn schedule_points(cfg: &ExperimentConfig, value: &str, prep: &Prepared, choices: &[ScheduleChoice]) -> Result<Vec<Point>> {
    let pts = choices
        .par_iter()
        .map(|c| {
            let mut c_cfg = cfg.clone();
            c_cfg.engine.schedule = c.clone();
            measure(value.to_string(), &c_cfg, prep)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pts)
}

/// One row per sweep point, also written to `sweep.csv` in the output
/// directory. Points run concurrently and are reported in input order.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: Option<Vec<String>>,
    jobs: Option<usize>,
) -> Result<Vec<SweepRow>> {
    let values: Vec<String> = values
        .unwrap_or_else(|| default_values(axis, cfg))
        .into_iter()
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::Config("sweep axis has no values".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads(jobs))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| sweep_rows(cfg, axis, &values))?;
    let mut csv = format!("{SWEEP_COLUMNS}\n");
    for r in &rows {
        csv.push_str(&r.csv());
        csv.push('\n');
    }
    write(&out_dir(cfg)?.join("sweep.csv"), csv)?;
    Ok(rows)
}

fn random_choices(cfg: &ExperimentConfig) -> Result<Vec<ScheduleChoice>> {
    if cfg.engine.random_orders == 0 {
        return Err(Error::Config("random_orders must be positive".into()));
    }
    Ok((0..cfg.engine.random_orders).map(ScheduleChoice::Random).collect())
}

fn sweep_rows(cfg: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<Vec<SweepRow>> {
    match axis {
        SweepAxis::Lanes => {
            let lanes = parse_counts(values)?;
            let prep = prepare(cfg)?;
            let pts = lanes
                .par_iter()
                .map(|&l| {
                    let mut c = cfg.clone();
                    c.engine.lanes = l;
                    c.validate()?;
                    measure(l.to_string(), &c, &prep)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(pts.iter().map(|p| p.row(&pts[0])).collect())
        }
        SweepAxis::Schedules => {
            let choices = values.iter().map(|v| v.parse()).collect::<Result<Vec<ScheduleChoice>>>()?;
            let prep = prepare(cfg)?;
            let mut pts = schedule_points(cfg, "", &prep, &choices)?;
            for (p, c) in pts.iter_mut().zip(&choices) {
                p.value = c.to_string();
            }
            let random: Vec<&Point> = choices
                .iter()
                .zip(&pts)
                .filter(|(c, _)| matches!(c, ScheduleChoice::Random(_)))
                .map(|(_, p)| p)
                .collect();
            let mean = (!random.is_empty()).then(|| mean_point("random-mean", "random-mean", &random));
            let base = mean.as_ref().unwrap_or(&pts[0]);
            let mut rows: Vec<SweepRow> = pts.iter().map(|p| p.row(base)).collect();
            if let Some(m) = &mean {
                rows.push(m.row(base));
            }
            Ok(rows)
        }
        SweepAxis::GraphCount => {
            let counts = parse_counts(values)?;
            let DatasetSource::Family { .. } = cfg.dataset else {
                return Err(Error::Config("graph-count sweeps need a `family` dataset".into()));
            };
            let mut choices = vec![ScheduleChoice::Similarity];
            choices.extend(random_choices(cfg)?);
            let per_count = counts
                .par_iter()
                .map(|&k| {
                    let mut c = cfg.clone();
                    if let DatasetSource::Family { graphs, .. } = &mut c.dataset {
                        *graphs = k;
                    }
                    let prep = prepare(&c)?;
                    let pts = schedule_points(&c, &k.to_string(), &prep, &choices)?;
                    let random: Vec<&Point> = pts[1..].iter().collect();
                    let mean = mean_point(&k.to_string(), "random-mean", &random);
                    Ok(vec![pts[0].row(&mean), mean.row(&mean)])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(per_count.into_iter().flatten().collect())
        }
    }
}
