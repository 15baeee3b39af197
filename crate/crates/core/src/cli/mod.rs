//! Batch front-end: configuration, the `gen`/`run`/`compare`/`sweep`/
//! `schedule` commands, and the argument parser used by the `hihgnn` binary.

mod commands;
mod config;

pub use commands::{
    cmd_compare, cmd_gen, cmd_run, cmd_schedule, cmd_sweep, prepare, resolve_order, simulate, sweep_threads,
    Prepared, RunOutcome, ScheduleFile, SweepAxis, SweepRow, SWEEP_COLUMNS,
};
pub use config::{DatasetSource, EngineSection, ExperimentConfig, ScheduleChoice};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fusion::Precision;
use crate::graph::DatasetShape;
use crate::model::ModelKind;

/// Largest oracle/fused disagreement `compare` accepts.
pub const COMPARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "hihgnn", version, about = "Heterogeneous GNN accelerator simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured dataset as a graph file.
    Gen {
        #[command(flatten)]
        opts: Overrides,
        /// Defaults to `<out>/graph.txt`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Execute and simulate one configuration.
    Run {
        #[command(flatten)]
        opts: Overrides,
        /// Also write `trace.ndjson`.
        #[arg(long)]
        trace: bool,
    },
    /// Check the fused engine against the reference implementation.
    Compare {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run one configuration along an ablation axis.
    Sweep {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated axis points; each axis has defaults.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        /// Concurrent points (capped by HIHGNN_SIM_THREADS).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the execution order of the semantic graphs.
    Schedule {
        #[command(flatten)]
        opts: Overrides,
    },
}

fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

/// Flags layered over the optional TOML config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML experiment file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Required here or in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// han, rgat, rgcn or shgn.
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Graph file; replaces the configured dataset.
    #[arg(long, conflicts_with = "preset")]
    pub graph: Option<PathBuf>,
    /// dblp, imdb or acm.
    #[arg(long)]
    pub preset: Option<DatasetShape>,
    /// Vertex and edge count multiplier.
    #[arg(long, requires = "preset")]
    pub scale: Option<f64>,
    /// Feature width multiplier.
    #[arg(long, requires = "preset")]
    pub feature_scale: Option<f64>,
    #[arg(long)]
    pub lanes: Option<usize>,
    /// Most edge tasks per lane per round.
    #[arg(long)]
    pub threshold: Option<usize>,
    #[arg(long, value_parser = parse_switch, value_name = "on|off")]
    pub fusion: Option<bool>,
    #[arg(long, value_parser = parse_switch, value_name = "on|off")]
    pub balance: Option<bool>,
    #[arg(long, value_parser = parse_switch, value_name = "on|off")]
    pub rab: Option<bool>,
    /// f64 or f32.
    #[arg(long)]
    pub precision: Option<Precision>,
    /// similarity, random:SEED or given:FILE.
    #[arg(long)]
    pub schedule: Option<ScheduleChoice>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Defaults to the model's depth.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hardware field override, e.g. `fp_buf_bytes=65536`. Repeatable.
    #[arg(long = "hw", value_name = "KEY=VALUE")]
    pub hw: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// The config file (or defaults) with every flag applied, validated.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        c.seed = self.seed.or(c.seed);
        if let Some(m) = self.model {
            c.model = m;
        }
        if let Some(p) = &self.graph {
            c.dataset = DatasetSource::File { path: p.clone() };
        }
        if let Some(shape) = self.preset {
            c.dataset = DatasetSource::Preset {
                shape,
                scale: self.scale.unwrap_or(1.0),
                feature_scale: self.feature_scale.unwrap_or(1.0),
            };
        }
        let e = &mut c.engine;
        macro_rules! set {
            ($($field:ident => $dst:expr),*) => {$(
                if let Some(v) = self.$field.clone() {
                    $dst = v;
                }
            )*};
        }
        set!(lanes => e.lanes, threshold => e.threshold, fusion => e.fusion, balance => e.balance,
            rab => e.rab, precision => e.precision, schedule => e.schedule, hidden => e.hidden);
        if self.layers.is_some() {
            e.layers = self.layers;
        }
        if let Some(o) = &self.out {
            c.out_dir = o.clone();
        }
        for a in &self.hw {
            c.set_hardware(a)?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Stdout that tolerates a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen { opts, output } => {
            let path = cmd_gen(&opts.resolve()?, output.as_deref())?;
            emit(&format!("wrote {}\n", path.display()));
        }
        Command::Run { opts, trace } => {
            let mut cfg = opts.resolve()?;
            cfg.engine.trace |= trace;
            let out = cmd_run(&cfg)?;
            let m = &out.metrics;
            let mut line = format!(
                "{} {}: {} cycles, {} DRAM bytes, {:.6e} J",
                m.model,
                m.mode,
                m.total_cycles,
                m.dram_bytes(),
                m.energy_total
            );
            if let Some(b) = &m.baseline {
                line += &format!(", {:.3}x over {}", b.speedup, b.name);
            }
            emit(&format!("{line} -> {}\n", cfg.out_dir.display()));
        }
        Command::Compare { opts } => {
            let err = cmd_compare(&opts.resolve()?)?;
            emit(&format!("max relative error {err:.3e}\n"));
            if err.is_nan() || err > COMPARE_TOLERANCE {
                eprintln!("error: exceeds tolerance {COMPARE_TOLERANCE:e}");
                return Ok(1);
            }
        }
        Command::Sweep { opts, axis, values, jobs } => {
            let cfg = opts.resolve()?;
            let rows = cmd_sweep(&cfg, axis, values, jobs)?;
            let mut text = format!("{SWEEP_COLUMNS}\n");
            for r in rows {
                text += &r.csv();
                text.push('\n');
            }
            emit(&text);
        }
        Command::Schedule { opts } => {
            let order = cmd_schedule(&opts.resolve()?)?;
            emit(&(order.to_json()? + "\n"));
        }
    }
    Ok(0)
}

/// Parses `args` and runs the command; returns the process exit status.
/// Failures print a one-line diagnostic.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            1
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().lines().map(str::trim).collect::<Vec<_>>().join(" ")
}
