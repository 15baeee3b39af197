use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::buffer::{Access, BufKey, BufferModel, BufferStats};
use super::{
    dram_cycles, dram_energy, dram_line_bytes, module_energy, mvm_batch_cycles, simd_cycles,
    HardwareConfig, ModulePower, CROSSBAR_BYTES_PER_CYCLE,
};
use crate::error::{Error, Result};
use crate::fusion::{EventTrace, Stage};
use crate::model::{ModelKind, ProjectionKey, Role};
use crate::schedule::{ExecutionOrder, LanePlan};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Stages of a round overlap on their own modules.
    Fused,
    /// A barrier separates projection, aggregation and fusion.
    Staged,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fused => "fused",
            Mode::Staged => "staged",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(Mode::Fused),
            "staged" => Ok(Mode::Staged),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

/// Cycles each stage would take on its own, DRAM stalls included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageCycles {
    pub fp: u64,
    /// Attention coefficients and aggregation.
    pub na: u64,
    /// Local semantic fusion, partial-aggregate sync included.
    pub lsf: u64,
    pub gsf: u64,
    #[serde(rename = "final")]
    pub final_: u64,
}

impl StageCycles {
    pub fn sum(&self) -> u64 {
        self.fp + self.na + self.lsf + self.gsf + self.final_
    }

    fn add(&mut self, phase: usize, c: u64) {
        match phase {
            FP => self.fp += c,
            NA => self.na += c,
            LSF => self.lsf += c,
            GSF => self.gsf += c,
            _ => self.final_ += c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dram: f64,
    pub systolic: f64,
    pub simd: f64,
    pub buffers: f64,
    pub crossbar: f64,
    pub other: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.dram + self.systolic + self.simd + self.buffers + self.crossbar + self.other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub name: String,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub model: ModelKind,
    pub num_lanes: usize,
    pub num_layers: u32,
    pub rounds_per_layer: u32,
    pub events: u64,
    pub total_cycles: u64,
    pub stage_cycles: StageCycles,
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    /// Raw input rows fetched by projections; a subset of the reads.
    pub raw_feature_bytes: u64,
    pub fp_buf: BufferStats,
    pub na_buf: BufferStats,
    pub sf_buf: BufferStats,
    pub systolic_busy_cycles: u64,
    pub simd_busy_cycles: u64,
    pub crossbar_busy_cycles: u64,
    pub lane_busy: Vec<f64>,
    pub energy: EnergyBreakdown,
    pub energy_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
}

const CSV_COLUMNS: &[&str] = &[
    "schema_version",
    "mode",
    "model",
    "num_lanes",
    "total_cycles",
    "fp_cycles",
    "na_cycles",
    "lsf_cycles",
    "gsf_cycles",
    "final_cycles",
    "dram_read_bytes",
    "dram_write_bytes",
    "raw_feature_bytes",
    "fp_buf_hit_rate",
    "na_buf_hit_rate",
    "sf_buf_hit_rate",
    "mean_lane_busy",
    "energy_dram_j",
    "energy_systolic_j",
    "energy_simd_j",
    "energy_buffers_j",
    "energy_crossbar_j",
    "energy_other_j",
    "energy_total_j",
];

impl MetricsReport {
    pub fn dram_bytes(&self) -> u64 {
        self.dram_read_bytes + self.dram_write_bytes
    }

    pub fn seconds(&self, cfg: &HardwareConfig) -> f64 {
        self.total_cycles as f64 / cfg.clock_hz
    }

    /// Records the speedup of this run over `base`.
    pub fn with_baseline(mut self, name: &str, base: &MetricsReport) -> Self {
        let speedup = if self.total_cycles == 0 {
            1.0
        } else {
            base.total_cycles as f64 / self.total_cycles as f64
        };
        self.baseline = Some(Baseline { name: name.to_string(), speedup });
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema_version != METRICS_SCHEMA_VERSION {
            return Err(Error::Config(format!("metrics schema version {} unsupported", r.schema_version)));
        }
        Ok(r)
    }

    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mean_busy = if self.lane_busy.is_empty() {
            0.0
        } else {
            self.lane_busy.iter().sum::<f64>() / self.lane_busy.len() as f64
        };
        let s = &self.stage_cycles;
        let e = &self.energy;
        let cells = [
            self.schema_version.to_string(),
            self.mode.to_string(),
            self.model.name().to_string(),
            self.num_lanes.to_string(),
            self.total_cycles.to_string(),
            s.fp.to_string(),
            s.na.to_string(),
            s.lsf.to_string(),
            s.gsf.to_string(),
            s.final_.to_string(),
            self.dram_read_bytes.to_string(),
            self.dram_write_bytes.to_string(),
            self.raw_feature_bytes.to_string(),
            format!("{:.6}", self.fp_buf.hit_rate),
            format!("{:.6}", self.na_buf.hit_rate),
            format!("{:.6}", self.sf_buf.hit_rate),
            format!("{mean_busy:.6}"),
            format!("{:.9e}", e.dram),
            format!("{:.9e}", e.systolic),
            format!("{:.9e}", e.simd),
            format!("{:.9e}", e.buffers),
            format!("{:.9e}", e.crossbar),
            format!("{:.9e}", e.other),
            format!("{:.9e}", self.energy_total),
        ];
        cells.join(",")
    }
}

const FP: usize = 0;
const NA: usize = 1;
const LSF: usize = 2;
const GSF: usize = 3;
const FINAL: usize = 4;
const PHASES: usize = 5;

fn phase_of(stage: Stage) -> usize {
    match stage {
        Stage::FP => FP,
        Stage::Theta | Stage::NA | Stage::Defer => NA,
        Stage::Sync | Stage::LSF => LSF,
        Stage::GSF => GSF,
        Stage::Final => FINAL,
    }
}

/// Work issued between two synchronization points.
#[derive(Default)]
struct Step {
    seen: [bool; PHASES],
    dram: [u64; PHASES],
    fp: BTreeMap<(u32, ProjectionKey), (u64, u64, u64)>,
    theta: BTreeMap<(u32, u32, u8), (u64, u64)>,
    sem: BTreeMap<u32, (u64, u64, u64)>,
    na_elems: BTreeMap<u32, u64>,
    lsf_elems: BTreeMap<u32, u64>,
    xbar: BTreeMap<u32, u64>,
    gsf_elems: u64,
    final_elems: u64,
}

struct Totals {
    total: u64,
    stages: StageCycles,
    sys: u64,
    simd: u64,
    xbar: u64,
    lane_busy: Vec<u64>,
}

impl Step {
    fn close(self, cfg: &HardwareConfig, mode: Mode, acc: &mut Totals) {
        if !self.seen.iter().any(|&s| s) {
            return;
        }
        let lanes = cfg.num_lanes;
        let arrays = cfg.systolic_arrays_per_lane;
        let cores = cfg.simd_cores_per_lane;
        let mut fp = vec![0u64; lanes];
        let mut th = vec![0u64; lanes];
        let mut sem = vec![0u64; lanes];
        for (&(l, _), &(r, c, m)) in &self.fp {
            fp[l as usize] += mvm_batch_cycles(r, c, m, arrays);
        }
        for (&(l, _, _), &(c, m)) in &self.theta {
            th[l as usize] += mvm_batch_cycles(1, c, m, arrays);
        }
        for (&l, &(r, c, m)) in &self.sem {
            sem[l as usize] += mvm_batch_cycles(r, c, m, arrays);
        }
        let per_lane = |m: &BTreeMap<u32, u64>, f: &dyn Fn(u64) -> u64| {
            let mut v = vec![0u64; lanes];
            for (&l, &x) in m {
                v[l as usize] = f(x);
            }
            v
        };
        let na = per_lane(&self.na_elems, &|x| simd_cycles(x, cores));
        let lsf = per_lane(&self.lsf_elems, &|x| simd_cycles(x, cores));
        let xbar = per_lane(&self.xbar, &|x| x);
        let gsf = simd_cycles(self.gsf_elems, cores);
        let fin = simd_cycles(self.final_elems, cores);

        let sys_l: Vec<u64> = (0..lanes).map(|l| fp[l] + th[l] + sem[l]).collect();
        let simd_l: Vec<u64> = (0..lanes).map(|l| na[l] + lsf[l]).collect();
        let max = |v: &[u64]| v.iter().copied().max().unwrap_or(0);

        let compute = [
            max(&fp),
            max(&(0..lanes).map(|l| th[l] + na[l]).collect::<Vec<_>>()),
            max(&(0..lanes).map(|l| sem[l] + lsf[l] + xbar[l]).collect::<Vec<_>>()),
            gsf,
            fin,
        ];
        let mut staged = 0;
        for p in 0..PHASES {
            if self.seen[p] {
                let t = compute[p].max(dram_cycles(self.dram[p], cfg)) + cfg.fill_cycles;
                acc.stages.add(p, t);
                staged += t;
            }
        }
        acc.sys += sys_l.iter().sum::<u64>();
        acc.simd += simd_l.iter().sum::<u64>() + gsf + fin;
        acc.xbar += xbar.iter().sum::<u64>();
        match mode {
            Mode::Fused => {
                let dram = dram_cycles(self.dram.iter().sum(), cfg);
                let t = max(&sys_l).max(max(&simd_l)).max(max(&xbar)).max(gsf + fin).max(dram);
                acc.total += t + cfg.fill_cycles;
                for l in 0..lanes {
                    acc.lane_busy[l] += sys_l[l].max(simd_l[l]);
                }
            }
            Mode::Staged => {
                acc.total += staged;
                for l in 0..lanes {
                    acc.lane_busy[l] += sys_l[l] + simd_l[l] + xbar[l];
                }
            }
        }
    }
}

fn check_inputs(trace: &EventTrace, order: &ExecutionOrder, plan: &LanePlan, cfg: &HardwareConfig) -> Result<()> {
    let h = &trace.header;
    let mismatch = |m: String| Err(Error::TraceMismatch(m));
    if h.num_lanes as usize != plan.num_lanes || plan.num_lanes != cfg.num_lanes {
        return mismatch(format!(
            "lanes: trace {}, plan {}, hardware {}",
            h.num_lanes, plan.num_lanes, cfg.num_lanes
        ));
    }
    if h.rounds as usize != plan.rounds.len() {
        return mismatch(format!("trace has {} rounds, plan {}", h.rounds, plan.rounds.len()));
    }
    if h.element_bytes as u64 != cfg.element_bytes {
        return mismatch(format!(
            "element size: trace {}, hardware {}",
            h.element_bytes, cfg.element_bytes
        ));
    }
    let mut ids: Vec<&str> = h.graphs.iter().map(|g| g.id.as_str()).collect();
    let mut want: Vec<&str> = order.ids.iter().map(String::as_str).collect();
    ids.sort_unstable();
    want.sort_unstable();
    if ids != want {
        return mismatch("execution order does not cover the traced graphs".into());
    }
    for e in &trace.events {
        if e.lane as usize >= plan.num_lanes || e.round > h.rounds || e.layer >= h.num_layers {
            return mismatch(format!("event outside plan: {e:?}"));
        }
    }
    trace.check_closure()?;
    cfg.validate(h.hidden_dim as u64 + 1)
}

/// Replays `trace` on the hardware model.
///
/// Events are grouped into steps (one per layer and round); within a step,
/// fused mode overlaps the systolic, SIMD, crossbar and DRAM work of every
/// lane while staged mode runs each stage to completion before the next.
/// Buffer contents evolve identically in both modes, so the two differ only
/// in overlap.
pub fn replay(
    trace: &EventTrace,
    order: &ExecutionOrder,
    plan: &LanePlan,
    cfg: &HardwareConfig,
    mode: Mode,
) -> Result<MetricsReport> {
    check_inputs(trace, order, plan, cfg)?;
    let h = &trace.header;
    let eb = cfg.element_bytes;
    let hd = h.hidden_dim as u64;
    let row = hd * eb;
    let partial = (hd + 1) * eb;

    let mut fp_buf = BufferModel::new(cfg.fp_buf_bytes, 64);
    let mut na_buf = BufferModel::new(cfg.na_buf_bytes, 64);
    let mut sf_buf = BufferModel::new(cfg.sf_buf_bytes, 64);
    let mut acc = Totals {
        total: 0,
        stages: StageCycles::default(),
        sys: 0,
        simd: 0,
        xbar: 0,
        lane_busy: vec![0; cfg.num_lanes],
    };
    let (mut read, mut written, mut raw) = (0u64, 0u64, 0u64);
    let mut step = Step::default();
    let mut at: Option<(u32, u32)> = None;
    // Finalized targets per graph, awaiting global fusion.
    let mut semantic: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    // Targets accumulated per type, awaiting the final division.
    let mut fused: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();

    for e in &trace.events {
        let here = (e.layer, e.round);
        if at != Some(here) {
            if at.is_some_and(|a| a > here) {
                return Err(Error::TraceMismatch(format!("event out of order: {e:?}")));
            }
            if at.is_some_and(|a| a.0 != here.0) {
                // Everything on chip belongs to the finished layer.
                fp_buf.clear();
                na_buf.clear();
                sf_buf.clear();
            }
            std::mem::take(&mut step).close(cfg, mode, &mut acc);
            at = Some(here);
        }
        let p = phase_of(e.stage);
        step.seen[p] = true;
        let mut charge = |a: Access, step: &mut Step| {
            read += a.read;
            written += a.written;
            step.dram[p] += a.read + a.written;
        };
        let l = e.layer;
        let need = |x: Option<u32>, what: &str| {
            x.ok_or_else(|| Error::TraceMismatch(format!("{:?} event without {what}", e.stage)))
        };
        match e.stage {
            Stage::FP => {
                let key = e.key.ok_or_else(|| Error::TraceMismatch("FP without key".into()))?;
                let v = need(e.vertex, "vertex")?;
                let bytes = dram_line_bytes(e.bytes);
                raw += bytes;
                charge(Access { hit: false, read: bytes, written: 0 }, &mut step);
                let a = fp_buf.access(BufKey::Projected(l, key, v), row, true);
                charge(a, &mut step);
                let b = step.fp.entry((e.lane, key)).or_insert((e.rows as u64, e.cols as u64, 0));
                b.2 += 1;
            }
            Stage::Theta => {
                let key = e.key.ok_or_else(|| Error::TraceMismatch("Theta without key".into()))?;
                let v = need(e.vertex, "vertex")?;
                charge(fp_buf.access(BufKey::Projected(l, key, v), row, false), &mut step);
                let role = match e.role {
                    Some(Role::Dst) => 1,
                    _ => 0,
                };
                let b = step
                    .theta
                    .entry((e.lane, need(e.sg, "graph")?, role))
                    .or_insert((e.cols as u64, 0));
                b.1 += 1;
            }
            Stage::NA => {
                let key = e.key.ok_or_else(|| Error::TraceMismatch("NA without key".into()))?;
                let (sg, v, u) = (need(e.sg, "graph")?, need(e.vertex, "vertex")?, need(e.src, "source")?);
                charge(fp_buf.access(BufKey::Projected(l, key, u), row, false), &mut step);
                charge(na_buf.access(BufKey::Partial(l, e.lane, sg, v), partial, true), &mut step);
                *step.na_elems.entry(e.lane).or_default() += 2 * e.cols as u64 + 2;
            }
            Stage::Defer => {}
            Stage::Sync => {
                let (sg, v) = (need(e.sg, "graph")?, need(e.vertex, "vertex")?);
                let r = na_buf.consume(BufKey::Partial(l, e.lane, sg, v), partial);
                charge(Access { hit: r == 0, read: r, written: 0 }, &mut step);
                *step.xbar.entry(e.lane).or_default() += e.bytes.div_ceil(CROSSBAR_BYTES_PER_CYCLE);
            }
            Stage::LSF => {
                let (sg, v) = (need(e.sg, "graph")?, need(e.vertex, "vertex")?);
                let r = na_buf.consume(BufKey::Partial(l, e.lane, sg, v), partial);
                charge(Access { hit: r == 0, read: r, written: 0 }, &mut step);
                charge(na_buf.access(BufKey::Semantic(l, sg, v), row, true), &mut step);
                let cols = e.cols as u64;
                let mut elems = 2 * cols;
                if e.rows > 1 {
                    elems += 2 * e.rows as u64;
                    let b = step.sem.entry(e.lane).or_insert((e.rows as u64, cols, 0));
                    b.2 += 1;
                }
                *step.lsf_elems.entry(e.lane).or_default() += elems;
                semantic.entry(sg).or_default().push(v);
            }
            Stage::GSF => {
                let sg = need(e.sg, "graph")?;
                let t = h.graphs[sg as usize].dst_type;
                for v in semantic.remove(&sg).unwrap_or_default() {
                    let r = na_buf.consume(BufKey::Semantic(l, sg, v), row);
                    charge(Access { hit: r == 0, read: r, written: 0 }, &mut step);
                    charge(sf_buf.access(BufKey::Fused(l, t, v), row, true), &mut step);
                    fused.entry(t).or_default().insert(v);
                }
                step.gsf_elems += 2 * e.rows as u64 * e.cols as u64;
            }
            Stage::Final => {
                let t = need(e.vtype, "type")?;
                // Models without graph-level fusion sum finalized targets here.
                let pending: Vec<u32> = semantic
                    .keys()
                    .copied()
                    .filter(|&sg| h.graphs[sg as usize].dst_type == t)
                    .collect();
                for sg in pending {
                    for v in semantic.remove(&sg).unwrap_or_default() {
                        let r = na_buf.consume(BufKey::Semantic(l, sg, v), row);
                        charge(Access { hit: r == 0, read: r, written: 0 }, &mut step);
                        charge(sf_buf.access(BufKey::Fused(l, t, v), row, true), &mut step);
                        fused.entry(t).or_default().insert(v);
                        step.final_elems += e.cols as u64;
                    }
                }
                for v in fused.remove(&t).unwrap_or_default() {
                    let r = sf_buf.consume(BufKey::Fused(l, t, v), row);
                    charge(Access { hit: r == 0, read: r, written: 0 }, &mut step);
                }
                let out = dram_line_bytes(e.bytes);
                charge(Access { hit: false, read: 0, written: out }, &mut step);
                step.final_elems += e.rows as u64 * e.cols as u64;
            }
        }
    }
    step.close(cfg, mode, &mut acc);

    let energy = energy(&acc, read + written, cfg);
    let busy = acc
        .lane_busy
        .iter()
        .map(|&b| if acc.total == 0 { 0.0 } else { b as f64 / acc.total as f64 })
        .collect();
    Ok(MetricsReport {
        schema_version: METRICS_SCHEMA_VERSION,
        mode,
        model: h.model,
        num_lanes: cfg.num_lanes,
        num_layers: h.num_layers,
        rounds_per_layer: h.rounds,
        events: trace.events.len() as u64,
        total_cycles: acc.total,
        stage_cycles: acc.stages,
        dram_read_bytes: read,
        dram_write_bytes: written,
        raw_feature_bytes: raw,
        fp_buf: fp_buf.stats(),
        na_buf: na_buf.stats(),
        sf_buf: sf_buf.stats(),
        systolic_busy_cycles: acc.sys,
        simd_busy_cycles: acc.simd,
        crossbar_busy_cycles: acc.xbar,
        lane_busy: busy,
        energy_total: energy.total(),
        energy,
        baseline: None,
    })
}

/// Per-lane modules draw their share of the reference chip's power while
/// busy; buffers and glue logic draw continuously.
fn energy(acc: &Totals, dram_bytes: u64, cfg: &HardwareConfig) -> EnergyBreakdown {
    let p = &cfg.power;
    let share = ModulePower::REFERENCE_LANES as f64;
    EnergyBreakdown {
        dram: dram_energy(dram_bytes, cfg),
        systolic: module_energy(p.systolic / share, acc.sys, cfg),
        simd: module_energy(p.simd / share, acc.simd, cfg),
        buffers: module_energy(p.buffers(), acc.total, cfg),
        crossbar: module_energy(p.crossbar / share, acc.xbar, cfg),
        other: module_energy(p.other, acc.total, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staged_phases_bound_fused_step() {
        let cfg = HardwareConfig::with_lanes(2);
        let mk = || {
            let mut s = Step::default();
            s.seen[FP] = true;
            s.seen[NA] = true;
            s.fp.insert((0, ProjectionKey::Type(0)), (64, 300, 40));
            s.na_elems.insert(1, 50_000);
            s.dram[FP] = 10_000;
            s
        };
        let run = |mode| {
            let mut acc = Totals {
                total: 0,
                stages: StageCycles::default(),
                sys: 0,
                simd: 0,
                xbar: 0,
                lane_busy: vec![0; 2],
            };
            mk().close(&cfg, mode, &mut acc);
            acc
        };
        let (f, s) = (run(Mode::Fused), run(Mode::Staged));
        assert!(f.total < s.total);
        assert_eq!(s.total, s.stages.sum());
        assert_eq!(f.stages, s.stages);
        assert_eq!(f.sys, s.sys);
    }
}
