//! Throughput-level hardware model. An [`EventTrace`](crate::fusion::EventTrace)
//! is replayed against lane compute resources, on-chip buffers and HBM
//! bandwidth to produce cycles, traffic, utilization and energy.

mod buffer;
mod replay;

pub use buffer::{Access, BufKey, BufferModel, BufferStats};
pub use replay::{replay, EnergyBreakdown, MetricsReport, Mode, StageCycles, METRICS_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MB: f64 = 1024.0 * 1024.0;

/// Systolic array edge length.
pub const ARRAY_DIM: u64 = 8;
/// Steady-state cycles per 8x8 weight tile.
pub const TILE_CYCLES: u64 = 8;
/// Fill and drain overhead of one array activation.
pub const ARRAY_FILL: u64 = 16;
/// DRAM access granularity in bytes.
pub const DRAM_LINE: u64 = 64;
/// Crossbar port width in bytes per cycle.
pub const CROSSBAR_BYTES_PER_CYCLE: u64 = 64;

/// Module power draw of the four-lane chip, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulePower {
    pub systolic: f64,
    pub simd: f64,
    pub fp_buf: f64,
    pub na_buf: f64,
    pub sf_buf: f64,
    pub att_buf: f64,
    pub crossbar: f64,
    pub other: f64,
}

impl Default for ModulePower {
    fn default() -> Self {
        Self {
            systolic: 6.7584,
            simd: 3.2768,
            fp_buf: 0.2029,
            na_buf: 1.20742,
            sf_buf: 0.00998,
            att_buf: 0.0316,
            crossbar: 0.44082,
            other: 0.07395,
        }
    }
}

impl ModulePower {
    /// Lane count the figures were measured at; per-lane modules scale from it.
    pub const REFERENCE_LANES: usize = 4;

    pub fn buffers(&self) -> f64 {
        self.fp_buf + self.na_buf + self.sf_buf + self.att_buf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub num_lanes: usize,
    pub clock_hz: f64,
    pub systolic_arrays_per_lane: u64,
    pub simd_cores_per_lane: u64,
    pub simd_width: u64,
    pub fp_buf_bytes: u64,
    pub na_buf_bytes: u64,
    pub sf_buf_bytes: u64,
    pub att_buf_bytes: u64,
    pub dram_bytes_per_cycle: u64,
    pub dram_energy_per_bit: f64,
    pub element_bytes: u64,
    /// Pipeline fill charged once per synchronized step.
    pub fill_cycles: u64,
    pub power: ModulePower,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            num_lanes: 4,
            clock_hz: 1e9,
            systolic_arrays_per_lane: 96,
            simd_cores_per_lane: 128,
            simd_width: 8,
            fp_buf_bytes: (2.44 * MB).round() as u64,
            na_buf_bytes: (14.52 * MB).round() as u64,
            sf_buf_bytes: (0.12 * MB).round() as u64,
            att_buf_bytes: (0.38 * MB).round() as u64,
            dram_bytes_per_cycle: 512,
            dram_energy_per_bit: 7e-12,
            element_bytes: 4,
            fill_cycles: ARRAY_FILL,
            power: ModulePower::default(),
        }
    }
}

impl HardwareConfig {
    pub fn with_lanes(num_lanes: usize) -> Self {
        Self { num_lanes, ..Self::default() }
    }

    /// Every capacity must hold at least one `row_elems`-wide row.
    pub fn validate(&self, row_elems: u64) -> Result<()> {
        let ints = [
            ("num_lanes", self.num_lanes as u64),
            ("systolic_arrays_per_lane", self.systolic_arrays_per_lane),
            ("simd_cores_per_lane", self.simd_cores_per_lane),
            ("simd_width", self.simd_width),
            ("dram_bytes_per_cycle", self.dram_bytes_per_cycle),
            ("element_bytes", self.element_bytes),
        ];
        for (name, v) in ints {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let positive = |x: f64| x > 0.0;
        let non_negative = |x: f64| x >= 0.0;
        if !positive(self.clock_hz) || !non_negative(self.dram_energy_per_bit) {
            return Err(Error::Config("clock and energy constants must be positive".into()));
        }
        let p = &self.power;
        if [p.systolic, p.simd, p.fp_buf, p.na_buf, p.sf_buf, p.att_buf, p.crossbar, p.other]
            .iter()
            .any(|&w| !non_negative(w))
        {
            return Err(Error::Config("module power must be non-negative".into()));
        }
        let row = row_elems * self.element_bytes;
        for (name, cap) in [
            ("fp_buf_bytes", self.fp_buf_bytes),
            ("na_buf_bytes", self.na_buf_bytes),
            ("sf_buf_bytes", self.sf_buf_bytes),
            ("att_buf_bytes", self.att_buf_bytes),
        ] {
            if cap < row {
                return Err(Error::Config(format!("{name} = {cap} cannot hold one {row}-byte row")));
            }
        }
        Ok(())
    }

    pub fn simd_lanes_total(&self) -> u64 {
        self.simd_cores_per_lane * self.simd_width
    }
}

/// One matrix-vector product of a `rows x cols` weight on `arrays` arrays.
pub fn mvm_cycles(rows: u64, cols: u64, arrays: u64) -> u64 {
    mvm_batch_cycles(rows, cols, 1, arrays)
}

/// `vectors` products sharing one weight. Each resident tile streams up to
/// eight vectors per pass.
pub fn mvm_batch_cycles(rows: u64, cols: u64, vectors: u64, arrays: u64) -> u64 {
    if rows == 0 || cols == 0 || vectors == 0 {
        return 0;
    }
    let tiles = rows.div_ceil(ARRAY_DIM) * cols.div_ceil(ARRAY_DIM);
    let passes = tiles * vectors.div_ceil(ARRAY_DIM);
    passes.div_ceil(arrays.max(1)) * TILE_CYCLES + ARRAY_FILL
}

pub fn simd_cycles(elements: u64, cores: u64) -> u64 {
    elements.div_ceil(cores.max(1) * 8)
}

/// Bytes moved for a `bytes`-long transfer at line granularity.
pub fn dram_line_bytes(bytes: u64) -> u64 {
    bytes.div_ceil(DRAM_LINE) * DRAM_LINE
}

pub fn dram_cycles(bytes: u64, cfg: &HardwareConfig) -> u64 {
    bytes.div_ceil(cfg.dram_bytes_per_cycle)
}

/// Looks `key` up in `buffer`; a miss on spilled data is charged to DRAM.
/// Returns `(cycles, bytes_from_dram)`.
pub fn dram_access(bytes: u64, cfg: &HardwareConfig, buffer: &mut BufferModel, key: BufKey) -> (u64, u64) {
    let a = buffer.fetch(key, bytes);
    (dram_cycles(a.read + a.written, cfg), a.read)
}

pub fn dram_energy(bytes: u64, cfg: &HardwareConfig) -> f64 {
    bytes as f64 * 8.0 * cfg.dram_energy_per_bit
}

pub fn module_energy(power_w: f64, busy_cycles: u64, cfg: &HardwareConfig) -> f64 {
    power_w * busy_cycles as f64 / cfg.clock_hz
}
