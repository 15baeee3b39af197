//! Edge-driven fused execution: projection, attention, aggregation and
//! semantic fusion interleaved per lane and per round, with projection reuse
//! tracked by a per-vertex status bitmap.

mod engine;
mod rab;
mod trace;

pub use engine::{run_fused, EngineConfig, FusedRun, Precision, TaskState};
pub use rab::{Rab, RabCode};
pub use trace::{Event, EventTrace, GraphInfo, Reuse, Stage, TraceHeader};
