//! Heterogeneous graph neural network inference on a multi-lane
//! accelerator model.
//!
//! The crate has two halves. The functional half computes exact embeddings
//! for HAN, R-GAT, R-GCN and S-HGN, once with a straightforward
//! layer-by-layer reference ([`model::run_oracle`]) and once with the fused
//! engine ([`fusion::run_fused`]) that interleaves projection, neighbor
//! aggregation and semantic fusion over several lanes. The engine emits an
//! event trace, and [`perf::replay`] turns that trace into cycles, DRAM
//! traffic, buffer hit rates and energy.
//!
//! Modules:
//!
//! - [`graph`]: typed vertices and relations in CSC form, metapath
//!   composition, the text format and seeded synthetic generators.
//! - [`model`]: model kinds, weights and the reference implementation.
//! - [`schedule`]: similarity-ordered execution of semantic graphs and the
//!   per-round lane plan.
//! - [`fusion`]: the fused engine and its trace.
//! - [`perf`]: hardware parameters, buffer model and trace replay.
//! - [`cli`]: TOML experiment configs and the commands behind the `hihgnn`
//!   binary.
//!
//! ```no_run
//! use hihgnn::fusion::{run_fused, EngineConfig};
//! use hihgnn::graph::{gen_synthetic, DatasetShape};
//! use hihgnn::model::{default_semantic_graphs, run_oracle, ModelKind, ModelParams};
//! use hihgnn::schedule::{build_hypergraph, shortest_hamilton_path};
//!
//! # fn main() -> hihgnn::Result<()> {
//! let g = gen_synthetic(&DatasetShape::Dblp.spec(0.05, 0.02, 1))?;
//! let sgs = default_semantic_graphs(&g, ModelKind::Han)?;
//! let params = ModelParams::generate(ModelKind::Han, &g, &sgs, 1)?;
//! let order = shortest_hamilton_path(&build_hypergraph(&sgs)?);
//! let run = run_fused(&g, &sgs, &order, &params, &EngineConfig::default())?;
//! let err = run.result.max_relative_error(&run_oracle(&g, &sgs, &params)?)?;
//! assert!(err < 1e-9);
//! # Ok(())
//! # }
//! ```
//!
//! Every run is deterministic for a given seed. Random streams are derived
//! per purpose with [`rng::stream`], so adding a consumer does not shift the
//! others.

pub mod cli;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod model;
pub mod perf;
pub mod rng;
pub mod schedule;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::FeatureMatrix;
