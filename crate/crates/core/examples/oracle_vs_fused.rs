//! Runs every model through the layer-by-layer reference and the fused
//! multi-lane engine, then reports how far the embeddings drift apart.
//!
//! `cargo run --release --example oracle_vs_fused`

use hihgnn::fusion::{run_fused, EngineConfig};
use hihgnn::graph::{gen_synthetic, DatasetShape};
use hihgnn::model::{default_semantic_graphs, run_oracle, ModelKind, ModelParams};
use hihgnn::schedule::{build_hypergraph, shortest_hamilton_path};

fn main() -> hihgnn::Result<()> {
    let g = gen_synthetic(&DatasetShape::Imdb.spec(0.05, 0.02, 3))?;
    let cfg = EngineConfig { num_lanes: 4, threshold: 64, ..EngineConfig::default() };

    for kind in [ModelKind::Han, ModelKind::Rgat, ModelKind::Rgcn, ModelKind::Shgn] {
        let sgs = default_semantic_graphs(&g, kind)?;
        let params = ModelParams::generate(kind, &g, &sgs, 11)?;
        let order = shortest_hamilton_path(&build_hypergraph(&sgs)?);

        let reference = run_oracle(&g, &sgs, &params)?;
        let fused = run_fused(&g, &sgs, &order, &params, &cfg)?;
        let err = fused.result.max_relative_error(&reference)?;
        println!(
            "{:<6} {} graphs, {:>6} events, max relative error {err:.2e}",
            kind.name(),
            sgs.len(),
            fused.trace.events.len()
        );
    }
    Ok(())
}
