//! Writes a fused run's event trace as NDJSON, reads it back and tallies
//! events per stage.

use std::io::Cursor;

use hihgnn::fusion::{run_fused, EngineConfig, EventTrace, Stage};
use hihgnn::graph::{gen_synthetic, SyntheticSpec};
use hihgnn::model::{default_semantic_graphs, ModelKind, ModelParams};
use hihgnn::schedule::{build_hypergraph, shortest_hamilton_path};

fn main() -> hihgnn::Result<()> {
    let g = gen_synthetic(&SyntheticSpec::random_small(5, 600))?;
    let kind = ModelKind::Shgn;
    let sgs = default_semantic_graphs(&g, kind)?;
    let params = ModelParams::generate(kind, &g, &sgs, 5)?;
    let order = shortest_hamilton_path(&build_hypergraph(&sgs)?);
    let run = run_fused(&g, &sgs, &order, &params, &EngineConfig { num_lanes: 2, ..Default::default() })?;

    let mut buf = Vec::new();
    run.trace.write_ndjson(&mut buf)?;
    let back = EventTrace::read_ndjson(Cursor::new(&buf))?;
    back.check_closure()?;
    assert_eq!(back.events.len(), run.trace.events.len());

    println!("{} bytes of NDJSON, {} events", buf.len(), back.events.len());
    for s in [Stage::FP, Stage::Theta, Stage::NA, Stage::Defer, Stage::Sync, Stage::LSF, Stage::GSF, Stage::Final] {
        println!("  {s:?}: {}", back.count(s));
    }
    Ok(())
}
