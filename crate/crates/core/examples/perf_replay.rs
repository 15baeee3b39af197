//! Replays a fused-engine trace through the cycle model, once with all
//! stages overlapped and once stage by stage.
//!
//! `cargo run --release --example perf_replay`

use hihgnn::fusion::{run_fused, EngineConfig};
use hihgnn::graph::{gen_synthetic, DatasetShape};
use hihgnn::model::{default_semantic_graphs, ModelKind, ModelParams};
use hihgnn::perf::{replay, HardwareConfig, Mode};
use hihgnn::schedule::{build_hypergraph, shortest_hamilton_path};

fn main() -> hihgnn::Result<()> {
    let g = gen_synthetic(&DatasetShape::Dblp.spec(0.05, 0.02, 7))?;
    let kind = ModelKind::Han;
    let sgs = default_semantic_graphs(&g, kind)?;
    let params = ModelParams::generate(kind, &g, &sgs, 7)?;
    let order = shortest_hamilton_path(&build_hypergraph(&sgs)?);
    let run = run_fused(&g, &sgs, &order, &params, &EngineConfig::default())?;

    let hw = HardwareConfig::default();
    let staged = replay(&run.trace, &order, &run.plan, &hw, Mode::Staged)?;
    let fused = replay(&run.trace, &order, &run.plan, &hw, Mode::Fused)?.with_baseline("staged", &staged);

    for m in [&staged, &fused] {
        println!(
            "{:<6} {:>8} cycles ({:.1} us), DRAM {:>9} B, energy {:.3e} J",
            m.mode.to_string(),
            m.total_cycles,
            m.seconds(&hw) * 1e6,
            m.dram_bytes(),
            m.energy_total,
        );
    }
    let s = &staged.stage_cycles;
    println!("staged phases: FP {} NA {} LSF {} GSF {} final {}", s.fp, s.na, s.lsf, s.gsf, s.final_);
    if let Some(b) = &fused.baseline {
        println!("fused speedup over {}: {:.2}x", b.name, b.speedup);
    }
    println!("FP-Buf hit rate {:.3}, NA-Buf {:.3}", fused.fp_buf.hit_rate, fused.na_buf.hit_rate);
    Ok(())
}
