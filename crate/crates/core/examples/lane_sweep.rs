//! Drives the same experiment through the configuration layer used by the
//! `hihgnn` binary and sweeps the lane count.

use hihgnn::cli::{prepare, simulate, ExperimentConfig};

const CONFIG: &str = r#"
seed = 42
model = "rgat"

[dataset]
kind = "preset"
shape = "dblp"
scale = 0.05
feature_scale = 0.02

[engine]
threshold = 128
"#;

fn main() -> hihgnn::Result<()> {
    let mut base = ExperimentConfig::parse(CONFIG)?;
    base.validate()?;
    let prep = prepare(&base)?;

    let mut first = None;
    for lanes in [1, 2, 4, 8] {
        let mut cfg = base.clone();
        cfg.engine.lanes = lanes;
        cfg.validate()?;
        let m = simulate(&cfg, &prep)?.metrics;
        let t1 = *first.get_or_insert(m.total_cycles);
        println!(
            "{lanes} lanes: {:>8} cycles, speedup {:.2}x, DRAM {} B",
            m.total_cycles,
            t1 as f64 / m.total_cycles as f64,
            m.dram_bytes()
        );
    }
    Ok(())
}
