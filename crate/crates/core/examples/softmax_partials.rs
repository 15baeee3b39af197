//! Aggregates one target's neighbors on three lanes and merges the partial
//! softmax sums back on the native lane. The merged result matches a direct
//! softmax-weighted sum.

use std::collections::HashMap;

use hihgnn::schedule::{sync_partials, Partial};

fn main() -> hihgnn::Result<()> {
    let logits = [0.3, -1.2, 2.0, 0.7, -0.1, 1.1];
    let values: Vec<[f64; 2]> = (0..logits.len()).map(|i| [i as f64, 1.0 - i as f64 * 0.5]).collect();

    // Shift by the global max the way the engine does; any shift works.
    let shift = logits.iter().cloned().fold(f64::MIN, f64::max);
    let mut lanes: Vec<HashMap<u32, Partial>> = vec![HashMap::new(); 3];
    for (i, (&e, x)) in logits.iter().zip(&values).enumerate() {
        let p = lanes[i % 3].entry(7).or_insert_with(|| Partial::zeros(2));
        let w = (e - shift).exp();
        p.den += w;
        p.num[0] += w * x[0];
        p.num[1] += w * x[1];
    }

    let (merged, senders) = sync_partials(0, &mut lanes, &7)?;
    let fused: Vec<f64> = merged.num.iter().map(|n| n / merged.den).collect();

    let z: f64 = logits.iter().map(|e| e.exp()).sum();
    let direct: Vec<f64> = (0..2)
        .map(|c| logits.iter().zip(&values).map(|(e, x)| e.exp() / z * x[c]).sum())
        .collect();

    println!("lanes that sent partials: {senders:?}");
    println!("merged {fused:?}");
    println!("direct {direct:?}");
    Ok(())
}
