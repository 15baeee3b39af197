//! Orders semantic graphs so that consecutive graphs share vertex types,
//! and compares the path cost with a few random orders.

use hihgnn::graph::{gen_synthetic, DatasetShape};
use hihgnn::model::{default_semantic_graphs, ModelKind};
use hihgnn::schedule::{build_hypergraph, path_cost, random_order, shortest_hamilton_path};

fn main() -> hihgnn::Result<()> {
    let g = gen_synthetic(&DatasetShape::Acm.spec(0.05, 0.02, 2))?;
    let sgs = default_semantic_graphs(&g, ModelKind::Rgat)?;
    let h = build_hypergraph(&sgs)?;

    println!("pairwise similarity:");
    for (i, sg) in sgs.iter().enumerate() {
        let row: Vec<String> = (0..h.len()).map(|j| format!("{:.2}", h.weight(i, j))).collect();
        println!("  {:<5} {}", sg.id, row.join(" "));
    }

    let best = shortest_hamilton_path(&h);
    println!("shortest path: {} (cost {:.4})", best.ids.join(" -> "), best.cost);
    for seed in 0..3 {
        let r = random_order(&h, seed);
        println!("random #{seed}:     {} (cost {:.4})", r.ids.join(" -> "), path_cost(&h, &r.ids)?);
    }
    Ok(())
}
