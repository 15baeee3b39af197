//! Builds a DBLP-shaped graph and lists its relations and the metapath
//! graphs HAN runs over.
//!
//! `cargo run --example semantic_graphs`

use hihgnn::graph::{build_metapath_graph, gen_synthetic, DatasetShape};

fn main() -> hihgnn::Result<()> {
    let g = gen_synthetic(&DatasetShape::Dblp.spec(0.1, 0.02, 1))?;

    println!("vertex types:");
    for t in g.vertex_types() {
        println!("  {:<3} {:>6} vertices, {:>3}-dim features", t.name, t.count, t.feature_dim);
    }
    println!("relations:");
    for (name, n) in g.edge_counts() {
        println!("  {name:<4} {n:>7} edges");
    }

    println!("metapath graphs:");
    for m in g.metapaths() {
        let sg = build_metapath_graph(&g, m)?;
        println!(
            "  {:<6} {:>8} edges, {:>5} targets with neighbors",
            sg.id,
            sg.num_edges(),
            sg.targets.len()
        );
    }
    Ok(())
}
