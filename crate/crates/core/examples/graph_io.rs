//! Serializes a synthetic graph to the text format and parses it back.
//! The text form is canonical, so a second write is byte-identical.

use hihgnn::graph::{gen_synthetic, parse_hetgraph, write_hetgraph, SyntheticSpec};

fn main() -> hihgnn::Result<()> {
    let g = gen_synthetic(&SyntheticSpec::random_small(9, 200))?;

    let mut text = Vec::new();
    write_hetgraph(&g, &mut text)?;
    let text = String::from_utf8(text).expect("graph text is UTF-8");
    for line in text.lines().take(12) {
        println!("{line}");
    }
    println!("...");

    let back = parse_hetgraph(&text)?;
    let mut again = Vec::new();
    write_hetgraph(&back, &mut again)?;
    println!("{} bytes, reparsed identically: {}", text.len(), again == text.as_bytes());
    Ok(())
}
