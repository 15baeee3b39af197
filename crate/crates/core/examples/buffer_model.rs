//! The on-chip buffer model on its own: hits, LRU eviction and the
//! write-back traffic a spilled entry costs.

use hihgnn::perf::{BufKey, BufferModel};

fn main() {
    // Room for two 256-byte vectors.
    let mut buf = BufferModel::new(512, 64);
    let key = |v| BufKey::Semantic(0, 0, v);

    for (v, write) in [(0, true), (1, true), (0, false), (2, true), (1, false)] {
        let a = buf.access(key(v), 256, write);
        println!(
            "{} v{v}: hit={:<5} read {:>3} B, written {:>3} B, resident {} B",
            if write { "write" } else { "read " },
            a.hit,
            a.read,
            a.written,
            buf.resident_bytes()
        );
    }
    let s = buf.stats();
    println!("{} accesses, hit rate {:.2}", s.accesses, s.hit_rate);
}
