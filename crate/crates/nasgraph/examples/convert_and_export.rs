//! Converts one architecture and writes the graph as DOT and TSV.
//!
//! ```text
//! cargo run --release --example convert_and_export -- /tmp/arch
//! dot -Tsvg /tmp/arch.dot > arch.svg
//! ```

use nasgraph::archspec::{expand, parse_nb201_arch, SurrogateConfig};
use nasgraph::graphify::convert;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stem = std::env::args().nth(1);
    let cell = parse_nb201_arch(
        "|nor_conv_1x1~0|+|skip_connect~0|nor_conv_3x3~1|+|none~0|avg_pool_3x3~1|nor_conv_3x3~2|",
    )?;
    let arch = expand(&cell, SurrogateConfig::new(4, 1, 2).with_probe_resolution(16))?;
    println!("{} blocks in the plan", arch.block_plan.len());
    let graph = convert(&arch, 0)?;
    println!("{} nodes, {} edges", graph.node_count(), graph.edge_count());
    match stem {
        Some(stem) => {
            std::fs::write(format!("{stem}.dot"), graph.to_dot())?;
            std::fs::write(format!("{stem}.tsv"), graph.to_tsv())?;
            println!("wrote {stem}.dot and {stem}.tsv");
        }
        None => {
            for line in graph.to_tsv().lines().take(8) {
                println!("  {line}");
            }
            println!("  ...");
        }
    }
    Ok(())
}
