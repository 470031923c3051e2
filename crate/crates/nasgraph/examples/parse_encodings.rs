//! Both cell encodings, the canonical string form, and typical rejections.
//!
//! ```text
//! cargo run --example parse_encodings
//! ```

use nasgraph::archspec::{parse_adjacency_cell, parse_cell, parse_nb201_arch, NodeLabel};

fn main() -> Result<(), nasgraph::Error> {
    let text = "|nor_conv_3x3~0|+|nor_conv_3x3~0|avg_pool_3x3~1|+|skip_connect~0|nor_conv_3x3~1|skip_connect~2|";
    let cell = parse_nb201_arch(text)?;
    println!("{} nodes, op histogram {:?}", cell.node_count(), cell.op_histogram());
    for e in cell.edges() {
        println!("  node {} -> node {}: {}", e.src, e.dst, e.op);
    }
    assert_eq!(cell.to_nb201_string().as_deref(), Some(text));

    // Adjacency form: labels name the operation applied on entry to each node.
    let matrix = [[0u8, 1, 1, 0], [0, 0, 0, 1], [0, 0, 0, 1], [0, 0, 0, 0]];
    let labels: Vec<NodeLabel> = ["input", "conv3x3-bn-relu", "avgpool3x3", "output"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let adj = parse_adjacency_cell(&matrix, &labels)?;
    println!("adjacency cell: {adj}");

    let json = r#"{"matrix": [[0, 1], [0, 0]], "ops": ["input", "output"]}"#;
    println!("json cell: {}", parse_cell(json)?);

    for bad in [
        "|nor_conv_3x3~0|+|none~0|",
        "|nor_conv_5x5~0|+|none~0|none~1|+|none~0|none~1|none~2|",
        "|none~1|+|none~0|none~1|+|none~0|none~1|none~2|",
    ] {
        println!("rejected {bad:?}: {}", parse_nb201_arch(bad).unwrap_err());
    }
    Ok(())
}
