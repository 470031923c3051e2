//! The four graph measures, on a toy graph and on converted architectures.

use nasgraph::archspec::{expand, parse_nb201_arch, SurrogateConfig};
use nasgraph::graphify::{convert, ArchGraph};
use nasgraph::measures::MeasureKind;

fn main() -> Result<(), nasgraph::Error> {
    let triangle = ArchGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)])?;
    for m in MeasureKind::ALL {
        println!("triangle {m:<10} {}", m.evaluate(&triangle)?);
    }

    let surrogate = SurrogateConfig::default();
    for text in [
        "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|",
        "|skip_connect~0|+|skip_connect~0|skip_connect~1|+|skip_connect~0|skip_connect~1|skip_connect~2|",
        "|nor_conv_3x3~0|+|nor_conv_3x3~0|nor_conv_3x3~1|+|nor_conv_3x3~0|nor_conv_3x3~1|nor_conv_3x3~2|",
    ] {
        let graph = convert(&expand(&parse_nb201_arch(text)?, surrogate)?, 0)?;
        let values: Vec<String> = MeasureKind::ALL
            .iter()
            .map(|m| m.evaluate(&graph).map(|v| format!("{m}={v:.4}")))
            .collect::<Result<_, _>>()?;
        println!("{text}\n  {}", values.join("  "));
    }
    Ok(())
}
