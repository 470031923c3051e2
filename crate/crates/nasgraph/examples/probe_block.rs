//! Edge scores of one hand-built graph block.
//!
//! A Conv1x1 with weights `[+1, -1]` into a single output: probing the first
//! channel reaches the output with score 4 on a 2x2 input, probing the second
//! is cut off by the ReLU.

use nasgraph::archspec::{BlockKind, CombineMode, OperationKind};
use nasgraph::graphify::{edge_scores_with, FusedOp, GraphBlock, Predecessor, ProbeCounter, ProbeStrategy};
use nasgraph::tensorlite::ConvParams;

fn main() -> Result<(), nasgraph::Error> {
    let conv = ConvParams::square(1, 2, 1, 1, 0, vec![1.0, -1.0])?;
    let block = GraphBlock::new(
        1,
        BlockKind::CellOp(OperationKind::Conv1x1),
        2,
        (2, 2),
        vec![FusedOp::Conv(conv), FusedOp::Relu],
        vec![Predecessor {
            block_id: 0,
            mode: CombineMode::Sum,
            channel_offset: 0,
            channels: 2,
        }],
    )?;
    let counter = ProbeCounter::new();
    let scores = edge_scores_with(&block, ProbeStrategy::Sequential, &counter)?;
    println!("{} probes", counter.get());
    for (row, src) in scores.sources.iter().enumerate() {
        println!(
            "  block {} channel {} -> {:?}",
            src.pred_block,
            src.pred_channel,
            scores.row(row)
        );
    }
    assert_eq!(scores.as_matrix(), vec![vec![4.0], vec![0.0]]);
    Ok(())
}
