//! How much rankings move between initialization seeds.
//!
//! ```text
//! cargo run --release --example seed_stability
//! ```

use nasgraph::archspec::{expand, SurrogateConfig};
use nasgraph::graphify::score_per_seed;
use nasgraph::measures::MeasureKind;
use nasgraph::ranker;
use nasgraph::synthetic;
use rayon::prelude::*;

fn main() -> Result<(), nasgraph::Error> {
    let seeds: Vec<u64> = (0..4).collect();
    let cells = synthetic::distinct_cells(40, 0);
    let per_arch = cells
        .par_iter()
        .map(|c| {
            let arch = expand(c, SurrogateConfig::default())?;
            Ok(score_per_seed(&arch, MeasureKind::AvgDeg, &seeds)?)
        })
        .collect::<Result<Vec<Vec<f64>>, nasgraph::Error>>()?;
    let column = |s: usize| per_arch.iter().map(|v| v[s]).collect::<Vec<f64>>();
    println!("{} architectures, avg_deg at NASGraph(16, 1, 3)", cells.len());
    for i in 0..seeds.len() {
        for j in i + 1..seeds.len() {
            let (a, b) = (column(i), column(j));
            let (ra, rb) = (ranker::rank_with_ties(&a)?, ranker::rank_with_ties(&b)?);
            println!(
                "seeds {i},{j}: rho {:.4}  pair rank difference {}",
                ranker::spearman_rho(&a, &b)?,
                ranker::pair_rank_difference(&ra, &rb)?
            );
        }
    }
    Ok(())
}
