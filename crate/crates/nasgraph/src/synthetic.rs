//! Synthetic benchmarks for tests and examples.
//!
//! Real NAS-Bench-201 accuracies are not bundled. These generators draw
//! distinct random cells and attach accuracies that are either a strictly
//! increasing function of a graph measure or independent noise, so the
//! expected correlation of that measure is known in advance.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::archspec::{self, CellSpec};
use crate::harness::{self, BenchmarkRecord, HarnessError, ScoreConfig};
use crate::search::Accuracy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyModel {
    /// `test = 100 s / (s + 1)`, `val = 100 s / (s + 2)` for measure value `s >= 0`.
    MonotoneInScore,
    /// Uniform in `[10, 90]`, independent of the architecture.
    Noise,
}

/// `count` distinct cells drawn with `sample_random_cell(seed), sample_random_cell(seed + 1), ...`.
pub fn distinct_cells(count: usize, seed: u64) -> Vec<CellSpec> {
    let mut seen = HashSet::new();
    let mut cells = Vec::with_capacity(count);
    let mut s = seed;
    while cells.len() < count {
        let cell = archspec::sample_random_cell(s);
        s = s.wrapping_add(1);
        if seen.insert(cell.clone()) {
            cells.push(cell);
        }
    }
    cells
}

/// A benchmark of `count` architectures with accuracies under `dataset`.
pub fn benchmark(
    count: usize,
    seed: u64,
    dataset: &str,
    model: AccuracyModel,
    config: &ScoreConfig,
    jobs: usize,
) -> Result<Vec<BenchmarkRecord>, HarnessError> {
    let cells = distinct_cells(count, seed);
    let accs: Vec<Accuracy> = match model {
        AccuracyModel::MonotoneInScore => {
            let refs: Vec<&CellSpec> = cells.iter().collect();
            harness::score_cells(&refs, config, jobs)?
                .into_iter()
                .map(|s| Accuracy {
                    val: 100.0 * s / (s + 2.0),
                    test: 100.0 * s / (s + 1.0),
                })
                .collect()
        }
        AccuracyModel::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            (0..count)
                .map(|_| Accuracy {
                    val: rng.random_range(10.0..90.0),
                    test: rng.random_range(10.0..90.0),
                })
                .collect()
        }
    };
    Ok(cells
        .into_iter()
        .zip(accs)
        .map(|(cell, acc)| BenchmarkRecord {
            arch: cell.to_nb201_string().expect("sampled cells are complete"),
            cell,
            accuracies: BTreeMap::from([(dataset.to_string(), acc)]),
        })
        .collect())
}
