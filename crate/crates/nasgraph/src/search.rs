//! Random search with a single proxy metric.
//!
//! A trial samples `N` distinct candidates from the pool, keeps the first one
//! with a strictly larger score than everything before it, and reports its
//! benchmark accuracy alongside the best accuracy in the sampled subset.
//! The subset depends only on `(pool length, N, seed)`, so every metric run
//! with the same seed sees the same architectures.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("pool of {pool} architectures cannot supply {requested} samples")]
    PoolTooSmall { pool: usize, requested: usize },
    #[error("sample count and trial count must be positive")]
    ZeroBudget,
}

/// Validation and test accuracy of one architecture, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Accuracy {
    pub val: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_arch_id: usize,
    pub best_score: f64,
    pub chosen_val_acc: Option<f64>,
    pub chosen_test_acc: Option<f64>,
    pub gt_val_acc: Option<f64>,
    pub gt_test_acc: Option<f64>,
    /// Sampled architecture ids in draw order.
    pub sampled: Vec<usize>,
}

/// Draws `n` distinct positions of a pool of `pool_len` with ChaCha8 seeded by `seed`.
pub fn sample_subset(pool_len: usize, n: usize, seed: u64) -> Result<Vec<usize>, SearchError> {
    if n == 0 {
        return Err(SearchError::ZeroBudget);
    }
    if pool_len < n {
        return Err(SearchError::PoolTooSmall {
            pool: pool_len,
            requested: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, pool_len, n).into_vec())
}

pub fn random_search<M, A>(
    pool: &[usize],
    metric: M,
    accuracy: A,
    n: usize,
    seed: u64,
) -> Result<SearchResult, SearchError>
where
    M: Fn(usize) -> f64,
    A: Fn(usize) -> Option<Accuracy>,
{
    let sampled: Vec<usize> = sample_subset(pool.len(), n, seed)?
        .into_iter()
        .map(|i| pool[i])
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for &id in &sampled {
        let score = metric(id);
        let better = best.is_none_or(|(_, top)| score > top);
        if better {
            best = Some((id, score));
        }
    }
    let (best_arch_id, best_score) = best.expect("n >= 1");

    let accs: Option<Vec<Accuracy>> = sampled.iter().map(|&id| accuracy(id)).collect();
    let chosen = accuracy(best_arch_id);
    let max_of = |f: fn(&Accuracy) -> f64| {
        accs.as_ref()
            .map(|a| a.iter().map(f).fold(f64::NEG_INFINITY, f64::max))
    };

    Ok(SearchResult {
        best_arch_id,
        best_score,
        chosen_val_acc: chosen.map(|a| a.val),
        chosen_test_acc: chosen.map(|a| a.test),
        gt_val_acc: max_of(|a| a.val),
        gt_test_acc: max_of(|a| a.test),
        sampled,
    })
}

/// Mean and population standard deviation over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialStats {
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

impl TrialStats {
    pub fn from_values(values: &[f64]) -> Option<TrialStats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(TrialStats {
            mean,
            std: var.sqrt(),
            trials: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub chosen_val: Option<TrialStats>,
    pub chosen_test: Option<TrialStats>,
    pub gt_val: Option<TrialStats>,
    pub gt_test: Option<TrialStats>,
    pub results: Vec<SearchResult>,
}

impl TrialReport {
    fn from_results(results: Vec<SearchResult>) -> Self {
        let stats = |f: fn(&SearchResult) -> Option<f64>| {
            results
                .iter()
                .map(f)
                .collect::<Option<Vec<f64>>>()
                .and_then(|v| TrialStats::from_values(&v))
        };
        TrialReport {
            chosen_val: stats(|r| r.chosen_val_acc),
            chosen_test: stats(|r| r.chosen_test_acc),
            gt_val: stats(|r| r.gt_val_acc),
            gt_test: stats(|r| r.gt_test_acc),
            results,
        }
    }

    /// Combines a run that selected by validation accuracy with one that
    /// selected by test accuracy: validation columns from the first, test
    /// columns from the second. Both must use the same seeds.
    pub fn merge_columns(val_run: TrialReport, test_run: TrialReport) -> TrialReport {
        let results = val_run
            .results
            .into_iter()
            .zip(test_run.results)
            .map(|(v, t)| SearchResult {
                chosen_test_acc: t.chosen_test_acc,
                ..v
            })
            .collect();
        TrialReport::from_results(results)
    }
}

/// Runs `trials` searches with seeds `base_seed, base_seed + 1, ...` in
/// parallel; results come back in seed order.
pub fn repeated_trials<M, A>(
    pool: &[usize],
    metric: M,
    accuracy: A,
    n: usize,
    trials: usize,
    base_seed: u64,
) -> Result<TrialReport, SearchError>
where
    M: Fn(usize) -> f64 + Sync,
    A: Fn(usize) -> Option<Accuracy> + Sync,
{
    if trials == 0 {
        return Err(SearchError::ZeroBudget);
    }
    let results = (0..trials as u64)
        .into_par_iter()
        .map(|t| random_search(pool, &metric, &accuracy, n, base_seed.wrapping_add(t)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialReport::from_results(results))
}
