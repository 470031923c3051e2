//! Rank statistics between proxy scores and benchmark accuracies.
//!
//! Ranking is always descending: the highest score gets rank 1 and tied
//! scores share the mean of the ranks they span.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::archspec::{CellSpec, OperationKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankError {
    #[error("empty input")]
    EmptyInput,
    #[error("score at position {0} is not finite")]
    NonFiniteScore(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("rank tables cover different architectures: {0}")]
    MismatchedUniverse(String),
    #[error("top fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
}

/// Descending ranks with average-rank ties.
pub fn rank_with_ties(scores: &[f64]) -> Result<Vec<f64>, RankError> {
    if scores.is_empty() {
        return Err(RankError::EmptyInput);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(RankError::NonFiniteScore(i));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite"));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]];
        let end = start + order[start..].iter().take_while(|&&i| scores[i] == value).count();
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        order[start..end].iter().for_each(|&i| ranks[i] = rank);
        start = end;
    }
    Ok(ranks)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), RankError> {
    if x.len() != y.len() {
        return Err(RankError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(RankError::DegenerateInput("need at least two observations"));
    }
    Ok(())
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, RankError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RankError::DegenerateInput("zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the tied ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, RankError> {
    check_pair(x, y)?;
    pearson(&rank_with_ties(x)?, &rank_with_ties(y)?)
}

/// Kendall tau-b, `(n_c - n_d) / sqrt((n0 - n1)(n0 - n2))`, in O(n log n)
/// (Knight's merge-sort formulation).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, RankError> {
    check_pair(x, y)?;
    for v in [x, y] {
        if let Some(i) = v.iter().position(|s| !s.is_finite()) {
            return Err(RankError::NonFiniteScore(i));
        }
    }
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let tie_pairs = |len: u64| len * len.saturating_sub(1) / 2;
    let mut ties_x = 0u64;
    let mut ties_xy = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        ties_x += tie_pairs((j - i) as u64);
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && pairs[l].1 == pairs[k].1 {
                l += 1;
            }
            ties_xy += tie_pairs((l - k) as u64);
            k = l;
        }
        i = j;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys);

    let mut ties_y = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        ties_y += tie_pairs((j - i) as u64);
        i = j;
    }

    let total = tie_pairs(n as u64);
    let (dx, dy) = (total - ties_x, total - ties_y);
    if dx == 0 || dy == 0 {
        return Err(RankError::DegenerateInput("a list is fully tied"));
    }
    let numerator = total as i128 - ties_x as i128 - ties_y as i128 + ties_xy as i128
        - 2 * swaps as i128;
    let tau = numerator as f64 / ((dx as f64).sqrt() * (dy as f64).sqrt());
    Ok(tau.clamp(-1.0, 1.0))
}

/// Stable merge sort returning the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    swaps
}

/// Re-ranks the element-wise rank sum; the smallest sum is rank 1.
pub fn combined_rank(ranks_a: &[f64], ranks_b: &[f64]) -> Result<Vec<f64>, RankError> {
    if ranks_a.len() != ranks_b.len() {
        return Err(RankError::LengthMismatch(ranks_a.len(), ranks_b.len()));
    }
    let negated: Vec<f64> = ranks_a.iter().zip(ranks_b).map(|(a, b)| -(a + b)).collect();
    rank_with_ties(&negated)
}

/// L1 distance between two rank vectors over the same architectures.
pub fn pair_rank_difference(rank_i: &[f64], rank_j: &[f64]) -> Result<f64, RankError> {
    if rank_i.len() != rank_j.len() {
        return Err(RankError::LengthMismatch(rank_i.len(), rank_j.len()));
    }
    Ok(rank_i.iter().zip(rank_j).map(|(a, b)| (a - b).abs()).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEntry {
    pub arch_id: String,
    pub score: f64,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTable {
    entries: Vec<RankEntry>,
}

impl RankTable {
    pub fn from_scores<S: Into<String>>(
        scored: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self, RankError> {
        let (ids, scores): (Vec<String>, Vec<f64>) =
            scored.into_iter().map(|(id, s)| (id.into(), s)).unzip();
        let ranks = rank_with_ties(&scores)?;
        let entries = ids
            .into_iter()
            .zip(scores)
            .zip(ranks)
            .map(|((arch_id, score), rank)| RankEntry {
                arch_id,
                score,
                rank,
            })
            .collect();
        Ok(RankTable { entries })
    }

    /// Table whose ranks are `combined_rank` of two tables over the same ids.
    /// The stored score is the negated rank sum.
    pub fn combined(&self, other: &RankTable) -> Result<RankTable, RankError> {
        let other_rank: HashMap<&str, f64> = other
            .entries
            .iter()
            .map(|e| (e.arch_id.as_str(), e.rank))
            .collect();
        if other_rank.len() != self.entries.len() {
            return Err(RankError::MismatchedUniverse("different sizes".into()));
        }
        let scored = self
            .entries
            .iter()
            .map(|e| {
                other_rank
                    .get(e.arch_id.as_str())
                    .map(|r| (e.arch_id.clone(), -(e.rank + r)))
                    .ok_or_else(|| RankError::MismatchedUniverse(e.arch_id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        RankTable::from_scores(scored)
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ranks(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.rank).collect()
    }

    /// The best `count` entries by rank; ties keep table order.
    pub fn top(&self, count: usize) -> Vec<&RankEntry> {
        let mut sorted: Vec<&RankEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.rank.partial_cmp(&b.rank).expect("finite ranks"));
        sorted.truncate(count);
        sorted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub top_fraction: f64,
    pub top_count: usize,
    /// Indexed by [`OperationKind::index`].
    pub metric_frequency: [f64; 5],
    pub gt_frequency: [f64; 5],
    pub bias: f64,
}

impl BiasReport {
    pub fn rows(&self) -> impl Iterator<Item = (OperationKind, f64, f64)> + '_ {
        OperationKind::ALL
            .into_iter()
            .map(|op| (op, self.metric_frequency[op.index()], self.gt_frequency[op.index()]))
    }
}

fn op_frequency(
    selected: &[&RankEntry],
    cells: &HashMap<String, CellSpec>,
) -> Result<[f64; 5], RankError> {
    let mut counts = [0usize; 5];
    for e in selected {
        let cell = cells
            .get(&e.arch_id)
            .ok_or_else(|| RankError::MismatchedUniverse(format!("no cell for {}", e.arch_id)))?;
        for (c, k) in counts.iter_mut().zip(cell.op_histogram()) {
            *c += k;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(RankError::DegenerateInput("selected cells have no operations"));
    }
    Ok(counts.map(|c| c as f64 / total as f64))
}

/// Operation-frequency difference between the top fraction selected by a
/// metric and by ground truth.
pub fn operation_bias(
    metric: &RankTable,
    gt: &RankTable,
    cells: &HashMap<String, CellSpec>,
    top_fraction: f64,
) -> Result<BiasReport, RankError> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(RankError::BadFraction(top_fraction));
    }
    let ids = |t: &RankTable| -> HashSet<String> {
        t.entries.iter().map(|e| e.arch_id.clone()).collect()
    };
    if metric.len() != gt.len() || ids(metric) != ids(gt) {
        return Err(RankError::MismatchedUniverse(
            "metric and ground-truth tables differ".into(),
        ));
    }
    if metric.is_empty() {
        return Err(RankError::EmptyInput);
    }
    let count = ((top_fraction * metric.len() as f64).ceil() as usize).clamp(1, metric.len());
    let metric_frequency = op_frequency(&metric.top(count), cells)?;
    let gt_frequency = op_frequency(&gt.top(count), cells)?;
    let bias = metric_frequency
        .iter()
        .zip(&gt_frequency)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(BiasReport {
        top_fraction,
        top_count: count,
        metric_frequency,
        gt_frequency,
        bias,
    })
}
