//! Unweighted graph measures used as architecture scores.
//!
//! | measure      | definition                          | cost       |
//! |--------------|-------------------------------------|------------|
//! | `avg_deg`    | `(1/n) * sum_i k_i` (undirected)    | O(m + n)   |
//! | `density`    | `m / (n (n - 1))` (directed)        | O(1)       |
//! | `resilience` | `(1' A s_in) / (1' A 1)`            | O(m + n)   |
//! | `wedge`      | `sum_i C(k_i, 2)` (undirected)      | O(m + n)   |
//!
//! Edge scores are ignored; an edge either exists or it does not.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graphify::ArchGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("density needs at least two nodes")]
    DegenerateGraph,
    #[error("resilience is undefined on a graph without edges")]
    EmptyEdgeSet,
    #[error("unknown measure (expected avg_deg, density, resilience or wedge)")]
    UnknownMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "avg_deg")]
    AvgDeg,
    #[serde(rename = "density")]
    Density,
    #[serde(rename = "resilience")]
    Resilience,
    #[serde(rename = "wedge")]
    WedgeCount,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 4] = [
        MeasureKind::AvgDeg,
        MeasureKind::Density,
        MeasureKind::Resilience,
        MeasureKind::WedgeCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::AvgDeg => "avg_deg",
            MeasureKind::Density => "density",
            MeasureKind::Resilience => "resilience",
            MeasureKind::WedgeCount => "wedge",
        }
    }

    pub fn evaluate(self, graph: &ArchGraph) -> Result<f64, MeasureError> {
        match self {
            MeasureKind::AvgDeg => average_degree(graph),
            MeasureKind::Density => density(graph),
            MeasureKind::Resilience => resilience(graph),
            MeasureKind::WedgeCount => Ok(wedge_count(graph) as f64),
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MeasureKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or(MeasureError::UnknownMeasure)
    }
}

/// Undirected degree per node. A pair connected in both directions counts as
/// one undirected edge.
pub fn undirected_degrees(graph: &ArchGraph) -> Vec<u64> {
    let mut degree = vec![0u64; graph.node_count()];
    for e in graph.edges() {
        if e.src > e.dst && graph.has_edge(e.dst, e.src) {
            continue;
        }
        degree[e.src] += 1;
        degree[e.dst] += 1;
    }
    degree
}

pub fn average_degree(graph: &ArchGraph) -> Result<f64, MeasureError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(MeasureError::EmptyGraph);
    }
    let total: u64 = undirected_degrees(graph).iter().sum();
    Ok(total as f64 / n as f64)
}

pub fn density(graph: &ArchGraph) -> Result<f64, MeasureError> {
    let n = graph.node_count();
    if n < 2 {
        return Err(MeasureError::DegenerateGraph);
    }
    Ok(graph.edge_count() as f64 / (n as f64 * (n - 1) as f64))
}

/// `sum over edges (i, j) of s_in(j)`, divided by the edge count.
pub fn resilience(graph: &ArchGraph) -> Result<f64, MeasureError> {
    let m = graph.edge_count();
    if m == 0 {
        return Err(MeasureError::EmptyEdgeSet);
    }
    let in_degree = graph.in_degrees();
    let numerator: u64 = graph.edges().iter().map(|e| in_degree[e.dst] as u64).sum();
    Ok(numerator as f64 / m as f64)
}

pub fn wedge_count(graph: &ArchGraph) -> u64 {
    undirected_degrees(graph)
        .iter()
        .map(|&k| k * k.saturating_sub(1) / 2)
        .sum()
}
