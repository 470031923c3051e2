//! Training-free, data-agnostic scoring of cell-based neural architectures.
//!
//! An architecture is expanded into a small surrogate network, every fused
//! block (convolution or pooling followed by ReLU) is probed with one-hot
//! all-ones inputs, and a directed edge is drawn from an input channel to an
//! output channel exactly when the probe reaches it. Unweighted measures of the
//! resulting DAG, averaged over several random initializations, rank
//! architectures without any training data.
//!
//! ```
//! use nasgraph::archspec::{expand, parse_nb201_arch, SurrogateConfig};
//! use nasgraph::graphify::score_architecture;
//! use nasgraph::measures::MeasureKind;
//!
//! let cell = parse_nb201_arch(
//!     "|nor_conv_3x3~0|+|nor_conv_3x3~0|skip_connect~1|+|none~0|nor_conv_1x1~1|avg_pool_3x3~2|",
//! )?;
//! let arch = expand(&cell, SurrogateConfig::new(4, 1, 2).with_probe_resolution(8))?;
//! let score = score_architecture(&arch, MeasureKind::AvgDeg, &[0, 1])?;
//! assert!(score > 0.0);
//! # Ok::<(), nasgraph::Error>(())
//! ```
//!
//! # Modules
//!
//! | module        | role                                                  |
//! |---------------|-------------------------------------------------------|
//! | [`archspec`]  | cell encodings, surrogate config, block plan          |
//! | [`tensorlite`]| f64 CHW tensors and the handful of kernels needed     |
//! | [`graphify`]  | block decomposition, probing, conversion to a DAG     |
//! | [`measures`]  | average degree, density, resilience, wedge count      |
//! | [`ranker`]    | ranks, Spearman, Kendall, combined rank, op bias      |
//! | [`search`]    | random search with a single metric                    |
//! | [`harness`]   | benchmark files and the end-to-end commands           |
//! | [`synthetic`] | generated benchmarks with known structure             |
//!
//! # Examples
//!
//! Each capability has a runnable example under `examples/`:
//!
//! * `parse_encodings` – both cell encodings and their rejections
//! * `probe_block` – edge scores of a single block
//! * `convert_and_export` – full conversion with DOT and TSV output
//! * `graph_measures` – the four measures on a converted graph
//! * `rank_correlation` – Spearman and Kendall on a synthetic benchmark
//! * `random_search` – repeated random search guided by a measure
//! * `operation_bias` – operation frequencies among top-ranked cells
//! * `seed_stability` – agreement of rankings across initializations

pub mod archspec;
pub mod cli;
pub mod graphify;
pub mod harness;
pub mod measures;
pub mod ranker;
pub mod search;
pub mod synthetic;
pub mod tensorlite;

pub use archspec::{ArchError, ArchitectureSpec, CellSpec, OperationKind, SurrogateConfig};
pub use graphify::{ArchGraph, GraphError};
pub use harness::HarnessError;
pub use measures::{MeasureError, MeasureKind};
pub use ranker::RankError;
pub use search::SearchError;
pub use tensorlite::{Tensor3, TensorError};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}
