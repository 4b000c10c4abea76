//! Adaptive time-series estimation.
//!
//! A pool of regression trees, each trained on a random feature multiset and
//! a random look-back window, is retrained at every step of a monthly series.
//! Their estimates are combined with exponentially weighted averaging, and the
//! weights move toward whichever experts tracked recent observations best.
//! Lasso and elastic-net regressors with cross-validated penalties serve as
//! baselines, evaluated with the same walk-forward protocol.
//!
//! ```
//! use atse::{estimator, synthgen, EstimatorConfig};
//!
//! let ds = synthgen::generate(&synthgen::preset("media-scare")?)?;
//! let cfg = EstimatorConfig { n_trees: 50, ..EstimatorConfig::default() };
//! let trace = estimator::run(&ds, &cfg)?;
//! assert_eq!(trace.steps[0].t, 25);
//! assert!(trace.rmse.is_finite());
//! # Ok::<(), atse::Error>(())
//! ```

pub mod aggregation;
pub mod baselines;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod featurization;
pub mod ingestion;
pub mod rng;
pub mod synthgen;
pub mod timeseries;
pub mod tree;

pub use aggregation::WeightVector;
pub use baselines::BaselineKind;
pub use error::{Error, Result};
pub use estimator::{EstimationTrace, EstimatorConfig, OnlineEstimator};
pub use evaluation::{ComparisonReport, SearchIntervals};
pub use synthgen::Scenario;
pub use timeseries::{Dataset, MonthIndex, QueryPanel, UptakeSeries};
pub use tree::{FittedTree, TreeParams};

/// The guide's chapters, compiled as doc-tests so their snippets stay in step
/// with the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/experts.md")]
    mod experts {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/estimator.md")]
    mod estimator {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
