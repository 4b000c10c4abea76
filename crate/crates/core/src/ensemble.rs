//! The expert population.
//!
//! Each expert is a regression tree with a fixed feature multiset and a fixed
//! window size `s`, both drawn once at initialization. At every step the tree
//! is refitted on a bootstrap of recent history: relative indices are drawn
//! uniformly with replacement from `[0, s]`, where relative index `0` is the
//! most recent *completed* observation `t - 1`. Using `t` itself would train on
//! the label being predicted.

use rand::Rng;

use crate::error::{Error, Result};
use crate::featurization::{fill_row, FeatureSchema};
use crate::rng;
use crate::timeseries::QueryPanel;
use crate::tree::{fit_tree, FittedTree, TreeParams};

/// Static configuration of one expert.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec {
    /// Feature indices drawn with replacement; length equals the feature count.
    pub feature_multiset: Vec<usize>,
    pub window: usize,
    pub seed: u64,
    pub params: TreeParams,
}

impl TreeSpec {
    /// The distinct features the tree may split on, ascending.
    pub fn features(&self) -> Vec<usize> {
        let mut f = self.feature_multiset.clone();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Draws `n_trees` expert specs over `n_features` features.
///
/// Expert `n` is generated from its own stream seeded by `(master_seed, n)`,
/// so the population does not depend on generation order.
pub fn init_specs(
    n_features: usize,
    n_trees: usize,
    window_interval: (usize, usize),
    params: TreeParams,
    master_seed: u64,
) -> Result<Vec<TreeSpec>> {
    if n_trees == 0 {
        return Err(Error::Parameter("at least one tree is required".into()));
    }
    if n_features == 0 {
        return Err(Error::Parameter(
            "experts need at least one feature (n_lags + n_web = 0)".into(),
        ));
    }
    let (lo, hi) = window_interval;
    if lo > hi {
        return Err(Error::Parameter(format!("empty window interval [{lo}, {hi}]")));
    }
    params.validate()?;
    Ok((0..n_trees)
        .map(|n| {
            let seed = rng::derive_seed(master_seed, &[n as u64]);
            let mut r = rng::stream(seed, &[]);
            let feature_multiset = (0..n_features).map(|_| r.random_range(0..n_features)).collect();
            let window = r.random_range(lo..=hi);
            TreeSpec {
                feature_multiset,
                window,
                seed,
                params,
            }
        })
        .collect())
}

/// Bootstrap of absolute steps from the window ending at `t - 1`.
///
/// Draws `min(s, t-1) + 1` relative indices from `[0, min(s, t-1)]`; relative
/// index `r` is step `t - 1 - r`.
pub fn window_sample<R: Rng + ?Sized>(spec: &TreeSpec, t: usize, rng: &mut R) -> Result<Vec<usize>> {
    window_sample_from(spec, t, 0, rng)
}

/// Like [`window_sample`], redrawing any step below `min_step`.
pub fn window_sample_from<R: Rng + ?Sized>(
    spec: &TreeSpec,
    t: usize,
    min_step: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if t == 0 {
        return Err(Error::InsufficientHistory(
            "step 0 has no completed observation to train on".into(),
        ));
    }
    if t - 1 < min_step {
        return Err(Error::InsufficientHistory(format!(
            "no valid training step in [{min_step}, {t})"
        )));
    }
    let span = spec.window.min(t - 1);
    let valid_span = span.min(t - 1 - min_step);
    let draws = span + 1;
    let mut steps = Vec::with_capacity(draws);
    while steps.len() < draws {
        let r = rng.random_range(0..=span);
        if r <= valid_span {
            steps.push(t - 1 - r);
        }
    }
    Ok(steps)
}

/// The steps expert `spec` trains on at step `t`, using its per-step stream.
pub fn training_steps(spec: &TreeSpec, t: usize, min_step: usize) -> Result<Vec<usize>> {
    let mut r = rng::stream(spec.seed, &[t as u64]);
    window_sample_from(spec, t, min_step, &mut r)
}

/// Read-only access to observed history for retraining.
#[derive(Debug, Clone, Copy)]
pub struct FeatureView<'a> {
    /// Uptake for steps `0..len`; only steps below the retrain step are read.
    pub uptake: &'a [f64],
    pub panel: &'a QueryPanel,
    pub schema: &'a FeatureSchema,
}

impl FeatureView<'_> {
    pub fn row(&self, t: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.schema.len());
        fill_row(self.uptake, self.panel, self.schema, t, &mut out);
        out
    }
}

/// Experts and their current fits, index-aligned.
#[derive(Debug, Clone)]
pub struct ExpertPool {
    specs: Vec<TreeSpec>,
    fitted: Vec<FittedTree>,
    fitted_at: Option<usize>,
}

impl ExpertPool {
    pub fn new(specs: Vec<TreeSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Parameter("expert pool must not be empty".into()));
        }
        Ok(ExpertPool {
            specs,
            fitted: Vec::new(),
            fitted_at: None,
        })
    }

    pub fn specs(&self) -> &[TreeSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Current fits, empty before the first [`retrain`](Self::retrain).
    pub fn fitted(&self) -> &[FittedTree] {
        &self.fitted
    }

    /// Step the current fits were trained for.
    pub fn fitted_at(&self) -> Option<usize> {
        self.fitted_at
    }

    /// Refits every expert for predicting step `t` from history before `t`.
    pub fn retrain(&mut self, view: &FeatureView<'_>, t: usize) -> Result<()> {
        let n_lags = view.schema.n_lags();
        if t < n_lags + 1 {
            return Err(Error::InsufficientHistory(format!(
                "retraining for step {t} needs a completed step at or after lag depth {n_lags}"
            )));
        }
        if t > view.uptake.len() {
            return Err(Error::InsufficientHistory(format!(
                "retraining for step {t} but only {} observations are known",
                view.uptake.len()
            )));
        }
        let rows: Vec<Vec<f64>> = (n_lags..t).map(|s| view.row(s)).collect();
        let mut fitted = Vec::with_capacity(self.specs.len());
        let mut x: Vec<&[f64]> = Vec::new();
        let mut y: Vec<f64> = Vec::new();
        for spec in &self.specs {
            let steps = training_steps(spec, t, n_lags)?;
            x.clear();
            y.clear();
            for &s in &steps {
                x.push(&rows[s - n_lags]);
                y.push(view.uptake[s]);
            }
            fitted.push(fit_tree(&x, &y, &spec.features(), &spec.params)?);
        }
        self.fitted = fitted;
        self.fitted_at = Some(t);
        Ok(())
    }

    /// One prediction per expert.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.fitted.is_empty() {
            return Err(Error::Protocol("expert pool has not been trained".into()));
        }
        self.fitted.iter().map(|t| t.predict(x)).collect()
    }
}
