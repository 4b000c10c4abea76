//! The adaptive estimator loop.
//!
//! ```text
//! W <- uniform
//! for t = first_step, first_step + 1, ...:
//!     retrain every expert on history before t
//!     p[n] <- expert n's estimate for x_t
//!     estimate <- sum_n W[n] * p[n]
//!     observe y_t
//!     W[n] <- W[n] * exp(-eta * (p[n] - y_t)^2), normalize
//!     append (x_t, y_t) to history
//! ```
//!
//! [`OnlineEstimator`] exposes the loop one step at a time; [`run`] drives it
//! over a whole [`Dataset`].

use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate_predict, update_weights, WeightVector};
use crate::ensemble::{init_specs, ExpertPool, FeatureView};
use crate::error::{Error, Result};
use crate::evaluation::rmse;
use crate::featurization::{fill_row, select_terms, FeatureSchema};
use crate::timeseries::{Dataset, QueryPanel};
use crate::tree::TreeParams;

/// Observations consumed before the first estimate.
pub const DEFAULT_WARMUP: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Learning rate of the weight update.
    pub eta: f64,
    pub n_trees: usize,
    pub warmup: usize,
    /// Inclusive range that expert window sizes are drawn from.
    pub window_interval: (usize, usize),
    /// Uptake lag features, lags `1..=n_lags`.
    pub n_lags: usize,
    /// Query-term features.
    pub n_web: usize,
    pub tree_params: TreeParams,
    pub master_seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            eta: 0.05,
            n_trees: 500,
            warmup: DEFAULT_WARMUP,
            window_interval: (1, 46),
            n_lags: 12,
            n_web: 3,
            tree_params: TreeParams::default(),
            master_seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::Parameter(format!(
                "eta must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if self.n_trees == 0 {
            return Err(Error::Parameter("n_trees must be at least 1".into()));
        }
        if self.warmup == 0 {
            return Err(Error::Parameter("warmup must be at least 1".into()));
        }
        let (lo, hi) = self.window_interval;
        if lo > hi {
            return Err(Error::Parameter(format!("empty window interval [{lo}, {hi}]")));
        }
        if self.n_lags + self.n_web == 0 {
            return Err(Error::Parameter("n_lags + n_web must be at least 1".into()));
        }
        self.tree_params.validate()
    }

    /// First step that receives an estimate: `max(warmup, n_lags) + 1`.
    pub fn first_step(&self) -> usize {
        self.warmup.max(self.n_lags) + 1
    }
}

/// One estimate and the observation it was scored against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub prediction: f64,
    pub observation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace {
    pub steps: Vec<TraceStep>,
    /// Weights after each step's update, when recording was requested.
    pub weights_history: Option<Vec<WeightVector>>,
    /// RMSE over `steps`; `NaN` for an empty trace.
    pub rmse: f64,
}

impl EstimationTrace {
    pub fn new(steps: Vec<TraceStep>, weights_history: Option<Vec<WeightVector>>) -> Self {
        let rmse = if steps.is_empty() {
            f64::NAN
        } else {
            let (p, o): (Vec<f64>, Vec<f64>) = steps.iter().map(|s| (s.prediction, s.observation)).unzip();
            rmse(&p, &o).expect("non-empty equal-length lists")
        };
        EstimationTrace {
            steps,
            weights_history,
            rmse,
        }
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.prediction).collect()
    }

    pub fn observations(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.observation).collect()
    }

    /// Steps with `from <= t < to`.
    pub fn steps_in(&self, from: usize, to: usize) -> impl Iterator<Item = &TraceStep> {
        self.steps.iter().filter(move |s| s.t >= from && s.t < to)
    }

    /// RMSE over steps in `[from, to)`, or `None` if there are none.
    pub fn rmse_in(&self, from: usize, to: usize) -> Option<f64> {
        let (p, o): (Vec<f64>, Vec<f64>) = self.steps_in(from, to).map(|s| (s.prediction, s.observation)).unzip();
        rmse(&p, &o).ok()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub record_weights: bool,
    /// Stop before this step (exclusive). Defaults to the dataset end.
    pub until: Option<usize>,
}

#[derive(Debug, Clone)]
struct Pending {
    t: usize,
    expert_preds: Vec<f64>,
    prediction: f64,
}

/// Streaming form of the estimator: alternate [`step_predict`](Self::step_predict)
/// and [`step_observe`](Self::step_observe).
#[derive(Debug, Clone)]
pub struct OnlineEstimator {
    cfg: EstimatorConfig,
    schema: FeatureSchema,
    panel: QueryPanel,
    history: Vec<f64>,
    pool: ExpertPool,
    weights: WeightVector,
    next_t: usize,
    pending: Option<Pending>,
    steps: Vec<TraceStep>,
    weights_history: Option<Vec<WeightVector>>,
}

impl OnlineEstimator {
    /// Sets up the estimator from the warm-up portion of `ds`.
    ///
    /// Only uptake values before [`EstimatorConfig::first_step`] are read;
    /// later values must be supplied through [`step_observe`](Self::step_observe).
    /// The query panel is kept in full since web data is available up front.
    pub fn new(ds: &Dataset, cfg: &EstimatorConfig) -> Result<Self> {
        Self::with_recording(ds, cfg, false)
    }

    pub fn with_recording(ds: &Dataset, cfg: &EstimatorConfig, record_weights: bool) -> Result<Self> {
        cfg.validate()?;
        let first = cfg.first_step();
        if ds.len() < first {
            return Err(Error::InsufficientHistory(format!(
                "{} observations available, {first} needed before the first estimate",
                ds.len()
            )));
        }
        let n_web = cfg.n_web;
        if n_web > ds.panel().n_terms() {
            return Err(Error::Parameter(format!(
                "n_web = {n_web} but the panel has {} terms",
                ds.panel().n_terms()
            )));
        }
        let terms = select_terms(ds, n_web, cfg.warmup)?;
        let schema = FeatureSchema::new(cfg.n_lags, terms, ds.panel())?;
        let specs = init_specs(
            schema.len(),
            cfg.n_trees,
            cfg.window_interval,
            cfg.tree_params,
            cfg.master_seed,
        )?;
        Ok(OnlineEstimator {
            cfg: cfg.clone(),
            schema,
            panel: ds.panel().clone(),
            history: ds.uptake().values()[..first].to_vec(),
            pool: ExpertPool::new(specs)?,
            weights: WeightVector::uniform(cfg.n_trees)?,
            next_t: first,
            pending: None,
            steps: Vec::new(),
            weights_history: record_weights.then(Vec::new),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn pool(&self) -> &ExpertPool {
        &self.pool
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// Step the next call to [`step_predict`](Self::step_predict) must name.
    pub fn next_step(&self) -> usize {
        self.next_t
    }

    /// Per-expert estimates behind the pending prediction.
    pub fn pending_expert_predictions(&self) -> Option<&[f64]> {
        self.pending.as_ref().map(|p| p.expert_preds.as_slice())
    }

    /// Retrains on history before `t` and returns the weighted estimate for `t`.
    pub fn step_predict(&mut self, t: usize) -> Result<f64> {
        if let Some(p) = &self.pending {
            return Err(Error::Protocol(format!(
                "step {} is still awaiting its observation",
                p.t
            )));
        }
        if t != self.next_t {
            return Err(Error::Protocol(format!("expected step {}, got {t}", self.next_t)));
        }
        if t >= self.panel.len() {
            return Err(Error::Range {
                index: t,
                len: self.panel.len(),
            });
        }
        let view = FeatureView {
            uptake: &self.history,
            panel: &self.panel,
            schema: &self.schema,
        };
        self.pool.retrain(&view, t)?;
        let mut x = Vec::with_capacity(self.schema.len());
        fill_row(&self.history, &self.panel, &self.schema, t, &mut x);
        let expert_preds = self.pool.predict(&x)?;
        let prediction = aggregate_predict(&self.weights, &expert_preds)?;
        self.pending = Some(Pending {
            t,
            expert_preds,
            prediction,
        });
        Ok(prediction)
    }

    /// Reveals `y` for the pending step, updates weights and extends history.
    /// On error the state is left untouched.
    pub fn step_observe(&mut self, y: f64) -> Result<()> {
        let Some(pending) = &self.pending else {
            return Err(Error::Protocol("no pending prediction to score".into()));
        };
        if !y.is_finite() || y < 0.0 {
            return Err(Error::Value(format!(
                "observation for step {} must be finite and non-negative, got {y}",
                pending.t
            )));
        }
        let weights = update_weights(&self.weights, &pending.expert_preds, y, self.cfg.eta)?;
        let pending = self.pending.take().expect("checked above");
        self.weights = weights;
        self.history.push(y);
        self.steps.push(TraceStep {
            t: pending.t,
            prediction: pending.prediction,
            observation: y,
        });
        if let Some(h) = &mut self.weights_history {
            h.push(self.weights.clone());
        }
        self.next_t += 1;
        Ok(())
    }

    /// Trace of all completed steps.
    pub fn trace(&self) -> EstimationTrace {
        EstimationTrace::new(self.steps.clone(), self.weights_history.clone())
    }

    pub fn into_trace(self) -> EstimationTrace {
        EstimationTrace::new(self.steps, self.weights_history)
    }
}

/// Runs the estimator over every step of `ds` after warm-up.
pub fn run(ds: &Dataset, cfg: &EstimatorConfig) -> Result<EstimationTrace> {
    run_with(ds, cfg, RunOptions::default())
}

pub fn run_with(ds: &Dataset, cfg: &EstimatorConfig, opts: RunOptions) -> Result<EstimationTrace> {
    cfg.validate()?;
    let first = cfg.first_step();
    if ds.len() <= first {
        return Err(Error::InsufficientHistory(format!(
            "dataset has {} steps; at least {} are needed for warm-up of {} and {} lags",
            ds.len(),
            first + 1,
            cfg.warmup,
            cfg.n_lags
        )));
    }
    let end = opts.until.map_or(ds.len(), |u| u.min(ds.len()));
    let mut est = OnlineEstimator::with_recording(ds, cfg, opts.record_weights)?;
    let y = ds.uptake().values();
    for (t, &obs) in y.iter().enumerate().take(end).skip(first) {
        est.step_predict(t)?;
        est.step_observe(obs)?;
    }
    Ok(est.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{MonthIndex, UptakeSeries};

    fn dataset(values: Vec<f64>) -> Dataset {
        let start = MonthIndex::new(2011, 1).unwrap();
        let q1: Vec<f64> = values.iter().map(|v| (v * 0.8).min(100.0)).collect();
        let q2: Vec<f64> = (0..values.len()).map(|i| (i * 7 % 50) as f64).collect();
        let panel = QueryPanel::new(start, vec!["a".into(), "b".into()], vec![q1, q2]).unwrap();
        Dataset::new(UptakeSeries::new(start, values).unwrap(), panel).unwrap()
    }

    fn wavy(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 40.0 + 15.0 * ((i as f64) * std::f64::consts::PI / 6.0).sin() + (i % 5) as f64)
            .collect()
    }

    fn small_cfg() -> EstimatorConfig {
        EstimatorConfig {
            n_trees: 20,
            warmup: 10,
            n_lags: 3,
            n_web: 2,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn constant_series_is_estimated_exactly() {
        let ds = dataset(vec![63.5; 30]);
        let trace = run(&ds, &small_cfg()).unwrap();
        assert!(trace.steps.iter().all(|s| s.prediction == 63.5));
        assert_eq!(trace.rmse, 0.0);
        assert_eq!(trace.steps.first().unwrap().t, 11);
        assert_eq!(trace.steps.len(), 30 - 11);
    }

    #[test]
    fn single_expert_is_the_estimate() {
        let ds = dataset(wavy(30));
        let cfg = EstimatorConfig {
            n_trees: 1,
            eta: 0.2,
            ..small_cfg()
        };
        let mut est = OnlineEstimator::new(&ds, &cfg).unwrap();
        for t in cfg.first_step()..ds.len() {
            let p = est.step_predict(t).unwrap();
            assert_eq!(p, est.pending_expert_predictions().unwrap()[0]);
            est.step_observe(ds.uptake().values()[t]).unwrap();
            assert_eq!(est.weights().as_slice(), &[1.0]);
        }
    }

    #[test]
    fn zero_window_single_tree_repeats_last_value() {
        let ds = dataset(wavy(20));
        let cfg = EstimatorConfig {
            n_trees: 1,
            window_interval: (0, 0),
            ..small_cfg()
        };
        let mut est = OnlineEstimator::new(&ds, &cfg).unwrap();
        let t = cfg.first_step();
        assert_eq!(est.step_predict(t).unwrap(), ds.uptake().values()[t - 1]);
    }

    #[test]
    fn protocol_errors() {
        let ds = dataset(wavy(20));
        let mut est = OnlineEstimator::new(&ds, &small_cfg()).unwrap();
        assert!(matches!(est.step_observe(1.0), Err(Error::Protocol(_))));
        assert!(matches!(est.step_predict(5), Err(Error::Protocol(_))));
        let t = est.next_step();
        est.step_predict(t).unwrap();
        assert!(matches!(est.step_predict(t), Err(Error::Protocol(_))));
        let before = est.weights().clone();
        assert!(matches!(est.step_observe(f64::NAN), Err(Error::Value(_))));
        assert_eq!(est.weights(), &before);
        assert!(est.pending_expert_predictions().is_some());
        est.step_observe(40.0).unwrap();
        assert_eq!(est.next_step(), t + 1);
    }

    #[test]
    fn eta_zero_keeps_uniform_weights() {
        let ds = dataset(wavy(25));
        let cfg = EstimatorConfig {
            eta: 0.0,
            ..small_cfg()
        };
        let trace = run_with(
            &ds,
            &cfg,
            RunOptions {
                record_weights: true,
                until: None,
            },
        )
        .unwrap();
        let uniform = WeightVector::uniform(cfg.n_trees).unwrap();
        assert!(trace.weights_history.unwrap().iter().all(|w| *w == uniform));
    }

    #[test]
    fn insufficient_data_and_bad_config() {
        let ds = dataset(wavy(11));
        assert!(matches!(run(&ds, &small_cfg()), Err(Error::InsufficientHistory(_))));
        let ds = dataset(wavy(30));
        let bad = EstimatorConfig {
            n_trees: 0,
            ..small_cfg()
        };
        assert!(matches!(run(&ds, &bad), Err(Error::Parameter(_))));
        let bad = EstimatorConfig {
            n_lags: 0,
            n_web: 0,
            ..small_cfg()
        };
        assert!(matches!(run(&ds, &bad), Err(Error::Parameter(_))));
        let bad = EstimatorConfig {
            n_web: 3,
            ..small_cfg()
        };
        assert!(matches!(run(&ds, &bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn lags_beyond_warmup_shift_first_step() {
        let ds = dataset(wavy(40));
        let cfg = EstimatorConfig {
            n_lags: 15,
            ..small_cfg()
        };
        let trace = run(&ds, &cfg).unwrap();
        assert_eq!(trace.steps[0].t, 16);
    }

    #[test]
    fn estimates_are_convex_combinations() {
        let ds = dataset(wavy(40));
        let mut est = OnlineEstimator::new(
            &ds,
            &EstimatorConfig {
                eta: 0.1,
                ..small_cfg()
            },
        )
        .unwrap();
        for t in est.next_step()..ds.len() {
            let p = est.step_predict(t).unwrap();
            let preds = est.pending_expert_predictions().unwrap();
            let lo = preds.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= p && p <= hi);
            est.step_observe(ds.uptake().values()[t]).unwrap();
        }
    }
}
