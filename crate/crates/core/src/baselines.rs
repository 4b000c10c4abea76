//! Lasso and elastic-net baselines.
//!
//! Both minimize, over standardized features and centered targets,
//!
//! ```text
//! (1 / 2m) * sum_i (y_i - x_i . b)^2 + lambda * (alpha * |b|_1 + (1 - alpha) / 2 * |b|_2^2)
//! ```
//!
//! by cyclic coordinate descent. Lasso is the `alpha = 1` case of the same
//! code path. Hyperparameters are picked by k-fold cross-validation over
//! contiguous, unshuffled time blocks, and the models are evaluated
//! walk-forward like the adaptive estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimationTrace, TraceStep};
use crate::featurization::{fill_row, FeatureSchema};
use crate::timeseries::Dataset;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_FOLDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Lasso,
    Enet,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Lasso => "lasso",
            BaselineKind::Enet => "enet",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(BaselineKind::Lasso),
            "enet" | "elastic-net" | "elasticnet" => Ok(BaselineKind::Enet),
            other => Err(Error::Parameter(format!("unknown baseline kind `{other}`"))),
        }
    }
}

/// Penalty strength and L1 share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnetHyper {
    pub lambda: f64,
    /// 1 is lasso, 0 is ridge.
    pub alpha: f64,
}

impl EnetHyper {
    pub fn lasso(lambda: f64) -> Self {
        EnetHyper { lambda, alpha: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Parameter(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Parameter(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// A linear model on the raw feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Per-feature `(mean, stddev)` of the training rows.
    pub standardization: Vec<(f64, f64)>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::Shape(format!(
                "model has {} coefficients, vector has {} values",
                self.coefficients.len(),
                x.len()
            )));
        }
        Ok(self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnetFit {
    pub model: LinearModel,
    /// Coefficients in standardized units.
    pub standardized: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Objective before the first sweep and after each sweep.
    pub objective_trace: Vec<f64>,
}

/// `sign(z) * max(|z| - gamma, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Standardized copy of a design, reusable across penalties.
///
/// Coordinate descent runs on the Gram form: `gram[j][k] = col_j . col_k / m`
/// and `xty[j] = col_j . y / m`, with the gradient `col_j . resid / m` kept up
/// to date in `O(p)` per coefficient change.
#[derive(Debug, Clone)]
struct Problem {
    m: usize,
    /// Column-major standardized features; empty for constant columns.
    cols: Vec<Vec<f64>>,
    /// Indices of non-constant columns.
    live: Vec<usize>,
    gram: Vec<Vec<f64>>,
    xty: Vec<f64>,
    y_centered: Vec<f64>,
    y_mean: f64,
    standardization: Vec<(f64, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Problem {
    fn new<R: AsRef<[f64]>>(x: &[R], y: &[f64], rows: impl Iterator<Item = usize> + Clone) -> Result<Self> {
        let m = rows.clone().count();
        if m < 2 {
            return Err(Error::Parameter(format!("need at least 2 training rows, got {m}")));
        }
        let p = x[rows.clone().next().expect("m >= 2")].as_ref().len();
        for r in rows.clone() {
            let row = x[r].as_ref();
            if row.len() != p {
                return Err(Error::Shape(format!("row {r} has {} values, expected {p}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) || !y[r].is_finite() {
                return Err(Error::Value(format!("non-finite value in training row {r}")));
            }
        }
        let mf = m as f64;
        let y_mean = rows.clone().map(|r| y[r]).sum::<f64>() / mf;
        let y_centered: Vec<f64> = rows.clone().map(|r| y[r] - y_mean).collect();
        let mut cols = Vec::with_capacity(p);
        let mut standardization = Vec::with_capacity(p);
        for j in 0..p {
            let mean = rows.clone().map(|r| x[r].as_ref()[j]).sum::<f64>() / mf;
            let var = rows.clone().map(|r| (x[r].as_ref()[j] - mean).powi(2)).sum::<f64>() / mf;
            let sd = var.sqrt();
            if sd <= 1e-12 * (1.0 + mean.abs()) {
                cols.push(Vec::new());
                standardization.push((mean, 0.0));
                continue;
            }
            cols.push(rows.clone().map(|r| (x[r].as_ref()[j] - mean) / sd).collect());
            standardization.push((mean, sd));
        }
        let live: Vec<usize> = (0..p).filter(|&j| !cols[j].is_empty()).collect();
        let mut gram = vec![vec![0.0; p]; p];
        for (a, &j) in live.iter().enumerate() {
            for &k in &live[a..] {
                let g = dot(&cols[j], &cols[k]) / mf;
                gram[j][k] = g;
                gram[k][j] = g;
            }
        }
        let xty = cols.iter().map(|c| dot(c, &y_centered) / mf).collect();
        Ok(Problem {
            m,
            cols,
            live,
            gram,
            xty,
            y_centered,
            y_mean,
            standardization,
        })
    }

    fn objective(&self, beta: &[f64], h: &EnetHyper) -> f64 {
        let mut resid = self.y_centered.clone();
        for &j in &self.live {
            if beta[j] != 0.0 {
                for (r, a) in resid.iter_mut().zip(&self.cols[j]) {
                    *r -= a * beta[j];
                }
            }
        }
        let loss = dot(&resid, &resid) / (2.0 * self.m as f64);
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = dot(beta, beta);
        loss + h.lambda * (h.alpha * l1 + 0.5 * (1.0 - h.alpha) * l2)
    }

    /// One cyclic pass over `coords`; returns the largest coefficient change.
    fn sweep(&self, beta: &mut [f64], grad: &mut [f64], h: &EnetHyper, coords: &[usize]) -> f64 {
        let l1 = h.lambda * h.alpha;
        let l2 = h.lambda * (1.0 - h.alpha);
        let mut max_change: f64 = 0.0;
        for &j in coords {
            let d = self.gram[j][j];
            let new = soft_threshold(grad[j] + d * beta[j], l1) / (d + l2);
            let delta = new - beta[j];
            if delta != 0.0 {
                for &k in &self.live {
                    grad[k] -= self.gram[k][j] * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Coordinate descent from zero. With `record`, the objective is
    /// evaluated before the first sweep and after every sweep.
    fn fit(&self, h: &EnetHyper, tol: f64, max_iter: usize, record: bool) -> EnetFit {
        let p = self.cols.len();
        let mut beta = vec![0.0; p];
        let mut grad = self.xty.clone();
        let mut objective_trace = Vec::new();
        let mut trace = |beta: &[f64]| {
            if record {
                objective_trace.push(self.objective(beta, h));
            }
        };
        trace(&beta);
        let mut sweeps = 0;
        let mut converged = false;
        // Full sweeps alternate with passes restricted to the non-zero set;
        // convergence is only declared on a full sweep.
        while sweeps < max_iter {
            let change = self.sweep(&mut beta, &mut grad, h, &self.live);
            sweeps += 1;
            trace(&beta);
            if change < tol {
                converged = true;
                break;
            }
            let active: Vec<usize> = self.live.iter().copied().filter(|&j| beta[j] != 0.0).collect();
            while !active.is_empty() && sweeps < max_iter {
                let change = self.sweep(&mut beta, &mut grad, h, &active);
                sweeps += 1;
                trace(&beta);
                if change < tol {
                    break;
                }
            }
        }
        let coefficients: Vec<f64> = beta
            .iter()
            .zip(&self.standardization)
            .map(|(b, (_, sd))| if *sd == 0.0 { 0.0 } else { b / sd })
            .collect();
        let intercept = self.y_mean
            - coefficients
                .iter()
                .zip(&self.standardization)
                .map(|(c, (mean, _))| c * mean)
                .sum::<f64>();
        EnetFit {
            model: LinearModel {
                coefficients,
                intercept,
                standardization: self.standardization.clone(),
            },
            standardized: beta,
            converged,
            sweeps,
            objective_trace,
        }
    }
}

fn check_xy<R: AsRef<[f64]>>(x: &[R], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} rows for {} targets", x.len(), y.len())));
    }
    Ok(())
}

/// Fits an elastic net by coordinate descent. Non-convergence within
/// `max_iter` sweeps is reported in [`EnetFit::converged`], not as an error.
pub fn fit_enet<R: AsRef<[f64]>>(x: &[R], y: &[f64], hyper: &EnetHyper, tol: f64, max_iter: usize) -> Result<EnetFit> {
    check_xy(x, y)?;
    hyper.validate()?;
    let problem = Problem::new(x, y, 0..x.len())?;
    Ok(problem.fit(hyper, tol, max_iter, true))
}

/// Smallest lasso penalty giving an all-zero solution: `max_j |x_j . y| / m`
/// in standardized units.
pub fn lambda_max<R: AsRef<[f64]>>(x: &[R], y: &[f64]) -> Result<f64> {
    check_xy(x, y)?;
    let p = Problem::new(x, y, 0..x.len())?;
    Ok(p.xty.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// 50 log-spaced penalties over `[1e-4, 1e2]`, ascending.
pub fn lambda_grid() -> Vec<f64> {
    (0..50).map(|i| 10f64.powf(-4.0 + 6.0 * i as f64 / 49.0)).collect()
}

/// Default cross-validation grid for each baseline.
pub fn default_grid(kind: BaselineKind) -> Vec<EnetHyper> {
    let alphas: &[f64] = match kind {
        BaselineKind::Lasso => &[1.0],
        BaselineKind::Enet => &[0.1, 0.3, 0.5, 0.7, 0.9],
    };
    alphas
        .iter()
        .flat_map(|&alpha| lambda_grid().into_iter().map(move |lambda| EnetHyper { lambda, alpha }))
        .collect()
}

/// `[start, end)` of each contiguous fold; earlier folds take the remainder.
pub fn fold_bounds(m: usize, k: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (m / k, m % k);
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let b = (start, start + len);
            start += len;
            b
        })
        .collect()
}

/// Mean held-out MSE of every grid point.
pub fn cv_scores<R: AsRef<[f64]>>(x: &[R], y: &[f64], grid: &[EnetHyper], k: usize) -> Result<Vec<f64>> {
    check_xy(x, y)?;
    if grid.is_empty() {
        return Err(Error::Parameter("empty hyperparameter grid".into()));
    }
    if k < 2 || x.len() < k {
        return Err(Error::Parameter(format!(
            "{k}-fold cross-validation needs k >= 2 and at least k rows, got {}",
            x.len()
        )));
    }
    for h in grid {
        h.validate()?;
    }
    let folds = fold_bounds(x.len(), k);
    let problems = folds
        .iter()
        .map(|&(a, b)| Problem::new(x, y, (0..a).chain(b..x.len())))
        .collect::<Result<Vec<_>>>()?;
    let mut totals = vec![0.0; grid.len()];
    for (&(a, b), problem) in folds.iter().zip(&problems) {
        for (h, total) in grid.iter().zip(&mut totals) {
            let model = problem.fit(h, DEFAULT_TOL, DEFAULT_MAX_ITER, false).model;
            *total += (a..b)
                .map(|r| (model.predict(x[r].as_ref()).expect("same width") - y[r]).powi(2))
                .sum::<f64>()
                / (b - a) as f64;
        }
    }
    Ok(totals.into_iter().map(|t| t / k as f64).collect())
}

/// Grid point with the lowest cross-validated MSE. Ties go to the smaller
/// lambda, then the larger alpha, then the earlier grid entry.
pub fn cv_select<R: AsRef<[f64]>>(x: &[R], y: &[f64], grid: &[EnetHyper], k: usize) -> Result<EnetHyper> {
    let scores = cv_scores(x, y, grid, k)?;
    let mut best = 0;
    for i in 1..grid.len() {
        let (s, b) = (scores[i], scores[best]);
        let (h, hb) = (grid[i], grid[best]);
        if s < b || (s == b && (h.lambda < hb.lambda || (h.lambda == hb.lambda && h.alpha > hb.alpha))) {
            best = i;
        }
    }
    Ok(grid[best])
}

/// Details of a walk-forward baseline run.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub trace: EstimationTrace,
    /// Selected hyperparameters per step; `None` where too few rows forced a
    /// mean-only model.
    pub selected: Vec<Option<EnetHyper>>,
    /// Model used for the last estimate.
    pub final_model: Option<LinearModel>,
}

#[derive(Debug, Clone, Default)]
pub struct BaselineOptions {
    /// Stop before this step (exclusive).
    pub until: Option<usize>,
    /// Replaces the default grid for the kind.
    pub grid: Option<Vec<EnetHyper>>,
}

/// Walk-forward baseline: at each step, cross-validate on all earlier rows,
/// refit, and estimate the current step.
pub fn run_baseline(
    ds: &Dataset,
    kind: BaselineKind,
    schema: &FeatureSchema,
    warmup: usize,
) -> Result<EstimationTrace> {
    run_baseline_with(ds, kind, schema, warmup, &BaselineOptions::default()).map(|r| r.trace)
}

pub fn run_baseline_with(
    ds: &Dataset,
    kind: BaselineKind,
    schema: &FeatureSchema,
    warmup: usize,
    opts: &BaselineOptions,
) -> Result<BaselineRun> {
    if warmup == 0 {
        return Err(Error::Parameter("warmup must be at least 1".into()));
    }
    let first = warmup.max(schema.n_lags()) + 1;
    if ds.len() <= first {
        return Err(Error::InsufficientHistory(format!(
            "dataset has {} steps; at least {} are needed",
            ds.len(),
            first + 1
        )));
    }
    let grid = opts.grid.clone().unwrap_or_else(|| default_grid(kind));
    if grid.is_empty() {
        return Err(Error::Parameter("empty hyperparameter grid".into()));
    }
    let end = opts.until.map_or(ds.len(), |u| u.min(ds.len()));
    let y = ds.uptake().values();
    let n_lags = schema.n_lags();
    let rows: Vec<Vec<f64>> = (0..end)
        .map(|t| {
            let mut row = Vec::new();
            if t >= n_lags {
                fill_row(y, ds.panel(), schema, t, &mut row);
            }
            row
        })
        .collect();

    let mut steps = Vec::new();
    let mut selected = Vec::new();
    let mut final_model = None;
    for t in first..end {
        let x_train = &rows[n_lags..t];
        let y_train = &y[n_lags..t];
        let prediction = if x_train.len() < DEFAULT_FOLDS.max(2) {
            selected.push(None);
            final_model = None;
            y_train.iter().sum::<f64>() / y_train.len() as f64
        } else {
            let hyper = cv_select(x_train, y_train, &grid, DEFAULT_FOLDS)?;
            let fit = fit_enet(x_train, y_train, &hyper, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            selected.push(Some(hyper));
            let p = fit.model.predict(&rows[t])?;
            final_model = Some(fit.model);
            p
        };
        steps.push(TraceStep {
            t,
            prediction,
            observation: y[t],
        });
    }
    Ok(BaselineRun {
        trace: EstimationTrace::new(steps, None),
        selected,
        final_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(-1.0, 1.0), 0.0);
    }

    #[test]
    fn zero_targets_zero_model() {
        let x = vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![0.0, 5.0]];
        let fit = fit_enet(&x, &[0.0; 3], &EnetHyper::lasso(0.1), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(fit.model.coefficients, vec![0.0, 0.0]);
        assert_eq!(fit.model.intercept, 0.0);
        assert!(fit.converged);
    }

    #[test]
    fn degenerate_inputs() {
        let x = vec![vec![1.0]];
        assert!(matches!(
            fit_enet(&x, &[1.0], &EnetHyper::lasso(0.1), DEFAULT_TOL, 10),
            Err(Error::Parameter(_))
        ));
        let x = vec![vec![1.0], vec![2.0]];
        assert!(fit_enet(
            &x,
            &[1.0, 2.0],
            &EnetHyper {
                lambda: -1.0,
                alpha: 1.0
            },
            DEFAULT_TOL,
            10
        )
        .is_err());
        assert!(fit_enet(
            &x,
            &[1.0, 2.0],
            &EnetHyper {
                lambda: 1.0,
                alpha: 1.5
            },
            DEFAULT_TOL,
            10
        )
        .is_err());
    }

    #[test]
    fn constant_feature_gets_zero_coefficient() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 7.0]).collect();
        let y: Vec<f64> = (0..6).map(|i| 2.0 * i as f64 + 1.0).collect();
        let fit = fit_enet(&x, &y, &EnetHyper::lasso(0.0), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(fit.model.coefficients[1], 0.0);
        assert!((fit.model.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((fit.model.intercept - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, i as f64 + 0.001 * ((i * i) % 3) as f64])
            .collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let fit = fit_enet(&x, &y, &EnetHyper::lasso(0.0), 1e-15, 2).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.sweeps, 2);
    }

    #[test]
    fn folds_are_contiguous() {
        assert_eq!(fold_bounds(7, 3), vec![(0, 3), (3, 5), (5, 7)]);
        assert_eq!(fold_bounds(3, 3), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn cv_select_trivial_grids() {
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, ((i * 5) % 7) as f64]).collect();
        let y: Vec<f64> = (0..9).map(|i| 3.0 * i as f64).collect();
        let one = [EnetHyper {
            lambda: 0.3,
            alpha: 0.5,
        }];
        assert_eq!(cv_select(&x, &y, &one, 3).unwrap(), one[0]);
        let dup = [EnetHyper::lasso(0.2), EnetHyper::lasso(0.2)];
        assert_eq!(cv_select(&x, &y, &dup, 3).unwrap(), dup[0]);
        assert!(cv_select(&x, &y, &[], 3).is_err());
        assert!(cv_select(&x[..2], &y[..2], &one, 3).is_err());
    }

    #[test]
    fn cv_tie_prefers_smaller_lambda_then_larger_alpha() {
        // every penalty above lambda_max fits the mean model, so scores tie
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..9).map(|i| ((i * 3) % 4) as f64).collect();
        let grid = [
            EnetHyper {
                lambda: 1e6,
                alpha: 0.5,
            },
            EnetHyper {
                lambda: 1e5,
                alpha: 0.5,
            },
            EnetHyper {
                lambda: 1e5,
                alpha: 0.9,
            },
        ];
        assert_eq!(cv_select(&x, &y, &grid, 3).unwrap(), grid[2]);
    }

    #[test]
    fn grids() {
        let g = lambda_grid();
        assert_eq!(g.len(), 50);
        assert!((g[0] - 1e-4).abs() < 1e-16);
        assert!((g[49] - 1e2).abs() < 1e-10);
        assert_eq!(default_grid(BaselineKind::Lasso).len(), 50);
        assert_eq!(default_grid(BaselineKind::Enet).len(), 250);
    }
}
