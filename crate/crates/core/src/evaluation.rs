//! Walk-forward evaluation, random hyperparameter search and comparison
//! reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline_with, BaselineKind, BaselineOptions};
use crate::error::{Error, Result};
use crate::estimator::{run_with, EstimationTrace, EstimatorConfig, RunOptions, DEFAULT_WARMUP};
use crate::featurization::{select_terms, FeatureSchema};
use crate::rng;
use crate::timeseries::Dataset;

/// Root mean squared error.
pub fn rmse(predictions: &[f64], observations: &[f64]) -> Result<f64> {
    if predictions.len() != observations.len() {
        return Err(Error::Parameter(format!(
            "{} predictions for {} observations",
            predictions.len(),
            observations.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Parameter("RMSE of an empty list".into()));
    }
    let sse: f64 = predictions.iter().zip(observations).map(|(p, o)| (p - o).powi(2)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Inclusive ranges the random search samples from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchIntervals {
    /// Upper end of each trial's window interval; trials use `[1, hi]`.
    pub window: (usize, usize),
    pub n_lags: (usize, usize),
    pub n_web: (usize, usize),
    pub n_trees: (usize, usize),
    pub eta: (f64, f64),
}

impl Default for SearchIntervals {
    fn default() -> Self {
        SearchIntervals {
            window: (1, 46),
            n_lags: (0, 45),
            n_web: (0, 30),
            n_trees: (500, 10_000),
            eta: (0.001, 0.25),
        }
    }
}

impl SearchIntervals {
    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("window", self.window),
            ("n_lags", self.n_lags),
            ("n_web", self.n_web),
            ("n_trees", self.n_trees),
        ];
        for (name, (lo, hi)) in ints {
            if lo > hi {
                return Err(Error::Parameter(format!("empty {name} interval [{lo}, {hi}]")));
            }
        }
        if self.n_trees.0 == 0 {
            return Err(Error::Parameter("n_trees interval must exclude 0".into()));
        }
        let (lo, hi) = self.eta;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Parameter(format!("invalid eta interval [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// The `n_web` interval capped at the number of available terms.
    fn web_interval(&self, n_terms: usize) -> Result<(usize, usize)> {
        let (lo, hi) = self.n_web;
        if lo > n_terms {
            return Err(Error::Parameter(format!(
                "n_web interval starts at {lo} but only {n_terms} terms exist"
            )));
        }
        Ok((lo, hi.min(n_terms)))
    }
}

/// Default tuning range: the first half of the steps after warm-up.
pub fn default_tune_range(len: usize, warmup: usize) -> (usize, usize) {
    let t0 = warmup + 1;
    let t1 = t0 + len.saturating_sub(t0) / 2;
    (t0, t1)
}

fn check_range(ds: &Dataset, (t0, t1): (usize, usize)) -> Result<()> {
    if t0 == 0 || t0 >= t1 || t1 > ds.len() {
        return Err(Error::Parameter(format!(
            "tune range {t0}:{t1} must satisfy 0 < start < end <= {}",
            ds.len()
        )));
    }
    Ok(())
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial<C> {
    pub index: usize,
    pub config: C,
    /// RMSE over the tuning range; infinite when the trial failed or made no
    /// estimate inside the range.
    pub rmse: f64,
    pub n_predictions: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<C> {
    pub best: C,
    pub best_index: usize,
    pub trials: Vec<Trial<C>>,
}

fn pick_best<C: Clone>(trials: Vec<Trial<C>>) -> Result<SearchOutcome<C>> {
    let mut best: Option<usize> = None;
    for (i, t) in trials.iter().enumerate() {
        if t.rmse.is_finite() && best.is_none_or(|b| t.rmse < trials[b].rmse) {
            best = Some(i);
        }
    }
    let best_index = best.ok_or_else(|| {
        Error::Parameter(format!(
            "none of {} trials produced an estimate in the tuning range",
            trials.len()
        ))
    })?;
    Ok(SearchOutcome {
        best: trials[best_index].config.clone(),
        best_index,
        trials,
    })
}

/// Trials are only comparable if each one estimates every step of the tuning
/// range.
fn covers(first_step: usize, (t0, _): (usize, usize)) -> Result<()> {
    if first_step > t0 {
        return Err(Error::InsufficientHistory(format!(
            "first estimate at step {first_step} is after the tuning range start {t0}"
        )));
    }
    Ok(())
}

fn score(trace: Result<EstimationTrace>, (t0, t1): (usize, usize)) -> (f64, usize, Option<String>) {
    match trace {
        Ok(trace) => {
            let n = trace.steps_in(t0, t1).count();
            (trace.rmse_in(t0, t1).unwrap_or(f64::INFINITY), n, None)
        }
        Err(e) => (f64::INFINITY, 0, Some(e.to_string())),
    }
}

/// Draws one estimator configuration. Counts are uniform integers, eta is
/// continuous uniform. The window interval of a trial is `[1, hi]` with `hi`
/// drawn from `intervals.window`, so each trial still mixes window sizes.
pub fn sample_config<R: Rng + ?Sized>(
    intervals: &SearchIntervals,
    n_terms: usize,
    base: &EstimatorConfig,
    rng: &mut R,
) -> Result<EstimatorConfig> {
    let hi = rng.random_range(intervals.window.0..=intervals.window.1);
    let n_lags = rng.random_range(intervals.n_lags.0..=intervals.n_lags.1);
    let web = intervals.web_interval(n_terms)?;
    let n_web = rng.random_range(web.0..=web.1);
    let n_trees = rng.random_range(intervals.n_trees.0..=intervals.n_trees.1);
    let (elo, ehi) = intervals.eta;
    let eta = if elo == ehi { elo } else { rng.random_range(elo..ehi) };
    Ok(EstimatorConfig {
        eta,
        n_trees,
        window_interval: (intervals.window.0.min(1), hi),
        n_lags,
        n_web,
        ..base.clone()
    })
}

/// Random search over estimator configurations, scored by walk-forward RMSE
/// on steps `[t0, t1)`. Only history before `t1` is ever read.
///
/// `base` supplies everything not sampled (warm-up, tree parameters, seed).
pub fn random_search(
    ds: &Dataset,
    intervals: &SearchIntervals,
    n_samples: usize,
    tune_range: (usize, usize),
    seed: u64,
    base: &EstimatorConfig,
) -> Result<SearchOutcome<EstimatorConfig>> {
    intervals.validate()?;
    check_range(ds, tune_range)?;
    if n_samples == 0 {
        return Err(Error::Parameter("at least one trial is required".into()));
    }
    let mut trials = Vec::with_capacity(n_samples);
    for index in 0..n_samples {
        let mut r = rng::stream(seed, &[index as u64]);
        let config = sample_config(intervals, ds.panel().n_terms(), base, &mut r)?;
        let trace = covers(config.first_step(), tune_range).and_then(|()| {
            run_with(
                ds,
                &config,
                RunOptions {
                    record_weights: false,
                    until: Some(tune_range.1),
                },
            )
        });
        let (rmse, n_predictions, error) = score(trace, tune_range);
        log::debug!("trial {index}: rmse {rmse:.4} over {n_predictions} steps");
        trials.push(Trial {
            index,
            config,
            rmse,
            n_predictions,
            error,
        });
    }
    pick_best(trials)
}

/// Feature shape of a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineShape {
    pub n_lags: usize,
    pub n_web: usize,
}

/// Baseline feature schema: `n_lags` lags plus the `n_web` terms most
/// correlated with uptake during warm-up.
pub fn baseline_schema(ds: &Dataset, n_lags: usize, n_web: usize, warmup: usize) -> Result<FeatureSchema> {
    let terms = select_terms(ds, n_web, warmup)?;
    FeatureSchema::new(n_lags, terms, ds.panel())
}

/// Random search over the baseline's feature shape, drawn from the same
/// `n_lags` and `n_web` intervals as the adaptive estimator. The penalty is
/// still chosen by cross-validation inside every walk-forward step.
pub fn random_search_baseline(
    ds: &Dataset,
    kind: BaselineKind,
    intervals: &SearchIntervals,
    n_samples: usize,
    tune_range: (usize, usize),
    seed: u64,
    warmup: usize,
) -> Result<SearchOutcome<BaselineShape>> {
    intervals.validate()?;
    check_range(ds, tune_range)?;
    if n_samples == 0 {
        return Err(Error::Parameter("at least one trial is required".into()));
    }
    let web = intervals.web_interval(ds.panel().n_terms())?;
    let mut trials = Vec::with_capacity(n_samples);
    for index in 0..n_samples {
        let mut r = rng::stream(seed, &[index as u64, 1]);
        let shape = BaselineShape {
            n_lags: r.random_range(intervals.n_lags.0..=intervals.n_lags.1),
            n_web: r.random_range(web.0..=web.1),
        };
        let first = warmup.max(shape.n_lags) + 1;
        let trace = covers(first, tune_range)
            .and_then(|()| baseline_schema(ds, shape.n_lags, shape.n_web, warmup))
            .and_then(|schema| {
                run_baseline_with(
                    ds,
                    kind,
                    &schema,
                    warmup,
                    &BaselineOptions {
                        until: Some(tune_range.1),
                        grid: None,
                    },
                )
                .map(|r| r.trace)
            });
        let (rmse, n_predictions, error) = score(trace, tune_range);
        trials.push(Trial {
            index,
            config: shape,
            rmse,
            n_predictions,
            error,
        });
    }
    pick_best(trials)
}

/// What to run in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Atse(EstimatorConfig),
    Lasso(BaselineShape),
    Enet(BaselineShape),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub method: Method,
}

impl MethodSpec {
    pub fn new(name: impl Into<String>, method: Method) -> Self {
        MethodSpec {
            name: name.into(),
            method,
        }
    }

    /// Walk-forward trace of this method on `ds`.
    pub fn run(&self, ds: &Dataset, warmup: usize) -> Result<EstimationTrace> {
        match &self.method {
            Method::Atse(cfg) => {
                let cfg = EstimatorConfig { warmup, ..cfg.clone() };
                run_with(ds, &cfg, RunOptions::default())
            }
            Method::Lasso(shape) | Method::Enet(shape) => {
                let kind = match self.method {
                    Method::Lasso(_) => BaselineKind::Lasso,
                    _ => BaselineKind::Enet,
                };
                let schema = baseline_schema(ds, shape.n_lags, shape.n_web, warmup)?;
                run_baseline_with(ds, kind, &schema, warmup, &BaselineOptions::default()).map(|r| r.trace)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub warmup: usize,
    /// Score only steps at or after this one.
    pub eval_from: Option<usize>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            warmup: DEFAULT_WARMUP,
            eval_from: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub series: String,
    pub method: String,
    pub rmse: f64,
    pub n_predictions: usize,
    pub best: bool,
}

/// RMSE per (series, method), with the best method of each series flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
}

/// Runs every method on every series and scores them on the steps all
/// methods estimated (from `eval_from` on, if set).
pub fn compare(
    datasets: &[(String, Dataset)],
    methods: &[MethodSpec],
    opts: &CompareOptions,
) -> Result<ComparisonReport> {
    if datasets.is_empty() || methods.is_empty() {
        return Err(Error::Parameter(
            "compare needs at least one series and one method".into(),
        ));
    }
    let mut rows = Vec::new();
    for (series, ds) in datasets {
        let traces = methods
            .iter()
            .map(|m| {
                m.run(ds, opts.warmup).map_err(|e| Error::Run {
                    series: series.clone(),
                    method: m.name.clone(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let from = traces
            .iter()
            .map(|t| t.steps.first().map_or(ds.len(), |s| s.t))
            .chain(opts.eval_from)
            .max()
            .unwrap_or(0);
        let start = rows.len();
        for (m, trace) in methods.iter().zip(&traces) {
            let rmse = trace.rmse_in(from, ds.len()).ok_or_else(|| Error::Run {
                series: series.clone(),
                method: m.name.clone(),
                source: Box::new(Error::InsufficientHistory(format!(
                    "no estimates in the common range starting at step {from}"
                ))),
            })?;
            rows.push(ReportRow {
                series: series.clone(),
                method: m.name.clone(),
                rmse,
                n_predictions: trace.steps_in(from, ds.len()).count(),
                best: false,
            });
        }
        let best = (start..rows.len())
            .reduce(|b, i| if rows[i].rmse < rows[b].rmse { i } else { b })
            .expect("at least one method");
        rows[best].best = true;
    }
    Ok(ComparisonReport { rows })
}

impl ComparisonReport {
    pub fn rmse(&self, series: &str, method: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.series == series && r.method == method)
            .map(|r| r.rmse)
    }

    /// `series,method,rmse,n_predictions,best`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,method,rmse,n_predictions,best\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.series, r.method, r.rmse, r.n_predictions, r.best
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Markdown table with one row per series and one column per method; the
    /// best value of a row is bold. With `references` (series -> reference
    /// RMSE), values at or below the reference get an asterisk.
    pub fn to_table(&self, references: Option<&BTreeMap<String, f64>>) -> String {
        let mut series: Vec<&str> = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !series.contains(&r.series.as_str()) {
                series.push(&r.series);
            }
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        let mut out = String::from("| Series |");
        for m in &methods {
            let _ = write!(out, " {m} |");
        }
        out.push_str("\n|---|");
        for _ in &methods {
            out.push_str("---:|");
        }
        out.push('\n');
        for s in &series {
            let _ = write!(out, "| {s} |");
            for m in &methods {
                match self.rows.iter().find(|r| r.series == *s && r.method == *m) {
                    Some(r) => {
                        let mut cell = format!("{:.2}", r.rmse);
                        if r.best {
                            cell = format!("**{cell}**");
                        }
                        if references.and_then(|refs| refs.get(*s)).is_some_and(|b| r.rmse <= *b) {
                            cell.push('*');
                        }
                        let _ = write!(out, " {cell} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[0.0], &[3.0]).unwrap(), 3.0);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn default_intervals() {
        let d = SearchIntervals::default();
        assert_eq!(d.window, (1, 46));
        assert_eq!(d.n_lags, (0, 45));
        assert_eq!(d.n_web, (0, 30));
        assert_eq!(d.n_trees, (500, 10_000));
        assert_eq!(d.eta, (0.001, 0.25));
    }

    #[test]
    fn tune_range_is_first_half() {
        assert_eq!(default_tune_range(80, 24), (25, 52));
        assert_eq!(default_tune_range(66, 24), (25, 45));
    }

    #[test]
    fn collapsed_intervals_give_that_point() {
        let iv = SearchIntervals {
            window: (7, 7),
            n_lags: (3, 3),
            n_web: (1, 1),
            n_trees: (40, 40),
            eta: (0.1, 0.1),
        };
        let mut r = rng::stream(5, &[]);
        let c = sample_config(&iv, 4, &EstimatorConfig::default(), &mut r).unwrap();
        assert_eq!(c.window_interval, (1, 7));
        assert_eq!((c.n_lags, c.n_web, c.n_trees, c.eta), (3, 1, 40, 0.1));
    }

    #[test]
    fn bad_intervals() {
        let iv = SearchIntervals {
            n_lags: (5, 2),
            ..SearchIntervals::default()
        };
        assert!(iv.validate().is_err());
        let iv = SearchIntervals {
            eta: (0.3, 0.1),
            ..SearchIntervals::default()
        };
        assert!(iv.validate().is_err());
    }

    fn report(values: &[(&str, &str, f64)]) -> ComparisonReport {
        ComparisonReport {
            rows: values
                .iter()
                .map(|(s, m, r)| ReportRow {
                    series: s.to_string(),
                    method: m.to_string(),
                    rmse: *r,
                    n_predictions: 10,
                    best: false,
                })
                .collect(),
        }
    }

    #[test]
    fn csv_and_table_layout() {
        let mut rep = report(&[("HPV-1", "LASS", 14.6), ("HPV-1", "ATSE", 10.0)]);
        rep.rows[1].best = true;
        assert_eq!(
            rep.to_csv(),
            "series,method,rmse,n_predictions,best\nHPV-1,LASS,14.6,10,false\nHPV-1,ATSE,10,10,true\n"
        );
        let refs: BTreeMap<String, f64> = [("HPV-1".to_string(), 11.5)].into();
        assert_eq!(
            rep.to_table(Some(&refs)),
            "| Series | LASS | ATSE |\n|---|---:|---:|\n| HPV-1 | 14.60 | **10.00*** |\n"
        );
        assert_eq!(ComparisonReport::from_json(&rep.to_json()).unwrap(), rep);
    }

    proptest! {
        #[test]
        fn rmse_properties(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50),
            c in -10.0f64..10.0,
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
            let ca: Vec<f64> = a.iter().map(|v| v * c).collect();
            let cb: Vec<f64> = b.iter().map(|v| v * c).collect();
            let lhs = rmse(&ca, &cb).unwrap();
            let rhs = c.abs() * rmse(&a, &b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
        }
    }
}
