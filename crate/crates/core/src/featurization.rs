//! Feature construction.
//!
//! A feature vector for step `t` is
//!
//! ```text
//! [ y(t-1), y(t-2), ..., y(t-n_lags), q_1(t), q_2(t), ..., q_k(t) ]
//! ```
//!
//! Uptake enters only through lags, so the vector never depends on `y(t)` or
//! anything later. Query frequencies are taken from the same month: web data
//! is available in near real time while the uptake for that month is not.

use crate::error::{Error, Result};
use crate::timeseries::{Dataset, QueryPanel};

/// Which features exist and in what order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    n_lags: usize,
    term_indices: Vec<usize>,
    labels: Vec<String>,
}

impl FeatureSchema {
    /// `n_lags` uptake lags followed by the listed panel terms.
    pub fn new(n_lags: usize, term_indices: Vec<usize>, panel: &QueryPanel) -> Result<Self> {
        for (i, &k) in term_indices.iter().enumerate() {
            if k >= panel.n_terms() {
                return Err(Error::Parameter(format!(
                    "term index {k} out of range for a panel of {} terms",
                    panel.n_terms()
                )));
            }
            if term_indices[..i].contains(&k) {
                return Err(Error::Parameter(format!("term index {k} listed twice")));
            }
        }
        let labels = (1..=n_lags)
            .map(|k| format!("lag_{k}"))
            .chain(term_indices.iter().map(|&k| format!("term_{}", panel.terms()[k])))
            .collect();
        Ok(FeatureSchema {
            n_lags,
            term_indices,
            labels,
        })
    }

    pub fn n_lags(&self) -> usize {
        self.n_lags
    }

    pub fn term_indices(&self) -> &[usize] {
        &self.term_indices
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Total feature count.
    pub fn len(&self) -> usize {
        self.n_lags + self.term_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Feature values for one step, ordered per [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn pearson_abs(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).abs().min(1.0))
}

/// Picks the `k_w` terms most correlated (in absolute value) with uptake over
/// steps `[0, train_end)`. Ties keep panel column order; zero-variance terms
/// rank last.
pub fn select_terms(ds: &Dataset, k_w: usize, train_end: usize) -> Result<Vec<usize>> {
    let panel = ds.panel();
    if k_w > panel.n_terms() {
        return Err(Error::Parameter(format!(
            "cannot select {k_w} terms from a panel of {}",
            panel.n_terms()
        )));
    }
    if k_w == 0 {
        return Ok(Vec::new());
    }
    if train_end < 2 || train_end > ds.len() {
        return Err(Error::Parameter(format!(
            "term selection window [0, {train_end}) must hold at least 2 steps of a {}-step dataset",
            ds.len()
        )));
    }
    let y = &ds.uptake().values()[..train_end];
    let mut scored: Vec<(usize, Option<f64>)> = (0..panel.n_terms())
        .map(|k| (k, pearson_abs(&panel.term_values(k)[..train_end], y)))
        .collect();
    // Stable sort keeps column order among equal scores.
    scored.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(scored.into_iter().take(k_w).map(|(k, _)| k).collect())
}

/// Writes the features of step `t` into `out`, reading uptake only below `t`.
pub(crate) fn fill_row(uptake: &[f64], panel: &QueryPanel, schema: &FeatureSchema, t: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend((1..=schema.n_lags).map(|k| uptake[t - k]));
    out.extend(schema.term_indices.iter().map(|&k| panel.value(k, t)));
}

pub(crate) fn check_step(schema: &FeatureSchema, t: usize, len: usize) -> Result<()> {
    if t < schema.n_lags {
        return Err(Error::InsufficientHistory(format!(
            "step {t} needs {} uptake lags",
            schema.n_lags
        )));
    }
    if t >= len {
        return Err(Error::Range { index: t, len });
    }
    Ok(())
}

/// Features of step `t`: uptake lags 1..n_lags, then same-month term frequencies.
pub fn feature_vector_at(ds: &Dataset, schema: &FeatureSchema, t: usize) -> Result<FeatureVector> {
    check_step(schema, t, ds.len())?;
    let mut row = Vec::with_capacity(schema.len());
    fill_row(ds.uptake().values(), ds.panel(), schema, t, &mut row);
    Ok(FeatureVector(row))
}

/// Rows `(feature_vector_at(t), uptake(t))` for every `t` in `[n_lags, t_end)`.
pub fn training_matrix(ds: &Dataset, schema: &FeatureSchema, t_end: usize) -> Result<(Vec<FeatureVector>, Vec<f64>)> {
    if t_end > ds.len() {
        return Err(Error::Range {
            index: t_end,
            len: ds.len(),
        });
    }
    if t_end <= schema.n_lags {
        return Err(Error::InsufficientHistory(format!(
            "no training rows before step {t_end} with {} lags",
            schema.n_lags
        )));
    }
    let y = ds.uptake().values();
    let rows = (schema.n_lags..t_end)
        .map(|t| {
            let mut row = Vec::with_capacity(schema.len());
            fill_row(y, ds.panel(), schema, t, &mut row);
            FeatureVector(row)
        })
        .collect();
    Ok((rows, y[schema.n_lags..t_end].to_vec()))
}
