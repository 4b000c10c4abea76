//! Exponentially weighted aggregation of expert predictions.
//!
//! Weights live on the probability simplex. After the outcome `y` is revealed,
//! each weight is multiplied by `exp(-eta * (pred - y)^2)` and the vector is
//! renormalized. The product is formed in log space and shifted by its
//! maximum before exponentiating: with percent-scale targets a squared error
//! can reach `1e4`, and `exp(-0.25 * 1e4)` is already zero in `f64`.

use crate::error::{Error, Result};

/// A probability vector over experts.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
    /// Natural log of `w`; `-inf` for zero weights.
    log_w: Vec<f64>,
}

impl WeightVector {
    /// Uniform weights `1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("cannot weight zero experts".into()));
        }
        Ok(WeightVector {
            w: vec![1.0 / n as f64; n],
            log_w: vec![-(n as f64).ln(); n],
        })
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(raw: &[f64]) -> Result<Self> {
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Value("weights must be finite and non-negative".into()));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Value("weight vector has no positive mass".into()));
        }
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let log_w = w.iter().map(|v| v.ln()).collect();
        Ok(WeightVector { w, log_w })
    }

    fn from_log(mut log_w: Vec<f64>) -> Result<Self> {
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Value("weight vector has no positive mass".into()));
        }
        let mut w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        let log_total = total.ln();
        for l in &mut log_w {
            *l -= max + log_total;
        }
        Ok(WeightVector { w, log_w })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Checks non-negativity and unit sum within `tol`.
    pub fn is_simplex(&self, tol: f64) -> bool {
        self.w.iter().all(|v| *v >= 0.0 && v.is_finite()) && (self.w.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

/// Uniform initial weights.
pub fn init_weights(n: usize) -> Result<WeightVector> {
    WeightVector::uniform(n)
}

fn check_preds(w: &WeightVector, preds: &[f64]) -> Result<()> {
    if preds.len() != w.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} weights",
            preds.len(),
            w.len()
        )));
    }
    if let Some(p) = preds.iter().find(|p| !p.is_finite()) {
        return Err(Error::Value(format!("non-finite expert prediction {p}")));
    }
    Ok(())
}

/// Weighted average `sum_n w[n] * preds[n]`.
///
/// Accumulated as an offset from the smallest prediction and clamped to the
/// prediction range, so identical predictions aggregate to exactly that value
/// and the result is always a convex combination.
pub fn aggregate_predict(w: &WeightVector, preds: &[f64]) -> Result<f64> {
    check_preds(w, preds)?;
    let lo = preds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let offset: f64 = w.w.iter().zip(preds).map(|(wi, p)| wi * (p - lo)).sum();
    Ok((lo + offset).clamp(lo, hi))
}

/// Multiplicative update `w[n] <- w[n] * exp(-eta * (preds[n] - y)^2)`,
/// renormalized.
pub fn update_weights(w: &WeightVector, preds: &[f64], y: f64, eta: f64) -> Result<WeightVector> {
    check_preds(w, preds)?;
    if !y.is_finite() {
        return Err(Error::Value(format!("non-finite observation {y}")));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::Parameter(format!(
            "learning rate must be finite and >= 0, got {eta}"
        )));
    }
    let losses: Vec<f64> = preds.iter().map(|p| (p - y).powi(2)).collect();
    // A common factor cancels in the normalization.
    if eta == 0.0 || losses.iter().all(|l| *l == losses[0]) {
        return Ok(w.clone());
    }
    let log: Vec<f64> = w.log_w.iter().zip(&losses).map(|(l, loss)| l - eta * loss).collect();
    WeightVector::from_log(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_init() {
        assert_eq!(init_weights(1).unwrap().as_slice(), &[1.0]);
        assert_eq!(init_weights(4).unwrap().as_slice(), &[0.25; 4]);
        let w = init_weights(3).unwrap();
        assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(init_weights(0).is_err());
    }

    #[test]
    fn predict_examples() {
        let w = init_weights(3).unwrap();
        assert_eq!(aggregate_predict(&w, &[7.3, 7.3, 7.3]).unwrap(), 7.3);
        let w = WeightVector::from_weights(&[1.0, 0.0]).unwrap();
        assert_eq!(aggregate_predict(&w, &[2.5, 9.0]).unwrap(), 2.5);
        let w = WeightVector::from_weights(&[0.25, 0.75]).unwrap();
        assert_eq!(aggregate_predict(&w, &[0.0, 4.0]).unwrap(), 3.0);
        assert!(matches!(aggregate_predict(&w, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn update_examples() {
        let w = init_weights(2).unwrap();
        assert_eq!(update_weights(&w, &[1.0, 0.0], 1.0, 0.0).unwrap(), w);
        assert_eq!(update_weights(&w, &[2.0, 0.0], 1.0, 0.3).unwrap(), w);
        let u = update_weights(&w, &[1.0, 0.0], 1.0, std::f64::consts::LN_2).unwrap();
        assert!((u.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((u.as_slice()[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            update_weights(&w, &[f64::NAN, 0.0], 1.0, 0.1),
            Err(Error::Value(_))
        ));
    }

    #[test]
    fn extreme_losses_stay_on_simplex() {
        let mut w = init_weights(3).unwrap();
        for _ in 0..50 {
            w = update_weights(&w, &[0.0, 1000.0, 2000.0], 1000.0, 0.25).unwrap();
            assert!(w.is_simplex(1e-9));
        }
        // the loser of every round is driven to zero, not NaN
        assert_eq!(w.as_slice()[0], 0.0);
        assert_eq!(w.as_slice()[1], 1.0);
    }

    fn weights(n: usize) -> impl Strategy<Value = WeightVector> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|v| WeightVector::from_weights(&v).unwrap())
    }

    proptest! {
        #[test]
        fn simplex_preserved(
            (w, preds) in (1usize..12).prop_flat_map(|n| (weights(n), prop::collection::vec(-1e3f64..1e3, n))),
            y in -1e3f64..1e3,
            eta in 0.0f64..1e6,
        ) {
            let u = update_weights(&w, &preds, y, eta).unwrap();
            prop_assert!(u.is_simplex(1e-9));
        }

        #[test]
        fn lower_loss_grows_relative_weight(
            (w, preds) in (2usize..8).prop_flat_map(|n| (weights(n), prop::collection::vec(-10.0f64..10.0, n))),
            y in -10.0f64..10.0,
            eta in 0.01f64..0.5,
        ) {
            let u = update_weights(&w, &preds, y, eta).unwrap();
            for a in 0..preds.len() {
                for b in 0..preds.len() {
                    let (la, lb) = ((preds[a] - y).powi(2), (preds[b] - y).powi(2));
                    let ra = u.as_slice()[a] / w.as_slice()[a];
                    let rb = u.as_slice()[b] / w.as_slice()[b];
                    if lb - la > 1e-6 && rb > 0.0 {
                        prop_assert!(ra > rb);
                    }
                }
            }
        }

        #[test]
        fn scale_equivariance(
            (w, preds) in (1usize..8).prop_flat_map(|n| (weights(n), prop::collection::vec(-5.0f64..5.0, n))),
            eta in 0.01f64..1.0,
            c in 0.1f64..10.0,
        ) {
            // losses scale by c when both predictions and target scale by sqrt(c)
            let s = c.sqrt();
            let scaled: Vec<f64> = preds.iter().map(|p| p * s).collect();
            let a = update_weights(&w, &preds, 0.0, eta).unwrap();
            let b = update_weights(&w, &scaled, 0.0, eta / c).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn aggregate_is_convex(
            (w, preds) in (1usize..10).prop_flat_map(|n| (weights(n), prop::collection::vec(-100.0f64..100.0, n))),
        ) {
            let p = aggregate_predict(&w, &preds).unwrap();
            let lo = preds.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= p && p <= hi);
            let dot: f64 = w.as_slice().iter().zip(&preds).map(|(a, b)| a * b).sum();
            prop_assert!((p - dot).abs() < 1e-9 * (1.0 + dot.abs()));
        }
    }
}
