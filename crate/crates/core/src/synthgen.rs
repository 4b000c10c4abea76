//! Seeded synthetic monthly datasets.
//!
//! The target is a piecewise-constant level plus a period-12 sinusoid plus
//! Gaussian noise, floored at 0. Each query term is the noiseless-plus-noise
//! target read `term_lag` months ahead, rescaled affinely to `[0, 100]`, plus
//! its own Gaussian noise, clipped to `[0, 100]`.
//!
//! # Generator `synthgen-v1`
//!
//! Streams are fixed so that ports can reproduce them:
//!
//! * stream `k` is `ChaCha8Rng::seed_from_u64(derive_seed(seed, &[k]))`
//!   (rand_chacha 0.9, `seed_from_u64` expands the `u64` with PCG32 as in
//!   `rand_core` 0.9); stream 0 drives the target, stream `1 + j` term `j`;
//! * a uniform is `(next_u64() >> 11) * 2^-53`;
//! * a standard normal takes two uniforms `u1, u2` and returns
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)` (one normal per pair);
//! * the target stream draws one normal per latent step `0..length + term_lag`
//!   in order; a term stream draws one normal per month.
//!
//! Noise with standard deviation 0 still consumes its draws.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::timeseries::{Dataset, MonthIndex, QueryPanel, UptakeSeries};

pub const GENERATOR: &str = "synthgen-v1";

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Number of months.
    pub length: usize,
    /// Level before the first change point, in percent.
    pub base_level: f64,
    pub seasonal_amplitude: f64,
    /// `(step, new_level)`: from `step` on the level is `new_level`.
    #[serde(default)]
    pub change_points: Vec<(usize, f64)>,
    pub noise_std: f64,
    pub n_terms: usize,
    /// Months by which the query terms lead the target.
    #[serde(default)]
    pub term_lag: usize,
    pub term_noise_std: f64,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: MonthIndex,
}

fn default_start() -> MonthIndex {
    MonthIndex::new(2011, 1).expect("valid month")
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Parameter("scenario length must be positive".into()));
        }
        for (name, v) in [
            ("base_level", self.base_level),
            ("seasonal_amplitude", self.seasonal_amplitude),
        ] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite")));
            }
        }
        for (name, v) in [("noise_std", self.noise_std), ("term_noise_std", self.term_noise_std)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let mut prev: Option<usize> = None;
        for &(step, level) in &self.change_points {
            if step >= self.length {
                return Err(Error::Parameter(format!(
                    "change point at step {step} is outside a series of length {}",
                    self.length
                )));
            }
            if prev.is_some_and(|p| step <= p) {
                return Err(Error::Parameter(
                    "change point steps must be strictly increasing".into(),
                ));
            }
            if !level.is_finite() {
                return Err(Error::Parameter(format!(
                    "change point level at step {step} is not finite"
                )));
            }
            prev = Some(step);
        }
        Ok(())
    }

    /// Level in force at step `t` (may also be past the end of the series).
    pub fn level_at(&self, t: usize) -> f64 {
        self.change_points
            .iter()
            .take_while(|(s, _)| *s <= t)
            .last()
            .map_or(self.base_level, |(_, l)| *l)
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generates the dataset described by `sc`.
pub fn generate(sc: &Scenario) -> Result<Dataset> {
    sc.validate()?;
    let total = sc.length + sc.term_lag;
    let mut target_rng = rng::stream(sc.seed, &[0]);
    let latent: Vec<f64> = (0..total)
        .map(|t| {
            let season = sc.seasonal_amplitude * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin();
            let noise = sc.noise_std * normal(&mut target_rng);
            (sc.level_at(t) + season + noise).max(0.0)
        })
        .collect();
    let target = latent[..sc.length].to_vec();

    let lead = &latent[sc.term_lag..];
    let lo = lead.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lead.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = lead
        .iter()
        .map(|v| if hi > lo { 100.0 * (v - lo) / (hi - lo) } else { 50.0 })
        .collect();
    let mut matrix = Vec::with_capacity(sc.n_terms);
    for j in 0..sc.n_terms {
        let mut r = rng::stream(sc.seed, &[1 + j as u64]);
        matrix.push(
            scaled
                .iter()
                .map(|v| (v + sc.term_noise_std * normal(&mut r)).clamp(0.0, 100.0))
                .collect(),
        );
    }
    let terms = (0..sc.n_terms).map(|j| format!("term{}", j + 1)).collect();
    let uptake = UptakeSeries::new(sc.start, target)?;
    let panel = if sc.n_terms == 0 {
        QueryPanel::without_terms(sc.start, sc.length)
    } else {
        QueryPanel::new(sc.start, terms, matrix)?
    };
    Dataset::new(uptake, panel)
}

/// Names of the built-in scenarios: the five regime-shift scenarios first,
/// then the three stationary ones.
pub const REGIME_PRESETS: [&str; 5] = [
    "media-scare",
    "supply-shortage",
    "catch-up",
    "schedule-drift",
    "recovery",
];
pub const STATIONARY_PRESETS: [&str; 3] = ["steady", "seasonal", "noisy"];

fn shifted(seed: u64, base: f64, change_points: Vec<(usize, f64)>) -> Scenario {
    Scenario {
        length: 80,
        base_level: base,
        seasonal_amplitude: 5.0,
        change_points,
        noise_std: 3.0,
        n_terms: 8,
        term_lag: 1,
        term_noise_std: 10.0,
        seed,
        start: default_start(),
    }
}

/// A built-in scenario by name.
///
/// Regime-shift presets are 80 months long with a level shift of at least
/// 20 percentage points at step 40; stationary presets have no change points.
pub fn preset(name: &str) -> Result<Scenario> {
    let sc = match name {
        "media-scare" => shifted(101, 60.0, vec![(40, 30.0)]),
        "supply-shortage" => shifted(102, 55.0, vec![(40, 25.0), (62, 45.0)]),
        "catch-up" => shifted(103, 30.0, vec![(40, 55.0)]),
        "schedule-drift" => shifted(104, 45.0, vec![(28, 50.0), (40, 75.0)]),
        "recovery" => shifted(105, 65.0, vec![(40, 35.0), (58, 60.0)]),
        "steady" => shifted(201, 50.0, vec![]),
        "seasonal" => Scenario {
            seasonal_amplitude: 10.0,
            ..shifted(202, 40.0, vec![])
        },
        "noisy" => Scenario {
            noise_std: 6.0,
            ..shifted(203, 55.0, vec![])
        },
        _ => {
            return Err(Error::Parameter(format!(
                "unknown preset '{name}'; known: {}, {}",
                REGIME_PRESETS.join(", "),
                STATIONARY_PRESETS.join(", ")
            )))
        }
    };
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{load_dataset, write_query_csv, write_uptake_csv};
    use proptest::prelude::*;

    fn flat(seed: u64) -> Scenario {
        Scenario {
            length: 30,
            base_level: 42.0,
            seasonal_amplitude: 0.0,
            change_points: vec![],
            noise_std: 0.0,
            n_terms: 2,
            term_lag: 0,
            term_noise_std: 0.0,
            seed,
            start: default_start(),
        }
    }

    #[test]
    fn noiseless_flat_is_constant() {
        let ds = generate(&flat(1)).unwrap();
        assert!(ds.uptake().values().iter().all(|v| *v == 42.0));
        assert!(ds.panel().term_values(0).iter().all(|v| *v == 50.0));
    }

    #[test]
    fn change_point_shifts_mean_exactly() {
        let sc = Scenario {
            length: 80,
            change_points: vec![(40, 72.0)],
            ..flat(2)
        };
        let ds = generate(&sc).unwrap();
        let v = ds.uptake().values();
        let before: f64 = v[..40].iter().sum::<f64>() / 40.0;
        let after: f64 = v[40..].iter().sum::<f64>() / 40.0;
        assert_eq!(after - before, 30.0);
    }

    #[test]
    fn same_seed_same_bytes() {
        let sc = preset("media-scare").unwrap();
        let a = generate(&sc).unwrap();
        let b = generate(&sc).unwrap();
        assert_eq!(write_uptake_csv(a.uptake()), write_uptake_csv(b.uptake()));
        assert_eq!(write_query_csv(a.panel()), write_query_csv(b.panel()));
        let c = generate(&Scenario { seed: 999, ..sc }).unwrap();
        assert_ne!(a.uptake().values(), c.uptake().values());
    }

    #[test]
    fn invalid_scenarios() {
        let bad = [
            Scenario { length: 0, ..flat(0) },
            Scenario {
                noise_std: -1.0,
                ..flat(0)
            },
            Scenario {
                term_noise_std: f64::NAN,
                ..flat(0)
            },
            Scenario {
                change_points: vec![(10, 1.0), (10, 2.0)],
                ..flat(0)
            },
            Scenario {
                change_points: vec![(30, 1.0)],
                ..flat(0)
            },
        ];
        for sc in bad {
            assert!(matches!(generate(&sc), Err(Error::Parameter(_))), "{sc:?}");
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn presets_have_the_advertised_shape() {
        for name in REGIME_PRESETS {
            let sc = preset(name).unwrap();
            assert_eq!(sc.length, 80);
            assert!((sc.level_at(40) - sc.level_at(39)).abs() >= 20.0, "{name}");
        }
        for name in STATIONARY_PRESETS {
            assert!(preset(name).unwrap().change_points.is_empty());
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn scenario() -> impl Strategy<Value = Scenario> {
        (
            5usize..60,
            0.0f64..80.0,
            0.0f64..20.0,
            0.0f64..10.0,
            0usize..4,
            0usize..6,
            0.0f64..20.0,
            any::<u64>(),
        )
            .prop_map(|(length, base, amp, noise, n_terms, lag, tnoise, seed)| Scenario {
                length,
                base_level: base,
                seasonal_amplitude: amp,
                change_points: vec![(length / 2, base + 10.0)],
                noise_std: noise,
                n_terms,
                term_lag: lag,
                term_noise_std: tnoise,
                seed,
                start: default_start(),
            })
    }

    proptest! {
        #[test]
        fn ranges_hold(sc in scenario()) {
            let ds = generate(&sc).unwrap();
            prop_assert_eq!(ds.len(), sc.length);
            prop_assert!(ds.uptake().values().iter().all(|v| *v >= 0.0));
            for j in 0..sc.n_terms {
                prop_assert!(ds.panel().term_values(j).iter().all(|v| (0.0..=100.0).contains(v)));
            }
        }

        #[test]
        fn csv_round_trip(sc in scenario()) {
            let ds = generate(&sc).unwrap();
            let (back, _) = load_dataset(&write_uptake_csv(ds.uptake()), &write_query_csv(ds.panel())).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn clean_terms_track_target(sc in scenario()) {
            let sc = Scenario { term_lag: 0, term_noise_std: 0.0, n_terms: 1, base_level: sc.base_level + 20.0, ..sc };
            let ds = generate(&sc).unwrap();
            let y = ds.uptake().values();
            prop_assume!(y.iter().any(|v| *v != y[0]));
            let r = pearson(y, ds.panel().term_values(0));
            prop_assert!((r - 1.0).abs() < 1e-9, "r = {}", r);
        }
    }
}
