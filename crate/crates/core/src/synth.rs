//! Seeded synthetic data with known location and scale functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::censor::{CensoredObservation, Dataset, Schema};
use crate::dist::{asym_quantile, logit, AsymmetricParams, OutcomeInterval};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Logistic,
    AsymmetricLogistic { lower: f64, upper: f64 },
}

/// Predictors are independent uniforms on `[-2, 2]`; the outcome is
/// `location(x) + scale(x) * noise`.
#[derive(Debug, Clone, Copy)]
pub struct Generator {
    pub n_features: usize,
    pub location: fn(&[f64]) -> f64,
    pub scale: fn(&[f64]) -> f64,
    pub noise: Noise,
}

/// `2 x0 + 1.5 [x1 > 0]`: additive, tree-learnable.
pub fn tree_location(x: &[f64]) -> f64 {
    2.0 * x[0] + if x[1] > 0.0 { 1.5 } else { 0.0 }
}

/// `exp(x2 / 2)`.
pub fn varying_scale(x: &[f64]) -> f64 {
    (0.5 * x[2]).exp()
}

pub fn unit_scale(_: &[f64]) -> f64 {
    1.0
}

pub fn zero_location(_: &[f64]) -> f64 {
    0.0
}

impl Generator {
    /// Heteroscedastic logistic data with five predictors, two of them noise.
    pub fn heteroscedastic() -> Self {
        Self {
            n_features: 5,
            location: tree_location,
            scale: varying_scale,
            noise: Noise::Logistic,
        }
    }

    pub fn homoscedastic() -> Self {
        Self {
            scale: unit_scale,
            ..Self::heteroscedastic()
        }
    }

    /// Outcome independent of the predictors.
    pub fn null() -> Self {
        Self {
            location: zero_location,
            scale: unit_scale,
            ..Self::heteroscedastic()
        }
    }

    pub fn asymmetric(lower: f64, upper: f64) -> Self {
        Self {
            scale: unit_scale,
            noise: Noise::AsymmetricLogistic { lower, upper },
            ..Self::heteroscedastic()
        }
    }

    pub fn draw(&self, n: usize, seed: u64) -> Synthetic {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Synthetic {
            predictors: Vec::with_capacity(n),
            location: Vec::with_capacity(n),
            scale: Vec::with_capacity(n),
            outcome: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let x: Vec<f64> = (0..self.n_features)
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let f = (self.location)(&x);
            let s = (self.scale)(&x);
            let y = match self.noise {
                Noise::Logistic => f + s * logit(u),
                Noise::AsymmetricLogistic { lower, upper } => {
                    let p = AsymmetricParams::new(f, s * lower, s * upper)
                        .expect("generator scales are positive");
                    asym_quantile(u, &p)
                }
            };
            out.predictors.push(x);
            out.location.push(f);
            out.scale.push(s);
            out.outcome.push(y);
        }
        out
    }
}

/// Draws with the true parameters kept alongside.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub predictors: Vec<Vec<f64>>,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
    pub outcome: Vec<f64>,
}

impl Synthetic {
    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn schema(&self) -> Schema {
        let names: Vec<String> = (0..self.predictors.first().map_or(0, Vec::len))
            .map(|j| format!("x{j}"))
            .collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Schema::numeric(&refs)
    }

    /// Uncensored dataset of the outcomes.
    pub fn dataset(&self) -> Result<Dataset> {
        self.dataset_with(|y| OutcomeInterval::exact(y))
    }

    /// Dataset of `g(y)`.
    pub fn mapped(&self, g: impl Fn(f64) -> f64) -> Result<Dataset> {
        self.dataset_with(|y| OutcomeInterval::exact(g(y)))
    }

    /// Outcomes above `threshold` become `[threshold, inf)`.
    pub fn right_censored(&self, threshold: f64) -> Result<Dataset> {
        self.dataset_with(|y| {
            if y > threshold {
                OutcomeInterval::new(threshold, f64::INFINITY)
            } else {
                OutcomeInterval::exact(y)
            }
        })
    }

    /// Each outcome replaced by the group interval `(b_k, b_{k+1}]` holding it.
    /// `bounds` must start at `-inf` and end at `+inf`.
    pub fn grouped(&self, bounds: &[f64]) -> Result<Dataset> {
        self.dataset_with(|y| {
            let k = bounds.partition_point(|&b| b < y).max(1);
            OutcomeInterval::new(bounds[k - 1], bounds[k])
        })
    }

    fn dataset_with(&self, f: impl Fn(f64) -> Result<OutcomeInterval>) -> Result<Dataset> {
        let rows = self
            .predictors
            .iter()
            .zip(&self.outcome)
            .map(|(x, &y)| Ok(CensoredObservation::unweighted(f(y)?, x.clone())))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.schema(), rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_reproducible() {
        let a = Generator::heteroscedastic().draw(50, 7);
        let b = Generator::heteroscedastic().draw(50, 7);
        assert_eq!(a.outcome, b.outcome);
        let c = Generator::heteroscedastic().draw(50, 8);
        assert_ne!(a.outcome, c.outcome);
    }

    #[test]
    fn logistic_noise_has_unit_scale_spread() {
        let d = Generator::null().draw(20000, 1);
        let mut y = d.outcome.clone();
        y.sort_by(f64::total_cmp);
        let iqr = y[15000] - y[5000];
        assert!((iqr - 2.0 * 3f64.ln()).abs() < 0.1, "{iqr}");
    }

    #[test]
    fn asymmetric_noise_lower_mass() {
        let d = Generator::asymmetric(2.0, 1.0).draw(20000, 2);
        let below = d
            .outcome
            .iter()
            .zip(&d.location)
            .filter(|(y, f)| y <= f)
            .count() as f64
            / 20000.0;
        assert!((below - 2.0 / 3.0).abs() < 0.015, "{below}");
    }

    #[test]
    fn grouping_places_values_in_their_interval() {
        let d = Generator::null().draw(200, 3);
        let bounds = [f64::NEG_INFINITY, -1.0, 0.0, 1.0, f64::INFINITY];
        let g = d.grouped(&bounds).unwrap();
        for (row, y) in g.rows().iter().zip(&d.outcome) {
            assert!(row.interval.lower() < *y && *y <= row.interval.upper());
        }
    }
}
