//! Conditional distributions on the original outcome scale, ordinal group
//! probabilities and loss-minimizing point predictions.

use serde::{Deserialize, Serialize};

use crate::censor::Dataset;
use crate::dist::DistParams;
use crate::error::{Error, Result};
use crate::model::FittedModel;
use crate::transform::MonotoneTransform;

/// Quantile levels used for expectations: midpoints of 512 equal bins.
pub const EXPECTATION_LEVELS: usize = 512;

/// `p(y | x)` for one predictor vector: a fitted distribution of `g(y)`
/// read back through the transformation.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalDistribution<'a> {
    pub params: DistParams,
    pub transform: Option<&'a MonotoneTransform>,
}

impl<'a> ConditionalDistribution<'a> {
    pub fn new(params: DistParams, transform: Option<&'a MonotoneTransform>) -> Self {
        Self { params, transform }
    }

    fn g(&self, y: f64) -> f64 {
        self.transform.map_or(y, |t| t.eval(y))
    }

    pub fn cdf_original(&self, y: f64) -> f64 {
        self.params.cdf(self.g(y))
    }

    pub fn quantile_original(&self, p: f64) -> f64 {
        let z = self.params.quantile(p);
        self.transform.map_or(z, |t| t.inverse(z))
    }

    /// Density by change of variables; at a knot the right segment's slope
    /// is used.
    pub fn pdf_original(&self, y: f64) -> f64 {
        match self.transform {
            Some(t) => self.params.pdf(t.eval(y)) * t.slope(y),
            None => self.params.pdf(y),
        }
    }

    /// Probabilities of the groups `(b_k, b_{k+1}]`.
    pub fn ordinal_probs(&self, bounds: &[f64]) -> Result<Vec<f64>> {
        if bounds.len() < 2 || bounds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::NonMonotoneBounds);
        }
        let cdf: Vec<f64> = bounds.iter().map(|&b| self.cdf_original(b)).collect();
        Ok(cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect())
    }

    /// Original-scale quantiles at the expectation levels.
    pub fn quantile_grid(&self) -> Vec<f64> {
        expectation_levels()
            .into_iter()
            .map(|p| self.quantile_original(p))
            .collect()
    }

    /// `E[y | x]` by the midpoint rule in probability.
    pub fn mean(&self) -> f64 {
        let q = self.quantile_grid();
        q.iter().sum::<f64>() / q.len() as f64
    }

    /// `(y, cdf, pdf)` rows over `ys`.
    pub fn cdf_pdf_grid(&self, ys: &[f64]) -> Vec<(f64, f64, f64)> {
        ys.iter()
            .map(|&y| (y, self.cdf_original(y), self.pdf_original(y)))
            .collect()
    }
}

pub fn expectation_levels() -> Vec<f64> {
    let n = EXPECTATION_LEVELS as f64;
    (0..EXPECTATION_LEVELS)
        .map(|k| (k as f64 + 0.5) / n)
        .collect()
}

/// `L(y, h)` tabulated on a grid, bilinear in between and clamped outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedLoss {
    pub ys: Vec<f64>,
    pub hs: Vec<f64>,
    /// `values[i][j] = L(ys[i], hs[j])`.
    pub values: Vec<Vec<f64>>,
}

impl TabulatedLoss {
    pub fn new(ys: Vec<f64>, hs: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if ys.is_empty() || hs.is_empty() {
            return Err(Error::EmptyLossGrid);
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
        if !increasing(&ys) || !increasing(&hs) {
            return Err(Error::InvalidConfig(
                "loss grid axes must be finite and strictly increasing".into(),
            ));
        }
        if values.len() != ys.len() || values.iter().any(|r| r.len() != hs.len()) {
            return Err(Error::InvalidConfig("loss table shape does not match its axes".into()));
        }
        Ok(Self { ys, hs, values })
    }

    pub fn eval(&self, y: f64, h: f64) -> f64 {
        let (i, ty) = locate(&self.ys, y);
        let (j, th) = locate(&self.hs, h);
        let v = |a: usize, b: usize| self.values[a][b];
        let (i1, j1) = ((i + 1).min(self.ys.len() - 1), (j + 1).min(self.hs.len() - 1));
        let lo = v(i, j) + th * (v(i, j1) - v(i, j));
        let hi = v(i1, j) + th * (v(i1, j1) - v(i1, j));
        lo + ty * (hi - lo)
    }
}

/// Segment index and fraction, clamped to the axis.
fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 1, 0.0);
    }
    let k = axis.partition_point(|&a| a <= x) - 1;
    (k, (x - axis[k]) / (axis[k + 1] - axis[k]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    Squared,
    Absolute,
    Pinball { p: f64 },
    Custom(TabulatedLoss),
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::Pinball { p } if !(*p > 0.0 && *p < 1.0) => Err(Error::InvalidConfig(
                format!("pinball level must lie in (0, 1), got {p}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, y: f64, h: f64) -> f64 {
        match self {
            LossSpec::Squared => (y - h) * (y - h),
            LossSpec::Absolute => (y - h).abs(),
            LossSpec::Pinball { p } => {
                let d = y - h;
                if d >= 0.0 {
                    p * d
                } else {
                    (p - 1.0) * d
                }
            }
            LossSpec::Custom(t) => t.eval(y, h),
        }
    }
}

/// The `h` minimizing expected loss under `dist`.
pub fn point_predict(dist: &ConditionalDistribution, loss: &LossSpec) -> Result<f64> {
    loss.validate()?;
    Ok(match loss {
        LossSpec::Squared => dist.mean(),
        LossSpec::Absolute => dist.quantile_original(0.5),
        LossSpec::Pinball { p } => dist.quantile_original(*p),
        LossSpec::Custom(table) => {
            let q = dist.quantile_grid();
            let risk = |h: f64| q.iter().map(|&y| table.eval(y, h)).sum::<f64>();
            // Candidate h: the distribution's quantiles and the loss grid.
            let mut cand: Vec<f64> = q.iter().chain(&table.hs).copied().collect();
            cand.sort_by(f64::total_cmp);
            cand.dedup();
            let risks: Vec<f64> = cand.iter().map(|&h| risk(h)).collect();
            let best = (0..cand.len())
                .min_by(|&a, &b| risks[a].total_cmp(&risks[b]))
                .expect("candidate set is nonempty");
            let lo = cand[best.saturating_sub(1)];
            let hi = cand[(best + 1).min(cand.len() - 1)];
            let h = golden_section(&risk, lo, hi, 1e-10 * (1.0 + lo.abs().max(hi.abs())));
            if risk(h) < risks[best] {
                h
            } else {
                cand[best]
            }
        }
    })
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Weighted sum of `L(y_i, h(x_i))` over uncensored validation rows.
pub fn validation_score(model: &FittedModel, validation: &Dataset, loss: &LossSpec) -> Result<f64> {
    loss.validate()?;
    let mut total = 0.0;
    for (row, obs) in validation.rows().iter().enumerate() {
        if !obs.interval.is_uncensored() {
            return Err(Error::UncensoredOnly { row });
        }
        let h = point_predict(&model.distribution(&obs.predictors)?, loss)?;
        total += obs.weight * loss.eval(obs.interval.lower(), h);
    }
    Ok(total)
}
