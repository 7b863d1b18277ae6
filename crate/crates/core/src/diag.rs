//! Validation diagnostics: location/scale subsets, marginal Q-Q series and
//! standardized-residual Q-Q series against fixed reference families.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::censor::{turnbull_cdf, TURNBULL_DEFAULT_MAX_ITER, TURNBULL_DEFAULT_TOL};
use crate::dist::{logit, DistParams, OutcomeInterval};
use crate::error::{Error, Result};
use crate::transform::{solve_g_at, transform_interval, MonotoneTransform};

pub const DEFAULT_MIN_COUNT: usize = 20;

/// 99 levels `0.01, 0.02, ..., 0.99`.
pub fn default_levels() -> Vec<f64> {
    (1..100).map(|k| k as f64 / 100.0).collect()
}

/// Rows with `r < f <= t` and `u < s <= v`, where `s` is the scale statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetRule {
    pub location: (f64, f64),
    pub scale: (f64, f64),
}

impl SubsetRule {
    pub fn everything() -> Self {
        Self {
            location: (f64::NEG_INFINITY, f64::INFINITY),
            scale: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub rule: SubsetRule,
    pub rows: Vec<usize>,
}

/// Rank-based quantile groups of `idx` by `key`, ties in row order. Returns
/// the groups with the half-open value range each one covers.
fn quantile_groups(idx: &[usize], key: &[f64], cuts: usize) -> Vec<((f64, f64), Vec<usize>)> {
    let mut sorted = idx.to_vec();
    sorted.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    let n = sorted.len();
    let mut out = Vec::with_capacity(cuts);
    let mut lower = f64::NEG_INFINITY;
    for k in 0..cuts {
        let group: Vec<usize> = sorted[k * n / cuts..(k + 1) * n / cuts].to_vec();
        let upper = if k + 1 == cuts {
            f64::INFINITY
        } else {
            group.last().map_or(lower, |&i| key[i])
        };
        out.push(((lower, upper), group));
        lower = upper;
    }
    out
}

/// Cut locations at their quantiles, then scales at quantiles within each
/// location stratum: `cuts^2` subsets partitioning all rows.
pub fn partition_by_location_scale(params: &[DistParams], cuts: usize) -> Result<Vec<Subset>> {
    if params.is_empty() {
        return Err(Error::EmptyValidation);
    }
    if cuts == 0 {
        return Err(Error::InvalidConfig("cuts_per_axis must be at least 1".into()));
    }
    let loc: Vec<f64> = params.iter().map(DistParams::location).collect();
    let scale: Vec<f64> = params.iter().map(DistParams::scale_statistic).collect();
    let all: Vec<usize> = (0..params.len()).collect();
    let mut out = Vec::with_capacity(cuts * cuts);
    for (location, stratum) in quantile_groups(&all, &loc, cuts) {
        for (scale_range, mut rows) in quantile_groups(&stratum, &scale, cuts) {
            rows.sort_unstable();
            out.push(Subset {
                rule: SubsetRule {
                    location,
                    scale: scale_range,
                },
                rows,
            });
        }
    }
    Ok(out)
}

/// Average of the per-row CDFs at `z`.
pub fn predicted_marginal_cdf(params: &[DistParams], z: f64) -> f64 {
    params.iter().map(|p| p.cdf(z)).sum::<f64>() / params.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QQPoint {
    pub level: f64,
    pub predicted: f64,
    pub empirical: f64,
    /// Observations in the tail beyond the empirical point.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omitted {
    pub level: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQSeries {
    pub reference: String,
    pub points: Vec<QQPoint>,
    pub omitted: Vec<Omitted>,
}

impl QQSeries {
    /// Largest `|predicted - empirical|` over points with level in `[lo, hi]`.
    pub fn max_gap(&self, lo: f64, hi: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.level >= lo - 1e-12 && p.level <= hi + 1e-12)
            .map(|p| (p.predicted - p.empirical).abs())
            .fold(0.0, f64::max)
    }

    fn push(&mut self, point: QQPoint, min_count: usize) {
        if point.count < min_count {
            self.omitted.push(Omitted {
                level: point.level,
                reason: format!("supported by {} observations", point.count),
            });
        } else {
            self.points.push(point);
        }
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    let ok = levels.iter().all(|p| *p > 0.0 && *p < 1.0) && levels.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(
            "quantile levels must be strictly increasing inside (0, 1)".into(),
        ))
    }
}

/// Left-continuous ECDF inverse of sorted values, with the tail count.
fn empirical_quantile(sorted: &[f64], p: f64) -> (f64, usize) {
    let n = sorted.len();
    let k = ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    (sorted[k - 1], k.min(n - k + 1))
}

/// Predicted versus empirical marginal quantiles of `g(y)` for one subset.
///
/// With censoring the empirical side is the Turnbull estimate, used only at
/// points where it is identified; requested levels that fall inside a
/// censored gap are recorded as omitted.
pub fn marginal_qq(
    params: &[DistParams],
    intervals: &[OutcomeInterval],
    transform: Option<&MonotoneTransform>,
    levels: &[f64],
    min_count: usize,
) -> Result<QQSeries> {
    if params.len() != intervals.len() {
        return Err(Error::InvalidData(format!(
            "{} predictions for {} intervals",
            params.len(),
            intervals.len()
        )));
    }
    if params.len() < min_count.max(1) {
        return Err(Error::SubsetTooSmall {
            size: params.len(),
            min: min_count,
        });
    }
    check_levels(levels)?;
    let mapped: Vec<OutcomeInterval> = match transform {
        Some(t) => intervals.iter().map(|iv| transform_interval(t, iv)).collect(),
        None => intervals.to_vec(),
    };
    let n = mapped.len();
    let mut series = QQSeries {
        reference: "predicted".into(),
        points: Vec::new(),
        omitted: Vec::new(),
    };

    if mapped.iter().all(OutcomeInterval::is_uncensored) {
        let mut z: Vec<f64> = mapped.iter().map(OutcomeInterval::lower).collect();
        z.sort_by(f64::total_cmp);
        for &p in levels {
            let (empirical, count) = empirical_quantile(&z, p);
            let predicted = solve_g_at(p, params)?;
            series.push(
                QQPoint {
                    level: p,
                    predicted,
                    empirical,
                    count,
                },
                min_count,
            );
        }
        return Ok(series);
    }

    let cdf = turnbull_cdf(&mapped, None, TURNBULL_DEFAULT_TOL, TURNBULL_DEFAULT_MAX_ITER)?.cdf;
    let (lo, hi) = (levels[0], levels[levels.len() - 1]);
    let points = cdf.identified_points();
    for &p in levels {
        let q = cdf.quantile(p);
        let atom = cdf
            .segments()
            .iter()
            .any(|s| s.is_atom() && s.lower == q);
        if !atom && !points.iter().any(|&(v, _)| v == q) {
            series.omitted.push(Omitted {
                level: p,
                reason: "inside a censored gap".into(),
            });
        }
    }
    for (v, level) in points {
        if level <= 0.0 || level >= 1.0 || level < lo || level > hi {
            continue;
        }
        let count = ((level.min(1.0 - level)) * n as f64).round() as usize;
        series.push(
            QQPoint {
                level,
                predicted: solve_g_at(level, params)?,
                empirical: v,
                count,
            },
            min_count,
        );
    }
    Ok(series)
}

/// `(g(y) - f) / s`; asymmetric models divide by the scale of the side `g(y)`
/// falls on.
pub fn standardized_residuals(
    params: &[DistParams],
    intervals: &[OutcomeInterval],
    transform: Option<&MonotoneTransform>,
) -> Result<Vec<f64>> {
    params
        .iter()
        .zip(intervals)
        .enumerate()
        .map(|(row, (p, iv))| {
            if !iv.is_uncensored() {
                return Err(Error::UncensoredOnly { row });
            }
            let z = transform.map_or(iv.lower(), |t| t.eval(iv.lower()));
            Ok(match p {
                DistParams::Symmetric(s) => (z - s.location()) / s.scale(),
                DistParams::Asymmetric(a) => {
                    let d = z - a.mode();
                    if d <= 0.0 {
                        d / a.lower_scale()
                    } else {
                        d / a.upper_scale()
                    }
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Logistic,
    Normal,
    Laplace,
    Slash,
}

impl Reference {
    pub const ALL: [Reference; 4] = [
        Reference::Logistic,
        Reference::Normal,
        Reference::Laplace,
        Reference::Slash,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reference::Logistic => "logistic",
            Reference::Normal => "normal",
            Reference::Laplace => "laplace",
            Reference::Slash => "slash",
        }
    }

    pub fn cdf(self, x: f64) -> f64 {
        match self {
            Reference::Logistic => crate::dist::sigmoid(x),
            Reference::Normal => std_normal().cdf(x),
            Reference::Laplace => {
                if x < 0.0 {
                    0.5 * x.exp()
                } else {
                    1.0 - 0.5 * (-x).exp()
                }
            }
            Reference::Slash => slash_cdf(x),
        }
    }

    pub fn quantile(self, p: f64) -> f64 {
        match self {
            Reference::Logistic => logit(p),
            Reference::Normal => std_normal().inverse_cdf(p),
            Reference::Laplace => {
                let d = p - 0.5;
                -d.signum() * (1.0 - 2.0 * d.abs()).ln()
            }
            Reference::Slash => slash_quantile(p),
        }
    }

    /// Quantile of the two-piece version with mass `w` below zero: each
    /// half of the symmetric reference is rescaled to carry its own mass.
    pub fn quantile_split(self, p: f64, w: f64) -> f64 {
        if p <= w {
            self.quantile(0.5 * p / w)
        } else {
            self.quantile(0.5 + 0.5 * (p - w) / (1.0 - w))
        }
    }
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Reference::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown reference distribution '{s}'")))
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Slash CDF: `Phi(x) - (phi(0) - phi(x)) / x`, with value 1/2 at 0.
pub fn slash_cdf(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return 0.5;
    }
    let phi = INV_SQRT_2PI * (-0.5 * x * x).exp();
    std_normal().cdf(x) - (INV_SQRT_2PI - phi) / x
}

/// Slash quantile by bisection on [`slash_cdf`]. The tails are heavy
/// (`F(x) ~ phi(0)/|x|`), so the bracket is widened geometrically.
pub fn slash_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while slash_cdf(lo) > p {
        lo *= 2.0;
    }
    while slash_cdf(hi) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slash_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Reference quantiles for a level grid, computed once and reused across
/// subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceQuantiles {
    pub reference: Reference,
    pub lower_mass: f64,
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
}

impl ReferenceQuantiles {
    pub fn new(reference: Reference, levels: &[f64], lower_mass: f64) -> Result<Self> {
        check_levels(levels)?;
        if !(lower_mass > 0.0 && lower_mass < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lower mass must lie in (0, 1), got {lower_mass}"
            )));
        }
        Ok(Self {
            reference,
            lower_mass,
            levels: levels.to_vec(),
            quantiles: levels
                .iter()
                .map(|&p| reference.quantile_split(p, lower_mass))
                .collect(),
        })
    }
}

/// Residual quantiles against a reference family; `lower_mass` is 1/2 for
/// symmetric models and the mean `s_l / (s_l + s_u)` for asymmetric ones.
pub fn residual_qq(
    residuals: &[f64],
    reference: &ReferenceQuantiles,
    min_count: usize,
) -> Result<QQSeries> {
    if residuals.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut series = QQSeries {
        reference: reference.reference.name().into(),
        points: Vec::new(),
        omitted: Vec::new(),
    };
    for (&p, &q) in reference.levels.iter().zip(&reference.quantiles) {
        let (empirical, count) = empirical_quantile(&sorted, p);
        series.push(
            QQPoint {
                level: p,
                predicted: q,
                empirical,
                count,
            },
            min_count,
        );
    }
    Ok(series)
}

/// Mean lower-side mass of the predicted distributions.
pub fn mean_lower_mass(params: &[DistParams]) -> f64 {
    params.iter().map(DistParams::lower_mass).sum::<f64>() / params.len() as f64
}

/// Simultaneous band for the residual Q-Q curve of `n` draws from a
/// reference family, calibrated by Monte Carlo so that a fraction
/// `coverage` of null curves stay inside at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQBand {
    pub levels: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QQBand {
    pub fn calibrate(
        reference: Reference,
        n: usize,
        levels: &[f64],
        reps: usize,
        coverage: f64,
        seed: u64,
    ) -> Result<Self> {
        check_levels(levels)?;
        if n == 0 || reps < 2 || !(coverage > 0.0 && coverage < 1.0) {
            return Err(Error::InvalidConfig(
                "band calibration needs n >= 1, reps >= 2 and coverage in (0, 1)".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curves: Vec<Vec<f64>> = (0..reps)
            .map(|_| {
                let mut x: Vec<f64> = (0..n)
                    .map(|_| reference.quantile(open_unit(&mut rng)))
                    .collect();
                x.sort_by(f64::total_cmp);
                levels.iter().map(|&p| empirical_quantile(&x, p).0).collect()
            })
            .collect();

        let k = levels.len();
        let center: Vec<f64> = (0..k)
            .map(|j| curves.iter().map(|c| c[j]).sum::<f64>() / reps as f64)
            .collect();
        let spread: Vec<f64> = (0..k)
            .map(|j| {
                let v = curves.iter().map(|c| (c[j] - center[j]).powi(2)).sum::<f64>()
                    / (reps - 1) as f64;
                v.sqrt().max(1e-12)
            })
            .collect();
        let mut dev: Vec<f64> = curves
            .iter()
            .map(|c| {
                (0..k)
                    .map(|j| (c[j] - center[j]).abs() / spread[j])
                    .fold(0.0, f64::max)
            })
            .collect();
        dev.sort_by(f64::total_cmp);
        let width = dev[((coverage * reps as f64).ceil() as usize).clamp(1, reps) - 1];
        Ok(Self {
            levels: levels.to_vec(),
            lower: (0..k).map(|j| center[j] - width * spread[j]).collect(),
            upper: (0..k).map(|j| center[j] + width * spread[j]).collect(),
        })
    }

    /// Whether every point of `series` at a band level lies inside the band.
    pub fn contains(&self, series: &QQSeries) -> bool {
        series.points.iter().all(|pt| {
            match self.levels.iter().position(|&l| (l - pt.level).abs() < 1e-12) {
                Some(j) => pt.empirical >= self.lower[j] && pt.empirical <= self.upper[j],
                None => true,
            }
        })
    }
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// One line of the tabular Q-Q export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQRow {
    pub subset_id: usize,
    pub location_range: (f64, f64),
    pub scale_range: (f64, f64),
    pub level: f64,
    pub predicted_q: f64,
    pub empirical_q: f64,
    pub count: usize,
    pub reference: String,
}

pub fn export_rows(subset_id: usize, rule: &SubsetRule, series: &QQSeries) -> Vec<QQRow> {
    series
        .points
        .iter()
        .map(|p| QQRow {
            subset_id,
            location_range: rule.location,
            scale_range: rule.scale,
            level: p.level,
            predicted_q: p.predicted,
            empirical_q: p.empirical,
            count: p.count,
            reference: series.reference.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{AsymmetricParams, SymmetricParams};

    fn sym(f: f64, s: f64) -> DistParams {
        DistParams::Symmetric(SymmetricParams::new(f, s).unwrap())
    }

    #[test]
    fn partition_sizes_and_cover() {
        let params: Vec<DistParams> = (0..103)
            .map(|i| sym((i * 37 % 103) as f64, 1.0 + (i * 11 % 17) as f64))
            .collect();
        for cuts in 1..=4 {
            let subsets = partition_by_location_scale(&params, cuts).unwrap();
            assert_eq!(subsets.len(), cuts * cuts);
            let mut all: Vec<usize> = subsets.iter().flat_map(|s| s.rows.clone()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..103).collect::<Vec<_>>());
        }
        let four = partition_by_location_scale(&params, 2).unwrap();
        for s in &four {
            assert!((s.rows.len() as f64 - 103.0 / 4.0).abs() <= 1.0);
        }
    }

    #[test]
    fn constant_predictions_still_partition() {
        let params = vec![sym(1.0, 1.0); 10];
        let subsets = partition_by_location_scale(&params, 3).unwrap();
        let total: usize = subsets.iter().map(|s| s.rows.len()).sum();
        assert_eq!(total, 10);
        assert!(partition_by_location_scale(&[], 2).is_err());
    }

    #[test]
    fn mixture_cdf_examples() {
        let one = [sym(0.3, 2.0)];
        assert_eq!(predicted_marginal_cdf(&one, 1.1), one[0].cdf(1.1));
        let two = [sym(-1.0, 1.0), sym(3.0, 1.0)];
        assert!((predicted_marginal_cdf(&two, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(predicted_marginal_cdf(&two, f64::INFINITY), 1.0);
        assert_eq!(predicted_marginal_cdf(&two, f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn residual_examples() {
        let iv = |y| OutcomeInterval::exact(y).unwrap();
        let p = [sym(1.0, 2.0), sym(1.0, 2.0)];
        let r = standardized_residuals(&p, &[iv(1.0), iv(3.0)], None).unwrap();
        assert_eq!(r, vec![0.0, 1.0]);
        let a = [DistParams::Asymmetric(AsymmetricParams::new(0.0, 2.0, 1.0).unwrap())];
        assert_eq!(standardized_residuals(&a, &[iv(-2.0)], None).unwrap(), vec![-1.0]);
        let cens = OutcomeInterval::new(0.0, f64::INFINITY).unwrap();
        assert_eq!(
            standardized_residuals(&p, &[iv(0.0), cens], None),
            Err(Error::UncensoredOnly { row: 1 })
        );
    }

    #[test]
    fn reference_closed_forms() {
        assert_eq!(Reference::Logistic.quantile(0.5), 0.0);
        assert!((Reference::Logistic.quantile(0.75) - 3f64.ln()).abs() < 1e-15);
        assert!((Reference::Laplace.quantile(0.75) - 2f64.ln()).abs() < 1e-15);
        assert!((Reference::Laplace.quantile(0.25) + 2f64.ln()).abs() < 1e-15);
        assert!((Reference::Normal.quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        for r in Reference::ALL {
            for p in [0.05, 0.3, 0.5, 0.8, 0.99] {
                assert!((r.cdf(r.quantile(p)) - p).abs() < 1e-10, "{r:?} {p}");
            }
        }
    }

    #[test]
    fn split_reference_mass() {
        let r = Reference::Logistic;
        assert_eq!(r.quantile_split(0.3, 0.5), r.quantile(0.3));
        assert!(r.quantile_split(2.0 / 3.0, 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn small_subset_rejected() {
        let p = vec![sym(0.0, 1.0); 5];
        let iv = vec![OutcomeInterval::exact(0.0).unwrap(); 5];
        assert_eq!(
            marginal_qq(&p, &iv, None, &default_levels(), 20),
            Err(Error::SubsetTooSmall { size: 5, min: 20 })
        );
    }

    #[test]
    fn tail_points_are_excluded() {
        let r: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let rq = ReferenceQuantiles::new(Reference::Logistic, &default_levels(), 0.5).unwrap();
        let s = residual_qq(&r, &rq, 20).unwrap();
        assert!(s.points.iter().all(|p| p.count >= 20));
        assert_eq!(s.points.len() + s.omitted.len(), 99);
        assert_eq!(s.points.first().unwrap().level, 0.2);
    }

    #[test]
    fn grouped_data_uses_boundaries_only() {
        let bounds = [f64::NEG_INFINITY, -1.0, 0.0, 1.0, f64::INFINITY];
        let p: Vec<DistParams> = (0..400).map(|_| sym(0.0, 1.0)).collect();
        let iv: Vec<OutcomeInterval> = (0..400)
            .map(|i| {
                let k = 1 + i % 4;
                OutcomeInterval::new(bounds[k - 1], bounds[k]).unwrap()
            })
            .collect();
        let s = marginal_qq(&p, &iv, None, &default_levels(), 20).unwrap();
        let vals: Vec<f64> = s.points.iter().map(|p| p.empirical).collect();
        assert_eq!(vals, vec![-1.0, 0.0, 1.0]);
        assert!((s.points[1].level - 0.5).abs() < 1e-9);
        assert!(s.points[1].predicted.abs() < 1e-9);
    }
}
