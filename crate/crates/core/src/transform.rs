//! The optimal monotone outcome transformation.
//!
//! `g` is chosen so that the model's predicted marginal distribution of
//! `g(y)`, averaged over the training predictors, reproduces the empirical
//! marginal distribution of `y`. Fitting alternates between boosting the
//! parameter functions on `g`-transformed outcomes and re-solving `g` at a
//! set of knots.

use serde::{Deserialize, Serialize};

use crate::boost::{fit_model, BoostedModel, ErrorModel, FitConfig};
use crate::censor::{turnbull_cdf, Dataset, MarginalCdf, TURNBULL_DEFAULT_MAX_ITER, TURNBULL_DEFAULT_TOL};
use crate::dist::{DistParams, OutcomeInterval};
use crate::error::{Error, Result};
use crate::tree::refine_root;

/// Required accuracy of the mixture CDF at a solved knot.
pub const MIXTURE_TOL: f64 = 1e-10;

/// Knots closer than this in `g` are merged.
pub const KNOT_MERGE_GAP: f64 = 1e-12;

/// Strictly increasing piecewise-linear map, extended linearly past the end
/// knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTransform {
    ys: Vec<f64>,
    gs: Vec<f64>,
}

impl MonotoneTransform {
    pub fn new(ys: Vec<f64>, gs: Vec<f64>) -> Result<Self> {
        if ys.len() != gs.len() {
            return Err(Error::InvalidData("knot coordinates differ in length".into()));
        }
        if ys.len() < 2 {
            return Err(Error::NotEnoughDistinctValues(ys.len()));
        }
        let increasing = |v: &[f64]| v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&ys) || !increasing(&gs) {
            return Err(Error::InvalidData(
                "transformation knots must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { ys, gs })
    }

    pub fn identity() -> Self {
        Self::affine(1.0, 0.0)
    }

    /// `g(y) = slope * y + intercept`, with `slope > 0`.
    pub fn affine(slope: f64, intercept: f64) -> Self {
        assert!(slope > 0.0 && slope.is_finite(), "affine slope must be positive");
        Self {
            ys: vec![0.0, 1.0],
            gs: vec![intercept, intercept + slope],
        }
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn gs(&self) -> &[f64] {
        &self.gs
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Segment used at `v` among knots `xs`: the one starting at the last
    /// knot `<= v`, clamped to the end segments.
    fn segment(xs: &[f64], v: f64) -> usize {
        xs.partition_point(|&x| x <= v).saturating_sub(1).min(xs.len() - 2)
    }

    fn interpolate(xs: &[f64], zs: &[f64], v: f64) -> f64 {
        if v.is_infinite() {
            return v;
        }
        let k = Self::segment(xs, v);
        let t = (v - xs[k]) / (xs[k + 1] - xs[k]);
        zs[k] + t * (zs[k + 1] - zs[k])
    }

    pub fn eval(&self, y: f64) -> f64 {
        Self::interpolate(&self.ys, &self.gs, y)
    }

    pub fn inverse(&self, z: f64) -> f64 {
        Self::interpolate(&self.gs, &self.ys, z)
    }

    /// `g'(y)`; at a knot, the slope of the segment to its right.
    pub fn slope(&self, y: f64) -> f64 {
        let k = Self::segment(&self.ys, y);
        (self.gs[k + 1] - self.gs[k]) / (self.ys[k + 1] - self.ys[k])
    }
}

/// Endpoint-wise image of an interval; infinite ends stay infinite.
pub fn transform_interval(t: &MonotoneTransform, interval: &OutcomeInterval) -> OutcomeInterval {
    if interval.is_uncensored() {
        let z = t.eval(interval.lower());
        return OutcomeInterval::new(z, z).expect("finite image of a finite value");
    }
    OutcomeInterval::new(t.eval(interval.lower()), t.eval(interval.upper()))
        .expect("increasing map preserves interval order")
}

/// Average of the per-row predicted CDFs at `z`.
pub fn mixture_cdf(z: f64, params: &[DistParams]) -> f64 {
    params.iter().map(|p| p.cdf(z)).sum::<f64>() / params.len() as f64
}

/// The `g` at which the predicted mixture CDF equals `fhat`.
///
/// Every row's own `fhat`-quantile brackets the root: the mixture is below
/// `fhat` at the smallest of them and above it at the largest.
pub fn solve_g_at(fhat: f64, params: &[DistParams]) -> Result<f64> {
    if !(fhat > 0.0 && fhat < 1.0) {
        return Err(Error::UnboundedRoot(fhat));
    }
    if params.is_empty() {
        return Err(Error::InvalidData("no predictions to mix".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in params {
        let q = p.quantile(fhat);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    if lo == hi {
        return Ok(lo);
    }
    let m = |z: f64| mixture_cdf(z, params);
    Ok(refine_root(&m, fhat, lo, hi, 0.1 * MIXTURE_TOL))
}

/// Candidate knots for `g`: points where the empirical CDF is identified,
/// with mid-rank values clamped to `[0.5/n, 1 - 0.5/n]`, thinned to at most
/// `max_knots` nearest to equispaced levels.
pub fn knot_candidates(fhat: &MarginalCdf, n: usize, max_knots: usize) -> Vec<(f64, f64)> {
    let lo = 0.5 / n as f64;
    let hi = 1.0 - lo;
    let pts: Vec<(f64, f64)> = fhat
        .identified_points()
        .into_iter()
        .filter(|&(_, f)| f > 0.0 && f < 1.0)
        .map(|(y, f)| (y, f.clamp(lo, hi)))
        .collect();
    if pts.len() <= max_knots || max_knots < 2 {
        return pts;
    }
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(max_knots);
    for j in 0..max_knots {
        let level = lo + (hi - lo) * j as f64 / (max_knots - 1) as f64;
        let k = pts.partition_point(|&(_, f)| f < level);
        let pick = if k == 0 {
            0
        } else if k == pts.len() || level - pts[k - 1].1 <= pts[k].1 - level {
            k - 1
        } else {
            k
        };
        if out.last().map_or(true, |last| last.0 < pts[pick].0) {
            out.push(pts[pick]);
        }
    }
    out
}

/// Solve `g` at each knot and assemble the transformation.
pub fn build_transform(knots: &[(f64, f64)], params: &[DistParams]) -> Result<MonotoneTransform> {
    let mut ys = Vec::with_capacity(knots.len());
    let mut gs: Vec<f64> = Vec::with_capacity(knots.len());
    for &(y, f) in knots {
        let g = solve_g_at(f, params)?;
        if let Some(&last) = gs.last() {
            if g - last < KNOT_MERGE_GAP {
                continue;
            }
        }
        ys.push(y);
        gs.push(g);
    }
    MonotoneTransform::new(ys, gs)
}

/// Fixes the affine freedom of `g`. The alternation is equivariant under
/// `g -> a g + b`, so any finite-sample bias in the fitted scales makes raw
/// refreshes contract or expand `g` steadily without changing its shape.
/// Each refresh is therefore mapped affinely so that two anchor knots keep
/// the values the initial transformation gives them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub ys: [f64; 2],
    pub gs: [f64; 2],
}

impl Gauge {
    /// Anchors at the knots nearest the lower and upper quartiles.
    pub fn from_knots(knots: &[(f64, f64)], initial: &MonotoneTransform) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::NotEnoughDistinctValues(knots.len()));
        }
        let nearest = |level: f64| {
            (0..knots.len())
                .min_by(|&a, &b| {
                    (knots[a].1 - level)
                        .abs()
                        .total_cmp(&(knots[b].1 - level).abs())
                })
                .expect("knots are nonempty")
        };
        let mut lo = nearest(0.25);
        let mut hi = nearest(0.75);
        if lo == hi {
            lo = 0;
            hi = knots.len() - 1;
        }
        let ys = [knots[lo].0, knots[hi].0];
        Ok(Self {
            ys,
            gs: [initial.eval(ys[0]), initial.eval(ys[1])],
        })
    }

    pub fn apply(&self, t: &MonotoneTransform) -> MonotoneTransform {
        let (g0, g1) = (t.eval(self.ys[0]), t.eval(self.ys[1]));
        let a = (self.gs[1] - self.gs[0]) / (g1 - g0);
        let b = self.gs[0] - a * g0;
        MonotoneTransform {
            ys: t.ys.clone(),
            gs: t.gs.iter().map(|g| a * g + b).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    pub max_iterations: usize,
    /// Largest knot change, in units of the median predicted scale, at which
    /// the alternation stops.
    pub threshold: f64,
    pub max_knots: usize,
    pub initial: MonotoneTransform,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            threshold: 0.01,
            max_knots: 200,
            initial: MonotoneTransform::identity(),
        }
    }
}

/// Knot values after each refresh.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformTrace {
    pub snapshots: Vec<MonotoneTransform>,
    pub changes: Vec<f64>,
}

impl TransformTrace {
    /// `(iteration, y, g)` rows, iterations numbered from 1.
    pub fn rows(&self) -> Vec<(usize, f64, f64)> {
        self.snapshots
            .iter()
            .enumerate()
            .flat_map(|(k, t)| t.ys.iter().zip(&t.gs).map(move |(&y, &g)| (k + 1, y, g)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformFit {
    pub model: BoostedModel,
    /// The transformation `model` was fit on.
    pub transform: MonotoneTransform,
    pub knots: Vec<(f64, f64)>,
    pub gauge: Gauge,
    pub trace: TransformTrace,
    pub iterations: usize,
    pub converged: bool,
}

/// Apply `t` to every outcome in `data`.
pub fn transform_dataset(t: &MonotoneTransform, data: &Dataset) -> Result<Dataset> {
    let ivs: Vec<OutcomeInterval> = data
        .rows()
        .iter()
        .map(|r| transform_interval(t, &r.interval))
        .collect();
    data.with_intervals(&ivs)
}

fn median_scale(params: &[DistParams]) -> f64 {
    let mut s: Vec<f64> = params.iter().map(DistParams::scale_statistic).collect();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Largest change at the knots of `new`, in units of `unit`.
pub fn knot_change(old: &MonotoneTransform, new: &MonotoneTransform, unit: f64) -> f64 {
    new.ys
        .iter()
        .zip(&new.gs)
        .map(|(&y, &g)| (g - old.eval(y)).abs() / unit)
        .fold(0.0, f64::max)
}

/// Predictions of `model` on the rows of `data`.
pub fn predict_rows(model: &BoostedModel, data: &Dataset) -> Vec<DistParams> {
    data.rows().iter().map(|r| model.predict(&r.predictors)).collect()
}

impl TransformFit {
    /// One more refresh of the transformation from the fitted model.
    pub fn refresh(&self, train: &Dataset) -> Result<MonotoneTransform> {
        let params = predict_rows(&self.model, train);
        Ok(self.gauge.apply(&build_transform(&self.knots, &params)?))
    }

    /// The refresh's largest knot change, in units of the median predicted scale.
    pub fn fixed_point_gap(&self, train: &Dataset) -> Result<f64> {
        let params = predict_rows(&self.model, train);
        let refreshed = self.gauge.apply(&build_transform(&self.knots, &params)?);
        Ok(knot_change(&self.transform, &refreshed, median_scale(&params)))
    }
}

/// Alternate model fitting and transformation refreshes. The returned model
/// and transformation are a consistent pair: the model was fit on outcomes
/// mapped through the returned transformation.
pub fn fit_with_transform(
    train: &Dataset,
    test: &Dataset,
    config: &FitConfig,
    options: &TransformConfig,
    error_model: ErrorModel,
) -> Result<TransformFit> {
    if options.max_iterations < 1 || !(options.threshold > 0.0) || options.max_knots < 2 {
        return Err(Error::InvalidConfig(
            "transform needs max_iterations >= 1, threshold > 0, max_knots >= 2".into(),
        ));
    }
    let weights = train.weights();
    let fhat = turnbull_cdf(
        &train.intervals(),
        Some(&weights),
        TURNBULL_DEFAULT_TOL,
        TURNBULL_DEFAULT_MAX_ITER,
    )?
    .cdf;
    let knots = knot_candidates(&fhat, train.len(), options.max_knots);
    if knots.len() < 2 {
        return Err(Error::NotEnoughDistinctValues(knots.len()));
    }

    let gauge = Gauge::from_knots(&knots, &options.initial)?;

    let mut g = options.initial.clone();
    let mut trace = TransformTrace::default();
    let mut last = None;
    for it in 1..=options.max_iterations {
        let model = fit_model(
            &transform_dataset(&g, train)?,
            &transform_dataset(&g, test)?,
            config,
            error_model,
        )?;
        let params = predict_rows(&model, train);
        let refreshed = gauge.apply(&build_transform(&knots, &params)?);
        let change = knot_change(&g, &refreshed, median_scale(&params));
        trace.snapshots.push(refreshed.clone());
        trace.changes.push(change);
        if change < options.threshold {
            return Ok(TransformFit {
                model,
                transform: g,
                knots,
                gauge,
                trace,
                iterations: it,
                converged: true,
            });
        }
        if last.as_ref().map_or(true, |(best, _, _)| change < *best) {
            last = Some((change, model, g));
        }
        g = refreshed;
    }
    // Not converged: keep the pair whose refresh moved the knots least.
    let (_, model, transform) = last.expect("at least one iteration");
    Ok(TransformFit {
        model,
        transform,
        knots,
        gauge,
        trace,
        iterations: options.max_iterations,
        converged: false,
    })
}
