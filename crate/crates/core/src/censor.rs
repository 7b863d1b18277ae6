//! Censored observations, datasets, tie-to-interval conversion and the
//! Turnbull self-consistency estimator of the marginal outcome distribution.

use serde::{Deserialize, Serialize};

use crate::dist::OutcomeInterval;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    /// Values are stored as the index into `levels`.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical { levels },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Self {
        Self { features }
    }

    /// All-numeric schema with the given column names.
    pub fn numeric(names: &[&str]) -> Self {
        Self::new(names.iter().map(|n| FeatureSpec::numeric(*n)).collect())
    }

    pub fn arity(&self) -> usize {
        self.features.len()
    }

    /// Check one predictor vector against the schema.
    pub fn validate(&self, predictors: &[f64]) -> Result<()> {
        if predictors.len() != self.arity() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} predictors, got {}",
                self.arity(),
                predictors.len()
            )));
        }
        for (spec, &v) in self.features.iter().zip(predictors) {
            match &spec.kind {
                FeatureKind::Numeric => {
                    if !v.is_finite() {
                        return Err(Error::InvalidData(format!(
                            "non-finite value {v} for numeric feature {}",
                            spec.name
                        )));
                    }
                }
                FeatureKind::Categorical { levels } => {
                    if v < 0.0 || v.fract() != 0.0 || v as usize >= levels.len() {
                        return Err(Error::InvalidData(format!(
                            "code {v} is not a declared level of {}",
                            spec.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One case: an outcome interval, its predictors and a likelihood weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredObservation {
    pub interval: OutcomeInterval,
    pub predictors: Vec<f64>,
    pub weight: f64,
}

impl CensoredObservation {
    pub fn new(interval: OutcomeInterval, predictors: Vec<f64>, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidData(format!("weight must be positive, got {weight}")));
        }
        Ok(Self {
            interval,
            predictors,
            weight,
        })
    }

    pub fn unweighted(interval: OutcomeInterval, predictors: Vec<f64>) -> Self {
        Self {
            interval,
            predictors,
            weight: 1.0,
        }
    }
}

/// Immutable collection of observations sharing a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<CensoredObservation>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<CensoredObservation>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            schema
                .validate(&row.predictors)
                .map_err(|e| Error::InvalidData(format!("row {i}: {e}")))?;
            if !(row.weight > 0.0 && row.weight.is_finite()) {
                return Err(Error::InvalidData(format!("row {i}: weight must be positive")));
            }
        }
        let first = rows[0].interval;
        let one_sided = first.is_left_censored() || first.is_right_censored();
        if one_sided && rows.iter().all(|r| r.interval == first) {
            return Err(Error::InvalidData(
                "every outcome is the same one-sided interval; no information".into(),
            ));
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[CensoredObservation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn intervals(&self) -> Vec<OutcomeInterval> {
        self.rows.iter().map(|r| r.interval).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.weight).collect()
    }

    pub fn is_uncensored(&self) -> bool {
        self.rows.iter().all(|r| r.interval.is_uncensored())
    }

    /// Column-major copy of the predictors.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.schema.arity())
            .map(|j| self.rows.iter().map(|r| r.predictors[j]).collect())
            .collect()
    }

    /// Same predictors and weights with replacement outcome intervals.
    pub fn with_intervals(&self, intervals: &[OutcomeInterval]) -> Result<Self> {
        if intervals.len() != self.rows.len() {
            return Err(Error::InvalidData("interval count does not match rows".into()));
        }
        let rows = self
            .rows
            .iter()
            .zip(intervals)
            .map(|(r, &interval)| CensoredObservation {
                interval,
                predictors: r.predictors.clone(),
                weight: r.weight,
            })
            .collect();
        Ok(Self {
            schema: self.schema.clone(),
            rows,
        })
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        Self::new(self.schema.clone(), rows)
    }
}

// ---------------------------------------------------------------------------
// Ties and groups
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundsPolicy {
    /// Outermost groups extend to -inf / +inf.
    OpenEnds,
    /// Outermost groups are closed at user-supplied constants.
    ClosedEnds { lower: f64, upper: f64 },
}

/// Replace each (possibly tied) value by the interval between the midpoints
/// to its neighbouring distinct values.
pub fn ties_to_intervals(values: &[f64], policy: BoundsPolicy) -> Result<Vec<OutcomeInterval>> {
    let mut distinct: Vec<f64> = values.to_vec();
    if distinct.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("tied values must be finite".into()));
    }
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::NotEnoughDistinctValues(distinct.len()));
    }
    let (lo, hi) = match policy {
        BoundsPolicy::OpenEnds => (f64::NEG_INFINITY, f64::INFINITY),
        BoundsPolicy::ClosedEnds { lower, upper } => {
            if !(lower <= distinct[0] && upper >= distinct[distinct.len() - 1]) {
                return Err(Error::InvalidData(
                    "closed end bounds must enclose all values".into(),
                ));
            }
            (lower, upper)
        }
    };
    let k = distinct.len();
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(lo);
    bounds.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    bounds.push(hi);
    values
        .iter()
        .map(|v| {
            let g = distinct.partition_point(|d| d < v);
            OutcomeInterval::new(bounds[g], bounds[g + 1])
        })
        .collect()
}

/// Interval for a 0-based group index given the ordered group boundaries
/// (`bounds.len() == groups + 1`).
pub fn group_interval(group: usize, bounds: &[f64]) -> Result<OutcomeInterval> {
    if bounds.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::NonMonotoneBounds);
    }
    if group + 1 >= bounds.len() {
        return Err(Error::InvalidData(format!(
            "group {} outside {} declared groups",
            group + 1,
            bounds.len().saturating_sub(1)
        )));
    }
    OutcomeInterval::new(bounds[group], bounds[group + 1])
}

// ---------------------------------------------------------------------------
// Turnbull
// ---------------------------------------------------------------------------

pub const TURNBULL_DEFAULT_TOL: f64 = 1e-8;
pub const TURNBULL_DEFAULT_MAX_ITER: usize = 10_000;

/// Masses below this are treated as zero when deciding where the estimate
/// is identified.
const NEGLIGIBLE_MASS: f64 = 1e-9;

/// A Turnbull innermost interval carrying probability mass.
///
/// `[lower, upper]` when `lower_open` is false (an exact point when the two
/// coincide), `(lower, upper]` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSegment {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub mass: f64,
}

impl MassSegment {
    /// Where the mass is placed for point-valued queries: the exact point, the
    /// midpoint, or the finite end of an unbounded segment.
    pub fn placement(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower,
            (false, true) => self.upper,
            (false, false) => 0.0,
        }
    }

    pub fn is_atom(&self) -> bool {
        !self.lower_open && self.lower == self.upper
    }

    /// True when the segment has interior on both sides of `v`.
    fn straddles(&self, v: f64) -> bool {
        self.lower < v && v < self.upper
    }
}

/// Nonparametric marginal CDF with mass on Turnbull innermost intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalCdf {
    segments: Vec<MassSegment>,
    support: Vec<f64>,
    cumulative: Vec<f64>,
}

impl MarginalCdf {
    /// `raw` holds unnormalized segment masses; cumulative values are
    /// running sums of `raw` divided by its total, so integer counts give
    /// exact `k / n` steps.
    fn from_segments(segments: Vec<MassSegment>, raw: &[f64]) -> Self {
        let total: f64 = raw.iter().sum();
        let mut support: Vec<f64> = Vec::with_capacity(segments.len());
        let mut cumulative: Vec<f64> = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for (seg, r) in segments.iter().zip(raw) {
            acc += r;
            let x = seg.placement();
            match support.last() {
                Some(&last) if last == x => *cumulative.last_mut().unwrap() = acc / total,
                _ => {
                    support.push(x);
                    cumulative.push(acc / total);
                }
            }
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            segments,
            support,
            cumulative,
        }
    }

    /// Strictly increasing mass-placement points.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Cumulative probabilities at [`Self::support`]; ends at exactly 1.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn segments(&self) -> &[MassSegment] {
        &self.segments
    }

    /// `P(Y <= y)` under the mass-placement convention.
    pub fn eval(&self, y: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= y);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Left-continuous inverse: the smallest support point with `F >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let k = self
            .cumulative
            .partition_point(|&c| c < p - 1e-12)
            .min(self.support.len() - 1);
        self.support[k]
    }

    /// Mass strictly below `v` plus half of any atom at `v`. Equals `F(v)` at
    /// points between innermost intervals and the mid-rank value at atoms.
    pub fn mid_eval(&self, v: f64) -> f64 {
        let total: f64 = self.segments.iter().map(|s| s.mass).sum();
        let mut acc = 0.0;
        for seg in &self.segments {
            if seg.is_atom() && seg.lower == v {
                acc += 0.5 * seg.mass;
            } else if seg.upper <= v {
                acc += seg.mass;
            }
        }
        acc / total
    }

    /// Whether `F(v)` is identified, i.e. no positive-mass innermost interval
    /// has interior on both sides of `v`.
    pub fn is_identified(&self, v: f64) -> bool {
        !self
            .segments
            .iter()
            .any(|s| s.mass > NEGLIGIBLE_MASS && s.straddles(v))
    }

    /// Finite points where the estimate is identified, with their mid-rank
    /// cumulative values, in increasing order.
    pub fn identified_points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<f64> = Vec::new();
        for seg in &self.segments {
            if seg.mass <= NEGLIGIBLE_MASS && !seg.is_atom() {
                continue;
            }
            for v in [seg.lower, seg.upper] {
                if v.is_finite() {
                    pts.push(v);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.into_iter()
            .filter(|&v| self.is_identified(v))
            .map(|v| (v, self.mid_eval(v)))
            .collect()
    }

    /// Whether every mass segment is an exact point.
    pub fn is_atomic(&self) -> bool {
        self.segments.iter().all(|s| s.is_atom())
    }
}

/// Result of [`turnbull_cdf`].
#[derive(Debug, Clone)]
pub struct TurnbullFit {
    pub cdf: MarginalCdf,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted log-likelihood before each EM update, plus the final value.
    pub log_likelihood: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EndKind {
    ClosedLeft = 0,
    Right = 1,
    OpenLeft = 2,
}

/// Nonparametric maximum-likelihood CDF for arbitrarily censored data, by
/// self-consistency (EM) iterations over the innermost intervals.
pub fn turnbull_cdf(
    intervals: &[OutcomeInterval],
    weights: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<TurnbullFit> {
    if intervals.is_empty() {
        return Err(Error::InvalidData("no intervals".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("turnbull tolerance must be positive".into()));
    }
    if let Some(w) = weights {
        if w.len() != intervals.len() {
            return Err(Error::InvalidData("weight count does not match intervals".into()));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);

    let segments = innermost_intervals(intervals);
    let ranges: Vec<(usize, usize)> = intervals
        .iter()
        .map(|iv| contained_range(&segments, iv))
        .collect();

    let m = segments.len();
    let total_weight: f64 = (0..intervals.len()).map(weight).sum();

    // Exact outcomes only: the estimate is the (weighted) ECDF in closed form.
    if intervals.iter().all(OutcomeInterval::is_uncensored) {
        let mut raw = vec![0.0; m];
        for (i, &(j, _)) in ranges.iter().enumerate() {
            raw[j] += weight(i);
        }
        let ll = ranges
            .iter()
            .enumerate()
            .map(|(i, &(j, _))| weight(i) * (raw[j] / total_weight).ln())
            .sum();
        let segments = segments
            .into_iter()
            .zip(&raw)
            .map(|(mut seg, &w)| {
                seg.mass = w / total_weight;
                seg
            })
            .collect();
        return Ok(TurnbullFit {
            cdf: MarginalCdf::from_segments(segments, &raw),
            iterations: 0,
            converged: true,
            log_likelihood: vec![ll],
        });
    }

    let mut p = vec![1.0 / m as f64; m];
    let mut prefix = vec![0.0; m + 1];
    let mut coef = vec![0.0; m + 1];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let refresh_prefix = |p: &[f64], prefix: &mut [f64]| {
        for j in 0..p.len() {
            prefix[j + 1] = prefix[j] + p[j];
        }
    };

    while iterations < max_iter {
        refresh_prefix(&p, &mut prefix);
        coef.iter_mut().for_each(|c| *c = 0.0);
        let mut ll = 0.0;
        for (i, &(s, e)) in ranges.iter().enumerate() {
            let denom = prefix[e + 1] - prefix[s];
            let w = weight(i);
            ll += w * denom.ln();
            coef[s] += w / denom;
            coef[e + 1] -= w / denom;
        }
        trace.push(ll);
        let mut running = 0.0;
        let mut max_change: f64 = 0.0;
        for j in 0..m {
            running += coef[j];
            let updated = p[j] * running / total_weight;
            max_change = max_change.max((updated - p[j]).abs());
            p[j] = updated;
        }
        iterations += 1;
        if max_change < tol {
            converged = true;
            break;
        }
    }
    refresh_prefix(&p, &mut prefix);
    let final_ll: f64 = ranges
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| weight(i) * (prefix[e + 1] - prefix[s]).ln())
        .sum();
    trace.push(final_ll);

    let segments = segments
        .into_iter()
        .zip(&p)
        .map(|(mut seg, &mass)| {
            seg.mass = mass;
            seg
        })
        .collect();
    Ok(TurnbullFit {
        cdf: MarginalCdf::from_segments(segments, &p),
        iterations,
        converged,
        log_likelihood: trace,
    })
}

/// Turnbull innermost intervals: a left endpoint immediately followed by a
/// right endpoint in the sorted endpoint sequence.
fn innermost_intervals(intervals: &[OutcomeInterval]) -> Vec<MassSegment> {
    let mut ends: Vec<(f64, EndKind)> = Vec::with_capacity(2 * intervals.len());
    for iv in intervals {
        if iv.is_uncensored() {
            ends.push((iv.lower(), EndKind::ClosedLeft));
        } else {
            ends.push((iv.lower(), EndKind::OpenLeft));
        }
        ends.push((iv.upper(), EndKind::Right));
    }
    ends.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    ends.dedup();
    ends.windows(2)
        .filter(|w| w[0].1 != EndKind::Right && w[1].1 == EndKind::Right)
        .map(|w| MassSegment {
            lower: w[0].0,
            upper: w[1].0,
            lower_open: w[0].1 == EndKind::OpenLeft,
            mass: 0.0,
        })
        .collect()
}

/// Index range `[start, end]` of innermost intervals contained in `iv`.
fn contained_range(segments: &[MassSegment], iv: &OutcomeInterval) -> (usize, usize) {
    let (a, b) = (iv.lower(), iv.upper());
    if iv.is_uncensored() {
        let j = segments.partition_point(|s| s.lower < a || (s.lower == a && s.lower_open));
        debug_assert!(segments[j].lower == a && segments[j].upper == a);
        return (j, j);
    }
    let start = segments.partition_point(|s| s.lower < a || (s.lower == a && !s.lower_open));
    let end = segments.partition_point(|s| s.upper <= b);
    debug_assert!(start < end, "interval contains no innermost interval");
    (start, end - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> OutcomeInterval {
        OutcomeInterval::new(a, b).unwrap()
    }

    #[test]
    fn ties_midpoint_rule() {
        let out = ties_to_intervals(&[1.0, 2.0, 3.0, 2.0], BoundsPolicy::OpenEnds).unwrap();
        assert_eq!(out[1], iv(1.5, 2.5));
        assert_eq!(out[3], iv(1.5, 2.5));
        assert_eq!(out[0], iv(f64::NEG_INFINITY, 1.5));
        assert_eq!(out[2], iv(2.5, f64::INFINITY));
        let closed = ties_to_intervals(
            &[1.0, 2.0, 3.0],
            BoundsPolicy::ClosedEnds {
                lower: 0.0,
                upper: 10.0,
            },
        )
        .unwrap();
        assert_eq!(closed[0], iv(0.0, 1.5));
        assert_eq!(closed[2], iv(2.5, 10.0));
    }

    #[test]
    fn ties_need_two_values() {
        let err = ties_to_intervals(&[4.0, 4.0], BoundsPolicy::OpenEnds).unwrap_err();
        assert_eq!(err, Error::NotEnoughDistinctValues(1));
    }

    #[test]
    fn age_group_bounds() {
        let b = [0.0, 17.5, 24.5, 34.5, 44.5, 54.5, 64.5, f64::INFINITY];
        assert_eq!(group_interval(1, &b).unwrap(), iv(17.5, 24.5));
        assert_eq!(group_interval(6, &b).unwrap(), iv(64.5, f64::INFINITY));
        assert!(group_interval(7, &b).is_err());
    }

    #[test]
    fn uncensored_turnbull_is_ecdf() {
        let ys = [3.0, 1.0, 2.0, 2.0, 5.0];
        let ivs: Vec<_> = ys.iter().map(|&y| iv(y, y)).collect();
        let fit = turnbull_cdf(&ivs, None, 1e-12, 1000).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.cdf.support(), &[1.0, 2.0, 3.0, 5.0]);
        let expect = [0.2, 0.6, 0.8, 1.0];
        for (c, e) in fit.cdf.cumulative().iter().zip(expect) {
            assert!((c - e).abs() < 1e-12);
        }
        assert!((fit.cdf.mid_eval(2.0) - 0.4).abs() < 1e-12);
        assert_eq!(fit.cdf.quantile(0.5), 2.0);
        assert_eq!(fit.cdf.quantile(0.2), 1.0);
    }

    #[test]
    fn three_point_example_matches_grid_search() {
        // {[0,0], (-inf,1], [2,2]}: innermost intervals are {0} and {2}; the
        // left-censored row only touches {0}, so the NPMLE is (2/3, 0, 1/3)
        // restricted to the two atoms. Check against a grid search over the
        // simplex of (p0, p_mid, p2) where p_mid would be any mass in (0,1].
        let ivs = [iv(0.0, 0.0), iv(f64::NEG_INFINITY, 1.0), iv(2.0, 2.0)];
        let fit = turnbull_cdf(&ivs, None, 1e-14, 100_000).unwrap();
        let segs = fit.cdf.segments();
        assert_eq!(segs.len(), 2);

        let loglik = |p0: f64, p2: f64| p0.ln() + p0.ln() + p2.ln();
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        let steps = 10_000;
        for k in 1..steps {
            let p0 = k as f64 / steps as f64;
            let p2 = 1.0 - p0;
            let ll = loglik(p0, p2);
            if ll > best.0 {
                best = (ll, p0, p2);
            }
        }
        assert!((segs[0].mass - best.1).abs() <= 1e-4);
        assert!((segs[1].mass - best.2).abs() <= 1e-4);
        assert!((segs[0].mass - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn interval_data_identified_only_at_boundaries() {
        let b = [f64::NEG_INFINITY, 1.0, 2.0, 3.0, f64::INFINITY];
        let groups = [0, 1, 1, 2, 2, 2, 3, 1, 2, 0];
        let ivs: Vec<_> = groups.iter().map(|&g| group_interval(g, &b).unwrap()).collect();
        let fit = turnbull_cdf(&ivs, None, 1e-12, 1000).unwrap();
        let pts = fit.cdf.identified_points();
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0]);
        assert!((pts[0].1 - 0.2).abs() < 1e-10);
        assert!((pts[1].1 - 0.5).abs() < 1e-10);
        assert!((pts[2].1 - 0.9).abs() < 1e-10);
        assert!(!fit.cdf.is_identified(1.5));
    }

    #[test]
    fn weights_act_as_replication() {
        let ivs = [iv(1.0, 1.0), iv(2.0, 2.0), iv(1.5, f64::INFINITY)];
        let w = [2.0, 1.0, 1.0];
        let weighted = turnbull_cdf(&ivs, Some(&w), 1e-13, 10_000).unwrap();
        let dup = [iv(1.0, 1.0), iv(1.0, 1.0), iv(2.0, 2.0), iv(1.5, f64::INFINITY)];
        let plain = turnbull_cdf(&dup, None, 1e-13, 10_000).unwrap();
        for (a, b) in weighted.cdf.cumulative().iter().zip(plain.cdf.cumulative()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn dataset_rejects_bad_rows() {
        let schema = Schema::new(vec![
            FeatureSpec::numeric("x"),
            FeatureSpec::categorical("c", vec!["a".into(), "b".into()]),
        ]);
        let ok = CensoredObservation::unweighted(iv(1.0, 1.0), vec![0.5, 1.0]);
        assert!(Dataset::new(schema.clone(), vec![ok.clone()]).is_ok());
        let bad_level = CensoredObservation::unweighted(iv(1.0, 1.0), vec![0.5, 2.0]);
        assert!(Dataset::new(schema.clone(), vec![bad_level]).is_err());
        let bad_arity = CensoredObservation::unweighted(iv(1.0, 1.0), vec![0.5]);
        assert!(Dataset::new(schema.clone(), vec![bad_arity]).is_err());
        let r = CensoredObservation::unweighted(iv(1.0, f64::INFINITY), vec![0.5, 0.0]);
        assert!(Dataset::new(schema.clone(), vec![r.clone(), r]).is_err());
        assert!(CensoredObservation::new(iv(1.0, 1.0), vec![0.0, 0.0], 0.0).is_err());
    }
}
