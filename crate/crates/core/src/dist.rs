//! Symmetric and asymmetric logistic error distributions, the censored
//! negative log-likelihood, and its generalized residuals.
//!
//! Every exponential is evaluated in sign-split form so that `exp` only sees
//! non-positive arguments; standardized residuals beyond several hundred
//! scale units are routine for censored tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval probabilities below this signal [`Error::DegenerateInterval`].
pub const MIN_INTERVAL_PROBABILITY: f64 = 1e-300;

/// `ln(MIN_INTERVAL_PROBABILITY)`.
const MIN_LOG_PROBABILITY: f64 = -690.7755278982137;

/// Numerically stable `1 / (1 + exp(-x))`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::INFINITY;
    }
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(sigmoid(x))`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Standard logistic density `sigmoid(x) * sigmoid(-x)`.
#[inline]
pub fn std_logistic_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `ln(p / (1 - p))`.
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `x * g(x)` where the product is taken as zero when `x` is infinite
/// (all callers pass a `g` that decays exponentially).
#[inline]
fn tail_product(x: f64, g: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * g
    }
}

/// Location and scale of a symmetric logistic distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricParams {
    location: f64,
    scale: f64,
}

impl SymmetricParams {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidScale(scale));
        }
        if !location.is_finite() {
            return Err(Error::InvalidConfig(format!("location must be finite, got {location}")));
        }
        Ok(Self { location, scale })
    }

    pub(crate) fn new_unchecked(location: f64, scale: f64) -> Self {
        debug_assert!(scale > 0.0);
        Self { location, scale }
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Mode plus separate scales for residuals below and above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricParams {
    mode: f64,
    lower_scale: f64,
    upper_scale: f64,
}

impl AsymmetricParams {
    pub fn new(mode: f64, lower_scale: f64, upper_scale: f64) -> Result<Self> {
        for s in [lower_scale, upper_scale] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidScale(s));
            }
        }
        if !mode.is_finite() {
            return Err(Error::InvalidConfig(format!("mode must be finite, got {mode}")));
        }
        Ok(Self {
            mode,
            lower_scale,
            upper_scale,
        })
    }

    pub(crate) fn new_unchecked(mode: f64, lower_scale: f64, upper_scale: f64) -> Self {
        debug_assert!(lower_scale > 0.0 && upper_scale > 0.0);
        Self {
            mode,
            lower_scale,
            upper_scale,
        }
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    pub fn lower_scale(&self) -> f64 {
        self.lower_scale
    }

    pub fn upper_scale(&self) -> f64 {
        self.upper_scale
    }

    /// Probability mass below the mode, `s_l / (s_l + s_u)`.
    pub fn lower_mass(&self) -> f64 {
        self.lower_scale / (self.lower_scale + self.upper_scale)
    }

    /// Geometric mean of the two scales.
    pub fn geometric_scale(&self) -> f64 {
        (self.lower_scale * self.upper_scale).sqrt()
    }
}

/// An outcome known only to lie in `[lower, upper]`.
///
/// `lower == upper` is an exact (uncensored) observation. Otherwise the
/// likelihood contribution is `CDF(upper) - CDF(lower)`, i.e. the interval is
/// treated as `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeInterval {
    lower: f64,
    upper: f64,
}

impl OutcomeInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() {
            return Err(Error::InvalidInterval {
                lower,
                upper,
                reason: "NaN bound",
            });
        }
        if lower > upper {
            return Err(Error::InvalidInterval {
                lower,
                upper,
                reason: "lower bound exceeds upper bound",
            });
        }
        if lower == f64::NEG_INFINITY && upper == f64::INFINITY {
            return Err(Error::InvalidInterval {
                lower,
                upper,
                reason: "unbounded on both sides",
            });
        }
        if lower == upper && lower.is_infinite() {
            return Err(Error::InvalidInterval {
                lower,
                upper,
                reason: "infinite exact value",
            });
        }
        Ok(Self { lower, upper })
    }

    /// An uncensored observation.
    pub fn exact(y: f64) -> Result<Self> {
        Self::new(y, y)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn is_uncensored(&self) -> bool {
        self.lower == self.upper
    }

    pub fn is_left_censored(&self) -> bool {
        self.lower == f64::NEG_INFINITY
    }

    pub fn is_right_censored(&self) -> bool {
        self.upper == f64::INFINITY
    }

    /// A finite value representative of the interval: the exact value,
    /// the midpoint, or the finite end of a one-sided interval.
    pub fn representative(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower,
            (false, true) => self.upper,
            (false, false) => unreachable!("rejected at construction"),
        }
    }
}

// ---------------------------------------------------------------------------
// Symmetric logistic
// ---------------------------------------------------------------------------

/// `P(Z <= z)` for a logistic with the given location and scale.
pub fn logistic_cdf(z: f64, p: &SymmetricParams) -> f64 {
    sigmoid((z - p.location) / p.scale)
}

pub fn logistic_pdf(z: f64, p: &SymmetricParams) -> f64 {
    std_logistic_pdf((z - p.location) / p.scale) / p.scale
}

pub fn logistic_quantile(prob: f64, p: &SymmetricParams) -> f64 {
    p.location + p.scale * logit(prob)
}

/// `ln(sigmoid(ub) - sigmoid(ua))` for `ua < ub`, either possibly infinite.
///
/// Uses `sigmoid(x) - sigmoid(y) = sigmoid(x) sigmoid(-y) (1 - exp(-(x - y)))`,
/// which involves no cancellation.
#[inline]
fn log_sigmoid_diff(ua: f64, ub: f64, width: f64) -> f64 {
    let gap = if width.is_infinite() {
        0.0
    } else {
        (-(-width).exp_m1()).ln()
    };
    log_sigmoid(ub) + log_sigmoid(-ua) + gap
}

/// Log-likelihood of one interval under the symmetric logistic. Returns the
/// log density when `a == b`.
#[inline]
pub(crate) fn sym_log_lik(a: f64, b: f64, f: f64, s: f64) -> f64 {
    if a == b {
        let u = (b - f) / s;
        -(s.ln() + softplus(u) + softplus(-u))
    } else {
        log_sigmoid_diff((a - f) / s, (b - f) / s, (b - a) / s)
    }
}

/// Generalized residuals `(-dL/df, -dL/dlog s)` for the symmetric loss.
#[inline]
pub(crate) fn sym_residuals(a: f64, b: f64, f: f64, s: f64) -> (f64, f64) {
    if a == b {
        let u = (b - f) / s;
        let t = (0.5 * u).tanh();
        (t / s, u * t - 1.0)
    } else {
        let ua = (a - f) / s;
        let ub = (b - f) / s;
        let w = (b - a) / s;
        let rf = (sigmoid(ua) - sigmoid(-ub)) / s;
        let width_term = if w.is_infinite() { 0.0 } else { w / w.exp_m1() };
        let dl = tail_product(ub, sigmoid(-ub)) - tail_product(ua, sigmoid(ua)) + width_term;
        (rf, -dl)
    }
}

fn check_log_lik(interval: &OutcomeInterval, log_lik: f64) -> Result<f64> {
    if !interval.is_uncensored() && !(log_lik >= MIN_LOG_PROBABILITY) {
        return Err(Error::DegenerateInterval {
            lower: interval.lower,
            upper: interval.upper,
            row: None,
        });
    }
    Ok(-log_lik)
}

/// Censored negative log-likelihood under the symmetric logistic.
pub fn nll(interval: &OutcomeInterval, p: &SymmetricParams) -> Result<f64> {
    let ll = sym_log_lik(interval.lower, interval.upper, p.location, p.scale);
    check_log_lik(interval, ll)
}

/// Generalized residual for the location, `-dL/df`.
pub fn grad_location(interval: &OutcomeInterval, p: &SymmetricParams) -> Result<f64> {
    nll(interval, p)?;
    Ok(sym_residuals(interval.lower, interval.upper, p.location, p.scale).0)
}

/// Generalized residual for the log-scale, `-dL/dlog s`.
pub fn grad_logscale(interval: &OutcomeInterval, p: &SymmetricParams) -> Result<f64> {
    nll(interval, p)?;
    Ok(sym_residuals(interval.lower, interval.upper, p.location, p.scale).1)
}

// ---------------------------------------------------------------------------
// Asymmetric logistic
// ---------------------------------------------------------------------------

pub fn asym_pdf(z: f64, p: &AsymmetricParams) -> f64 {
    let c = p.lower_scale + p.upper_scale;
    let s = if z <= p.mode {
        p.lower_scale
    } else {
        p.upper_scale
    };
    2.0 / c * std_logistic_pdf((z - p.mode) / s)
}

pub fn asym_cdf(z: f64, p: &AsymmetricParams) -> f64 {
    let c = p.lower_scale + p.upper_scale;
    if z <= p.mode {
        2.0 * p.lower_scale / c * sigmoid((z - p.mode) / p.lower_scale)
    } else {
        1.0 - 2.0 * p.upper_scale / c * sigmoid((p.mode - z) / p.upper_scale)
    }
}

/// Inverse of [`asym_cdf`], closed form on each side of the mode.
pub fn asym_quantile(prob: f64, p: &AsymmetricParams) -> f64 {
    let c = p.lower_scale + p.upper_scale;
    if prob <= p.lower_mass() {
        p.mode + p.lower_scale * logit(prob * c / (2.0 * p.lower_scale))
    } else {
        p.mode - p.upper_scale * logit((1.0 - prob) * c / (2.0 * p.upper_scale))
    }
}

#[inline]
pub(crate) fn asym_log_lik(a: f64, b: f64, f: f64, sl: f64, su: f64) -> f64 {
    let c = sl + su;
    if a == b {
        let v = if b <= f { (b - f) / sl } else { (b - f) / su };
        (2.0 / c).ln() - softplus(v) - softplus(-v)
    } else if b <= f {
        (2.0 * sl / c).ln() + sym_log_lik(a, b, f, sl)
    } else if a >= f {
        (2.0 * su / c).ln() + sym_log_lik(a, b, f, su)
    } else {
        let tl = (-0.5 * (a - f) / sl).tanh();
        let tu = (0.5 * (b - f) / su).tanh();
        ((sl * tl + su * tu) / c).ln()
    }
}

/// Generalized residuals `(-dL/df, -dL/dlog s_l, -dL/dlog s_u)` for the
/// asymmetric loss.
#[inline]
pub(crate) fn asym_residuals(a: f64, b: f64, f: f64, sl: f64, su: f64) -> (f64, f64, f64) {
    let c = sl + su;
    if a == b {
        if b <= f {
            let v = (b - f) / sl;
            let t = (0.5 * v).tanh();
            (t / sl, v * t - sl / c, -su / c)
        } else {
            let w = (b - f) / su;
            let t = (0.5 * w).tanh();
            (t / su, -sl / c, w * t - su / c)
        }
    } else if b <= f {
        let (rf, rs) = sym_residuals(a, b, f, sl);
        (rf, su / c + rs, -su / c)
    } else if a >= f {
        let (rf, rs) = sym_residuals(a, b, f, su);
        (rf, -sl / c, sl / c + rs)
    } else {
        let va = (a - f) / sl;
        let wb = (b - f) / su;
        let tl = (-0.5 * va).tanh();
        let tu = (0.5 * wb).tanh();
        let da = std_logistic_pdf(va);
        let db = std_logistic_pdf(wb);
        let n = sl * tl + su * tu;
        let rf = 2.0 * (da - db) / n;
        let rl = (sl * tl + 2.0 * sl * tail_product(va, da)) / n - sl / c;
        let ru = (su * tu - 2.0 * su * tail_product(wb, db)) / n - su / c;
        (rf, rl, ru)
    }
}

/// Censored negative log-likelihood under the asymmetric logistic.
pub fn asym_nll(interval: &OutcomeInterval, p: &AsymmetricParams) -> Result<f64> {
    let ll = asym_log_lik(
        interval.lower,
        interval.upper,
        p.mode,
        p.lower_scale,
        p.upper_scale,
    );
    check_log_lik(interval, ll)
}

/// Negative gradient of [`asym_nll`] with respect to the mode and both log-scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymGradient {
    pub location: f64,
    pub log_lower: f64,
    pub log_upper: f64,
}

pub fn asym_gradient(interval: &OutcomeInterval, p: &AsymmetricParams) -> Result<AsymGradient> {
    asym_nll(interval, p)?;
    let (location, log_lower, log_upper) = asym_residuals(
        interval.lower,
        interval.upper,
        p.mode,
        p.lower_scale,
        p.upper_scale,
    );
    Ok(AsymGradient {
        location,
        log_lower,
        log_upper,
    })
}

pub fn asym_grad_location(interval: &OutcomeInterval, p: &AsymmetricParams) -> Result<f64> {
    Ok(asym_gradient(interval, p)?.location)
}

pub fn asym_grad_log_sl(interval: &OutcomeInterval, p: &AsymmetricParams) -> Result<f64> {
    Ok(asym_gradient(interval, p)?.log_lower)
}

pub fn asym_grad_log_su(interval: &OutcomeInterval, p: &AsymmetricParams) -> Result<f64> {
    Ok(asym_gradient(interval, p)?.log_upper)
}

// ---------------------------------------------------------------------------
// Either error model
// ---------------------------------------------------------------------------

/// Predicted parameters of either error model at a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DistParams {
    Symmetric(SymmetricParams),
    Asymmetric(AsymmetricParams),
}

impl DistParams {
    pub fn location(&self) -> f64 {
        match self {
            DistParams::Symmetric(p) => p.location,
            DistParams::Asymmetric(p) => p.mode,
        }
    }

    /// The scale statistic used for partitioning: `s`, or `sqrt(s_l s_u)`.
    pub fn scale_statistic(&self) -> f64 {
        match self {
            DistParams::Symmetric(p) => p.scale,
            DistParams::Asymmetric(p) => p.geometric_scale(),
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            DistParams::Symmetric(p) => logistic_cdf(z, p),
            DistParams::Asymmetric(p) => asym_cdf(z, p),
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        match self {
            DistParams::Symmetric(p) => logistic_pdf(z, p),
            DistParams::Asymmetric(p) => asym_pdf(z, p),
        }
    }

    pub fn quantile(&self, prob: f64) -> f64 {
        match self {
            DistParams::Symmetric(p) => logistic_quantile(prob, p),
            DistParams::Asymmetric(p) => asym_quantile(prob, p),
        }
    }

    pub fn nll(&self, interval: &OutcomeInterval) -> Result<f64> {
        match self {
            DistParams::Symmetric(p) => nll(interval, p),
            DistParams::Asymmetric(p) => asym_nll(interval, p),
        }
    }

    /// Probability mass below the location (one half for the symmetric model).
    pub fn lower_mass(&self) -> f64 {
        match self {
            DistParams::Symmetric(_) => 0.5,
            DistParams::Asymmetric(p) => p.lower_mass(),
        }
    }
}
