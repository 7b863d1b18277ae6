//! Gradient boosting of the location and log-scale functions.
//!
//! Each parameter function is an [`Ensemble`] grown with the other
//! parameters held fixed. Trees are fit to generalized residuals and their
//! leaves are set by line search; the number of trees is chosen by the
//! negative log-likelihood on a separate model-selection set. An outer loop
//! alternates between the parameter functions until their predictions on
//! that set stop moving.

use serde::{Deserialize, Serialize};

use crate::censor::Dataset;
use crate::dist::{
    asym_log_lik, asym_residuals, sym_log_lik, sym_residuals, AsymmetricParams, DistParams,
    OutcomeInterval, SymmetricParams, MIN_INTERVAL_PROBABILITY,
};
use crate::error::{Error, Result};
use crate::tree::{
    grow_tree, root_clamped, root_decreasing, FeatureMatrix, Tree, TreeParams, LINE_SEARCH_TOL,
};

/// A base value plus a sum of trees. Leaf values already include the
/// learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl Ensemble {
    pub fn constant(base: f64, learning_rate: f64) -> Self {
        Self {
            base,
            learning_rate,
            trees: Vec::new(),
        }
    }

    pub fn predict(&self, predictors: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(predictors)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub learning_rate: f64,
    /// Trees added per ensemble per outer iteration, at most.
    pub max_trees: usize,
    pub outer_max_iterations: usize,
    pub outer_threshold: f64,
    /// Trees grown past the best selection-set NLL before stopping.
    pub patience: usize,
    /// Bound on a leaf's log-scale step before the learning rate applies.
    pub log_step_clamp: f64,
    pub tree: TreeParams,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_trees: 1000,
            outer_max_iterations: 10,
            outer_threshold: 0.01,
            patience: 50,
            log_step_clamp: 2.0,
            tree: TreeParams::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.max_trees < 1 || self.outer_max_iterations < 1 || self.patience < 1 {
            return bad("max_trees, outer_max_iterations and patience must be at least 1");
        }
        if !(self.outer_threshold > 0.0) {
            return bad("outer_threshold must be positive");
        }
        if !(self.log_step_clamp > 0.0) {
            return bad("log_step_clamp must be positive");
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Location,
    LogScale,
    LogLowerScale,
    LogUpperScale,
}

/// Record of one ensemble continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTrace {
    pub param: ParamKind,
    pub outer_iteration: usize,
    /// Change to the ensemble's base value made before any trees were added.
    pub base_shift: f64,
    /// NLL before the first new tree and after each one.
    pub train_nll: Vec<f64>,
    pub test_nll: Vec<f64>,
    /// Number of new trees kept (argmin of `test_nll`).
    pub selected: usize,
    /// Set when the fitting subset was too small and the ensemble was left as is.
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub outer_iterations: usize,
    pub converged: bool,
    /// Outer change measure after each iteration.
    pub changes: Vec<f64>,
    pub growth: Vec<GrowthTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricModel {
    pub location: Ensemble,
    pub log_scale: Ensemble,
    pub scale_floor: f64,
    pub diagnostics: FitDiagnostics,
}

impl SymmetricModel {
    pub fn predict(&self, predictors: &[f64]) -> SymmetricParams {
        let s = floored(self.log_scale.predict(predictors), self.scale_floor);
        SymmetricParams::new_unchecked(self.location.predict(predictors), s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricModel {
    pub location: Ensemble,
    pub log_lower: Ensemble,
    pub log_upper: Ensemble,
    pub scale_floor: f64,
    pub diagnostics: FitDiagnostics,
}

impl AsymmetricModel {
    pub fn predict(&self, predictors: &[f64]) -> AsymmetricParams {
        AsymmetricParams::new_unchecked(
            self.location.predict(predictors),
            floored(self.log_lower.predict(predictors), self.scale_floor),
            floored(self.log_upper.predict(predictors), self.scale_floor),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "error_model", rename_all = "snake_case")]
pub enum BoostedModel {
    Symmetric(SymmetricModel),
    Asymmetric(AsymmetricModel),
}

impl BoostedModel {
    pub fn predict(&self, predictors: &[f64]) -> DistParams {
        match self {
            BoostedModel::Symmetric(m) => DistParams::Symmetric(m.predict(predictors)),
            BoostedModel::Asymmetric(m) => DistParams::Asymmetric(m.predict(predictors)),
        }
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        match self {
            BoostedModel::Symmetric(m) => &m.diagnostics,
            BoostedModel::Asymmetric(m) => &m.diagnostics,
        }
    }
}

fn floored(log_s: f64, floor: f64) -> f64 {
    log_s.exp().max(floor)
}

fn finite_or_max(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::MAX
    }
}

// ---------------------------------------------------------------------------
// One parameter function with the others fixed
// ---------------------------------------------------------------------------

/// The loss seen by one parameter function. Slices hold the fixed parameters
/// per row; log-scale parameters are stored as logs.
#[derive(Clone, Copy)]
enum Loss<'a> {
    SymLocation { scale: &'a [f64] },
    SymLogScale { location: &'a [f64] },
    AsymLocation { lower: &'a [f64], upper: &'a [f64] },
    AsymLogLower { location: &'a [f64], upper: &'a [f64] },
    AsymLogUpper { location: &'a [f64], lower: &'a [f64] },
}

#[derive(Clone, Copy)]
struct Problem<'a> {
    intervals: &'a [OutcomeInterval],
    weights: &'a [f64],
    loss: Loss<'a>,
    floor: f64,
}

impl Problem<'_> {
    fn is_location(&self) -> bool {
        matches!(self.loss, Loss::SymLocation { .. } | Loss::AsymLocation { .. })
    }

    fn scale(&self, log_s: f64) -> f64 {
        floored(log_s, self.floor)
    }

    fn log_lik(&self, i: usize, theta: f64) -> f64 {
        let (a, b) = (self.intervals[i].lower(), self.intervals[i].upper());
        match self.loss {
            Loss::SymLocation { scale } => sym_log_lik(a, b, theta, scale[i]),
            Loss::SymLogScale { location } => sym_log_lik(a, b, location[i], self.scale(theta)),
            Loss::AsymLocation { lower, upper } => {
                asym_log_lik(a, b, theta, self.scale(lower[i]), self.scale(upper[i]))
            }
            Loss::AsymLogLower { location, upper } => {
                asym_log_lik(a, b, location[i], self.scale(theta), self.scale(upper[i]))
            }
            Loss::AsymLogUpper { location, lower } => {
                asym_log_lik(a, b, location[i], self.scale(lower[i]), self.scale(theta))
            }
        }
    }

    fn residual(&self, i: usize, theta: f64) -> f64 {
        let (a, b) = (self.intervals[i].lower(), self.intervals[i].upper());
        match self.loss {
            Loss::SymLocation { scale } => sym_residuals(a, b, theta, scale[i]).0,
            Loss::SymLogScale { location } => sym_residuals(a, b, location[i], self.scale(theta)).1,
            Loss::AsymLocation { lower, upper } => {
                asym_residuals(a, b, theta, self.scale(lower[i]), self.scale(upper[i])).0
            }
            Loss::AsymLogLower { location, upper } => {
                asym_residuals(a, b, location[i], self.scale(theta), self.scale(upper[i])).1
            }
            Loss::AsymLogUpper { location, lower } => {
                asym_residuals(a, b, location[i], self.scale(lower[i]), self.scale(theta)).2
            }
        }
    }

    /// Typical scale of row `i`, the bracket unit for location searches.
    fn scale_unit(&self, i: usize) -> f64 {
        match self.loss {
            Loss::SymLocation { scale } => scale[i],
            Loss::AsymLocation { lower, upper } => {
                0.5 * (self.scale(lower[i]) + self.scale(upper[i]))
            }
            _ => 1.0,
        }
    }

    fn nll(&self, rows: &[usize], theta: &[f64]) -> f64 {
        -rows
            .iter()
            .map(|&i| self.weights[i] * self.log_lik(i, theta[i]))
            .sum::<f64>()
    }

    /// Training NLL, failing on the first row whose interval has vanishing
    /// probability.
    fn checked_nll(&self, rows: &[usize], theta: &[f64]) -> Result<f64> {
        let min = MIN_INTERVAL_PROBABILITY.ln();
        let mut total = 0.0;
        for &i in rows {
            let ll = self.log_lik(i, theta[i]);
            if !self.intervals[i].is_uncensored() && !(ll >= min) {
                return Err(Error::DegenerateInterval {
                    lower: self.intervals[i].lower(),
                    upper: self.intervals[i].upper(),
                    row: Some(i),
                });
            }
            total -= self.weights[i] * ll;
        }
        Ok(total)
    }

    /// Step for the rows of one leaf.
    fn line_search(&self, rows: &[usize], theta: &[f64], clamp: f64) -> Result<f64> {
        let total: f64 = rows.iter().map(|&i| self.weights[i]).sum();
        let tol = LINE_SEARCH_TOL * total;
        let g = |d: f64| {
            rows.iter()
                .map(|&i| self.weights[i] * self.residual(i, theta[i] + d))
                .sum::<f64>()
        };
        if self.is_location() {
            let mut units: Vec<f64> = rows.iter().map(|&i| self.scale_unit(i)).collect();
            units.sort_by(f64::total_cmp);
            root_decreasing(g, units[units.len() / 2], tol)
        } else {
            Ok(root_clamped(g, clamp, tol))
        }
    }
}

/// One side of the fit: a problem plus the rows it covers.
struct Side<'a> {
    problem: Problem<'a>,
    rows: &'a [usize],
}

/// Append trees to `ens` until the selection NLL stops improving, then keep
/// the best prefix of the new trees.
#[allow(clippy::too_many_arguments)]
fn grow_ensemble(
    ens: &mut Ensemble,
    param: ParamKind,
    outer_iteration: usize,
    train: &Side,
    train_x: &FeatureMatrix,
    test: &Side,
    test_x: &[&[f64]],
    config: &FitConfig,
) -> Result<GrowthTrace> {
    let n_train = train.problem.intervals.len();
    let mut theta_train = vec![0.0; n_train];
    for &i in train.rows {
        theta_train[i] = ens.predict(&train_x.row(i));
    }
    let mut theta_test = vec![0.0; test_x.len()];
    for &i in test.rows {
        theta_test[i] = ens.predict(test_x[i]);
    }

    // Re-solve the intercept first: when the other parameter functions have
    // moved, the constant part of the correction is taken in one full step
    // instead of being spread over many shrunken trees.
    let base_shift = train
        .problem
        .line_search(train.rows, &theta_train, config.log_step_clamp)?;
    ens.base += base_shift;
    for &i in train.rows {
        theta_train[i] += base_shift;
    }
    for &i in test.rows {
        theta_test[i] += base_shift;
    }

    let mut trace = GrowthTrace {
        param,
        outer_iteration,
        base_shift,
        train_nll: vec![finite_or_max(train.problem.checked_nll(train.rows, &theta_train)?)],
        test_nll: vec![finite_or_max(test.problem.nll(test.rows, &theta_test))],
        selected: 0,
        frozen: false,
    };
    let start = ens.trees.len();
    let mut best = trace.test_nll[0];
    let mut targets = vec![0.0; n_train];

    for t in 0..config.max_trees {
        for &i in train.rows {
            targets[i] = train.problem.residual(i, theta_train[i]);
        }
        let grown = grow_tree(
            train_x,
            train.rows,
            &targets,
            train.problem.weights,
            &config.tree,
        );
        let mut tree = grown.tree;
        let mut moved = false;
        for (node, rows) in &grown.leaves {
            let step = train
                .problem
                .line_search(rows, &theta_train, config.log_step_clamp)?;
            let value = config.learning_rate * step;
            moved |= value != 0.0;
            tree.set_leaf_value(*node, value);
            for &i in rows {
                theta_train[i] += value;
            }
        }
        if !moved {
            break;
        }
        for &i in test.rows {
            theta_test[i] += tree.predict(test_x[i]);
        }
        ens.trees.push(tree);

        trace
            .train_nll
            .push(finite_or_max(train.problem.checked_nll(train.rows, &theta_train)?));
        let nll = finite_or_max(test.problem.nll(test.rows, &theta_test));
        trace.test_nll.push(nll);
        if nll < best {
            best = nll;
            trace.selected = t + 1;
        }
        if t + 1 - trace.selected >= config.patience {
            break;
        }
    }
    ens.trees.truncate(start + trace.selected);
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Outcome spread proxy: the interquartile range of interval representatives,
/// falling back to the range and then to 1.
fn spread_proxy(intervals: &[OutcomeInterval]) -> (f64, f64) {
    let mut reps: Vec<f64> = intervals.iter().map(|iv| iv.representative()).collect();
    reps.sort_by(f64::total_cmp);
    let median = quantile_sorted(&reps, 0.5);
    let iqr = quantile_sorted(&reps, 0.75) - quantile_sorted(&reps, 0.25);
    let range = reps[reps.len() - 1] - reps[0];
    let proxy = if iqr > 0.0 {
        iqr
    } else if range > 0.0 {
        range
    } else {
        1.0
    };
    (median, proxy)
}

/// Constant-model starting values: (location, log scale, scale floor).
fn initial_constants(intervals: &[OutcomeInterval], weights: &[f64]) -> Result<(f64, f64, f64)> {
    let (median, proxy) = spread_proxy(intervals);
    let floor = 1e-6 * proxy;
    let s_init = proxy / (2.0 * 3f64.ln());
    let total: f64 = weights.iter().sum();
    let tol = LINE_SEARCH_TOL * total;

    let g_f = |d: f64| {
        intervals
            .iter()
            .zip(weights)
            .map(|(iv, w)| w * sym_residuals(iv.lower(), iv.upper(), median + d, s_init).0)
            .sum::<f64>()
    };
    let f0 = median + root_decreasing(g_f, s_init, tol)?;

    let log_floor = floor.ln();
    let log_init = s_init.ln();
    let g_s = |d: f64| {
        let s = (log_init + d).exp().max(floor);
        intervals
            .iter()
            .zip(weights)
            .map(|(iv, w)| w * sym_residuals(iv.lower(), iv.upper(), f0, s).1)
            .sum::<f64>()
    };
    let at_floor = g_s(log_floor - log_init);
    let log_s0 = if at_floor <= tol {
        log_floor
    } else {
        log_init + root_decreasing(g_s, 1.0, tol)?
    };
    Ok((f0, log_s0.max(log_floor), floor))
}

// ---------------------------------------------------------------------------
// Shared state for the fitting loops
// ---------------------------------------------------------------------------

struct FitData<'a> {
    train_iv: Vec<OutcomeInterval>,
    train_w: Vec<f64>,
    train_x: FeatureMatrix,
    train_rows_x: Vec<&'a [f64]>,
    test_iv: Vec<OutcomeInterval>,
    test_w: Vec<f64>,
    test_x: Vec<&'a [f64]>,
    all_train: Vec<usize>,
    all_test: Vec<usize>,
}

impl<'a> FitData<'a> {
    fn new(train: &'a Dataset, test: &'a Dataset, config: &FitConfig) -> Result<Self> {
        config.validate()?;
        if train.schema() != test.schema() {
            return Err(Error::SchemaMismatch(
                "training and selection sets have different schemas".into(),
            ));
        }
        if test.is_empty() {
            return Err(Error::EmptyValidation);
        }
        Ok(Self {
            train_iv: train.intervals(),
            train_w: train.weights(),
            train_x: FeatureMatrix::from_dataset(train),
            train_rows_x: train.rows().iter().map(|r| r.predictors.as_slice()).collect(),
            test_iv: test.intervals(),
            test_w: test.weights(),
            test_x: test.rows().iter().map(|r| r.predictors.as_slice()).collect(),
            all_train: (0..train.len()).collect(),
            all_test: (0..test.len()).collect(),
        })
    }

    fn predict_train(&self, ens: &Ensemble) -> Vec<f64> {
        self.train_rows_x.iter().map(|x| ens.predict(x)).collect()
    }

    fn predict_test(&self, ens: &Ensemble) -> Vec<f64> {
        self.test_x.iter().map(|x| ens.predict(x)).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &self,
        ens: &mut Ensemble,
        param: ParamKind,
        outer: usize,
        train_loss: Loss,
        test_loss: Loss,
        train_rows: &[usize],
        test_rows: &[usize],
        floor: f64,
        config: &FitConfig,
    ) -> Result<GrowthTrace> {
        let train = Side {
            problem: Problem {
                intervals: &self.train_iv,
                weights: &self.train_w,
                loss: train_loss,
                floor,
            },
            rows: train_rows,
        };
        let test = Side {
            problem: Problem {
                intervals: &self.test_iv,
                weights: &self.test_w,
                loss: test_loss,
                floor,
            },
            rows: test_rows,
        };
        grow_ensemble(ens, param, outer, &train, &self.train_x, &test, &self.test_x, config)
    }
}

/// Constant-parameter asymmetric start. Runs the chosen alternation with
/// constant functions (one line search per parameter per sweep) from equal
/// scales until the steps vanish.
fn asymmetric_constants(
    data: &FitData,
    f0: f64,
    log_s0: f64,
    floor: f64,
    split_sides: bool,
) -> Result<(f64, f64, f64)> {
    const SWEEPS: usize = 500;
    const STEP_TOL: f64 = 1e-9;
    let n = data.train_iv.len();
    let rows = &data.all_train;
    let (mut f, mut l, mut u) = (f0, log_s0, log_s0);
    fn problem<'a>(data: &'a FitData, loss: Loss<'a>, floor: f64) -> Problem<'a> {
        Problem {
            intervals: &data.train_iv,
            weights: &data.train_w,
            loss,
            floor,
        }
    }
    for _ in 0..SWEEPS {
        let fs = vec![f; n];
        let ls = vec![l; n];
        let us = vec![u; n];
        let (df, dl, du);
        if split_sides {
            let y: Vec<f64> = data.train_iv.iter().map(|iv| iv.upper()).collect();
            let s: Vec<f64> = y
                .iter()
                .map(|&yi| floored(if yi <= f { l } else { u }, floor))
                .collect();
            df = problem(data, Loss::SymLocation { scale: &s }, floor).line_search(rows, &fs, 2.0)?;
            f += df;
            let fs = vec![f; n];
            let (low, up): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| y[i] <= f);
            let side = |rows: &[usize], theta: &[f64]| -> Result<f64> {
                if rows.is_empty() {
                    return Ok(0.0);
                }
                problem(data, Loss::SymLogScale { location: &fs }, floor).line_search(rows, theta, 2.0)
            };
            dl = side(&low, &ls)?;
            du = side(&up, &us)?;
        } else {
            df = problem(
                data,
                Loss::AsymLocation {
                lower: &ls,
                upper: &us,
            },
                floor,
            )
            .line_search(rows, &fs, 2.0)?;
            f += df;
            let fs = vec![f; n];
            dl = problem(
                data,
                Loss::AsymLogLower {
                location: &fs,
                upper: &us,
            },
                floor,
            )
            .line_search(rows, &ls, 2.0)?;
            let ls = vec![l + dl; n];
            du = problem(
                data,
                Loss::AsymLogUpper {
                location: &fs,
                lower: &ls,
            },
                floor,
            )
            .line_search(rows, &us, 2.0)?;
        }
        l += dl;
        u += du;
        let scale = floored(0.5 * (l + u), floor);
        if (df / scale).abs().max(dl.abs()).max(du.abs()) < STEP_TOL {
            break;
        }
    }
    Ok((f, l, u))
}

fn floored_scales(log_s: &[f64], floor: f64) -> Vec<f64> {
    log_s.iter().map(|&l| floored(l, floor)).collect()
}

/// Largest change over selection rows: location in units of the new scale,
/// log scales directly.
fn change_measure(
    old_f: &[f64],
    new_f: &[f64],
    new_scale: &[f64],
    old_logs: &[&[f64]],
    new_logs: &[&[f64]],
) -> f64 {
    let mut m = 0.0f64;
    for i in 0..new_f.len() {
        m = m.max((new_f[i] - old_f[i]).abs() / new_scale[i]);
    }
    for (old, new) in old_logs.iter().zip(new_logs) {
        for i in 0..new.len() {
            m = m.max((new[i] - old[i]).abs());
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Public fitting entry points
// ---------------------------------------------------------------------------

/// Boost a location ensemble from its constant start, given per-row scales.
pub fn boost_location(
    train: &Dataset,
    test: &Dataset,
    train_scale: &[f64],
    test_scale: &[f64],
    config: &FitConfig,
) -> Result<Ensemble> {
    let data = FitData::new(train, test, config)?;
    check_len(train_scale, train.len())?;
    check_len(test_scale, test.len())?;
    if let Some(&s) = train_scale.iter().chain(test_scale).find(|&&s| !(s > 0.0)) {
        return Err(Error::InvalidScale(s));
    }
    let (f0, _, floor) = initial_constants(&data.train_iv, &data.train_w)?;
    let mut ens = Ensemble::constant(f0, config.learning_rate);
    data.grow(
        &mut ens,
        ParamKind::Location,
        1,
        Loss::SymLocation { scale: train_scale },
        Loss::SymLocation { scale: test_scale },
        &data.all_train,
        &data.all_test,
        floor,
        config,
    )?;
    Ok(ens)
}

/// Boost a log-scale ensemble from its constant start, given per-row locations.
pub fn boost_logscale(
    train: &Dataset,
    test: &Dataset,
    train_location: &[f64],
    test_location: &[f64],
    config: &FitConfig,
) -> Result<Ensemble> {
    let data = FitData::new(train, test, config)?;
    check_len(train_location, train.len())?;
    check_len(test_location, test.len())?;
    let (_, log_s0, floor) = initial_constants(&data.train_iv, &data.train_w)?;
    let mut ens = Ensemble::constant(log_s0, config.learning_rate);
    data.grow(
        &mut ens,
        ParamKind::LogScale,
        1,
        Loss::SymLogScale {
            location: train_location,
        },
        Loss::SymLogScale {
            location: test_location,
        },
        &data.all_train,
        &data.all_test,
        floor,
        config,
    )?;
    Ok(ens)
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidData(format!("{} predictions for {n} rows", v.len())));
    }
    Ok(())
}

/// Symmetric model: alternate location and log-scale boosting from a
/// constant scale until predictions settle.
pub fn fit_symmetric(train: &Dataset, test: &Dataset, config: &FitConfig) -> Result<SymmetricModel> {
    let data = FitData::new(train, test, config)?;
    let (f0, log_s0, floor) = initial_constants(&data.train_iv, &data.train_w)?;
    let mut location = Ensemble::constant(f0, config.learning_rate);
    let mut log_scale = Ensemble::constant(log_s0, config.learning_rate);
    let mut diag = FitDiagnostics {
        outer_iterations: 0,
        converged: false,
        changes: Vec::new(),
        growth: Vec::new(),
    };

    let mut old_f = data.predict_test(&location);
    let mut old_logs = data.predict_test(&log_scale);
    for outer in 1..=config.outer_max_iterations {
        let s_train = floored_scales(&data.predict_train(&log_scale), floor);
        let s_test = floored_scales(&old_logs, floor);
        diag.growth.push(data.grow(
            &mut location,
            ParamKind::Location,
            outer,
            Loss::SymLocation { scale: &s_train },
            Loss::SymLocation { scale: &s_test },
            &data.all_train,
            &data.all_test,
            floor,
            config,
        )?);

        let f_train = data.predict_train(&location);
        let f_test = data.predict_test(&location);
        diag.growth.push(data.grow(
            &mut log_scale,
            ParamKind::LogScale,
            outer,
            Loss::SymLogScale { location: &f_train },
            Loss::SymLogScale { location: &f_test },
            &data.all_train,
            &data.all_test,
            floor,
            config,
        )?);

        let new_logs = data.predict_test(&log_scale);
        let new_s = floored_scales(&new_logs, floor);
        let change = change_measure(&old_f, &f_test, &new_s, &[&old_logs], &[&new_logs]);
        diag.changes.push(change);
        diag.outer_iterations = outer;
        old_f = f_test;
        old_logs = new_logs;
        if change < config.outer_threshold {
            diag.converged = true;
            break;
        }
    }
    Ok(SymmetricModel {
        location,
        log_scale,
        scale_floor: floor,
        diagnostics: diag,
    })
}

/// Asymmetric model for any censoring pattern: three-way alternation under
/// the asymmetric likelihood.
pub fn fit_asymmetric_general(
    train: &Dataset,
    test: &Dataset,
    config: &FitConfig,
) -> Result<AsymmetricModel> {
    let data = FitData::new(train, test, config)?;
    let (f0, log_s0, floor) = initial_constants(&data.train_iv, &data.train_w)?;
    let (f0, l0, u0) = asymmetric_constants(&data, f0, log_s0, floor, false)?;
    let mut location = Ensemble::constant(f0, config.learning_rate);
    let mut log_lower = Ensemble::constant(l0, config.learning_rate);
    let mut log_upper = Ensemble::constant(u0, config.learning_rate);
    let mut diag = FitDiagnostics {
        outer_iterations: 0,
        converged: false,
        changes: Vec::new(),
        growth: Vec::new(),
    };

    let mut old_f = data.predict_test(&location);
    let mut old_l = data.predict_test(&log_lower);
    let mut old_u = data.predict_test(&log_upper);
    for outer in 1..=config.outer_max_iterations {
        let l_train = data.predict_train(&log_lower);
        let u_train = data.predict_train(&log_upper);
        diag.growth.push(data.grow(
            &mut location,
            ParamKind::Location,
            outer,
            Loss::AsymLocation {
                lower: &l_train,
                upper: &u_train,
            },
            Loss::AsymLocation {
                lower: &old_l,
                upper: &old_u,
            },
            &data.all_train,
            &data.all_test,
            floor,
            config,
        )?);

        let f_train = data.predict_train(&location);
        let f_test = data.predict_test(&location);
        diag.growth.push(data.grow(
            &mut log_lower,
            ParamKind::LogLowerScale,
            outer,
            Loss::AsymLogLower {
                location: &f_train,
                upper: &u_train,
            },
            Loss::AsymLogLower {
                location: &f_test,
                upper: &old_u,
            },
            &data.all_train,
            &data.all_test,
            floor,
            config,
        )?);

        let l_train = data.predict_train(&log_lower);
        let l_test = data.predict_test(&log_lower);
        diag.growth.push(data.grow(
            &mut log_upper,
            ParamKind::LogUpperScale,
            outer,
            Loss::AsymLogUpper {
                location: &f_train,
                lower: &l_train,
            },
            Loss::AsymLogUpper {
                location: &f_test,
                lower: &l_test,
            },
            &data.all_train,
            &data.all_test,
            floor,
            config,
        )?);

        let u_test = data.predict_test(&log_upper);
        let geo: Vec<f64> = l_test
            .iter()
            .zip(&u_test)
            .map(|(l, u)| floored(0.5 * (l + u), floor))
            .collect();
        let change = change_measure(&old_f, &f_test, &geo, &[&old_l, &old_u], &[&l_test, &u_test]);
        diag.changes.push(change);
        diag.outer_iterations = outer;
        old_f = f_test;
        old_l = l_test;
        old_u = u_test;
        if change < config.outer_threshold {
            diag.converged = true;
            break;
        }
    }
    Ok(AsymmetricModel {
        location,
        log_lower,
        log_upper,
        scale_floor: floor,
        diagnostics: diag,
    })
}

/// Asymmetric model for uncensored outcomes. Each row is assigned the lower
/// or upper scale according to which side of the current location it falls
/// on; the location is then boosted under the symmetric loss with that
/// per-row scale, and each scale on its own side's rows.
pub fn fit_asymmetric_uncensored(
    train: &Dataset,
    test: &Dataset,
    config: &FitConfig,
) -> Result<AsymmetricModel> {
    for data in [train, test] {
        if let Some(row) = data.rows().iter().position(|r| !r.interval.is_uncensored()) {
            return Err(Error::UncensoredOnly { row });
        }
    }
    let data = FitData::new(train, test, config)?;
    let (f0, log_s0, floor) = initial_constants(&data.train_iv, &data.train_w)?;
    let (f0, l0, u0) = asymmetric_constants(&data, f0, log_s0, floor, true)?;
    let mut location = Ensemble::constant(f0, config.learning_rate);
    let mut log_lower = Ensemble::constant(l0, config.learning_rate);
    let mut log_upper = Ensemble::constant(u0, config.learning_rate);
    let mut diag = FitDiagnostics {
        outer_iterations: 0,
        converged: false,
        changes: Vec::new(),
        growth: Vec::new(),
    };
    let y_train: Vec<f64> = data.train_iv.iter().map(|iv| iv.upper()).collect();
    let y_test: Vec<f64> = data.test_iv.iter().map(|iv| iv.upper()).collect();
    let assign = |y: &[f64], f: &[f64], l: &[f64], u: &[f64]| -> Vec<f64> {
        (0..y.len())
            .map(|i| floored(if y[i] <= f[i] { l[i] } else { u[i] }, floor))
            .collect()
    };
    let split = |y: &[f64], f: &[f64]| -> (Vec<usize>, Vec<usize>) {
        (0..y.len()).partition(|&i| y[i] <= f[i])
    };

    let mut old_f = data.predict_test(&location);
    let mut old_l = data.predict_test(&log_lower);
    let mut old_u = data.predict_test(&log_upper);
    for outer in 1..=config.outer_max_iterations {
        let f_train = data.predict_train(&location);
        let l_train = data.predict_train(&log_lower);
        let u_train = data.predict_train(&log_upper);
        let s_train = assign(&y_train, &f_train, &l_train, &u_train);
        let s_test = assign(&y_test, &old_f, &old_l, &old_u);
        diag.growth.push(data.grow(
            &mut location,
            ParamKind::Location,
            outer,
            Loss::SymLocation { scale: &s_train },
            Loss::SymLocation { scale: &s_test },
            &data.all_train,
            &data.all_test,
            floor,
            config,
        )?);

        let f_train = data.predict_train(&location);
        let f_test = data.predict_test(&location);
        let (low_train, up_train) = split(&y_train, &f_train);
        let (low_test, up_test) = split(&y_test, &f_test);
        for (ens, param, rows_train, rows_test) in [
            (&mut log_lower, ParamKind::LogLowerScale, &low_train, &low_test),
            (&mut log_upper, ParamKind::LogUpperScale, &up_train, &up_test),
        ] {
            if rows_train.len() < config.tree.min_leaf_count || rows_test.is_empty() {
                diag.growth.push(GrowthTrace {
                    param,
                    outer_iteration: outer,
                    base_shift: 0.0,
                    train_nll: Vec::new(),
                    test_nll: Vec::new(),
                    selected: 0,
                    frozen: true,
                });
                continue;
            }
            diag.growth.push(data.grow(
                ens,
                param,
                outer,
                Loss::SymLogScale { location: &f_train },
                Loss::SymLogScale { location: &f_test },
                rows_train,
                rows_test,
                floor,
                config,
            )?);
        }

        let l_test = data.predict_test(&log_lower);
        let u_test = data.predict_test(&log_upper);
        let geo: Vec<f64> = l_test
            .iter()
            .zip(&u_test)
            .map(|(l, u)| floored(0.5 * (l + u), floor))
            .collect();
        let change = change_measure(&old_f, &f_test, &geo, &[&old_l, &old_u], &[&l_test, &u_test]);
        diag.changes.push(change);
        diag.outer_iterations = outer;
        old_f = f_test;
        old_l = l_test;
        old_u = u_test;
        if change < config.outer_threshold {
            diag.converged = true;
            break;
        }
    }
    Ok(AsymmetricModel {
        location,
        log_lower,
        log_upper,
        scale_floor: floor,
        diagnostics: diag,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    #[default]
    Symmetric,
    Asymmetric,
}

/// Fit either error model. Asymmetric fits use the side-splitting algorithm
/// when every outcome in both sets is exact, and the general one otherwise.
pub fn fit_model(
    train: &Dataset,
    test: &Dataset,
    config: &FitConfig,
    error_model: ErrorModel,
) -> Result<BoostedModel> {
    Ok(match error_model {
        ErrorModel::Symmetric => BoostedModel::Symmetric(fit_symmetric(train, test, config)?),
        ErrorModel::Asymmetric if train.is_uncensored() && test.is_uncensored() => {
            BoostedModel::Asymmetric(fit_asymmetric_uncensored(train, test, config)?)
        }
        ErrorModel::Asymmetric => {
            BoostedModel::Asymmetric(fit_asymmetric_general(train, test, config)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::censor::{CensoredObservation, Schema};
    use crate::synth::Generator;

    fn dataset(ys: &[f64], xs: &[f64]) -> Dataset {
        let rows = ys
            .iter()
            .zip(xs)
            .map(|(&y, &x)| CensoredObservation::unweighted(OutcomeInterval::exact(y).unwrap(), vec![x]))
            .collect();
        Dataset::new(Schema::numeric(&["x"]), rows).unwrap()
    }

    #[test]
    fn empty_ensemble_predicts_base() {
        let e = Ensemble::constant(1.25, 0.1);
        assert_eq!(e.predict(&[3.0]), 1.25);
        let mut e = e;
        e.trees.push(Tree::leaf(0.5));
        assert_eq!(e.predict(&[3.0]), 1.75);
    }

    #[test]
    fn constant_outcome_is_recovered() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 10.0).collect();
        let ys = vec![4.0; 200];
        let d = dataset(&ys, &xs);
        let m = fit_symmetric(&d, &d, &FitConfig::default()).unwrap();
        for x in [0.0, 7.5, 19.9] {
            assert!((m.predict(&[x]).location() - 4.0).abs() < 1e-6);
        }
        assert!(m.location.trees.len() <= 5);
    }

    #[test]
    fn selected_prefix_attains_test_minimum() {
        let g = Generator::heteroscedastic();
        let train = g.draw(400, 11).dataset().unwrap();
        let test = g.draw(200, 12).dataset().unwrap();
        let m = fit_symmetric(&train, &test, &FitConfig::default()).unwrap();
        assert!(!m.diagnostics.growth.is_empty());
        for g in &m.diagnostics.growth {
            let min = g.test_nll.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(g.test_nll[g.selected], min);
            assert_eq!(g.test_nll.len(), g.train_nll.len());
        }
    }

    #[test]
    fn uncensored_variant_rejects_censoring() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let mut rows: Vec<CensoredObservation> = xs
            .iter()
            .map(|&x| CensoredObservation::unweighted(OutcomeInterval::exact(x).unwrap(), vec![x]))
            .collect();
        rows[7].interval = OutcomeInterval::new(7.0, f64::INFINITY).unwrap();
        let d = Dataset::new(Schema::numeric(&["x"]), rows).unwrap();
        assert_eq!(
            fit_asymmetric_uncensored(&d, &d, &FitConfig::default()).unwrap_err(),
            Error::UncensoredOnly { row: 7 }
        );
    }

    #[test]
    fn config_validation() {
        let mut c = FitConfig::default();
        assert!(c.validate().is_ok());
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }
}
