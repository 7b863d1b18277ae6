//! Regression trees grown on generalized residuals, and the one-dimensional
//! leaf line searches that set their terminal values.
//!
//! Splits minimize weighted squared error of the targets. Leaves are not set
//! to target means; the boosting driver refits every leaf by rooting the
//! summed generalized residual of its rows.

use serde::{Deserialize, Serialize};

use crate::censor::{Dataset, FeatureKind};
use crate::dist::{sym_residuals, OutcomeInterval};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf_count: usize,
    pub min_gain: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_leaf_count: 20,
            min_gain: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 || self.min_leaf_count < 1 || !(self.min_gain >= 0.0) {
            return Err(Error::InvalidConfig(
                "tree params need max_depth >= 1, min_leaf_count >= 1, min_gain >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitKind {
    /// Left iff `value <= threshold`.
    Numeric { threshold: f64 },
    /// Left iff the level is in `left`; levels in neither list (unseen while
    /// growing this node) follow `unseen_left`.
    Categorical {
        left: Vec<u32>,
        right: Vec<u32>,
        unseen_left: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub kind: SplitKind,
}

impl SplitRule {
    pub fn goes_left(&self, predictors: &[f64]) -> bool {
        self.goes_left_value(predictors[self.feature])
    }

    /// Routing decision given the value of the split feature.
    pub fn goes_left_value(&self, v: f64) -> bool {
        match &self.kind {
            SplitKind::Numeric { threshold } => v <= *threshold,
            SplitKind::Categorical {
                left,
                right,
                unseen_left,
            } => {
                let level = v as u32;
                if left.binary_search(&level).is_ok() {
                    true
                } else if right.binary_search(&level).is_ok() {
                    false
                } else {
                    *unseen_left
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { rule: SplitRule, left: usize, right: usize },
}

/// Binary tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf node reached by `predictors`.
    pub fn leaf_index(&self, predictors: &[f64]) -> usize {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { .. } => return k,
                Node::Split { rule, left, right } => {
                    k = if rule.goes_left(predictors) { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, predictors: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(predictors)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn set_leaf_value(&mut self, node: usize, value: f64) {
        match &mut self.nodes[node] {
            Node::Leaf { value: v } => *v = value,
            Node::Split { .. } => panic!("node {node} is not a leaf"),
        }
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { value } => Some(*value),
                Node::Split { .. } => None,
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], k: usize) -> usize {
            match &nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Split rules in pre-order (root, left subtree, right subtree).
    pub fn splits_preorder(&self) -> Vec<&SplitRule> {
        fn walk<'a>(nodes: &'a [Node], k: usize, out: &mut Vec<&'a SplitRule>) {
            if let Node::Split { rule, left, right } = &nodes[k] {
                out.push(rule);
                walk(nodes, *left, out);
                walk(nodes, *right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, 0, &mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// Growing
// ---------------------------------------------------------------------------

/// Column-major predictors with numeric columns presorted once.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    columns: Vec<Vec<f64>>,
    /// `Some(n_levels)` for categorical columns.
    levels: Vec<Option<usize>>,
    /// Row order by value for numeric columns (ties by row index).
    sorted: Vec<Option<Vec<usize>>>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn from_dataset(data: &Dataset) -> Self {
        let levels = data
            .schema()
            .features
            .iter()
            .map(|f| match &f.kind {
                FeatureKind::Numeric => None,
                FeatureKind::Categorical { levels } => Some(levels.len()),
            })
            .collect();
        Self::new(data.columns(), levels)
    }

    pub fn new(columns: Vec<Vec<f64>>, levels: Vec<Option<usize>>) -> Self {
        let n_rows = columns.first().map_or(0, Vec::len);
        let sorted = columns
            .iter()
            .zip(&levels)
            .map(|(col, lv)| {
                lv.is_none().then(|| {
                    let mut idx: Vec<usize> = (0..col.len()).collect();
                    idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                    idx
                })
            })
            .collect();
        Self {
            columns,
            levels,
            sorted,
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    fn value(&self, feature: usize, row: usize) -> f64 {
        self.columns[feature][row]
    }
}

/// A grown tree together with the training rows that reached each leaf.
#[derive(Debug, Clone)]
pub struct GrownTree {
    pub tree: Tree,
    /// `(leaf node index, rows)` in node order.
    pub leaves: Vec<(usize, Vec<usize>)>,
}

struct Candidate {
    gain: f64,
    rule: SplitRule,
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    targets: &'a [f64],
    weights: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    leaves: Vec<(usize, Vec<usize>)>,
    mask: Vec<bool>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, sorted: Vec<Option<Vec<usize>>>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let split = if depth < self.params.max_depth
            && rows.len() >= 2 * self.params.min_leaf_count
        {
            self.best_split(&rows, &sorted)
        } else {
            None
        };
        let Some(cand) = split else {
            self.leaves.push((id, rows));
            return id;
        };

        for &r in &rows {
            self.mask[r] = cand.rule.goes_left_value(self.x.value(cand.rule.feature, r));
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.mask[r]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for s in sorted {
            match s {
                Some(order) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        order.into_iter().partition(|&r| self.mask[r]);
                    left_sorted.push(Some(l));
                    right_sorted.push(Some(r));
                }
                None => {
                    left_sorted.push(None);
                    right_sorted.push(None);
                }
            }
        }
        let left = self.grow(left_rows, left_sorted, depth + 1);
        let right = self.grow(right_rows, right_sorted, depth + 1);
        self.nodes[id] = Node::Split {
            rule: cand.rule,
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize], sorted: &[Option<Vec<usize>>]) -> Option<Candidate> {
        let (mut sw, mut swt, mut swtt) = (0.0, 0.0, 0.0);
        for &r in rows {
            let (w, t) = (self.weights[r], self.targets[r]);
            sw += w;
            swt += w * t;
            swtt += w * t * t;
        }
        let parent = swt * swt / sw;
        if swtt - parent <= 1e-14 * swtt {
            return None;
        }
        let floor = self.params.min_gain.max(1e-12 * swtt);
        let mut best: Option<Candidate> = None;
        let consider = |gain: f64, rule: SplitRule, best: &mut Option<Candidate>| {
            if gain > floor && best.as_ref().map_or(true, |b| gain > b.gain) {
                *best = Some(Candidate { gain, rule });
            }
        };
        let min_leaf = self.params.min_leaf_count;
        for j in 0..self.x.n_features() {
            match (&sorted[j], self.x.levels[j]) {
                (Some(order), None) => {
                    let (mut lw, mut lwt) = (0.0, 0.0);
                    for k in 0..order.len() - 1 {
                        let r = order[k];
                        lw += self.weights[r];
                        lwt += self.weights[r] * self.targets[r];
                        let n_left = k + 1;
                        if n_left < min_leaf || order.len() - n_left < min_leaf {
                            continue;
                        }
                        let v = self.x.value(j, r);
                        let next = self.x.value(j, order[k + 1]);
                        if v == next {
                            continue;
                        }
                        let rw = sw - lw;
                        let rwt = swt - lwt;
                        let gain = lwt * lwt / lw + rwt * rwt / rw - parent;
                        let mut threshold = 0.5 * (v + next);
                        if !(threshold >= v && threshold < next) {
                            threshold = v;
                        }
                        consider(
                            gain,
                            SplitRule {
                                feature: j,
                                kind: SplitKind::Numeric { threshold },
                            },
                            &mut best,
                        );
                    }
                }
                (None, Some(n_levels)) => {
                    if let Some((gain, rule)) =
                        self.categorical_split(j, n_levels, rows, sw, swt, parent, min_leaf)
                    {
                        consider(gain, rule, &mut best);
                    }
                }
                _ => unreachable!("numeric columns are presorted"),
            }
        }
        best
    }

    /// Breiman ordering: levels sorted by mean target, then scanned as ordinal.
    #[allow(clippy::too_many_arguments)]
    fn categorical_split(
        &self,
        j: usize,
        n_levels: usize,
        rows: &[usize],
        sw: f64,
        swt: f64,
        parent: f64,
        min_leaf: usize,
    ) -> Option<(f64, SplitRule)> {
        let mut stats = vec![(0.0f64, 0.0f64, 0usize); n_levels];
        for &r in rows {
            let lv = self.x.value(j, r) as usize;
            stats[lv].0 += self.weights[r];
            stats[lv].1 += self.weights[r] * self.targets[r];
            stats[lv].2 += 1;
        }
        let mut present: Vec<usize> = (0..n_levels).filter(|&l| stats[l].2 > 0).collect();
        if present.len() < 2 {
            return None;
        }
        present.sort_by(|&a, &b| {
            let ma = stats[a].1 / stats[a].0;
            let mb = stats[b].1 / stats[b].0;
            ma.total_cmp(&mb).then(a.cmp(&b))
        });
        let (mut lw, mut lwt, mut ln) = (0.0, 0.0, 0usize);
        let mut best: Option<(f64, usize, f64)> = None;
        for k in 0..present.len() - 1 {
            let s = stats[present[k]];
            lw += s.0;
            lwt += s.1;
            ln += s.2;
            if ln < min_leaf || rows.len() - ln < min_leaf {
                continue;
            }
            let rw = sw - lw;
            let gain = lwt * lwt / lw + (swt - lwt) * (swt - lwt) / rw - parent;
            if best.map_or(true, |b| gain > b.0) {
                best = Some((gain, k, lw));
            }
        }
        let (gain, k, lw) = best?;
        let mut left: Vec<u32> = present[..=k].iter().map(|&l| l as u32).collect();
        let mut right: Vec<u32> = present[k + 1..].iter().map(|&l| l as u32).collect();
        left.sort_unstable();
        right.sort_unstable();
        Some((
            gain,
            SplitRule {
                feature: j,
                kind: SplitKind::Categorical {
                    left,
                    right,
                    unseen_left: lw >= sw - lw,
                },
            },
        ))
    }
}

/// Grow a tree on `rows` of `x`, fitting `targets` (indexed by global row).
pub fn grow_tree(
    x: &FeatureMatrix,
    rows: &[usize],
    targets: &[f64],
    weights: &[f64],
    params: &TreeParams,
) -> GrownTree {
    let mut mask = vec![false; x.n_rows()];
    for &r in rows {
        mask[r] = true;
    }
    let sorted = x
        .sorted
        .iter()
        .map(|s| {
            s.as_ref()
                .map(|order| order.iter().copied().filter(|&r| mask[r]).collect())
        })
        .collect();
    let mut rows = rows.to_vec();
    rows.sort_unstable();
    let mut grower = Grower {
        x,
        targets,
        weights,
        params: *params,
        nodes: Vec::new(),
        leaves: Vec::new(),
        mask,
    };
    grower.grow(rows, sorted, 0);
    let mut leaves = grower.leaves;
    leaves.sort_by_key(|l| l.0);
    GrownTree {
        tree: Tree {
            nodes: grower.nodes,
        },
        leaves,
    }
}

/// Fit tree structure to `targets` (one per dataset row); leaf values are 0.
pub fn fit_tree(dataset: &Dataset, targets: &[f64], params: &TreeParams) -> Result<Tree> {
    params.validate()?;
    if targets.len() != dataset.len() {
        return Err(Error::InvalidData(format!(
            "{} targets for {} rows",
            targets.len(),
            dataset.len()
        )));
    }
    let x = FeatureMatrix::from_dataset(dataset);
    let rows: Vec<usize> = (0..dataset.len()).collect();
    Ok(grow_tree(&x, &rows, targets, &dataset.weights(), params).tree)
}

// ---------------------------------------------------------------------------
// Leaf line searches
// ---------------------------------------------------------------------------

/// Bracket limit for unbounded searches, in scale units.
pub const BRACKET_LIMIT: f64 = 1e6;

/// Relative residual tolerance: the summed residual must be within
/// `LINE_SEARCH_TOL * total_weight` of zero.
pub const LINE_SEARCH_TOL: f64 = 1e-8;

/// Default clamp on a leaf's log-scale step.
pub const LOG_STEP_CLAMP: f64 = 2.0;

/// Root of `g(x) = target` on `[lo, hi]` where `g(lo) - target` and
/// `g(hi) - target` have opposite signs. Illinois false position with a
/// bisection fallback; stops once `|g - target| <= stop` or the bracket
/// collapses.
pub(crate) fn refine_root(
    g: &impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    stop: f64,
) -> f64 {
    let mut hlo = g(lo) - target;
    let mut hhi = g(hi) - target;
    if hlo == 0.0 {
        return lo;
    }
    if hhi == 0.0 {
        return hi;
    }
    let mut side = 0i8;
    let mut best = if hlo.abs() < hhi.abs() { lo } else { hi };
    for iter in 0..400 {
        let width = hi - lo;
        if width.abs() <= 4.0 * f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        let mut x = if iter % 8 == 7 {
            0.5 * (lo + hi)
        } else {
            (lo * hhi - hi * hlo) / (hhi - hlo)
        };
        if !(x > lo.min(hi) && x < lo.max(hi)) {
            x = 0.5 * (lo + hi);
        }
        let hx = g(x) - target;
        best = x;
        if hx.abs() <= stop {
            break;
        }
        if (hx > 0.0) == (hlo > 0.0) {
            lo = x;
            hlo = hx;
            if side == -1 {
                hhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            hhi = hx;
            if side == 1 {
                hlo *= 0.5;
            }
            side = 1;
        }
    }
    best
}

/// Solve `g(x) = 0` for a summed residual that decreases in `x`.
///
/// When `g` never changes sign (every row censored on the same side, say)
/// the residual only approaches zero asymptotically; the search then returns
/// the point where `|g|` falls to half the tolerance.
pub fn root_decreasing(g: impl Fn(f64) -> f64, unit: f64, tol: f64) -> Result<f64> {
    let g0 = g(0.0);
    if g0.abs() <= tol {
        return Ok(0.0);
    }
    let dir = g0.signum();
    let mut prev = 0.0;
    let mut step = unit;
    loop {
        let x = dir * step;
        let gx = g(x);
        if gx.signum() != dir || gx == 0.0 {
            return Ok(refine_root(&g, 0.0, prev, x, 1e-3 * tol));
        }
        if gx.abs() <= tol {
            return Ok(refine_root(&g, 0.5 * dir * tol, prev, x, 1e-3 * tol));
        }
        if step >= BRACKET_LIMIT * unit {
            return Err(Error::LineSearchBracketFailure {
                limit: BRACKET_LIMIT,
            });
        }
        prev = x;
        step *= 2.0;
    }
}

/// Solve `g(x) = 0` on `[-clamp, clamp]`, returning the nearer end when the
/// residual keeps its sign across the whole range.
pub fn root_clamped(g: impl Fn(f64) -> f64, clamp: f64, tol: f64) -> f64 {
    let g0 = g(0.0);
    if g0.abs() <= tol {
        return 0.0;
    }
    let end = g0.signum() * clamp;
    let gend = g(end);
    if gend.signum() == g0.signum() && gend != 0.0 {
        return end;
    }
    refine_root(&g, 0.0, 0.0, end, 1e-3 * tol)
}

fn check_leaf(intervals: &[OutcomeInterval], f_hat: &[f64], s_hat: &[f64]) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::InvalidData("empty leaf".into()));
    }
    if f_hat.len() != intervals.len() || s_hat.len() != intervals.len() {
        return Err(Error::InvalidData("leaf arrays differ in length".into()));
    }
    if let Some(&s) = s_hat.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::InvalidScale(s));
    }
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Location step for one leaf: the root of the leaf's summed location residual.
pub fn leaf_line_search_location(
    intervals: &[OutcomeInterval],
    weights: &[f64],
    f_hat: &[f64],
    s_hat: &[f64],
) -> Result<f64> {
    check_leaf(intervals, f_hat, s_hat)?;
    let total: f64 = weights.iter().sum();
    let g = |d: f64| {
        intervals
            .iter()
            .zip(weights)
            .zip(f_hat.iter().zip(s_hat))
            .map(|((iv, w), (f, s))| w * sym_residuals(iv.lower(), iv.upper(), f + d, *s).0)
            .sum::<f64>()
    };
    root_decreasing(g, median(s_hat), LINE_SEARCH_TOL * total)
}

/// Log-scale step for one leaf, clamped to `[-clamp, clamp]`.
pub fn leaf_line_search_logscale(
    intervals: &[OutcomeInterval],
    weights: &[f64],
    f_hat: &[f64],
    s_hat: &[f64],
    clamp: f64,
) -> Result<f64> {
    check_leaf(intervals, f_hat, s_hat)?;
    let total: f64 = weights.iter().sum();
    let g = |d: f64| {
        let m = d.exp();
        intervals
            .iter()
            .zip(weights)
            .zip(f_hat.iter().zip(s_hat))
            .map(|((iv, w), (f, s))| w * sym_residuals(iv.lower(), iv.upper(), *f, s * m).1)
            .sum::<f64>()
    };
    Ok(root_clamped(g, clamp, LINE_SEARCH_TOL * total))
}
