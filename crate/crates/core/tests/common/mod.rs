//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use distboost::OutcomeInterval;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Product-limit estimate `1 - S(t)` at each distinct event time. Events at a
/// time precede censorings at the same time.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Vec<(f64, f64)> {
    let mut idx: Vec<usize> = (0..times.len()).collect();
    idx.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(events[b].cmp(&events[a])));
    let mut at_risk = times.len() as f64;
    let mut surv = 1.0;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut k = 0;
    while k < idx.len() {
        let t = times[idx[k]];
        let (mut d, mut c) = (0.0, 0.0);
        while k < idx.len() && times[idx[k]] == t {
            if events[idx[k]] {
                d += 1.0;
            } else {
                c += 1.0;
            }
            k += 1;
        }
        if d > 0.0 {
            surv *= 1.0 - d / at_risk;
            out.push((t, 1.0 - surv));
        }
        at_risk -= d + c;
    }
    out
}

/// Minimizer of `f` on `[lo, hi]` by a coarse scan followed by successively
/// finer scans around the best point, ending at resolution `step`.
pub fn scan_minimum(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let mut h = (hi - lo) / 2000.0;
    let (mut a, mut b) = (lo, hi);
    let mut best = lo;
    loop {
        let n = ((b - a) / h).round() as usize;
        let mut best_v = f64::INFINITY;
        for i in 0..=n {
            let x = (a + i as f64 * h).min(b);
            let v = f(x);
            if v < best_v {
                best_v = v;
                best = x;
            }
        }
        if h <= step {
            return best;
        }
        a = (best - 2.0 * h).max(lo);
        b = (best + 2.0 * h).min(hi);
        h = (h / 50.0).max(step);
    }
}

/// Depth-limited CART by exhaustive search over every (feature, midpoint)
/// pair, recomputing both children's SSE from scratch. Returns the splits in
/// preorder. Ties prefer the lower feature, then the lower threshold.
pub fn exhaustive_splits(
    columns: &[Vec<f64>],
    targets: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Vec<(usize, f64)> {
    fn sse(rows: &[usize], t: &[f64]) -> f64 {
        let m = rows.iter().map(|&r| t[r]).sum::<f64>() / rows.len() as f64;
        rows.iter().map(|&r| (t[r] - m).powi(2)).sum()
    }
    fn walk(
        rows: Vec<usize>,
        depth: usize,
        cols: &[Vec<f64>],
        t: &[f64],
        max_depth: usize,
        min_leaf: usize,
        out: &mut Vec<(usize, f64)>,
    ) {
        if depth == max_depth || rows.len() < 2 * min_leaf {
            return;
        }
        let parent = sse(&rows, t);
        let sum_sq: f64 = rows.iter().map(|&r| t[r] * t[r]).sum();
        if parent <= 1e-14 * sum_sq {
            return;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for (j, col) in cols.iter().enumerate() {
            let mut vals: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= thr);
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let gain = parent - sse(&l, t) - sse(&r, t);
                let better = match best {
                    None => true,
                    Some((g, _, _)) => gain > g * (1.0 + 1e-12) + 1e-12,
                };
                if gain > 1e-12 * sum_sq && better {
                    best = Some((gain, j, thr));
                }
            }
        }
        if let Some((_, j, thr)) = best {
            out.push((j, thr));
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| cols[j][i] <= thr);
            walk(l, depth + 1, cols, t, max_depth, min_leaf, out);
            walk(r, depth + 1, cols, t, max_depth, min_leaf, out);
        }
    }
    let mut out = Vec::new();
    walk(
        (0..targets.len()).collect(),
        0,
        columns,
        targets,
        max_depth,
        min_leaf,
        &mut out,
    );
    out
}

/// Central difference of `f` at `x`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * (1.0 + x.abs());
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// A random interval around a logistic-ish draw, of the requested kind:
/// 0 uncensored, 1 left, 2 right, 3 interval.
pub fn random_interval(rng: &mut ChaCha8Rng, kind: usize) -> OutcomeInterval {
    let y: f64 = rng.gen_range(-4.0..4.0);
    let width: f64 = rng.gen_range(0.05..3.0);
    match kind {
        0 => OutcomeInterval::exact(y),
        1 => OutcomeInterval::new(f64::NEG_INFINITY, y),
        2 => OutcomeInterval::new(y, f64::INFINITY),
        _ => OutcomeInterval::new(y, y + width),
    }
    .unwrap()
}
