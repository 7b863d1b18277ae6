//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to the
//! raw stderr handle (so it shows even when output is captured) and then
//! asserts the outcome.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use common::{kaplan_meier, random_interval, scan_minimum};
use distboost::censor::{turnbull_cdf, TURNBULL_DEFAULT_MAX_ITER};
use distboost::diag::{
    default_levels, marginal_qq, mean_lower_mass, partition_by_location_scale, residual_qq, standardized_residuals,
    QQBand, Reference, ReferenceQuantiles, DEFAULT_MIN_COUNT,
};
use distboost::dist::{asym_gradient, asym_nll, grad_location, grad_logscale, nll};
use distboost::synth::{Generator, Synthetic};
use distboost::transform::{fit_with_transform, predict_rows, TransformFit};
use distboost::tree::{leaf_line_search_location, leaf_line_search_logscale};
use distboost::{
    AsymmetricParams, Dataset, DistParams, ErrorModel, FitConfig, FittedModel, OutcomeInterval, SymmetricParams,
    TransformConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: usize, name: &str, pass: bool, detail: String) {
    let line = format!(
        "\nacceptance {n:>2} {}: {name} [{detail}]\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Ranks with ties averaged.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = 0.5 * (i + j) as f64;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Five-point central difference.
fn derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3 * (1.0 + x.abs());
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(numeric.abs()) + 1e-9
}

// Scenario-5 data: 5000 train, 2000 select, 2000 validate, plus a large
// diagnostic draw for Q-Q gates.
struct Scenario {
    train: Synthetic,
    test: Synthetic,
    valid: Synthetic,
    diag: Synthetic,
}

fn scenario(generator: Generator, seed: u64) -> Scenario {
    Scenario {
        train: generator.draw(5000, seed),
        test: generator.draw(2000, seed + 1),
        valid: generator.draw(2000, seed + 2),
        diag: generator.draw(10_000, seed + 3),
    }
}

fn symmetric_scenario() -> &'static (Scenario, FittedModel, f64) {
    static CELL: OnceLock<(Scenario, FittedModel, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = scenario(Generator::heteroscedastic(), 100);
        let start = Instant::now();
        let (m, _) = FittedModel::fit(
            &s.train.dataset().unwrap(),
            &s.test.dataset().unwrap(),
            &FitConfig::default(),
            ErrorModel::Symmetric,
            None,
            Some(100),
        )
        .unwrap();
        let secs = start.elapsed().as_secs_f64();
        (s, m, secs)
    })
}

fn cube_scenario() -> &'static (Scenario, Dataset, TransformFit) {
    static CELL: OnceLock<(Scenario, Dataset, TransformFit)> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = scenario(Generator::heteroscedastic(), 100);
        let cube = |y: f64| y * y * y;
        let train = s.train.mapped(cube).unwrap();
        let test = s.test.mapped(cube).unwrap();
        let fit = fit_with_transform(
            &train,
            &test,
            &FitConfig::default(),
            &TransformConfig::default(),
            ErrorModel::Symmetric,
        )
        .unwrap();
        (s, train, fit)
    })
}

#[test]
fn acceptance_01_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = Vec::new();
    for case in 0..1000 {
        let iv = random_interval(&mut rng, case % 4);
        let f: f64 = rng.gen_range(-3.0..3.0);
        let (l1, l2): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if case % 2 == 0 {
            let p = SymmetricParams::new(f, l1.exp()).unwrap();
            let at = |f: f64, ls: f64| nll(&iv, &SymmetricParams::new(f, ls.exp()).unwrap()).unwrap();
            let checks = [
                (grad_location(&iv, &p).unwrap(), -derivative(|x| at(x, l1), f)),
                (grad_logscale(&iv, &p).unwrap(), -derivative(|x| at(f, x), l1)),
            ];
            if checks.iter().any(|&(a, n)| !close(a, n)) {
                bad.push(format!("sym {iv:?} {checks:?}"));
            }
        } else {
            let p = AsymmetricParams::new(f, l1.exp(), l2.exp()).unwrap();
            let at = |f: f64, a: f64, b: f64| asym_nll(&iv, &AsymmetricParams::new(f, a.exp(), b.exp()).unwrap()).unwrap();
            let g = asym_gradient(&iv, &p).unwrap();
            let checks = [
                (g.location, -derivative(|x| at(x, l1, l2), f)),
                (g.log_lower, -derivative(|x| at(f, x, l2), l1)),
                (g.log_upper, -derivative(|x| at(f, l1, x), l2)),
            ];
            if checks.iter().any(|&(a, n)| !close(a, n)) {
                bad.push(format!("asym {iv:?} {checks:?}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "analytic gradients match finite differences",
        bad.is_empty() && secs < 10.0,
        format!("{} of 1000 cases off, {secs:.2}s; first: {:?}", bad.len(), bad.first()),
    );
}

#[test]
fn acceptance_02_convexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * k as f64 / 99.0;
    let (mut worst_f, mut worst_s) = (f64::INFINITY, f64::INFINITY);
    let mut worst_kind = [f64::INFINITY; 4];
    for case in 0..50 {
        let kind = case % 4;
        let iv = random_interval(&mut rng, kind);
        let at = |i: usize, j: usize| {
            nll(&iv, &SymmetricParams::new(grid(i, -6.0, 6.0), grid(j, -2.0, 2.0).exp()).unwrap()).unwrap()
        };
        let table: Vec<Vec<f64>> = (0..100).map(|i| (0..100).map(|j| at(i, j)).collect()).collect();
        for i in 1..99 {
            for j in 0..100 {
                worst_f = worst_f.min(table[i - 1][j] - 2.0 * table[i][j] + table[i + 1][j]);
            }
        }
        for i in 0..100 {
            for j in 1..99 {
                let d = table[i][j - 1] - 2.0 * table[i][j] + table[i][j + 1];
                worst_s = worst_s.min(d);
                worst_kind[kind] = worst_kind[kind].min(d);
            }
        }
    }
    report(
        2,
        "nll convex in location and in log scale",
        worst_f >= -1e-9 && worst_s >= -1e-9,
        format!(
            "min second difference: location {worst_f:.3e}, log scale {worst_s:.3e} \
             (uncensored {:.3e}, left {:.3e}, right {:.3e}, interval {:.3e})",
            worst_kind[0], worst_kind[1], worst_kind[2], worst_kind[3]
        ),
    );
}

#[test]
fn acceptance_03_turnbull_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut datasets = 0;
    while datasets < 200 {
        let n = rng.gen_range(2..=100);
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
        if !events.iter().any(|&e| e) {
            continue;
        }
        datasets += 1;
        let intervals: Vec<OutcomeInterval> = times
            .iter()
            .zip(&events)
            .map(|(&t, &e)| if e { OutcomeInterval::exact(t) } else { OutcomeInterval::new(t, f64::INFINITY) }.unwrap())
            .collect();
        let fit = turnbull_cdf(&intervals, None, 1e-13, TURNBULL_DEFAULT_MAX_ITER).unwrap();
        for (t, f) in kaplan_meier(&times, &events) {
            worst = worst.max((fit.cdf.eval(t) - f).abs());
        }
    }
    let mut ecdf_exact = true;
    for _ in 0..200 {
        let n = rng.gen_range(2..=100);
        let y: Vec<f64> = (0..n).map(|_| (rng.gen_range(0.0..5.0f64) * 4.0).round() / 4.0).collect();
        if y.iter().all(|v| *v == y[0]) {
            continue;
        }
        let intervals: Vec<OutcomeInterval> = y.iter().map(|&v| OutcomeInterval::exact(v).unwrap()).collect();
        let cdf = turnbull_cdf(&intervals, None, 1e-10, TURNBULL_DEFAULT_MAX_ITER).unwrap().cdf;
        for &v in &y {
            let count = y.iter().filter(|&&u| u <= v).count();
            ecdf_exact &= cdf.eval(v) == count as f64 / n as f64;
        }
    }
    report(
        3,
        "Turnbull equals Kaplan-Meier and the ECDF",
        worst < 1e-8 && ecdf_exact,
        format!("max |Turnbull - KM| {worst:.2e} over 200 datasets; ECDF exact: {ecdf_exact}"),
    );
}

#[test]
fn acceptance_04_line_search_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_loc, mut worst_scale) = (0.0f64, 0.0f64);
    for leaf in 0..500 {
        let n = rng.gen_range(1..20);
        let mut intervals: Vec<OutcomeInterval> = (0..n)
            .map(|_| {
                let kind = rng.gen_range(0..4);
                random_interval(&mut rng, kind)
            })
            .collect();
        intervals[0] = random_interval(&mut rng, 0);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
        let risk = |df: f64, dls: f64| -> f64 {
            (0..n)
                .map(|i| w[i] * nll(&intervals[i], &SymmetricParams::new(f[i] + df, s[i] * dls.exp()).unwrap()).unwrap())
                .sum()
        };
        if leaf % 2 == 0 {
            let got = leaf_line_search_location(&intervals, &w, &f, &s).unwrap();
            let scan = scan_minimum(|d| risk(d, 0.0), -30.0, 30.0, 1e-6);
            worst_loc = worst_loc.max((got - scan).abs());
        } else {
            let got = leaf_line_search_logscale(&intervals, &w, &f, &s, 2.0).unwrap();
            let scan = scan_minimum(|d| risk(0.0, d), -2.0, 2.0, 1e-6);
            worst_scale = worst_scale.max((got - scan).abs());
        }
    }
    report(
        4,
        "leaf line searches match grid scans",
        worst_loc < 1e-5 && worst_scale < 1e-5,
        format!("max deviation: location {worst_loc:.2e}, log scale {worst_scale:.2e} over 500 leaves"),
    );
}

#[test]
fn acceptance_05_symmetric_recovery() {
    let (s, model, secs) = symmetric_scenario();
    let params = model.predict_dataset(&s.valid.dataset().unwrap()).unwrap();
    let f_hat: Vec<f64> = params.iter().map(DistParams::location).collect();
    let s_hat: Vec<f64> = params.iter().map(DistParams::scale_statistic).collect();
    let r_f = pearson(&f_hat, &s.valid.location);
    let r_s = spearman(&s_hat, &s.valid.scale);
    let outer = model.ensembles.diagnostics().outer_iterations;
    report(
        5,
        "symmetric location/scale recovery",
        r_f > 0.9 && r_s > 0.8 && outer <= 7 && *secs < 120.0,
        format!("corr(f) {r_f:.4}, rank corr(s) {r_s:.4}, outer iterations {outer}, fit {secs:.1}s"),
    );
}

#[test]
fn acceptance_06_censored_recovery() {
    let s = scenario(Generator::heteroscedastic(), 200);
    let mut sorted = s.train.outcome.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[(0.7 * sorted.len() as f64) as usize];
    let train = s.train.right_censored(threshold).unwrap();
    let test = s.test.right_censored(threshold).unwrap();
    let valid = s.valid.right_censored(threshold).unwrap();
    let censored = train.rows().iter().filter(|r| r.interval.is_right_censored()).count() as f64 / train.len() as f64;
    let (model, _) = FittedModel::fit(&train, &test, &FitConfig::default(), ErrorModel::Symmetric, None, Some(200)).unwrap();
    let f_hat: Vec<f64> = model.predict_dataset(&valid).unwrap().iter().map(DistParams::location).collect();
    let r = pearson(&f_hat, &s.valid.location);
    let mask: Vec<usize> = (0..valid.len()).filter(|&i| valid.rows()[i].interval.is_right_censored()).collect();
    let r_cens = pearson(
        &mask.iter().map(|&i| f_hat[i]).collect::<Vec<_>>(),
        &mask.iter().map(|&i| s.valid.location[i]).collect::<Vec<_>>(),
    );
    report(
        6,
        "location recovery under right censoring",
        r > 0.85,
        format!("corr(f) {r:.4} on all validation rows, {r_cens:.4} on censored rows; train censored share {censored:.3}"),
    );
}

#[test]
fn acceptance_07_transformation_recovery() {
    let (s, _, fit) = cube_scenario();
    let g = &fit.transform;
    let inverse: Vec<f64> = g.ys().iter().map(|y| y.cbrt()).collect();
    let rho = spearman(g.gs(), &inverse);

    let diag = s.diag.mapped(|y| y * y * y).unwrap();
    let params = predict_rows(&fit.model, &diag);
    let residuals = standardized_residuals(&params, &diag.intervals(), Some(g)).unwrap();
    let levels = default_levels();
    let rq = ReferenceQuantiles::new(Reference::Logistic, &levels, 0.5).unwrap();
    let gap = residual_qq(&residuals, &rq, DEFAULT_MIN_COUNT).unwrap().max_gap(0.05, 0.95);
    report(
        7,
        "optimal transformation recovers the cube",
        fit.converged && fit.iterations <= 7 && rho == 1.0 && gap < 0.15,
        format!(
            "converged {} after {} iterations (changes {:?}), spearman {rho}, residual Q-Q gap {gap:.3}",
            fit.converged,
            fit.iterations,
            fit.trace.changes.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn acceptance_08_asymmetric_recovery() {
    let s = scenario(Generator::asymmetric(2.0, 1.0), 300);
    let (model, _) = FittedModel::fit(
        &s.train.dataset().unwrap(),
        &s.test.dataset().unwrap(),
        &FitConfig::default(),
        ErrorModel::Asymmetric,
        None,
        Some(300),
    )
    .unwrap();
    let valid = model.predict_dataset(&s.valid.dataset().unwrap()).unwrap();
    let ratios: Vec<f64> = valid
        .iter()
        .map(|p| match p {
            DistParams::Asymmetric(a) => a.lower_scale() / a.upper_scale(),
            DistParams::Symmetric(_) => 1.0,
        })
        .collect();
    let ratio = median(&ratios);

    let diag = s.diag.dataset().unwrap();
    let params = model.predict_dataset(&diag).unwrap();
    let residuals = standardized_residuals(&params, &diag.intervals(), None).unwrap();
    let rq = ReferenceQuantiles::new(Reference::Logistic, &default_levels(), mean_lower_mass(&params)).unwrap();
    let gap = residual_qq(&residuals, &rq, DEFAULT_MIN_COUNT).unwrap().max_gap(0.05, 0.95);
    let diagnostics = model.ensembles.diagnostics();
    let (outer, converged) = (diagnostics.outer_iterations, diagnostics.converged);
    report(
        8,
        "asymmetric scale recovery",
        (1.6..=2.5).contains(&ratio) && gap < 0.15 && converged && outer <= 10,
        format!("median s_l/s_u {ratio:.3}, residual Q-Q gap {gap:.3}, outer loop converged {converged} after {outer} iterations"),
    );
}

#[test]
fn acceptance_09_fixed_point() {
    let (_, train, fit) = cube_scenario();
    let threshold = FitConfig::default().outer_threshold;
    let gap = fit.fixed_point_gap(train).unwrap();
    report(
        9,
        "one more refresh after convergence barely moves the knots",
        fit.converged && gap < 2.0 * threshold,
        format!("converged {}, refresh change {gap:.4} (limit {})", fit.converged, 2.0 * threshold),
    );
}

/// Seven groups with the layout of an age questionnaire: open lower and upper
/// groups, interior bounds at fixed outcome values.
const GROUP_BOUNDS: [f64; 8] = [f64::NEG_INFINITY, -3.0, -1.5, -0.5, 0.5, 1.5, 3.0, f64::INFINITY];

fn group_csv(path: &Path, d: &Synthetic) {
    let mut text = String::from("x1,x2,x3,x4,x5,group\n");
    for (x, y) in d.predictors.iter().zip(&d.outcome) {
        let k = GROUP_BOUNDS.partition_point(|&b| b < *y).max(1);
        text += &format!("{},{},{},{},{},{k}\n", x[0], x[1], x[2], x[3], x[4]);
    }
    std::fs::write(path, text).unwrap();
}

fn run_cli(args: &[String]) -> i32 {
    let mut all = vec!["distboost".to_string()];
    all.extend(args.iter().cloned());
    distboost_cli::main_with_args(all)
}

#[test]
fn acceptance_10_ordinal_pipeline() {
    let s = scenario(Generator::heteroscedastic(), 400);
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    group_csv(Path::new(&p("train.csv")), &s.train);
    group_csv(Path::new(&p("test.csv")), &s.test);
    group_csv(Path::new(&p("valid.csv")), &s.valid);
    let bounds = "-inf,-3,-1.5,-0.5,0.5,1.5,3,inf".to_string();
    let mut fit = vec!["fit".into(), "--train".into(), p("train.csv"), "--test".into(), p("test.csv")];
    fit.extend(["--model".into(), p("model.json"), "--ordinal-bounds".into(), bounds.clone()]);
    for c in ["x1", "x2", "x3", "x4", "x5"] {
        fit.extend(["--column".into(), format!("{c}=predictor_numeric")]);
    }
    fit.extend(["--column".into(), "group=ordinal_group".into()]);
    let fit_code = run_cli(&fit);
    let predict = vec![
        "predict".to_string(),
        "--model".into(),
        p("model.json"),
        "--data".into(),
        p("valid.csv"),
        "--out".into(),
        p("pred.csv"),
        "--group-bounds".into(),
        bounds,
    ];
    let predict_code = run_cli(&predict);
    assert_eq!((fit_code, predict_code), (0, 0));

    let mut reader = csv::Reader::from_path(p("pred.csv")).unwrap();
    let mut mean = [0.0; 7];
    let mut worst_sum = 0.0f64;
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let probs: Vec<f64> = (1..8).map(|k| rec[k].parse().unwrap()).collect();
        worst_sum = worst_sum.max((probs.iter().sum::<f64>() - 1.0).abs());
        for (m, p) in mean.iter_mut().zip(&probs) {
            *m += p;
        }
        rows += 1;
    }
    let mut empirical = [0.0; 7];
    for y in &s.valid.outcome {
        empirical[GROUP_BOUNDS.partition_point(|&b| b < *y).max(1) - 1] += 1.0;
    }
    let worst_freq = (0..7)
        .map(|k| (mean[k] / rows as f64 - empirical[k] / rows as f64).abs())
        .fold(0.0, f64::max);
    report(
        10,
        "ordinal fit and group probabilities",
        rows == 2000 && worst_sum <= 1e-10 && worst_freq <= 0.03,
        format!("max |sum - 1| {worst_sum:.1e}, max |mean prob - frequency| {worst_freq:.4}"),
    );
}

#[test]
fn acceptance_11_diagnostics_structure() {
    let (s, model, _) = symmetric_scenario();
    let valid = s.valid.dataset().unwrap();
    let params = model.predict_dataset(&valid).unwrap();
    let subsets = partition_by_location_scale(&params, 3).unwrap();
    let mut all: Vec<usize> = subsets.iter().flat_map(|x| x.rows.clone()).collect();
    all.sort_unstable();
    let partition_ok = subsets.len() == 9 && all == (0..valid.len()).collect::<Vec<_>>();

    // Minimum-count exclusion against a direct tail count, on subsets small
    // enough for the outer levels to fall below the threshold.
    let levels = default_levels();
    let mut exclusion_ok = true;
    let intervals = valid.intervals();
    for n in [25usize, 40, 60, 223] {
        let p = &params[..n];
        let iv = &intervals[..n];
        let series = marginal_qq(p, iv, None, &levels, DEFAULT_MIN_COUNT).unwrap();
        let expected: Vec<f64> = levels
            .iter()
            .copied()
            .filter(|&l| {
                let k = ((l * n as f64).ceil() as usize).clamp(1, n);
                k.min(n - k + 1) >= DEFAULT_MIN_COUNT
            })
            .collect();
        let kept: Vec<f64> = series.points.iter().map(|q| q.level).collect();
        exclusion_ok &= kept == expected && series.points.iter().all(|q| q.count >= DEFAULT_MIN_COUNT);
    }

    // Null data: residual Q-Q against a band calibrated for the same size.
    let n_valid = 500;
    let band = QQBand::calibrate(Reference::Logistic, n_valid, &levels, 2000, 0.99, 11).unwrap();
    let rq = ReferenceQuantiles::new(Reference::Logistic, &levels, 0.5).unwrap();
    let null = Generator::null();
    let runs = 100;
    let mut inside = 0;
    for run in 0..runs {
        let seed = 1000 + 10 * run as u64;
        let (m, _) = FittedModel::fit(
            &null.draw(1000, seed).dataset().unwrap(),
            &null.draw(500, seed + 1).dataset().unwrap(),
            &FitConfig::default(),
            ErrorModel::Symmetric,
            None,
            None,
        )
        .unwrap();
        let v = null.draw(n_valid, seed + 2).dataset().unwrap();
        let res = standardized_residuals(&m.predict_dataset(&v).unwrap(), &v.intervals(), None).unwrap();
        if band.contains(&residual_qq(&res, &rq, DEFAULT_MIN_COUNT).unwrap()) {
            inside += 1;
        }
    }
    let share = inside as f64 / runs as f64;
    report(
        11,
        "diagnostic partition, count threshold and null band",
        partition_ok && exclusion_ok && share >= 0.95,
        format!("9 disjoint covering subsets: {partition_ok}; exclusions match tail counts: {exclusion_ok}; null runs inside 99% band: {share:.2}"),
    );
}

#[test]
fn acceptance_12_determinism() {
    let g = Generator::heteroscedastic();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let csv = |d: &Synthetic| {
        let mut t = String::from("x1,x2,x3,x4,x5,y\n");
        for (x, y) in d.predictors.iter().zip(&d.outcome) {
            t += &format!("{},{},{},{},{},{y}\n", x[0], x[1], x[2], x[3], x[4]);
        }
        t
    };
    std::fs::write(p("all.csv"), csv(&g.draw(3000, 12))).unwrap();
    std::fs::write(
        p("run.toml"),
        "error_model = \"asymmetric\"\ntransform = \"optimal\"\nseed = 12\n\
         [transform_options]\nmax_iterations = 2\n[split]\ntrain = 0.6\ntest = 0.3\n\
         [columns]\nx1 = \"predictor_numeric\"\nx2 = \"predictor_numeric\"\nx3 = \"predictor_numeric\"\n\
         x4 = \"predictor_numeric\"\nx5 = \"predictor_numeric\"\ny = \"outcome_value\"\n",
    )
    .unwrap();
    let fit = |model: &str| {
        run_cli(&[
            "fit".into(),
            "--config".into(),
            p("run.toml"),
            "--data".into(),
            p("all.csv"),
            "--model".into(),
            p(model),
        ])
    };
    let codes = (fit("a.json"), fit("b.json"));
    let same = |a: &str, b: &str| std::fs::read(p(a)).unwrap() == std::fs::read(p(b)).unwrap();
    let identical = codes == (0, 0)
        && same("a.json", "b.json")
        && same("a.json.report.json", "b.json.report.json")
        && same("a.json.trace.csv", "b.json.trace.csv");
    report(
        12,
        "repeated fits give byte-identical files",
        identical,
        format!("exit codes {codes:?}, model/report/trace identical: {identical}"),
    );
}
