//! Command implementations. Each writes its outputs atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use distboost::boost::FitDiagnostics;
use distboost::diag::{
    default_levels, export_rows, marginal_qq, mean_lower_mass, partition_by_location_scale, residual_qq,
    standardized_residuals, QQSeries, Reference, ReferenceQuantiles, DEFAULT_MIN_COUNT,
};
use distboost::predict::point_predict;
use distboost::transform::{transform_dataset, TransformTrace};
use distboost::{Dataset, DistParams, ErrorModel, FittedModel, LossSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{parse_reals, DataArgs, FitArgs, Reals, RunConfig, SplitFractions};
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest_predictors, ingest_table, read_table, real, Table};

#[derive(Debug, Parser)]
#[command(name = "distboost", version, about = "Boosted distributional regression for censored outcomes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write it with a fit report.
    Fit(FitCmd),
    /// Predict distribution summaries for each row of a dataset.
    Predict(PredictCmd),
    /// Export Q-Q diagnostics over location/scale subsets.
    Diagnose(DiagnoseCmd),
    /// Split one file into train/test/validation files.
    Split(SplitCmd),
    /// Extract the transformation knots per iteration from a fit report.
    TransformTrace(TraceCmd),
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(c) => cmd_fit(&c),
        Command::Predict(c) => cmd_predict(&c),
        Command::Diagnose(c) => cmd_diagnose(&c),
        Command::Split(c) => cmd_split(&c),
        Command::TransformTrace(c) => cmd_transform_trace(&c),
    }
}

/// Write via a temporary file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CliError::data(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn csv_bytes(delimiter: u8, header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::data(e.to_string()))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn parse_fractions(s: &str) -> Result<SplitFractions, String> {
    let v = parse_reals(s)?.0;
    match v.as_slice() {
        [train, test] => Ok(SplitFractions { train: *train, test: *test, validation: 0.0 }),
        [train, test, validation] => Ok(SplitFractions {
            train: *train,
            test: *test,
            validation: *validation,
        }),
        _ => Err("expected TRAIN,TEST[,VALIDATION]".into()),
    }
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

/// Row indices of the train, test and validation sets, each in file order.
pub fn split_indices(n: usize, fractions: &SplitFractions, seed: u64) -> [Vec<usize>; 3] {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let count = |f: f64| ((f * n as f64).floor() as usize).min(n);
    let (a, b, c) = (count(fractions.train), count(fractions.test), count(fractions.validation));
    let (b, c) = (b.min(n - a), c.min(n - a - b.min(n - a)));
    let mut sets = [
        order[..a].to_vec(),
        order[a..a + b].to_vec(),
        order[a + b..a + b + c].to_vec(),
    ];
    for s in &mut sets {
        s.sort_unstable();
    }
    sets
}

fn sub_table(table: &Table, rows: &[usize]) -> Table {
    Table {
        header: table.header.clone(),
        records: rows.iter().map(|&i| table.records[i].clone()).collect(),
    }
}

#[derive(Debug, Args)]
pub struct SplitCmd {
    #[arg(long)]
    pub data: PathBuf,
    /// TRAIN,TEST[,VALIDATION] fractions summing to at most 1.
    #[arg(long, value_parser = parse_fractions)]
    pub fractions: SplitFractions,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "comma")]
    pub delimiter: crate::config::Delimiter,
    /// Directory receiving train.csv, test.csv and validation.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn cmd_split(c: &SplitCmd) -> CliResult<()> {
    c.fractions.validate()?;
    let d = c.delimiter.byte();
    let table = read_table(&c.data, d)?;
    let sets = split_indices(table.records.len(), &c.fractions, c.seed);
    std::fs::create_dir_all(&c.out_dir)?;
    for (name, rows) in ["train.csv", "test.csv", "validation.csv"].iter().zip(&sets) {
        let part = sub_table(&table, rows);
        let rows: Vec<Vec<String>> = part.records.iter().map(|r| r.iter().map(str::to_string).collect()).collect();
        write_atomic(&c.out_dir.join(name), &csv_bytes(d, &part.header, &rows)?)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub iterations: usize,
    pub converged: bool,
    pub trace: TransformTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub error_model: ErrorModel,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Mean NLL of the transformed outcomes under the fitted model.
    pub train_mean_nll: f64,
    pub test_mean_nll: f64,
    pub fit: FitDiagnostics,
    pub transform: Option<TransformReport>,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    #[command(flatten)]
    pub data_args: DataArgs,
    #[command(flatten)]
    pub fit_args: FitArgs,
    /// Training set.
    #[arg(long, requires = "test", conflicts_with = "data")]
    pub train: Option<PathBuf>,
    /// Selection set for the number of trees.
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Single file to split by `--split` (or the config's split fractions).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TRAIN,TEST[,VALIDATION] fractions used with --data.
    #[arg(long, value_parser = parse_fractions)]
    pub split: Option<SplitFractions>,
    #[arg(long)]
    pub model: PathBuf,
    /// Fit report (JSON); defaults to the model path with a .report.json suffix.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Transformation trace (CSV) when fitting a transformation; defaults to
    /// the model path with a .trace.csv suffix.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn mean_nll(model: &FittedModel, data: &Dataset) -> CliResult<f64> {
    let data = match &model.transform {
        Some(t) => transform_dataset(t, data)?,
        None => data.clone(),
    };
    let params = model.predict_dataset(&data)?;
    let mut total = 0.0;
    for (i, (p, row)) in params.iter().zip(data.rows()).enumerate() {
        total += p.nll(&row.interval).map_err(|e| CliError::from(e.with_row(i + 1)))?;
    }
    Ok(total / data.len() as f64)
}

fn load_train_test(c: &FitCmd, cfg: &RunConfig) -> CliResult<(Dataset, Dataset)> {
    let schema = cfg.ingest_schema();
    let (train_t, test_t) = match (&c.train, &c.test, &c.data) {
        (Some(a), Some(b), None) => (read_table(a, schema.delimiter)?, read_table(b, schema.delimiter)?),
        (None, None, Some(path)) => {
            let fractions = c
                .split
                .or(cfg.split)
                .ok_or_else(|| CliError::usage("--data needs --split fractions or a [split] config section"))?;
            fractions.validate()?;
            let table = read_table(path, schema.delimiter)?;
            let [tr, te, _] = split_indices(table.records.len(), &fractions, cfg.seed);
            (sub_table(&table, &tr), sub_table(&table, &te))
        }
        _ => return Err(CliError::usage("give either --train and --test, or --data")),
    };
    let train = ingest_table(&train_t, &schema, None)?;
    let test = ingest_table(&test_t, &schema, Some(train.schema()))?;
    Ok((train, test))
}

pub fn cmd_fit(c: &FitCmd) -> CliResult<()> {
    let mut cfg = c.data_args.resolve()?;
    c.fit_args.apply(&mut cfg);
    cfg.fit.validate()?;
    let (train, test) = load_train_test(c, &cfg)?;
    let tcfg = cfg.transform_config();
    let (model, trace) = FittedModel::fit(&train, &test, &cfg.fit, cfg.error_model, tcfg.as_ref(), Some(cfg.seed))?;

    let report = FitReport {
        error_model: cfg.error_model,
        seed: cfg.seed,
        train_rows: train.len(),
        test_rows: test.len(),
        train_mean_nll: mean_nll(&model, &train)?,
        test_mean_nll: mean_nll(&model, &test)?,
        fit: model.ensembles.diagnostics().clone(),
        transform: trace.as_ref().map(|t| TransformReport {
            iterations: model.training.transform_iterations.unwrap_or(0),
            converged: model.training.transform_converged.unwrap_or(false),
            trace: t.clone(),
        }),
    };
    write_atomic(&c.model, model.to_json()?.as_bytes())?;
    let mut report_json = serde_json::to_string_pretty(&report).map_err(|e| CliError::data(e.to_string()))?;
    report_json.push('\n');
    let report_path = c.report.clone().unwrap_or_else(|| with_suffix(&c.model, ".report.json"));
    write_atomic(&report_path, report_json.as_bytes())?;
    if let Some(t) = &trace {
        let path = c.trace.clone().unwrap_or_else(|| with_suffix(&c.model, ".trace.csv"));
        write_atomic(&path, &trace_csv(t, cfg.delimiter.byte())?)?;
    }
    Ok(())
}

fn load_model(path: &Path) -> CliResult<FittedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(FittedModel::from_json(&text)?)
}

// ---------------------------------------------------------------------------
// transform-trace
// ---------------------------------------------------------------------------

fn trace_csv(trace: &TransformTrace, delimiter: u8) -> CliResult<Vec<u8>> {
    let rows: Vec<Vec<String>> = trace
        .rows()
        .into_iter()
        .map(|(k, y, g)| vec![k.to_string(), real(y), real(g)])
        .collect();
    csv_bytes(delimiter, &strings(&["iteration", "knot_y", "knot_g"]), &rows)
}

#[derive(Debug, Args)]
pub struct TraceCmd {
    /// Fit report written by `fit`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_transform_trace(c: &TraceCmd) -> CliResult<()> {
    let text = std::fs::read_to_string(&c.report).map_err(|e| CliError::data(format!("{}: {e}", c.report.display())))?;
    let report: FitReport = serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", c.report.display())))?;
    let t = report
        .transform
        .ok_or_else(|| CliError::data("the report has no transformation trace"))?;
    write_atomic(&c.out, &trace_csv(&t.trace, b',')?)
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

fn parse_loss(s: &str) -> Result<LossSpec, String> {
    match s {
        "squared" => Ok(LossSpec::Squared),
        "absolute" => Ok(LossSpec::Absolute),
        _ => match s.strip_prefix("pinball:") {
            Some(p) => p
                .parse::<f64>()
                .map(|p| LossSpec::Pinball { p })
                .map_err(|_| format!("bad pinball level '{p}'")),
            None => Err(format!("unknown loss '{s}' (squared, absolute, pinball:P)")),
        },
    }
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[command(flatten)]
    pub data_args: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output table, one row per input row.
    #[arg(long)]
    pub out: PathBuf,
    /// Append the predicted distribution parameters.
    #[arg(long)]
    pub params: bool,
    /// Comma-separated probability levels for quantile columns.
    #[arg(long, value_parser = parse_reals)]
    pub quantiles: Option<Reals>,
    /// Comma-separated group boundaries for group probability columns.
    #[arg(long, value_parser = parse_reals, allow_hyphen_values = true)]
    pub group_bounds: Option<Reals>,
    /// Point prediction loss: squared, absolute or pinball:P.
    #[arg(long, value_parser = parse_loss, conflicts_with = "loss_file")]
    pub point: Option<LossSpec>,
    /// JSON loss specification (for tabulated custom losses).
    #[arg(long)]
    pub loss_file: Option<PathBuf>,
    /// Comma-separated outcome values for a (row, y, cdf, pdf) grid.
    #[arg(long, value_parser = parse_reals, allow_hyphen_values = true, requires = "cdf_out")]
    pub cdf_grid: Option<Reals>,
    #[arg(long)]
    pub cdf_out: Option<PathBuf>,
}

fn param_header(model: &FittedModel) -> Vec<String> {
    match model.error_model {
        ErrorModel::Symmetric => strings(&["location", "scale"]),
        ErrorModel::Asymmetric => strings(&["mode", "lower_scale", "upper_scale"]),
    }
}

fn param_values(p: &DistParams) -> Vec<String> {
    match p {
        DistParams::Symmetric(s) => vec![real(s.location()), real(s.scale())],
        DistParams::Asymmetric(a) => vec![real(a.mode()), real(a.lower_scale()), real(a.upper_scale())],
    }
}

pub fn cmd_predict(c: &PredictCmd) -> CliResult<()> {
    let cfg = c.data_args.resolve()?;
    let model = load_model(&c.model)?;
    let schema = cfg.ingest_schema();
    let table = read_table(&c.data, schema.delimiter)?;
    let predictors = ingest_predictors(&table, &schema, &model.schema)?;

    let loss = match (&c.point, &c.loss_file) {
        (Some(l), _) => Some(l.clone()),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str::<LossSpec>(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?)
        }
        _ => None,
    };
    if let Some(l) = &loss {
        l.validate()?;
    }
    if let Some(Reals(qs)) = &c.quantiles {
        if let Some(p) = qs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(CliError::usage(format!("quantile level {p} is outside (0, 1)")));
        }
    }

    let mut header = strings(&["row"]);
    if c.params {
        header.extend(param_header(&model));
    }
    if let Some(Reals(qs)) = &c.quantiles {
        header.extend(qs.iter().map(|p| format!("q_{}", real(*p))));
    }
    if let Some(Reals(b)) = &c.group_bounds {
        header.extend((1..b.len()).map(|k| format!("p_group_{k}")));
    }
    if loss.is_some() {
        header.push("point".into());
    }

    let mut rows = Vec::with_capacity(predictors.len());
    let mut grid_rows = Vec::new();
    for (i, x) in predictors.iter().enumerate() {
        let dist = model.distribution(x)?;
        let mut rec = vec![(i + 1).to_string()];
        if c.params {
            rec.extend(param_values(&dist.params));
        }
        if let Some(Reals(qs)) = &c.quantiles {
            rec.extend(qs.iter().map(|&p| real(dist.quantile_original(p))));
        }
        if let Some(Reals(b)) = &c.group_bounds {
            rec.extend(dist.ordinal_probs(b)?.into_iter().map(real));
        }
        if let Some(l) = &loss {
            rec.push(real(point_predict(&dist, l)?));
        }
        if let Some(Reals(ys)) = &c.cdf_grid {
            for (y, cdf, pdf) in dist.cdf_pdf_grid(ys) {
                grid_rows.push(vec![(i + 1).to_string(), real(y), real(cdf), real(pdf)]);
            }
        }
        rows.push(rec);
    }
    write_atomic(&c.out, &csv_bytes(schema.delimiter, &header, &rows)?)?;
    if let (Some(_), Some(path)) = (&c.cdf_grid, &c.cdf_out) {
        let h = strings(&["row", "y", "cdf", "pdf"]);
        write_atomic(path, &csv_bytes(schema.delimiter, &h, &grid_rows)?)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DiagnoseCmd {
    #[command(flatten)]
    pub data_args: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Validation set.
    #[arg(long)]
    pub data: PathBuf,
    /// Quantile cuts per axis; the data is split into cuts^2 subsets.
    #[arg(long, default_value_t = 3)]
    pub cuts: usize,
    /// Residual reference families (logistic, normal, laplace, slash); all by default.
    #[arg(long = "reference")]
    pub references: Vec<Reference>,
    /// Q-Q points supported by fewer observations are dropped.
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

const QQ_HEADER: [&str; 9] = [
    "subset_id",
    "location_lo",
    "location_hi",
    "scale_lo",
    "scale_hi",
    "level",
    "predicted_q",
    "empirical_q",
    "count",
];

pub fn cmd_diagnose(c: &DiagnoseCmd) -> CliResult<()> {
    let cfg = c.data_args.resolve()?;
    let model = load_model(&c.model)?;
    let schema = cfg.ingest_schema();
    let table = read_table(&c.data, schema.delimiter)?;
    if table.records.is_empty() {
        return Err(distboost::Error::EmptyValidation.into());
    }
    let data = ingest_table(&table, &schema, Some(&model.schema))?;
    let params = model.predict_dataset(&data)?;
    let intervals = data.intervals();
    let subsets = partition_by_location_scale(&params, c.cuts)?;
    let references: Vec<Reference> = if c.references.is_empty() {
        Reference::ALL.to_vec()
    } else {
        c.references.clone()
    };
    let uncensored = data.is_uncensored();
    let levels = default_levels();
    let d = schema.delimiter;
    std::fs::create_dir_all(&c.out_dir)?;

    let mut subset_rows = Vec::new();
    let mut omitted_rows = Vec::new();
    let qq_header = strings(&QQ_HEADER);
    for (k, subset) in subsets.iter().enumerate() {
        let id = k + 1;
        let rule = subset.rule;
        subset_rows.push(vec![
            id.to_string(),
            real(rule.location.0),
            real(rule.location.1),
            real(rule.scale.0),
            real(rule.scale.1),
            subset.rows.len().to_string(),
        ]);
        let p: Vec<DistParams> = subset.rows.iter().map(|&i| params[i]).collect();
        let iv: Vec<_> = subset.rows.iter().map(|&i| intervals[i]).collect();

        let mut series: Vec<(String, CliResult<QQSeries>)> = vec![(
            "marginal".into(),
            marginal_qq(&p, &iv, model.transform.as_ref(), &levels, c.min_count).map_err(Into::into),
        )];
        if uncensored {
            let residuals = standardized_residuals(&p, &iv, model.transform.as_ref());
            for r in &references {
                let s = residuals.clone().map_err(CliError::from).and_then(|res| {
                    if res.len() < c.min_count.max(1) {
                        return Err(distboost::Error::SubsetTooSmall { size: res.len(), min: c.min_count }.into());
                    }
                    let rq = ReferenceQuantiles::new(*r, &levels, mean_lower_mass(&p))?;
                    Ok(residual_qq(&res, &rq, c.min_count)?)
                });
                series.push((r.name().to_string(), s));
            }
        }
        for (name, s) in series {
            let rows: Vec<Vec<String>> = match s {
                Ok(s) => {
                    for o in &s.omitted {
                        omitted_rows.push(vec![id.to_string(), name.clone(), real(o.level), o.reason.clone()]);
                    }
                    export_rows(id, &rule, &s)
                        .into_iter()
                        .map(|r| {
                            vec![
                                r.subset_id.to_string(),
                                real(r.location_range.0),
                                real(r.location_range.1),
                                real(r.scale_range.0),
                                real(r.scale_range.1),
                                real(r.level),
                                real(r.predicted_q),
                                real(r.empirical_q),
                                r.count.to_string(),
                            ]
                        })
                        .collect()
                }
                Err(CliError::Data(msg)) if subset.rows.len() < c.min_count.max(1) => {
                    omitted_rows.push(vec![id.to_string(), name.clone(), String::new(), msg]);
                    Vec::new()
                }
                Err(e) => return Err(e),
            };
            let path = c.out_dir.join(format!("subset_{id}_{name}.csv"));
            write_atomic(&path, &csv_bytes(d, &qq_header, &rows)?)?;
        }
    }
    let h = strings(&["subset_id", "location_lo", "location_hi", "scale_lo", "scale_hi", "rows"]);
    write_atomic(&c.out_dir.join("subsets.csv"), &csv_bytes(d, &h, &subset_rows)?)?;
    let h = strings(&["subset_id", "series", "level", "reason"]);
    write_atomic(&c.out_dir.join("omitted.csv"), &csv_bytes(d, &h, &omitted_rows)?)?;
    Ok(())
}
