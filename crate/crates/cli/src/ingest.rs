//! Delimited-text datasets with a column-role schema.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use distboost::censor::{group_interval, ties_to_intervals, BoundsPolicy, FeatureKind};
use distboost::{CensoredObservation, Dataset, FeatureSpec, OutcomeInterval, Schema};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    OutcomeValue,
    OutcomeLower,
    OutcomeUpper,
    OrdinalGroup,
    PredictorNumeric,
    PredictorCategorical,
    Weight,
    Ignore,
}

impl FromStr for Role {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "outcome_value" => Role::OutcomeValue,
            "outcome_lower" => Role::OutcomeLower,
            "outcome_upper" => Role::OutcomeUpper,
            "ordinal_group" => Role::OrdinalGroup,
            "predictor_numeric" => Role::PredictorNumeric,
            "predictor_categorical" => Role::PredictorCategorical,
            "weight" => Role::Weight,
            "ignore" => Role::Ignore,
            other => return Err(CliError::usage(format!("unknown column role '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSchema {
    pub roles: BTreeMap<String, Role>,
    /// Field text meaning "unbounded" on outcome bound columns.
    pub missing_token: String,
    /// Group boundaries for `ordinal_group` columns; groups are numbered from 1.
    pub ordinal_bounds: Option<Vec<f64>>,
    pub delimiter: u8,
}

impl Default for IngestSchema {
    fn default() -> Self {
        Self {
            roles: BTreeMap::new(),
            missing_token: String::new(),
            ordinal_bounds: None,
            delimiter: b',',
        }
    }
}

enum Outcome {
    Value(usize),
    Bounds(usize, usize),
    Ordinal(usize),
}

/// Column positions resolved against a header.
struct Layout {
    outcome: Option<Outcome>,
    predictors: Vec<(usize, FeatureSpec)>,
    weight: Option<usize>,
}

fn position(header: &[String], name: &str) -> CliResult<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::data(format!("column '{name}' is not in the header")))
}

fn layout(header: &[String], schema: &IngestSchema, fixed: Option<&Schema>, need_outcome: bool) -> CliResult<Layout> {
    let mut seen = BTreeSet::new();
    for h in header {
        if !seen.insert(h) {
            return Err(CliError::data(format!("duplicate column '{h}'")));
        }
    }
    let fixed_names: BTreeSet<&str> = fixed
        .map(|s| s.features.iter().map(|f| f.name.as_str()).collect())
        .unwrap_or_default();
    if fixed.is_none() {
        for name in schema.roles.keys() {
            position(header, name)?;
        }
        if let Some(h) = header.iter().find(|h| !schema.roles.contains_key(*h)) {
            return Err(CliError::usage(format!("column '{h}' has no role")));
        }
    }
    let with_role = |role: Role| -> Vec<usize> {
        header
            .iter()
            .enumerate()
            .filter(|(_, h)| !fixed_names.contains(h.as_str()) && schema.roles.get(*h) == Some(&role))
            .map(|(i, _)| i)
            .collect()
    };
    let (value, lower, upper, ordinal) = (
        with_role(Role::OutcomeValue),
        with_role(Role::OutcomeLower),
        with_role(Role::OutcomeUpper),
        with_role(Role::OrdinalGroup),
    );
    let outcome = match (value.as_slice(), lower.as_slice(), upper.as_slice(), ordinal.as_slice()) {
        ([v], [], [], []) => Some(Outcome::Value(*v)),
        ([], [l], [u], []) => Some(Outcome::Bounds(*l, *u)),
        ([], [], [], [o]) => Some(Outcome::Ordinal(*o)),
        ([], [], [], []) if !need_outcome => None,
        _ => {
            return Err(CliError::usage(
                "exactly one outcome encoding is required: outcome_value, an outcome_lower/outcome_upper pair, or ordinal_group",
            ))
        }
    };
    let weights = with_role(Role::Weight);
    if weights.len() > 1 {
        return Err(CliError::usage("at most one weight column"));
    }

    let predictors = match fixed {
        Some(s) => s
            .features
            .iter()
            .map(|f| Ok((position(header, &f.name)?, f.clone())))
            .collect::<CliResult<Vec<_>>>()?,
        None => header
            .iter()
            .enumerate()
            .filter_map(|(i, h)| match schema.roles[h] {
                Role::PredictorNumeric => Some((i, FeatureSpec::numeric(h.clone()))),
                Role::PredictorCategorical => Some((i, FeatureSpec::categorical(h.clone(), Vec::new()))),
                _ => None,
            })
            .collect(),
    };
    if predictors.is_empty() {
        return Err(CliError::usage("at least one predictor column is required"));
    }
    Ok(Layout {
        outcome,
        predictors,
        weight: weights.first().copied(),
    })
}

fn at(row: usize, col: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::data(format!("row {row}, column '{col}': {msg}"))
}

fn parse_real(field: &str, row: usize, col: &str) -> CliResult<f64> {
    let v: f64 = field.trim().parse().map_err(|_| at(row, col, format!("cannot parse '{field}' as a number")))?;
    if v.is_nan() {
        return Err(at(row, col, "NaN is not allowed"));
    }
    Ok(v)
}

fn parse_bound(field: &str, missing: &str, unbounded: f64, row: usize, col: &str) -> CliResult<f64> {
    if field.trim() == missing {
        Ok(unbounded)
    } else {
        parse_real(field, row, col)
    }
}

/// Parsed delimited file: header and raw records.
pub struct Table {
    pub header: Vec<String>,
    pub records: Vec<csv::StringRecord>,
}

pub fn read_table(path: &Path, delimiter: u8) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(Table { header, records })
}

/// Read a dataset. With `fixed`, predictor columns and categorical levels come
/// from that schema (columns it does not name are ignored unless they carry an
/// outcome or weight role); otherwise every column needs a role.
pub fn ingest(path: &Path, schema: &IngestSchema, fixed: Option<&Schema>) -> CliResult<Dataset> {
    let table = read_table(path, schema.delimiter)?;
    ingest_table(&table, schema, fixed)
}

/// Predictor rows only, encoded against a model's schema; outcome columns
/// may be absent.
pub fn ingest_predictors(table: &Table, schema: &IngestSchema, model: &Schema) -> CliResult<Vec<Vec<f64>>> {
    let layout = layout(&table.header, schema, Some(model), false)?;
    Ok(predictor_rows(table, &layout, true)?.1)
}

// Row numbers in messages are 1-based data rows.
fn predictor_rows(table: &Table, layout: &Layout, fixed: bool) -> CliResult<(Vec<FeatureSpec>, Vec<Vec<f64>>)> {
    let rows = table.records.len();
    // Categorical levels: declared by the fixed schema, else sorted distinct values.
    let mut features: Vec<FeatureSpec> = Vec::with_capacity(layout.predictors.len());
    for (col, spec) in &layout.predictors {
        let spec = match &spec.kind {
            FeatureKind::Categorical { levels } if !fixed => {
                debug_assert!(levels.is_empty());
                let set: BTreeSet<&str> = table.records.iter().map(|r| r.get(*col).unwrap_or("")).collect();
                FeatureSpec::categorical(spec.name.clone(), set.into_iter().map(str::to_string).collect())
            }
            _ => spec.clone(),
        };
        features.push(spec);
    }

    let mut predictors: Vec<Vec<f64>> = Vec::with_capacity(rows);
    for (r, rec) in table.records.iter().enumerate() {
        let mut x = Vec::with_capacity(features.len());
        for ((col, _), spec) in layout.predictors.iter().zip(&features) {
            let field = rec.get(*col).unwrap_or("");
            match &spec.kind {
                FeatureKind::Numeric => {
                    let v = parse_real(field, r + 1, &spec.name)?;
                    if !v.is_finite() {
                        return Err(at(r + 1, &spec.name, "predictors must be finite"));
                    }
                    x.push(v);
                }
                FeatureKind::Categorical { levels } => {
                    let k = levels
                        .iter()
                        .position(|l| l == field)
                        .ok_or_else(|| at(r + 1, &spec.name, format!("level '{field}' was not seen in training")))?;
                    x.push(k as f64);
                }
            }
        }
        predictors.push(x);
    }
    Ok((features, predictors))
}

pub fn ingest_table(table: &Table, schema: &IngestSchema, fixed: Option<&Schema>) -> CliResult<Dataset> {
    let header = &table.header;
    let layout = layout(header, schema, fixed, true)?;
    let (features, predictors) = predictor_rows(table, &layout, fixed.is_some())?;
    let rows = table.records.len();

    let intervals: Vec<OutcomeInterval> = match &layout.outcome {
        None => return Err(CliError::usage("no outcome column")),
        Some(Outcome::Value(c)) => table
            .records
            .iter()
            .enumerate()
            .map(|(r, rec)| {
                let v = parse_real(rec.get(*c).unwrap_or(""), r + 1, &header[*c])?;
                OutcomeInterval::exact(v).map_err(|e| at(r + 1, &header[*c], e))
            })
            .collect::<CliResult<_>>()?,
        Some(Outcome::Bounds(l, u)) => table
            .records
            .iter()
            .enumerate()
            .map(|(r, rec)| {
                let a = parse_bound(rec.get(*l).unwrap_or(""), &schema.missing_token, f64::NEG_INFINITY, r + 1, &header[*l])?;
                let b = parse_bound(rec.get(*u).unwrap_or(""), &schema.missing_token, f64::INFINITY, r + 1, &header[*u])?;
                if a > b {
                    return Err(at(r + 1, &header[*l], format!("lower bound {a} exceeds upper bound {b}")));
                }
                OutcomeInterval::new(a, b).map_err(|e| at(r + 1, &header[*l], e))
            })
            .collect::<CliResult<_>>()?,
        Some(Outcome::Ordinal(c)) => {
            let values: Vec<f64> = table
                .records
                .iter()
                .enumerate()
                .map(|(r, rec)| parse_real(rec.get(*c).unwrap_or(""), r + 1, &header[*c]))
                .collect::<CliResult<_>>()?;
            match &schema.ordinal_bounds {
                Some(bounds) => values
                    .iter()
                    .enumerate()
                    .map(|(r, &v)| {
                        if v < 1.0 || v.fract() != 0.0 {
                            return Err(at(r + 1, &header[*c], format!("group '{v}' is not a positive integer")));
                        }
                        group_interval(v as usize - 1, bounds).map_err(|e| at(r + 1, &header[*c], e))
                    })
                    .collect::<CliResult<_>>()?,
                None => ties_to_intervals(&values, BoundsPolicy::OpenEnds)?,
            }
        }
    };

    let weights: Vec<f64> = match layout.weight {
        None => vec![1.0; rows],
        Some(c) => table
            .records
            .iter()
            .enumerate()
            .map(|(r, rec)| {
                let w = parse_real(rec.get(c).unwrap_or(""), r + 1, &header[c])?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(at(r + 1, &header[c], "weights must be positive and finite"));
                }
                Ok(w)
            })
            .collect::<CliResult<_>>()?,
    };

    let obs = intervals
        .into_iter()
        .zip(predictors)
        .zip(weights)
        .enumerate()
        .map(|(r, ((iv, x), w))| CensoredObservation::new(iv, x, w).map_err(|e| at(r + 1, "weight", e)))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Dataset::new(Schema::new(features), obs)?)
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn real(v: f64) -> String {
    format!("{v}")
}

/// Write `data` with the outcome as `y` (or `y_lower`/`y_upper` when any row
/// is censored), the predictors under their names and a `weight` column when
/// any weight differs from 1. The matching schema is returned.
pub fn export_dataset(data: &Dataset, missing_token: &str, delimiter: u8) -> CliResult<(Vec<u8>, IngestSchema)> {
    let censored = !data.is_uncensored();
    let weighted = data.rows().iter().any(|r| r.weight != 1.0);
    let mut roles = BTreeMap::new();
    let mut header: Vec<String> = Vec::new();
    if censored {
        header.extend(["y_lower".to_string(), "y_upper".to_string()]);
        roles.insert("y_lower".into(), Role::OutcomeLower);
        roles.insert("y_upper".into(), Role::OutcomeUpper);
    } else {
        header.push("y".into());
        roles.insert("y".into(), Role::OutcomeValue);
    }
    for f in &data.schema().features {
        header.push(f.name.clone());
        let role = if f.is_categorical() { Role::PredictorCategorical } else { Role::PredictorNumeric };
        if roles.insert(f.name.clone(), role).is_some() {
            return Err(CliError::data(format!("predictor name '{}' collides with an outcome column", f.name)));
        }
    }
    if weighted {
        header.push("weight".into());
        if roles.insert("weight".into(), Role::Weight).is_some() {
            return Err(CliError::data("predictor name 'weight' collides with the weight column"));
        }
    }
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    w.write_record(&header)?;
    for row in data.rows() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        let iv = &row.interval;
        if censored {
            for v in [iv.lower(), iv.upper()] {
                rec.push(if v.is_finite() { real(v) } else { missing_token.to_string() });
            }
        } else {
            rec.push(real(iv.lower()));
        }
        for (f, &v) in data.schema().features.iter().zip(&row.predictors) {
            rec.push(match &f.kind {
                FeatureKind::Numeric => real(v),
                FeatureKind::Categorical { levels } => levels[v as usize].clone(),
            });
        }
        if weighted {
            rec.push(real(row.weight));
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::data(e.to_string()))?;
    Ok((
        bytes,
        IngestSchema {
            roles,
            missing_token: missing_token.to_string(),
            ordinal_bounds: None,
            delimiter,
        },
    ))
}
