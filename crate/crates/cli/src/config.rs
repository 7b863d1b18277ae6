//! Run configuration: a TOML document overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use clap::{Args, ValueEnum};
use distboost::{ErrorModel, FitConfig, TransformConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::ingest::{IngestSchema, Role};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    #[default]
    None,
    Optimal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    #[default]
    Comma,
    Tab,
}

impl Delimiter {
    pub fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformOptions {
    pub max_iterations: usize,
    pub threshold: f64,
    pub max_knots: usize,
}

impl Default for TransformOptions {
    fn default() -> Self {
        let d = TransformConfig::default();
        Self {
            max_iterations: d.max_iterations,
            threshold: d.threshold,
            max_knots: d.max_knots,
        }
    }
}

/// Fractions of rows assigned to the training, selection and validation
/// sets; rows left over are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub test: f64,
    #[serde(default)]
    pub validation: f64,
}

impl SplitFractions {
    pub fn validate(&self) -> CliResult<()> {
        let parts = [self.train, self.test, self.validation];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || parts.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(CliError::usage("split fractions must lie in [0, 1] and sum to at most 1"));
        }
        if self.train <= 0.0 || self.test <= 0.0 {
            return Err(CliError::usage("train and test fractions must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fit: FitConfig,
    pub error_model: ErrorModel,
    pub transform: TransformMode,
    pub transform_options: TransformOptions,
    pub seed: u64,
    pub columns: BTreeMap<String, Role>,
    /// Group boundaries, `-inf` and `inf` allowed.
    pub ordinal_bounds: Option<Vec<f64>>,
    pub missing_token: String,
    pub delimiter: Delimiter,
    pub split: Option<SplitFractions>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            error_model: ErrorModel::default(),
            transform: TransformMode::default(),
            transform_options: TransformOptions::default(),
            seed: 0,
            columns: BTreeMap::new(),
            ordinal_bounds: None,
            missing_token: String::new(),
            delimiter: Delimiter::default(),
            split: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn ingest_schema(&self) -> IngestSchema {
        IngestSchema {
            roles: self.columns.clone(),
            missing_token: self.missing_token.clone(),
            ordinal_bounds: self.ordinal_bounds.clone(),
            delimiter: self.delimiter.byte(),
        }
    }

    pub fn transform_config(&self) -> Option<TransformConfig> {
        match self.transform {
            TransformMode::None => None,
            TransformMode::Optimal => Some(TransformConfig {
                max_iterations: self.transform_options.max_iterations,
                threshold: self.transform_options.threshold,
                max_knots: self.transform_options.max_knots,
                ..TransformConfig::default()
            }),
        }
    }
}

fn parse_column(s: &str) -> Result<(String, Role), String> {
    let (name, role) = s.rsplit_once('=').ok_or_else(|| format!("expected NAME=ROLE, got '{s}'"))?;
    let role: Role = role.parse().map_err(|e: CliError| e.to_string())?;
    Ok((name.to_string(), role))
}

/// Comma-separated reals as a single flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Reals(pub Vec<f64>);

pub fn parse_reals(s: &str) -> Result<Reals, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect::<Result<_, _>>()
        .map(Reals)
}

/// Flags shared by every command that reads data.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Column role as NAME=ROLE; repeatable.
    #[arg(long = "column", value_parser = parse_column)]
    pub columns: Vec<(String, Role)>,
    /// Comma-separated ordinal group boundaries (inf and -inf allowed).
    #[arg(long, value_parser = parse_reals, allow_hyphen_values = true)]
    pub ordinal_bounds: Option<Reals>,
    /// Field text meaning an unbounded outcome bound.
    #[arg(long)]
    pub missing_token: Option<String>,
    #[arg(long, value_enum)]
    pub delimiter: Option<Delimiter>,
}

/// Flags for every fitting option.
#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_trees: Option<usize>,
    #[arg(long)]
    pub outer_max_iterations: Option<usize>,
    #[arg(long)]
    pub outer_threshold: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub log_step_clamp: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_leaf_count: Option<usize>,
    #[arg(long)]
    pub min_gain: Option<f64>,
    #[arg(long, value_enum)]
    pub error_model: Option<ErrorModelArg>,
    #[arg(long, value_enum)]
    pub transform: Option<TransformMode>,
    #[arg(long)]
    pub transform_max_iterations: Option<usize>,
    #[arg(long)]
    pub transform_threshold: Option<f64>,
    #[arg(long)]
    pub max_knots: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrorModelArg {
    Symmetric,
    Asymmetric,
}

impl From<ErrorModelArg> for ErrorModel {
    fn from(a: ErrorModelArg) -> Self {
        match a {
            ErrorModelArg::Symmetric => ErrorModel::Symmetric,
            ErrorModelArg::Asymmetric => ErrorModel::Asymmetric,
        }
    }
}

impl DataArgs {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for (name, role) in &self.columns {
            cfg.columns.insert(name.clone(), *role);
        }
        if let Some(b) = &self.ordinal_bounds {
            cfg.ordinal_bounds = Some(b.0.clone());
        }
        if let Some(t) = &self.missing_token {
            cfg.missing_token = t.clone();
        }
        if let Some(d) = self.delimiter {
            cfg.delimiter = d;
        }
        Ok(cfg)
    }
}

impl FitArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let f = &mut cfg.fit;
        macro_rules! set {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag { $field = v; })*
            };
        }
        set! {
            learning_rate => f.learning_rate,
            max_trees => f.max_trees,
            outer_max_iterations => f.outer_max_iterations,
            outer_threshold => f.outer_threshold,
            patience => f.patience,
            log_step_clamp => f.log_step_clamp,
            max_depth => f.tree.max_depth,
            min_leaf_count => f.tree.min_leaf_count,
            min_gain => f.tree.min_gain,
            transform => cfg.transform,
            transform_max_iterations => cfg.transform_options.max_iterations,
            transform_threshold => cfg.transform_options.threshold,
            max_knots => cfg.transform_options.max_knots,
            seed => cfg.seed,
        }
        if let Some(e) = self.error_model {
            cfg.error_model = e.into();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_document_with_defaults() {
        let cfg: RunConfig = toml::from_str(
            r#"
            error_model = "asymmetric"
            transform = "optimal"
            seed = 7
            ordinal_bounds = [-inf, 17.5, inf]

            [fit]
            learning_rate = 0.05
            [fit.tree]
            max_depth = 3

            [columns]
            age = "ordinal_group"
            x1 = "predictor_numeric"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.error_model, ErrorModel::Asymmetric);
        assert_eq!(cfg.fit.learning_rate, 0.05);
        assert_eq!(cfg.fit.tree.max_depth, 3);
        assert_eq!(cfg.fit.tree.min_leaf_count, 20);
        assert_eq!(cfg.fit.max_trees, FitConfig::default().max_trees);
        assert_eq!(cfg.ordinal_bounds.unwrap()[0], f64::NEG_INFINITY);
        assert_eq!(cfg.columns["age"], Role::OrdinalGroup);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("learning_rate = 0.1").is_err());
    }

    #[test]
    fn flags_override_document() {
        let mut cfg = RunConfig::default();
        let args = FitArgs {
            max_trees: Some(12),
            min_gain: Some(0.5),
            seed: Some(9),
            error_model: Some(ErrorModelArg::Asymmetric),
            ..FitArgs::default()
        };
        args.apply(&mut cfg);
        assert_eq!(cfg.fit.max_trees, 12);
        assert_eq!(cfg.fit.tree.min_gain, 0.5);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.error_model, ErrorModel::Asymmetric);
    }

    #[test]
    fn split_fractions_checked() {
        let ok = SplitFractions { train: 0.5, test: 0.2, validation: 0.3 };
        assert!(ok.validate().is_ok());
        let over = SplitFractions { train: 0.6, test: 0.3, validation: 0.2 };
        assert!(over.validate().is_err());
    }
}
