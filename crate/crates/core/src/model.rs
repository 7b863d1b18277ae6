//! A fitted model with its transformation, as a versioned JSON document.

use serde::{Deserialize, Serialize};

use crate::boost::{fit_model, BoostedModel, ErrorModel, FitConfig};
use crate::censor::{Dataset, Schema};
use crate::dist::DistParams;
use crate::error::{Error, Result};
use crate::predict::ConditionalDistribution;
use crate::transform::{fit_with_transform, MonotoneTransform, TransformConfig, TransformTrace};

pub const FORMAT_NAME: &str = "distboost-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub train_rows: usize,
    pub test_rows: usize,
    pub seed: Option<u64>,
    pub transform_iterations: Option<usize>,
    pub transform_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format: String,
    pub version: u32,
    pub schema: Schema,
    pub config: FitConfig,
    pub error_model: ErrorModel,
    /// `None` when the outcome is modeled on its own scale.
    pub transform: Option<MonotoneTransform>,
    pub ensembles: BoostedModel,
    pub training: TrainingInfo,
}

impl FittedModel {
    /// Fit ensembles, and the transformation when `transform` is given.
    /// `test` is the selection set for the number of trees.
    pub fn fit(
        train: &Dataset,
        test: &Dataset,
        config: &FitConfig,
        error_model: ErrorModel,
        transform: Option<&TransformConfig>,
        seed: Option<u64>,
    ) -> Result<(Self, Option<TransformTrace>)> {
        if train.schema() != test.schema() {
            return Err(Error::SchemaMismatch(
                "training and selection sets have different schemas".into(),
            ));
        }
        let mut training = TrainingInfo {
            train_rows: train.len(),
            test_rows: test.len(),
            seed,
            transform_iterations: None,
            transform_converged: None,
        };
        let (ensembles, g, trace) = match transform {
            None => (fit_model(train, test, config, error_model)?, None, None),
            Some(options) => {
                let fit = fit_with_transform(train, test, config, options, error_model)?;
                training.transform_iterations = Some(fit.iterations);
                training.transform_converged = Some(fit.converged);
                (fit.model, Some(fit.transform), Some(fit.trace))
            }
        };
        let model = Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            schema: train.schema().clone(),
            config: *config,
            error_model,
            transform: g,
            ensembles,
            training,
        };
        Ok((model, trace))
    }

    /// Parameters of the transformed outcome at `predictors`.
    pub fn predict_params(&self, predictors: &[f64]) -> Result<DistParams> {
        self.schema.validate(predictors)?;
        Ok(self.ensembles.predict(predictors))
    }

    pub fn distribution(&self, predictors: &[f64]) -> Result<ConditionalDistribution<'_>> {
        Ok(ConditionalDistribution::new(
            self.predict_params(predictors)?,
            self.transform.as_ref(),
        ))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<DistParams>> {
        self.check_schema(data.schema())?;
        Ok(data
            .rows()
            .iter()
            .map(|r| self.ensembles.predict(&r.predictors))
            .collect())
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        if schema.features.len() != self.schema.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "model has {} predictors, data has {}",
                self.schema.features.len(),
                schema.features.len()
            )));
        }
        for (m, d) in self.schema.features.iter().zip(&schema.features) {
            if m.name != d.name || m.kind != d.kind {
                return Err(Error::SchemaMismatch(format!(
                    "predictor '{}' in the model does not match '{}' in the data",
                    m.name, d.name
                )));
            }
        }
        Ok(())
    }

    /// Pretty JSON; reals use shortest round-trip decimal form, so equal
    /// models give byte-identical documents.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if model.format != FORMAT_NAME {
            return Err(Error::Format(format!("unknown format '{}'", model.format)));
        }
        if model.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "version {} is not supported (expected {FORMAT_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }
}
