//! Gradient-boosted distributional regression for censored outcomes.
//!
//! Location and scale (or lower and upper scales) of a logistic error model
//! are each fit by boosted regression trees under the censored likelihood,
//! optionally together with a monotone transformation of the outcome.

pub mod boost;
pub mod censor;
pub mod diag;
pub mod dist;
pub mod error;
pub mod model;
pub mod predict;
pub mod synth;
pub mod transform;
pub mod tree;

pub use boost::{BoostedModel, ErrorModel, FitConfig};
pub use censor::{CensoredObservation, Dataset, FeatureSpec, MarginalCdf, Schema};
pub use dist::{AsymmetricParams, DistParams, OutcomeInterval, SymmetricParams};
pub use error::{Error, Result};
pub use model::FittedModel;
pub use predict::{ConditionalDistribution, LossSpec};
pub use transform::{MonotoneTransform, TransformConfig, TransformTrace};
pub use tree::TreeParams;
