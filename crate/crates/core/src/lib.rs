//! Counterfactual explanations for multivariate time-series models, found by
//! a policy-gradient search that needs only query access to the model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod distance;
pub mod error;
pub mod eval;
pub mod io;
pub mod models;
pub mod policy;
pub mod sample;
pub mod scalar;
pub mod schema;
pub mod search;
pub mod target;

pub use constraints::{apply_constraints, CausalEffect, CausalRule, ConstraintSet, RangeRule};
pub use distance::{
    feature_changes, proximity, proximity_by_feature, sparsity, SPARSITY_TOLERANCE,
};
pub use error::{CfxError, Result};
pub use models::{PlausibilityCheck, PredictiveModel};
pub use sample::{NamedSample, SeriesSample};
pub use scalar::Scalar;
pub use schema::{ActionLayout, FeatureKind, FeatureSchema, FeatureSpec, Mutability};
pub use search::{
    generate, generate_with, Learner, LearnerCheckpoint, Problem, SearchConfig, SearchReport,
};
pub use target::TargetSpec;

pub type Sample = SeriesSample<f64>;
pub type Schema = FeatureSchema<f64>;
pub type Config = SearchConfig<f64>;
pub type Report = SearchReport<f64>;

pub type Sample32 = SeriesSample<f32>;
pub type Schema32 = FeatureSchema<f32>;
pub type Config32 = SearchConfig<f32>;
pub type Report32 = SearchReport<f32>;
