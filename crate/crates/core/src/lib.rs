//! Hidden-state conditional random fields over alternative-augmented
//! observation sequences.
//!
//! Every segment of an action is paired with alternatives retrieved from the
//! training set by mutual recommendation between segments. The hidden state of
//! each segment is composite: it selects which observation explains the
//! segment (the original or one of the alternatives) and which latent pose
//! explains that observation. Classifying an augmented action therefore also
//! detects corrupt segments and names their replacements.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the CLI and the
//! file formats use.

pub mod augmentation;
pub mod engine;
pub mod error;
pub mod features;
pub mod harness;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Segment feature vector with `f64` entries.
pub type FeatureVector = features::FeatureVector<f64>;
/// Labeled length-T action with `f64` features.
pub type ActionSequence = features::ActionSequence<f64>;
/// Dataset of `f64` actions with its class table.
pub type Dataset = features::Dataset<f64>;
/// Action augmented with retrieved alternatives.
pub type AugmentedAction = augmentation::AugmentedAction<f64>;
/// Exact position-restricted nearest-neighbour index.
pub type RetrievalIndex = augmentation::RetrievalIndex<f64>;
/// Model parameters (poses, class/pose and class/transition tables, bias).
pub type ModelParameters = engine::ModelParameters<f64>;
/// Trained model bundle with class names and regularization scale.
pub type TrainedModel = engine::TrainedModel<f64>;
/// Training hyper-parameters.
pub type TrainConfig = training::TrainConfig<f64>;
/// Optimizer trace and exit statistics.
pub type TrainReport = training::TrainReport<f64>;

/// Single-precision variants.
pub mod f32 {
    pub type FeatureVector = crate::features::FeatureVector<f32>;
    pub type ActionSequence = crate::features::ActionSequence<f32>;
    pub type Dataset = crate::features::Dataset<f32>;
    pub type AugmentedAction = crate::augmentation::AugmentedAction<f32>;
    pub type ModelParameters = crate::engine::ModelParameters<f32>;
    pub type TrainConfig = crate::training::TrainConfig<f32>;
    pub type TrainReport = crate::training::TrainReport<f32>;
}
