//! Segment-level feature extraction and synthetic dataset generation.

mod codebook;
mod segment;
mod skeleton;
mod synthetic;

pub use codebook::{bow_histogram, build_codebook, Codebook, KMeansFit};
pub use segment::{segment_bounds, segment_uniform, FrameStream, Modality};
pub use skeleton::{normalize_skeleton, NormalizedSkeleton, Skeleton, SkeletonTopology};
pub use synthetic::{generate_synthetic_dataset, SyntheticSpec};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Feature vector of one temporal segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T>(pub Vec<T>);

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector has non-finite entries"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

impl<T> AsRef<[T]> for FeatureVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

/// Index into a dataset's class table.
pub type ClassId = usize;

/// One action: T segment feature vectors with an optional label and an
/// optional annotation of which segments are corrupt.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSequence<T> {
    pub id: String,
    pub segments: Vec<FeatureVector<T>>,
    pub label: Option<ClassId>,
    /// `true` marks a segment annotated as corrupt.
    pub known_outlier_mask: Option<Vec<bool>>,
}

impl<T: Scalar> ActionSequence<T> {
    pub fn new(id: impl Into<String>, segments: Vec<FeatureVector<T>>, label: Option<ClassId>) -> Self {
        Self {
            id: id.into(),
            segments,
            label,
            known_outlier_mask: None,
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.segments.first().map_or(0, FeatureVector::dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::invalid(format!("action {} has no segments", self.id)));
        }
        let d = self.dim();
        for s in &self.segments {
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.dim(),
                });
            }
            if s.0.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "action {} has non-finite features",
                    self.id
                )));
            }
        }
        if let Some(mask) = &self.known_outlier_mask {
            if mask.len() != self.segments.len() {
                return Err(Error::invalid(format!(
                    "action {}: outlier mask has {} entries for {} segments",
                    self.id,
                    mask.len(),
                    self.segments.len()
                )));
            }
        }
        Ok(())
    }
}

/// A set of actions sharing one class table, one segment count and one
/// feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub classes: Vec<String>,
    pub actions: Vec<ActionSequence<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(classes: Vec<String>, actions: Vec<ActionSequence<T>>) -> Result<Self> {
        let ds = Self { classes, actions };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Segment count shared by all actions (0 for an empty dataset).
    pub fn segments_per_action(&self) -> usize {
        self.actions.first().map_or(0, ActionSequence::len)
    }

    pub fn dim(&self) -> usize {
        self.actions.first().map_or(0, ActionSequence::dim)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.segments_per_action();
        let d = self.dim();
        let mut seen = std::collections::HashSet::new();
        for a in &self.actions {
            a.validate()?;
            if a.len() != t {
                return Err(Error::invalid(format!(
                    "action {} has {} segments, dataset uses {t}",
                    a.id,
                    a.len()
                )));
            }
            if a.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.dim(),
                });
            }
            if let Some(y) = a.label {
                if y >= self.classes.len() {
                    return Err(Error::invalid(format!(
                        "action {} has label {y} outside {} classes",
                        a.id,
                        self.classes.len()
                    )));
                }
            }
            if !seen.insert(a.id.as_str()) {
                return Err(Error::invalid(format!("duplicate action id {}", a.id)));
            }
        }
        Ok(())
    }

    pub fn class_index(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().position(|c| c == name)
    }

    /// Population standard deviation over every feature entry of every segment.
    pub fn feature_std(&self) -> T {
        let mut n = 0usize;
        let mut mean = 0.0f64;
        let mut m2 = 0.0f64;
        for v in self
            .actions
            .iter()
            .flat_map(|a| a.segments.iter())
            .flat_map(|s| s.0.iter())
        {
            n += 1;
            let x = v.as_f64();
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        if n == 0 {
            T::zero()
        } else {
            T::of((m2 / n as f64).sqrt())
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            classes: self.classes.clone(),
            actions: indices.iter().map(|&i| self.actions[i].clone()).collect(),
        }
    }
}
