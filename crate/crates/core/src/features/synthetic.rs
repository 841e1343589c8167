use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{ActionSequence, Dataset, FeatureVector};

/// Parameters of the synthetic key-pose generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub actions_per_class: usize,
    pub segments: usize,
    pub dim: usize,
    /// Prototype poses per class.
    pub true_poses: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 5,
            actions_per_class: 40,
            segments: 10,
            dim: 8,
            true_poses: 3,
            noise_std: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0
            || self.actions_per_class == 0
            || self.segments == 0
            || self.dim == 0
            || self.true_poses == 0
        {
            return Err(Error::invalid("synthetic spec counts must all be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std must be a finite non-negative number"));
        }
        Ok(())
    }

    /// Prototype index used at 0-based segment `t`.
    pub fn pose_at(&self, t: usize) -> usize {
        t * self.true_poses / self.segments
    }
}

/// Draws standard-normal prototypes per class; segment `t` of every action
/// shows prototype `⌊t·S/T⌋` of its class plus isotropic Gaussian noise.
///
/// Actions are emitted class by class with ids `c<class>-<index>`.
pub fn generate_synthetic_dataset<T: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prototypes: Vec<Vec<Vec<f64>>> = (0..spec.num_classes)
        .map(|_| {
            (0..spec.true_poses)
                .map(|_| (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect()
        })
        .collect();

    let mut actions = Vec::with_capacity(spec.num_classes * spec.actions_per_class);
    for (class, protos) in prototypes.iter().enumerate() {
        for i in 0..spec.actions_per_class {
            let segments = (0..spec.segments)
                .map(|t| {
                    let proto = &protos[spec.pose_at(t)];
                    FeatureVector(
                        proto
                            .iter()
                            .map(|&m| {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                T::of(m + spec.noise_std * z)
                            })
                            .collect(),
                    )
                })
                .collect();
            actions.push(ActionSequence::new(format!("c{class}-{i}"), segments, Some(class)));
        }
    }
    let classes = (0..spec.num_classes).map(|c| format!("class{c}")).collect();
    Dataset::new(classes, actions)
}
