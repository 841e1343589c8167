use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pose vectors `λ_k ∈ R^d`, class/pose compatibilities `θ2(y, p)`, class
/// transition scores `θ3(y, p, q)` and the fixed inlier bias `ε`.
///
/// The learnable entries live in one flat vector laid out as
/// `[λ (S×d) | θ2 (|Y|×S) | θ3 (|Y|×S×S)]`, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    num_classes: usize,
    num_poses: usize,
    dim: usize,
    epsilon: T,
    weights: Vec<T>,
}

impl<T: Scalar> ModelParameters<T> {
    pub fn zeros(num_classes: usize, num_poses: usize, dim: usize, epsilon: T) -> Result<Self> {
        Self::from_weights(
            num_classes,
            num_poses,
            dim,
            epsilon,
            vec![T::zero(); Self::weight_count(num_classes, num_poses, dim)],
        )
    }

    /// Entries drawn uniformly from `[-scale, scale]`.
    pub fn random(
        num_classes: usize,
        num_poses: usize,
        dim: usize,
        epsilon: T,
        scale: T,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = scale.as_f64();
        let n = Self::weight_count(num_classes, num_poses, dim);
        let weights = (0..n)
            .map(|_| T::of(if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 }))
            .collect();
        Self::from_weights(num_classes, num_poses, dim, epsilon, weights)
    }

    pub fn from_weights(
        num_classes: usize,
        num_poses: usize,
        dim: usize,
        epsilon: T,
        weights: Vec<T>,
    ) -> Result<Self> {
        if num_classes == 0 || num_poses == 0 || dim == 0 {
            return Err(Error::invalid("classes, poses and dimension must be positive"));
        }
        if !(epsilon >= T::zero() && epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be finite and non-negative"));
        }
        let expected = Self::weight_count(num_classes, num_poses, dim);
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("model weights must be finite"));
        }
        Ok(Self {
            num_classes,
            num_poses,
            dim,
            epsilon,
            weights,
        })
    }

    pub fn weight_count(num_classes: usize, num_poses: usize, dim: usize) -> usize {
        num_poses * dim + num_classes * num_poses + num_classes * num_poses * num_poses
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_poses(&self) -> usize {
        self.num_poses
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: T) -> Result<()> {
        if !(epsilon >= T::zero() && epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be finite and non-negative"));
        }
        self.epsilon = epsilon;
        Ok(())
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub(crate) fn pose_offset(&self, k: usize) -> usize {
        k * self.dim
    }

    pub(crate) fn theta2_offset(&self, y: usize, p: usize) -> usize {
        self.num_poses * self.dim + y * self.num_poses + p
    }

    pub(crate) fn theta3_offset(&self, y: usize, p: usize, q: usize) -> usize {
        let base = self.num_poses * self.dim + self.num_classes * self.num_poses;
        base + (y * self.num_poses + p) * self.num_poses + q
    }

    /// `λ_k`.
    pub fn pose(&self, k: usize) -> &[T] {
        let o = self.pose_offset(k);
        &self.weights[o..o + self.dim]
    }

    pub fn theta2(&self, y: usize, p: usize) -> T {
        self.weights[self.theta2_offset(y, p)]
    }

    pub fn theta3(&self, y: usize, p: usize, q: usize) -> T {
        self.weights[self.theta3_offset(y, p, q)]
    }

    /// Row `θ3(y, p, ·)`.
    pub(crate) fn theta3_row(&self, y: usize, p: usize) -> &[T] {
        let o = self.theta3_offset(y, p, 0);
        &self.weights[o..o + self.num_poses]
    }

    pub fn pose_mut(&mut self, k: usize) -> &mut [T] {
        let o = self.pose_offset(k);
        let d = self.dim;
        &mut self.weights[o..o + d]
    }

    pub fn set_theta2(&mut self, y: usize, p: usize, v: T) {
        let o = self.theta2_offset(y, p);
        self.weights[o] = v;
    }

    pub fn set_theta3(&mut self, y: usize, p: usize, q: usize, v: T) {
        let o = self.theta3_offset(y, p, q);
        self.weights[o] = v;
    }

    /// Sum of squared learnable entries; `ε` is not learned and not included.
    pub fn squared_norm(&self) -> T {
        self.weights.iter().map(|&w| w * w).sum()
    }
}

/// Parameters plus the class names and regularization scale they were
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub params: ModelParameters<T>,
    pub sigma: T,
    pub classes: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous_and_disjoint() {
        let mut p = ModelParameters::<f64>::zeros(2, 3, 4, 0.0).unwrap();
        assert_eq!(p.weights().len(), 12 + 6 + 18);
        let mut seen = vec![false; p.weights().len()];
        for k in 0..3 {
            for i in 0..4 {
                seen[p.pose_offset(k) + i] = true;
            }
        }
        for y in 0..2 {
            for a in 0..3 {
                assert!(!seen[p.theta2_offset(y, a)]);
                seen[p.theta2_offset(y, a)] = true;
                for b in 0..3 {
                    assert!(!seen[p.theta3_offset(y, a, b)]);
                    seen[p.theta3_offset(y, a, b)] = true;
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
        p.set_theta3(1, 2, 0, 5.0);
        assert_eq!(p.theta3_row(1, 2), &[5.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_epsilon_and_shapes() {
        assert!(ModelParameters::<f64>::zeros(2, 2, 2, -1.0).is_err());
        assert!(ModelParameters::<f64>::zeros(0, 2, 2, 0.0).is_err());
        assert!(ModelParameters::<f64>::from_weights(1, 1, 1, 0.0, vec![0.0; 2]).is_err());
    }

    #[test]
    fn random_init_is_bounded_and_seeded() {
        let a = ModelParameters::<f64>::random(3, 4, 5, 0.0, 0.1, 7).unwrap();
        let b = ModelParameters::<f64>::random(3, 4, 5, 0.0, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.weights().iter().all(|w| w.abs() <= 0.1));
        assert!(a.squared_norm() > 0.0);
    }
}
