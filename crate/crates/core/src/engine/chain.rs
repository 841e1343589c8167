use crate::augmentation::AugmentedAction;
use crate::error::{Error, Result};
use crate::features::ActionSequence;
use crate::scalar::Scalar;

/// Read access to a chain of segments, each offering one or more candidate
/// observations.
pub trait ChainInput<T: Scalar>: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize;

    /// Candidate observations at `t`, including the original (`o = 0`).
    fn num_observations(&self, t: usize) -> usize;

    fn original_allowed(&self, _t: usize) -> bool {
        true
    }

    fn observation(&self, t: usize, o: usize) -> &[T];

    /// Whether keeping the original adds the inlier bias `ε`.
    fn biased(&self) -> bool;

    fn domain(&self, t: usize, num_poses: usize) -> StateDomain {
        StateDomain {
            first_observation: usize::from(!self.original_allowed(t)),
            end_observation: self.num_observations(t),
            poses: num_poses,
        }
    }
}

impl<T: Scalar> ChainInput<T> for ActionSequence<T> {
    fn len(&self) -> usize {
        self.segments.len()
    }

    fn dim(&self) -> usize {
        ActionSequence::dim(self)
    }

    fn num_observations(&self, _t: usize) -> usize {
        1
    }

    fn observation(&self, t: usize, _o: usize) -> &[T] {
        self.segments[t].as_slice()
    }

    fn biased(&self) -> bool {
        false
    }
}

impl<T: Scalar> ChainInput<T> for AugmentedAction<T> {
    fn len(&self) -> usize {
        self.segments.len()
    }

    fn dim(&self) -> usize {
        AugmentedAction::dim(self)
    }

    fn num_observations(&self, t: usize) -> usize {
        1 + self.segments[t].alternatives.len()
    }

    fn original_allowed(&self, t: usize) -> bool {
        self.segments[t].original_allowed
    }

    fn observation(&self, t: usize, o: usize) -> &[T] {
        self.segments[t].observation(o).as_slice()
    }

    fn biased(&self) -> bool {
        true
    }
}

/// Composite hidden state: observation `o` and pose `p`, both 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositeState {
    pub observation: usize,
    pub pose: usize,
}

/// Allowed composite states at one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateDomain {
    pub first_observation: usize,
    pub end_observation: usize,
    pub poses: usize,
}

impl StateDomain {
    pub fn observations(&self) -> usize {
        self.end_observation.saturating_sub(self.first_observation)
    }

    pub fn size(&self) -> usize {
        self.observations() * self.poses
    }

    pub fn state(&self, flat: usize) -> CompositeState {
        CompositeState {
            observation: self.first_observation + flat / self.poses,
            pose: flat % self.poses,
        }
    }

    pub fn flat(&self, s: CompositeState) -> Option<usize> {
        (s.observation >= self.first_observation
            && s.observation < self.end_observation
            && s.pose < self.poses)
            .then(|| (s.observation - self.first_observation) * self.poses + s.pose)
    }
}

/// A full assignment of composite states with its potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration<T> {
    pub states: Vec<CompositeState>,
    pub potential: T,
}

impl<T> Configuration<T> {
    /// Segments declared outliers, i.e. explained by an alternative.
    pub fn replaced(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.observation != 0)
            .map(|(t, s)| (t, s.observation))
    }

    pub fn inlier_count(&self) -> usize {
        self.states.iter().filter(|s| s.observation == 0).count()
    }
}

pub(crate) fn check_input<T: Scalar, A: ChainInput<T> + ?Sized>(
    action: &A,
    dim: usize,
    num_poses: usize,
) -> Result<()> {
    if action.is_empty() {
        return Err(Error::invalid("action has no segments"));
    }
    if action.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: action.dim(),
        });
    }
    for t in 0..action.len() {
        if action.domain(t, num_poses).size() == 0 {
            return Err(Error::invalid(format!(
                "segment {t} has no admissible observation"
            )));
        }
        for o in action.domain(t, num_poses).first_observation..action.num_observations(t) {
            if action.observation(t, o).len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: action.observation(t, o).len(),
                });
            }
        }
    }
    Ok(())
}
