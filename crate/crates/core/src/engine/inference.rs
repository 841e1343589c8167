use crate::augmentation::AugmentedSegment;
use crate::error::{Error, Result};
use crate::features::ClassId;
use crate::scalar::{dot, log_sum_exp, Scalar};

use super::chain::{check_input, ChainInput, CompositeState, Configuration, StateDomain};
use super::lattice::Lattice;
use super::params::ModelParameters;

/// `⟨x, λ_pose⟩`.
pub fn unary_plain<T: Scalar>(x: &[T], pose: usize, params: &ModelParameters<T>) -> Result<T> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: x.len(),
        });
    }
    if pose >= params.num_poses() {
        return Err(Error::invalid(format!("pose {pose} outside {} poses", params.num_poses())));
    }
    Ok(dot(x, params.pose(pose)))
}

fn check_segment_state<T: Scalar>(
    segment: &AugmentedSegment<T>,
    state: CompositeState,
    params: &ModelParameters<T>,
) -> Result<()> {
    let domain = StateDomain {
        first_observation: usize::from(!segment.original_allowed),
        end_observation: 1 + segment.alternatives.len(),
        poses: params.num_poses(),
    };
    if domain.flat(state).is_none() {
        return Err(Error::invalid(format!("state {state:?} outside the segment's domain")));
    }
    Ok(())
}

/// Compatibility of a composite state with its augmented segment:
/// `⟨x_t, λ_p⟩ + ε` when the original is kept, `⟨x̃_t^o, λ_p⟩` otherwise.
pub fn unary_composite<T: Scalar>(
    segment: &AugmentedSegment<T>,
    state: CompositeState,
    params: &ModelParameters<T>,
) -> Result<T> {
    check_segment_state(segment, state, params)?;
    let u = unary_plain(segment.observation(state.observation).as_slice(), state.pose, params)?;
    Ok(if state.observation == 0 {
        u + params.epsilon()
    } else {
        u
    })
}

/// Same value as [`unary_composite`], computed literally: the segment's
/// observations concatenated into one `(1+T_t)·d` vector, dotted with a
/// parameter vector that is zero except for `λ_p` in block `o`.
pub fn unary_composite_dense<T: Scalar>(
    segment: &AugmentedSegment<T>,
    state: CompositeState,
    params: &ModelParameters<T>,
) -> Result<T> {
    check_segment_state(segment, state, params)?;
    let d = params.dim();
    let blocks = 1 + segment.alternatives.len();
    let mut features = Vec::with_capacity(blocks * d);
    for o in 0..blocks {
        features.extend_from_slice(segment.observation(o).as_slice());
    }
    if features.len() != blocks * d {
        return Err(Error::DimensionMismatch {
            expected: blocks * d,
            got: features.len(),
        });
    }
    let mut theta = vec![T::zero(); blocks * d];
    theta[state.observation * d..(state.observation + 1) * d].copy_from_slice(params.pose(state.pose));
    let bias = if state.observation == 0 {
        params.epsilon()
    } else {
        T::zero()
    };
    Ok(dot(&features, &theta) + bias)
}

/// Potential of class `y` with the given hidden configuration.
pub fn potential<T: Scalar, A: ChainInput<T> + ?Sized>(
    y: ClassId,
    states: &[CompositeState],
    action: &A,
    params: &ModelParameters<T>,
) -> Result<T> {
    check_input(action, params.dim(), params.num_poses())?;
    if y >= params.num_classes() {
        return Err(Error::invalid(format!("class {y} outside {} classes", params.num_classes())));
    }
    if states.len() != action.len() {
        return Err(Error::invalid(format!(
            "configuration has {} states for {} segments",
            states.len(),
            action.len()
        )));
    }
    let mut total = T::zero();
    for (t, &st) in states.iter().enumerate() {
        if action.domain(t, params.num_poses()).flat(st).is_none() {
            return Err(Error::invalid(format!("state {st:?} outside the domain of segment {t}")));
        }
        total += dot(action.observation(t, st.observation), params.pose(st.pose));
        if st.observation == 0 && action.biased() {
            total += params.epsilon();
        }
        total += params.theta2(y, st.pose);
    }
    for w in states.windows(2) {
        total += params.theta3(y, w[0].pose, w[1].pose);
    }
    Ok(total)
}

/// `log Σ_h exp Ψ(y, h, x)` for every class `y`.
pub fn class_log_scores<T: Scalar, A: ChainInput<T> + ?Sized>(
    action: &A,
    params: &ModelParameters<T>,
) -> Result<Vec<T>> {
    let lattice = Lattice::new(action, params)?;
    Ok((0..params.num_classes()).map(|y| lattice.log_z(y)).collect())
}

/// `log Σ_{y, h} exp Ψ(y, h, x)`.
pub fn log_partition<T: Scalar, A: ChainInput<T> + ?Sized>(
    action: &A,
    params: &ModelParameters<T>,
) -> Result<T> {
    Ok(log_sum_exp(&class_log_scores(action, params)?))
}

fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult<T> {
    /// `log P(y | x)` per class.
    pub log_posterior: Vec<T>,
    /// Highest-posterior class, lowest index on ties.
    pub predicted: ClassId,
    /// MAP configuration under `predicted`, when requested.
    pub decode: Option<Configuration<T>>,
}

impl<T: Scalar> PosteriorResult<T> {
    pub fn posterior(&self) -> Vec<T> {
        self.log_posterior.iter().map(|v| v.exp()).collect()
    }
}

fn posterior_from_scores<T: Scalar>(scores: Vec<T>) -> (Vec<T>, ClassId) {
    let z = log_sum_exp(&scores);
    let log_posterior: Vec<T> = scores.into_iter().map(|s| s - z).collect();
    let predicted = argmax(&log_posterior);
    (log_posterior, predicted)
}

pub fn class_posterior<T: Scalar, A: ChainInput<T> + ?Sized>(
    action: &A,
    params: &ModelParameters<T>,
) -> Result<PosteriorResult<T>> {
    let (log_posterior, predicted) = posterior_from_scores(class_log_scores(action, params)?);
    Ok(PosteriorResult {
        log_posterior,
        predicted,
        decode: None,
    })
}

/// [`class_posterior`] plus the MAP configuration under the predicted class.
pub fn class_posterior_with_decode<T: Scalar, A: ChainInput<T> + ?Sized>(
    action: &A,
    params: &ModelParameters<T>,
) -> Result<PosteriorResult<T>> {
    let lattice = Lattice::new(action, params)?;
    let scores = (0..params.num_classes()).map(|y| lattice.log_z(y)).collect();
    let (log_posterior, predicted) = posterior_from_scores(scores);
    Ok(PosteriorResult {
        log_posterior,
        predicted,
        decode: Some(lattice.viterbi(predicted)),
    })
}

pub fn predict<T: Scalar, A: ChainInput<T> + ?Sized>(
    action: &A,
    params: &ModelParameters<T>,
) -> Result<ClassId> {
    Ok(argmax(&class_log_scores(action, params)?))
}

/// Exact hidden-state marginals given a class.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals<T> {
    /// `log Σ_h exp Ψ(y, h, x)`.
    pub class_log_score: T,
    pub domains: Vec<StateDomain>,
    /// `P(h_t = s | y, x)` per segment over its flat domain.
    pub unary: Vec<Vec<T>>,
    /// `P(h_t = s, h_{t+1} = s' | y, x)`, row-major `H_t × H_{t+1}`.
    pub pairwise: Vec<Vec<T>>,
}

pub fn posterior_marginals<T: Scalar, A: ChainInput<T> + ?Sized>(
    action: &A,
    y: ClassId,
    params: &ModelParameters<T>,
) -> Result<Marginals<T>> {
    if y >= params.num_classes() {
        return Err(Error::invalid(format!("class {y} outside {} classes", params.num_classes())));
    }
    let lattice = Lattice::new(action, params)?;
    let chain = lattice.chain(y);
    let n = lattice.len();
    Ok(Marginals {
        class_log_score: chain.log_z,
        domains: lattice.domains.clone(),
        unary: (0..n).map(|t| chain.unary_marginal(t)).collect(),
        pairwise: (0..n.saturating_sub(1))
            .map(|t| chain.pairwise_marginal(t, params, y))
            .collect(),
    })
}

/// Highest-potential configuration under class `y`. States with a nonzero
/// observation mark segments detected as outliers and the alternative that
/// replaces them.
pub fn map_decode<T: Scalar, A: ChainInput<T> + ?Sized>(
    action: &A,
    y: ClassId,
    params: &ModelParameters<T>,
) -> Result<Configuration<T>> {
    if y >= params.num_classes() {
        return Err(Error::invalid(format!("class {y} outside {} classes", params.num_classes())));
    }
    Ok(Lattice::new(action, params)?.viterbi(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmentation::{Alternative, AugmentedAction};
    use crate::features::{ActionSequence, FeatureVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fv(v: &[f64]) -> FeatureVector<f64> {
        FeatureVector(v.to_vec())
    }

    fn alt(v: &[f64]) -> Alternative<f64> {
        Alternative {
            vector: fv(v),
            source_action_id: "src".into(),
            source_position: 0,
            recommender: 0,
            source_label: Some(0),
        }
    }

    fn st(o: usize, p: usize) -> CompositeState {
        CompositeState {
            observation: o,
            pose: p,
        }
    }

    #[test]
    fn unary_plain_cases() {
        let mut params = ModelParameters::zeros(1, 2, 2, 0.0).unwrap();
        let r = 1.0 / 2f64.sqrt();
        params.pose_mut(1).copy_from_slice(&[r, r]);
        assert_eq!(unary_plain(&[0.0, 0.0], 1, &params).unwrap(), 0.0);
        assert!((unary_plain(&[r, r], 1, &params).unwrap() - 1.0).abs() < 1e-15);
        assert!(unary_plain(&[1.0], 0, &params).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ModelParameters::random(1, 3, 6, 0.0, 1.0, 4).unwrap();
        params.pose_mut(0)[0] = 2.0;
        for _ in 0..10 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            for p in 0..3 {
                let mut expected = 0.0;
                for i in 0..6 {
                    expected += x[i] * params.pose(p)[i];
                }
                assert!((unary_plain(&x, p, &params).unwrap() - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unary_composite_cases() {
        let mut params = ModelParameters::random(1, 2, 3, 0.0, 1.0, 2).unwrap();
        let seg = AugmentedSegment {
            original: fv(&[0.5, -1.0, 2.0]),
            alternatives: vec![alt(&[0.5, -1.0, 2.0]), alt(&[0.5, -1.0, 2.0])],
            original_allowed: true,
        };
        for p in 0..2 {
            let base = unary_composite(&seg, st(0, p), &params).unwrap();
            for o in 1..3 {
                assert_eq!(unary_composite(&seg, st(o, p), &params).unwrap(), base);
            }
        }
        params.set_epsilon(0.75).unwrap();
        let zero = AugmentedSegment {
            original: fv(&[0.0, 0.0, 0.0]),
            alternatives: vec![alt(&[1.0, 1.0, 1.0])],
            original_allowed: true,
        };
        assert_eq!(unary_composite(&zero, st(0, 1), &params).unwrap(), 0.75);
        assert!(unary_composite(&zero, st(2, 0), &params).is_err());
        assert!(unary_composite(&zero, st(0, 2), &params).is_err());
        let locked = AugmentedSegment {
            original_allowed: false,
            ..zero.clone()
        };
        assert!(unary_composite(&locked, st(0, 0), &params).is_err());
    }

    #[test]
    fn sparse_and_dense_unaries_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = ModelParameters::random(2, 3, 4, 0.3, 1.0, 9).unwrap();
        for _ in 0..20 {
            let mut v = || (0..4).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
            let seg = AugmentedSegment {
                original: FeatureVector(v()),
                alternatives: (0..4).map(|_| alt(&v())).collect(),
                original_allowed: true,
            };
            for o in 0..5 {
                for p in 0..3 {
                    let a = unary_composite(&seg, st(o, p), &params).unwrap();
                    let b = unary_composite_dense(&seg, st(o, p), &params).unwrap();
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn potential_cases() {
        let mut params = ModelParameters::random(2, 2, 2, 0.0, 1.0, 5).unwrap();
        let single = ActionSequence::new("a", vec![fv(&[0.3, -0.2])], Some(0));
        let expected = 0.3 * params.pose(1)[0] - 0.2 * params.pose(1)[1] + params.theta2(1, 1);
        assert!((potential(1, &[st(0, 1)], &single, &params).unwrap() - expected).abs() < 1e-15);

        let zero = ModelParameters::zeros(2, 2, 2, 0.0).unwrap();
        let seq = ActionSequence::new("b", vec![fv(&[1.0, 2.0]), fv(&[3.0, 4.0]), fv(&[5.0, 6.0])], None);
        assert_eq!(potential(0, &[st(0, 0), st(0, 1), st(0, 1)], &seq, &zero).unwrap(), 0.0);

        // T=3, S=2, |Y|=2: term-by-term hand summation
        params.set_theta3(1, 0, 1, 0.25);
        let cfg = [st(0, 0), st(0, 1), st(0, 0)];
        let x = &seq.segments;
        let u = |t: usize, p: usize| x[t].0[0] * params.pose(p)[0] + x[t].0[1] * params.pose(p)[1];
        let hand = u(0, 0) + u(1, 1) + u(2, 0)
            + params.theta2(1, 0) + params.theta2(1, 1) + params.theta2(1, 0)
            + params.theta3(1, 0, 1) + params.theta3(1, 1, 0);
        assert!((potential(1, &cfg, &seq, &params).unwrap() - hand).abs() < 1e-12);
        assert!(potential(1, &cfg[..2], &seq, &params).is_err());
        assert!(potential(1, &[st(1, 0), st(0, 0), st(0, 0)], &seq, &params).is_err());
    }

    #[test]
    fn uniform_counting_partitions() {
        let zero = ModelParameters::zeros(2, 2, 2, 0.0).unwrap();
        let seq = ActionSequence::new("a", vec![fv(&[1.0, 2.0]), fv(&[3.0, -4.0])], None);
        assert!((log_partition(&seq, &zero).unwrap() - 8f64.ln()).abs() < 1e-12);
        let aug = AugmentedAction {
            id: "a".into(),
            label: None,
            segments: seq
                .segments
                .iter()
                .map(|s| AugmentedSegment {
                    original: s.clone(),
                    alternatives: vec![alt(&[1.0, 1.0]), alt(&[2.0, 0.0]), alt(&[0.0, 5.0])],
                    original_allowed: true,
                })
                .collect(),
            known_outlier_mask: None,
        };
        assert!((log_partition(&aug, &zero).unwrap() - 128f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_model_is_uniform_and_picks_class_zero() {
        let zero = ModelParameters::zeros(3, 2, 2, 0.0).unwrap();
        let seq = ActionSequence::new("a", vec![fv(&[1.0, 2.0]), fv(&[3.0, -4.0]), fv(&[0.1, 0.0])], None);
        let r = class_posterior(&seq, &zero).unwrap();
        for p in r.posterior() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(r.predicted, 0);
        assert_eq!(predict(&seq, &zero).unwrap(), 0);
        let m = posterior_marginals(&seq, 1, &zero).unwrap();
        for u in &m.unary {
            for &v in u {
                assert!((v - 0.5).abs() < 1e-12);
            }
        }
        for pw in &m.pairwise {
            for &v in pw {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dominant_class_bound() {
        let t = 3;
        let mut params = ModelParameters::zeros(3, 2, 2, 0.0).unwrap();
        for p in 0..2 {
            params.set_theta2(1, p, 10.0);
        }
        let seq = ActionSequence::new("a", (0..t).map(|_| fv(&[0.2, 0.4])).collect(), None);
        let r = class_posterior(&seq, &params).unwrap();
        assert_eq!(r.predicted, 1);
        assert!(r.posterior()[1] >= 1.0 - 3.0 * (-10.0 * t as f64).exp());
    }

    #[test]
    fn single_segment_marginal_closed_form() {
        let params = ModelParameters::random(2, 3, 2, 0.0, 1.0, 8).unwrap();
        let seq = ActionSequence::new("a", vec![fv(&[0.7, -0.3])], None);
        let m = posterior_marginals(&seq, 1, &params).unwrap();
        let w: Vec<f64> = (0..3)
            .map(|p| (unary_plain(&[0.7, -0.3], p, &params).unwrap() + params.theta2(1, p)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        for p in 0..3 {
            assert!((m.unary[0][p] - w[p] / z).abs() < 1e-12);
        }
        assert!(m.pairwise.is_empty());
    }

    #[test]
    fn huge_bias_keeps_every_original() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = ModelParameters::random(2, 3, 3, 1e6, 1.0, 1).unwrap();
        let segs = (0..4)
            .map(|_| {
                let mut v = || (0..3).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
                AugmentedSegment {
                    original: FeatureVector(v()),
                    alternatives: (0..3).map(|_| alt(&v())).collect(),
                    original_allowed: true,
                }
            })
            .collect();
        let aug = AugmentedAction {
            id: "a".into(),
            label: None,
            segments: segs,
            known_outlier_mask: None,
        };
        for y in 0..2 {
            let c = map_decode(&aug, y, &params).unwrap();
            assert_eq!(c.inlier_count(), 4);
        }
    }

    #[test]
    fn empty_domain_is_rejected() {
        let params = ModelParameters::zeros(1, 1, 1, 0.0).unwrap();
        let aug = AugmentedAction {
            id: "a".into(),
            label: None,
            segments: vec![AugmentedSegment {
                original: fv(&[1.0]),
                alternatives: vec![],
                original_allowed: false,
            }],
            known_outlier_mask: None,
        };
        assert!(log_partition(&aug, &params).is_err());
    }
}
