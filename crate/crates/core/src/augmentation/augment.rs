use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{ActionSequence, ClassId, Dataset, FeatureVector};
use crate::scalar::Scalar;

use super::index::{Backend, RetrievalIndex};

/// A training segment offered as a substitute for some segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternative<T> {
    pub vector: FeatureVector<T>,
    pub source_action_id: String,
    /// 0-based position of the harvested segment in its source action.
    pub source_position: usize,
    /// 0-based position of the query segment that recommended it.
    pub recommender: usize,
    /// Class of the source action. Only read by quality metrics.
    pub source_label: Option<ClassId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSegment<T> {
    pub original: FeatureVector<T>,
    pub alternatives: Vec<Alternative<T>>,
    /// `false` removes the original from the observation choices, so the
    /// segment must be explained by one of its alternatives.
    pub original_allowed: bool,
}

impl<T: Scalar> AugmentedSegment<T> {
    pub fn plain(original: FeatureVector<T>) -> Self {
        Self {
            original,
            alternatives: Vec::new(),
            original_allowed: true,
        }
    }

    /// Observation `o`: 0 is the original, `j ≥ 1` the `j`-th alternative.
    pub fn observation(&self, o: usize) -> &FeatureVector<T> {
        if o == 0 {
            &self.original
        } else {
            &self.alternatives[o - 1].vector
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedAction<T> {
    pub id: String,
    pub label: Option<ClassId>,
    pub segments: Vec<AugmentedSegment<T>>,
    pub known_outlier_mask: Option<Vec<bool>>,
}

impl<T: Scalar> AugmentedAction<T> {
    /// The action with no alternatives anywhere.
    pub fn plain(action: &ActionSequence<T>) -> Self {
        Self {
            id: action.id.clone(),
            label: action.label,
            segments: action
                .segments
                .iter()
                .cloned()
                .map(AugmentedSegment::plain)
                .collect(),
            known_outlier_mask: action.known_outlier_mask.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.segments.first().map_or(0, |s| s.original.dim())
    }

    /// Drops the alternatives, recovering the underlying action.
    pub fn underlying(&self) -> ActionSequence<T> {
        ActionSequence {
            id: self.id.clone(),
            segments: self.segments.iter().map(|s| s.original.clone()).collect(),
            label: self.label,
            known_outlier_mask: self.known_outlier_mask.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentOptions {
    pub exclude_self: bool,
    /// Also offer each alternative to the `w` neighbouring segments on both
    /// sides (appended after the segment's own alternatives).
    pub duplicate_window: usize,
    /// Only segments flagged in the action's `known_outlier_mask` receive
    /// alternatives.
    pub known_mask_mode: bool,
    /// With `known_mask_mode`, flagged segments may not keep their original.
    pub exclude_masked_original: bool,
    pub backend: Backend,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            exclude_self: false,
            duplicate_window: 0,
            known_mask_mode: false,
            exclude_masked_original: false,
            backend: Backend::LinearScan,
        }
    }
}

/// Alternatives recommended by position `j`: one query, then every segment
/// of the winning training action.
pub fn recommend<T: Scalar>(
    index: &RetrievalIndex<T>,
    action: &ActionSequence<T>,
    j: usize,
    exclude_id: Option<&str>,
) -> Result<Vec<Alternative<T>>> {
    let query = action
        .segments
        .get(j)
        .ok_or_else(|| Error::invalid(format!("position {j} outside action {}", action.id)))?;
    let winner = index.nearest(query.as_slice(), j, exclude_id)?.action;
    Ok((0..index.segments_per_action())
        .map(|t| Alternative {
            vector: index.segment(winner, t).clone(),
            source_action_id: index.id(winner).to_owned(),
            source_position: t,
            recommender: j,
            source_label: index.label(winner),
        })
        .collect())
}

pub fn augment_action<T: Scalar>(
    index: &RetrievalIndex<T>,
    action: &ActionSequence<T>,
    options: &AugmentOptions,
) -> Result<AugmentedAction<T>> {
    action.validate()?;
    let t_len = action.len();
    if t_len != index.segments_per_action() {
        return Err(Error::invalid(format!(
            "action {} has {t_len} segments, index expects {}",
            action.id,
            index.segments_per_action()
        )));
    }
    if action.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            got: action.dim(),
        });
    }

    let mask = if options.known_mask_mode {
        action.known_outlier_mask.as_deref()
    } else {
        None
    };
    let receives = |t: usize| mask.is_none_or(|m| m[t]);
    if !(0..t_len).any(receives) {
        return Ok(AugmentedAction::plain(action));
    }

    let exclude = options.exclude_self.then_some(action.id.as_str());
    // by_recommender[j][t] is the alternative position j recommends to t
    let by_recommender = (0..t_len)
        .map(|j| recommend(index, action, j, exclude))
        .collect::<Result<Vec<_>>>()?;

    let w = options.duplicate_window;
    let segments = (0..t_len)
        .map(|t| {
            let mut alternatives = Vec::new();
            if receives(t) {
                let mut take = |s: usize| {
                    alternatives.extend(by_recommender.iter().map(|recs| recs[s].clone()));
                };
                take(t);
                for d in 1..=w {
                    if t >= d {
                        take(t - d);
                    }
                    if t + d < t_len {
                        take(t + d);
                    }
                }
            }
            let original_allowed =
                !(options.exclude_masked_original && mask.is_some_and(|m| m[t]));
            AugmentedSegment {
                original: action.segments[t].clone(),
                alternatives,
                original_allowed,
            }
        })
        .collect();

    Ok(AugmentedAction {
        id: action.id.clone(),
        label: action.label,
        segments,
        known_outlier_mask: action.known_outlier_mask.clone(),
    })
}

/// Augments many actions in parallel; output order follows input order.
pub fn augment_actions<T: Scalar>(
    index: &RetrievalIndex<T>,
    actions: &[ActionSequence<T>],
    options: &AugmentOptions,
) -> Result<Vec<AugmentedAction<T>>> {
    actions
        .par_iter()
        .map(|a| augment_action(index, a, options))
        .collect()
}

/// Training actions are augmented with themselves held out; test actions
/// against the full training set. Returns the index for instrumentation.
#[allow(clippy::type_complexity)]
pub fn augment_dataset<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    options: &AugmentOptions,
) -> Result<(Vec<AugmentedAction<T>>, Vec<AugmentedAction<T>>, RetrievalIndex<T>)> {
    let index = RetrievalIndex::build(&train.actions, options.backend)?;
    let train_opts = AugmentOptions {
        exclude_self: true,
        ..options.clone()
    };
    let test_opts = AugmentOptions {
        exclude_self: false,
        ..options.clone()
    };
    let aug_train = augment_actions(&index, &train.actions, &train_opts)?;
    let aug_test = augment_actions(&index, &test.actions, &test_opts)?;
    Ok((aug_train, aug_test, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{generate_synthetic_dataset, SyntheticSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(seed: u64, n: usize, t: usize, d: usize) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actions = (0..n)
            .map(|i| {
                let segs = (0..t)
                    .map(|_| FeatureVector((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()))
                    .collect();
                ActionSequence::new(format!("a{i}"), segs, Some(i % 2))
            })
            .collect();
        Dataset::new(vec!["x".into(), "y".into()], actions).unwrap()
    }

    #[test]
    fn recommended_alternatives_are_the_winners_segments() {
        let ds = random_set(1, 8, 5, 3);
        let idx = RetrievalIndex::build(&ds.actions, Backend::LinearScan).unwrap();
        let q = &ds.actions[2];
        let recs = recommend(&idx, q, 3, Some("a2")).unwrap();
        let w = idx.nearest(q.segments[3].as_slice(), 3, Some("a2")).unwrap().action;
        assert_eq!(recs.len(), 5);
        for (t, alt) in recs.iter().enumerate() {
            assert_eq!(alt.vector, ds.actions[w].segments[t]);
            assert_eq!(alt.source_position, t);
            assert_eq!(alt.recommender, 3);
            assert_eq!(alt.source_action_id, ds.actions[w].id);
        }
        assert_eq!(idx.query_count(), 2);
    }

    #[test]
    fn t_queries_per_action_and_t_alternatives_per_segment() {
        for n in [1usize, 3, 17, 60] {
            let train = random_set(n as u64, n, 6, 2);
            let test = random_set(99, 4, 6, 2);
            let idx = RetrievalIndex::build(&train.actions, Backend::LinearScan).unwrap();
            let aug = augment_action(&idx, &test.actions[0], &AugmentOptions::default()).unwrap();
            assert_eq!(idx.query_count(), 6);
            assert!(aug.segments.iter().all(|s| s.alternatives.len() == 6));
        }
    }

    #[test]
    fn all_false_mask_degenerates_to_plain() {
        let train = random_set(2, 5, 4, 2);
        let mut a = random_set(3, 1, 4, 2).actions.remove(0);
        a.known_outlier_mask = Some(vec![false; 4]);
        let idx = RetrievalIndex::build(&train.actions, Backend::LinearScan).unwrap();
        let opts = AugmentOptions {
            known_mask_mode: true,
            ..Default::default()
        };
        let aug = augment_action(&idx, &a, &opts).unwrap();
        assert_eq!(aug, AugmentedAction::plain(&a));
    }

    #[test]
    fn known_mask_restricts_alternatives() {
        let train = random_set(2, 5, 4, 2);
        let mut a = random_set(3, 1, 4, 2).actions.remove(0);
        a.known_outlier_mask = Some(vec![false, true, true, false]);
        let idx = RetrievalIndex::build(&train.actions, Backend::LinearScan).unwrap();
        let opts = AugmentOptions {
            known_mask_mode: true,
            exclude_masked_original: true,
            ..Default::default()
        };
        let aug = augment_action(&idx, &a, &opts).unwrap();
        let counts: Vec<_> = aug.segments.iter().map(|s| s.alternatives.len()).collect();
        assert_eq!(counts, vec![0, 4, 4, 0]);
        let allowed: Vec<_> = aug.segments.iter().map(|s| s.original_allowed).collect();
        assert_eq!(allowed, vec![true, false, false, true]);
    }

    #[test]
    fn self_exclusion_and_pair_case() {
        let train = random_set(4, 2, 3, 2);
        let (aug_train, _, _) = augment_dataset(&train, &train, &AugmentOptions::default()).unwrap();
        assert_eq!(aug_train.len(), 2);
        for (a, other) in aug_train.iter().zip(["a1", "a0"]) {
            for s in &a.segments {
                assert!(s.alternatives.iter().all(|x| x.source_action_id == other));
            }
        }
    }

    #[test]
    fn dataset_query_count() {
        let train = random_set(5, 9, 4, 3);
        let test = random_set(6, 5, 4, 3);
        let (_, _, idx) = augment_dataset(&train, &test, &AugmentOptions::default()).unwrap();
        assert_eq!(idx.query_count(), 9 * 4 + 5 * 4);
    }

    #[test]
    fn duplicate_window_appends_neighbours() {
        let train = random_set(7, 6, 5, 2);
        let test = random_set(8, 1, 5, 2);
        let idx = RetrievalIndex::build(&train.actions, Backend::LinearScan).unwrap();
        let base = augment_action(&idx, &test.actions[0], &AugmentOptions::default()).unwrap();
        let wide = augment_action(
            &idx,
            &test.actions[0],
            &AugmentOptions {
                duplicate_window: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(idx.query_count(), 10);
        let counts: Vec<_> = wide.segments.iter().map(|s| s.alternatives.len()).collect();
        assert_eq!(counts, vec![10, 15, 15, 15, 10]);
        // own alternatives first, then those of t-1, then t+1
        let s2 = &wide.segments[2].alternatives;
        assert_eq!(&s2[..5], &base.segments[2].alternatives[..]);
        assert_eq!(&s2[5..10], &base.segments[1].alternatives[..]);
        assert_eq!(&s2[10..], &base.segments[3].alternatives[..]);
    }

    #[test]
    fn noise_free_alternatives_share_the_class() {
        let ds = generate_synthetic_dataset::<f64>(&SyntheticSpec {
            num_classes: 3,
            actions_per_class: 4,
            segments: 5,
            dim: 4,
            true_poses: 2,
            noise_std: 0.0,
            seed: 3,
        })
        .unwrap();
        let (aug, _, _) = augment_dataset(&ds, &ds, &AugmentOptions::default()).unwrap();
        for a in &aug {
            for s in &a.segments {
                assert!(s.alternatives.iter().all(|x| x.source_label == a.label));
            }
        }
    }

    #[test]
    fn provenance_points_at_real_segments_and_is_deterministic() {
        let train = random_set(9, 7, 4, 3);
        let test = random_set(10, 3, 4, 3);
        let opts = AugmentOptions {
            duplicate_window: 2,
            ..Default::default()
        };
        let (a1, b1, _) = augment_dataset(&train, &test, &opts).unwrap();
        let (a2, b2, _) = augment_dataset(&train, &test, &opts).unwrap();
        assert_eq!((&a1, &b1), (&a2, &b2));
        for x in a1.iter().chain(&b1) {
            for s in &x.segments {
                for alt in &s.alternatives {
                    let src = train.actions.iter().find(|a| a.id == alt.source_action_id).unwrap();
                    let v = &src.segments[alt.source_position];
                    assert!(v.0.iter().zip(&alt.vector.0).all(|(p, q)| p.to_bits() == q.to_bits()));
                }
            }
        }
    }
}
