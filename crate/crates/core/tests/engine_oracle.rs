mod common;

use ahcrf::augmentation::{AugmentedAction, AugmentedSegment};
use ahcrf::engine::{
    class_posterior, log_partition, map_decode, posterior_marginals, predict, CompositeState,
    ModelParameters,
};
use ahcrf::features::{ActionSequence, FeatureVector};
use common::*;
use rand::Rng;

#[test]
fn inference_matches_enumeration() {
    let mut rng = rng(2024);
    for _ in 0..150 {
        let inst = random_instance(&mut rng, 3, 4, 3, 3, 5);
        let (p, a) = (&inst.params, &inst.action);
        let e = enumerate(p, a, true);
        assert!(rel_close(log_partition(a, p).unwrap(), e.log_partition, 1e-9));
        let post = class_posterior(a, p).unwrap();
        for y in 0..p.num_classes() {
            assert!(rel_close(post.log_posterior[y], e.class_scores[y] - e.log_partition, 1e-9));
            let m = posterior_marginals(a, y, p).unwrap();
            assert!(rel_close(m.class_log_score, e.class_scores[y], 1e-9));
            for (got, want) in m.unary.iter().zip(&e.unary[y]) {
                assert_eq!(got.len(), want.len());
                for (g, w) in got.iter().zip(want) {
                    assert!(rel_close(*g, *w, 1e-9), "{g} vs {w}");
                }
            }
            for (got, want) in m.pairwise.iter().zip(&e.pairwise[y]) {
                for (g, w) in got.iter().zip(want) {
                    assert!(rel_close(*g, *w, 1e-9));
                }
            }
            let c = map_decode(a, y, p).unwrap();
            assert_eq!(c.states, e.argmax[y].0);
            assert!(rel_close(c.potential, e.argmax[y].1, 1e-9));
        }
        let brute_pred = (0..p.num_classes())
            .fold(0, |b, y| if e.class_scores[y] > e.class_scores[b] { y } else { b });
        assert_eq!(predict(a, p).unwrap(), brute_pred);
    }
}

#[test]
fn plain_actions_match_enumeration_without_bias() {
    let mut rng = rng(7);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 3, 4, 3, 0, 4);
        let plain = inst.action.underlying();
        let e = enumerate(&inst.params, &inst.action, false);
        assert!(rel_close(log_partition(&plain, &inst.params).unwrap(), e.log_partition, 1e-9));
    }
}

#[test]
fn marginals_are_normalized_and_consistent() {
    let mut rng = rng(99);
    for _ in 0..100 {
        let inst = random_instance(&mut rng, 3, 5, 4, 3, 4);
        let post = class_posterior(&inst.action, &inst.params).unwrap();
        let total: f64 = post.posterior().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for y in 0..inst.params.num_classes() {
            let m = posterior_marginals(&inst.action, y, &inst.params).unwrap();
            for u in &m.unary {
                assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            for (t, pw) in m.pairwise.iter().enumerate() {
                let (h0, h1) = (m.unary[t].len(), m.unary[t + 1].len());
                for i in 0..h0 {
                    let row: f64 = pw[i * h1..(i + 1) * h1].iter().sum();
                    assert!((row - m.unary[t][i]).abs() < 1e-9);
                }
                for k in 0..h1 {
                    let col: f64 = (0..h0).map(|i| pw[i * h1 + k]).sum();
                    assert!((col - m.unary[t + 1][k]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn replacement_of_a_blanked_segment() {
    // pose 1 matches the alternative and carries a large class score; the
    // original of segment 1 is zeroed out.
    let mut params = ModelParameters::zeros(2, 2, 2, 0.0).unwrap();
    params.pose_mut(0).copy_from_slice(&[1.0, 0.0]);
    params.pose_mut(1).copy_from_slice(&[0.0, 3.0]);
    params.set_theta2(0, 1, 2.0);
    let seg = |orig: [f64; 2], alts: &[[f64; 2]]| AugmentedSegment {
        original: FeatureVector(orig.to_vec()),
        alternatives: alts.iter().map(|a| alternative(a.to_vec(), Some(0))).collect(),
        original_allowed: true,
    };
    let action = AugmentedAction {
        id: "a".into(),
        label: None,
        segments: vec![
            seg([0.0, 1.0], &[[0.0, 1.0], [0.0, 1.0]]),
            seg([0.0, 0.0], &[[1.0, 0.0], [0.0, 1.0]]),
            seg([0.0, 1.0], &[[0.0, 1.0], [1.0, 0.0]]),
        ],
        known_outlier_mask: None,
    };
    let e = enumerate(&params, &action, true);
    let c = map_decode(&action, 0, &params).unwrap();
    assert_eq!(c.states, e.argmax[0].0);
    assert_eq!(c.states[1], CompositeState { observation: 2, pose: 1 });
    assert_eq!(c.replaced().collect::<Vec<_>>(), vec![(1, 2)]);
}

#[test]
fn zero_alternatives_reduce_to_plain() {
    let mut rng = rng(5);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 3, 5, 3, 0, 4);
        let mut params = inst.params.clone();
        params.set_epsilon(0.0).unwrap();
        let plain = inst.action.underlying();
        let a = class_posterior(&inst.action, &params).unwrap();
        let b = class_posterior(&plain, &params).unwrap();
        for (x, y) in a.log_posterior.iter().zip(&b.log_posterior) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_alternatives_cancel() {
    let mut rng = rng(6);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 3, 5, 3, 0, 4);
        let plain = inst.action.underlying();
        let n_alt = rng.random_range(1..4);
        let dup = AugmentedAction {
            segments: plain
                .segments
                .iter()
                .map(|s| AugmentedSegment {
                    original: s.clone(),
                    alternatives: (0..n_alt).map(|_| alternative(s.0.clone(), None)).collect(),
                    original_allowed: true,
                })
                .collect(),
            ..inst.action.clone()
        };
        for eps in [0.0, 1.0, 10.0] {
            let mut params = inst.params.clone();
            params.set_epsilon(eps).unwrap();
            let a = class_posterior(&dup, &params).unwrap();
            let b = class_posterior(&plain, &params).unwrap();
            for (x, y) in a.log_posterior.iter().zip(&b.log_posterior) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn inlier_count_is_monotone_in_bias() {
    let mut rng = rng(8);
    for _ in 0..50 {
        let mut inst = random_instance(&mut rng, 2, 6, 3, 3, 4);
        for s in inst.action.segments.iter_mut() {
            s.original_allowed = true;
        }
        for y in 0..inst.params.num_classes() {
            let mut prev = 0;
            for eps in [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1e6] {
                inst.params.set_epsilon(eps).unwrap();
                let c = map_decode(&inst.action, y, &inst.params).unwrap();
                assert!(c.inlier_count() >= prev);
                prev = c.inlier_count();
            }
            assert_eq!(prev, inst.action.segments.len());
        }
    }
}

#[test]
fn plain_action_from_sequence() {
    let params = ModelParameters::random(2, 2, 2, 0.0, 1.0, 1).unwrap();
    let seq = ActionSequence::new("a", vec![FeatureVector(vec![1.0, 0.0])], Some(1));
    assert!(class_posterior(&seq, &params).is_ok());
    let bad = ActionSequence::new("a", vec![FeatureVector(vec![1.0])], Some(1));
    assert!(class_posterior(&bad, &params).is_err());
}
