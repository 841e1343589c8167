use ahcrf::features::{generate_synthetic_dataset, Dataset, SyntheticSpec};
use ahcrf::harness::{inject_corruption, ConfusionMatrix, CorruptionKind, CorruptionSpec};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = CorruptionKind> {
    prop_oneof![
        Just(CorruptionKind::Gap),
        Just(CorruptionKind::Truncate),
        Just(CorruptionKind::RandomSegments),
        Just(CorruptionKind::NoiseOverlay),
    ]
}

fn small_dataset(seed: u64, t: usize) -> Dataset<f64> {
    generate_synthetic_dataset(&SyntheticSpec {
        num_classes: 2,
        actions_per_class: 4,
        segments: t,
        dim: 3,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uncorrupted_segments_are_bitwise_unchanged(
        kind in kind(),
        ratio in 0.0..=0.8f64,
        t in 1usize..12,
        fraction in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let data = small_dataset(seed % 1000, t);
        let spec = CorruptionSpec { kind, ratio, seed, action_fraction: fraction, ..CorruptionSpec::default() };
        let out = inject_corruption(&data, &spec).unwrap();
        for ((orig, new), mask) in data.actions.iter().zip(&out.dataset.actions).zip(&out.masks) {
            let flagged = mask.iter().filter(|&&m| m).count();
            prop_assert!(flagged == 0 || flagged == spec.run_length(t));
            for ((a, b), &m) in orig.segments.iter().zip(&new.segments).zip(mask) {
                if !m {
                    prop_assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
                }
            }
        }
    }

    #[test]
    fn known_and_unknown_modes_differ_only_in_visibility(
        kind in kind(),
        ratio in 0.0..=0.8f64,
        seed in any::<u64>(),
    ) {
        let data = small_dataset(3, 8);
        let hidden = CorruptionSpec { kind, ratio, seed, ..CorruptionSpec::default() };
        let shown = CorruptionSpec { known: true, ..hidden.clone() };
        let a = inject_corruption(&data, &hidden).unwrap();
        let b = inject_corruption(&data, &shown).unwrap();
        prop_assert_eq!(&a.masks, &b.masks);
        for ((x, y), m) in a.dataset.actions.iter().zip(&b.dataset.actions).zip(&b.masks) {
            prop_assert_eq!(&x.segments, &y.segments);
            prop_assert!(x.known_outlier_mask.is_none());
            prop_assert_eq!(y.known_outlier_mask.as_ref(), Some(m));
        }
    }

    #[test]
    fn confusion_accuracy_is_the_diagonal_share(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 0..60),
    ) {
        let m = ConfusionMatrix::from_pairs(4, pairs.iter().copied()).unwrap();
        prop_assert_eq!(m.total(), pairs.len());
        let hits = pairs.iter().filter(|(a, b)| a == b).count();
        match m.accuracy() {
            None => prop_assert!(pairs.is_empty()),
            Some(acc) => prop_assert_eq!(acc, hits as f64 / pairs.len() as f64),
        }
        let (left, right) = pairs.split_at(pairs.len() / 2);
        let mut merged = ConfusionMatrix::from_pairs(4, left.iter().copied()).unwrap();
        merged.merge(&ConfusionMatrix::from_pairs(4, right.iter().copied()).unwrap());
        prop_assert_eq!(merged, m);
    }
}
