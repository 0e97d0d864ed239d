use proptest::prelude::*;
use zla_core::datagen::{load_dataset, make_discrete_world, save_dataset, synthesize, SyntheticSpec};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn empirical_means_approach_true_means_at_low_noise() {
    let spec = SyntheticSpec {
        train_per_class: 2000,
        test_per_class: 1,
        noise: 0.1,
        ..SyntheticSpec::default()
    };
    let (ds, truth) = synthesize(&spec).unwrap();
    for (y, m) in ds.train_class_means().into_iter().enumerate() {
        let Some(m) = m else { continue };
        let c = cosine(&m, truth.class_means.row_slice(y));
        assert!(c >= 0.99, "class {y}: cosine {c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn discrete_world_frequencies_are_posterior_means(
        points in 5usize..40,
        seen in 1usize..4,
        unseen in 1usize..3,
        skew in 0.05f64..2.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(points >= seen + unseen);
        let w = make_discrete_world(points, seen, unseen, skew, seed).unwrap();
        prop_assert!((w.class_freq().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for y in 0..w.classes() {
            let mean = w.posterior().iter().map(|r| r[y]).sum::<f64>() / points as f64;
            prop_assert!((mean - w.class_freq()[y]).abs() <= 1e-12);
        }
    }

    #[test]
    fn save_load_round_trip_is_identity(
        seen in 1usize..4,
        unseen in 1usize..3,
        per in 1usize..5,
        da in 1usize..4,
        dx in 2usize..5,
        noise in 0.01f64..2.0,
        seed in any::<u64>(),
    ) {
        let spec = SyntheticSpec {
            seen,
            unseen,
            train_per_class: per,
            test_per_class: per,
            semantic_dim: da,
            feature_dim: dx,
            hidden: 4,
            noise,
            seed,
            ..SyntheticSpec::default()
        };
        let (ds, _) = synthesize(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        prop_assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }
}
