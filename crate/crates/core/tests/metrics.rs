use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zla_core::datagen::{make_discrete_world, ClassInfo, ClassTable, DiscreteWorld, GzslDataset, Split};
use zla_core::metrics::{
    evaluate, exact_accuracy, harmonic_mean, jensen_bounds, one_hot_rule, rule_comparison, MetricsError,
};
use zla_core::numgrad::Tensor;
use zla_core::zla::PriorConfig;

fn table(is_seen: &[bool]) -> ClassTable {
    ClassTable::new(
        is_seen
            .iter()
            .enumerate()
            .map(|(id, &s)| ClassInfo { id, name: format!("c{id}"), is_seen: s, semantic: vec![id as f64] })
            .collect(),
    )
    .unwrap()
}

fn split(labels: Vec<usize>, rows: Vec<Vec<f64>>, dim: usize) -> Split {
    let features = if rows.is_empty() { Tensor::zeros(0, dim) } else { Tensor::from_rows(&rows).unwrap() };
    Split::new(labels, features)
}

fn world_priors(w: &DiscreteWorld, scale: f64) -> PriorConfig {
    let (ms, mu) = (w.domain_mass(true), w.domain_mass(false));
    let cond = w
        .class_freq()
        .iter()
        .zip(w.is_seen())
        .map(|(p, &s)| p / if s { ms } else { mu })
        .collect();
    PriorConfig::from_domain_weights(scale * ms, scale * mu, w.is_seen().to_vec(), cond).unwrap()
}

fn positive_q(rng: &mut ChaCha8Rng, points: usize, classes: usize) -> Vec<Vec<f64>> {
    (0..points)
        .map(|_| {
            let row: Vec<f64> = (0..classes).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

proptest! {
    #[test]
    fn evaluate_matches_naive_counting(
        seen_rows in prop::collection::vec((0usize..3, 0usize..5), 1..40),
        unseen_rows in prop::collection::vec((3usize..5, 0usize..5), 1..40),
    ) {
        let is_seen = [true, true, true, false, false];
        // the single feature carries the prediction
        let mk = |rows: &[(usize, usize)]| {
            split(rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| vec![r.1 as f64]).collect(), 1)
        };
        let ds = GzslDataset::new(table(&is_seen), mk(&seen_rows[..1]), mk(&seen_rows), mk(&unseen_rows)).unwrap();
        let report = evaluate(&|row: &[f64]| row[0] as usize, &ds).unwrap();

        let all: Vec<(usize, usize)> = seen_rows.iter().chain(&unseen_rows).copied().collect();
        let mut accs = [Vec::new(), Vec::new()];
        for y in 0..5 {
            let of_y: Vec<_> = all.iter().filter(|r| r.0 == y).collect();
            if !of_y.is_empty() {
                let hits = of_y.iter().filter(|r| r.1 == y).count();
                accs[usize::from(!is_seen[y])].push(hits as f64 / of_y.len() as f64);
            }
        }
        let avg = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let (s, u) = (avg(&accs[0]), avg(&accs[1]));
        let h = if s == 0.0 || u == 0.0 { 0.0 } else { 2.0 * s * u / (s + u) };
        prop_assert_eq!(report.acc_seen, s);
        prop_assert_eq!(report.acc_unseen, u);
        prop_assert!((report.acc_h - h).abs() <= 1e-15);
    }

    #[test]
    fn harmonic_mean_properties(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        prop_assert_eq!(harmonic_mean(a, b), harmonic_mean(b, a));
        prop_assert_eq!(harmonic_mean(a, 0.0), 0.0);
        prop_assert!((harmonic_mean(a, a) - a).abs() <= 1e-15);
        prop_assert!(harmonic_mean(a, b) <= a.max(b) + 1e-15);
        prop_assert!(harmonic_mean(a, b) >= a.min(b) - 1e-15);
    }
}

#[test]
fn harmonic_of_reference_accuracies() {
    assert!((harmonic_mean(0.822, 0.654) - 0.728).abs() <= 5e-4);
    assert_eq!(harmonic_mean(0.5, 0.5), 0.5);
}

#[test]
fn exact_accuracy_agrees_with_sampled_evaluation() {
    let world = make_discrete_world(40, 4, 3, 0.5, 21).unwrap();
    let rule = |row: &[f64]| argmax(row);
    let q = one_hot_rule(&world, rule);
    let exact = exact_accuracy(&world, &q).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (m, k) = (world.points(), world.classes());
    let (mut seen, mut unseen) = ((Vec::new(), Vec::new()), (Vec::new(), Vec::new()));
    for _ in 0..10_000 {
        let x = rng.random_range(0..m);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut y = k - 1;
        for (c, &p) in world.posterior_row(x).iter().enumerate() {
            acc += p;
            if u < acc {
                y = c;
                break;
            }
        }
        let mut feat = vec![0.0; m];
        feat[x] = 1.0;
        let target = if world.is_seen()[y] { &mut seen } else { &mut unseen };
        target.0.push(y);
        target.1.push(feat);
    }
    let train = split(vec![seen.0[0]], vec![seen.1[0].clone()], m);
    let ds = GzslDataset::new(table(world.is_seen()), train, split(seen.0, seen.1, m), split(unseen.0, unseen.1, m))
        .unwrap();
    let predict = |feat: &[f64]| rule(world.posterior_row(argmax(feat)));
    let sampled = evaluate(&predict, &ds).unwrap();
    assert!((sampled.acc_seen - exact.acc_seen).abs() <= 0.02, "{} {}", sampled.acc_seen, exact.acc_seen);
    assert!((sampled.acc_unseen - exact.acc_unseen).abs() <= 0.02, "{} {}", sampled.acc_unseen, exact.acc_unseen);
}

#[test]
fn bound_chain_holds_on_seeded_worlds() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (points, seen, unseen) = (rng.random_range(8..30), rng.random_range(1..5), rng.random_range(1..4));
        let skew = rng.random_range(0.1..2.0);
        let world = make_discrete_world(points, seen, unseen, skew, seed).unwrap();
        let q = positive_q(&mut rng, points, seen + unseen);
        let r = jensen_bounds(&world, &q, &world_priors(&world, 1.0)).unwrap();
        assert!(r.min_slack() >= -1e-10, "seed {seed}: {r:?}");
        assert!(r.h_lower_bound <= r.exact.acc_h + 1e-10);
    }
}

#[test]
fn bound_chain_is_tight_in_a_constant_ratio_world() {
    let post = vec![0.1, 0.3, 0.2, 0.25, 0.15];
    let world = DiscreteWorld::from_posterior(vec![post; 6], vec![true, true, true, false, false]).unwrap();
    let q = vec![vec![0.3, 0.3, 0.3, 0.05, 0.05]; 6];
    let r = jensen_bounds(&world, &q, &world_priors(&world, 1.0)).unwrap();
    for slack in [r.slack_seen, r.slack_unseen, r.slack_h] {
        assert!(slack.abs() <= 1e-12, "{r:?}");
    }
    assert!((r.exact.acc_seen - 0.3).abs() <= 1e-12);
    assert!((r.exact.acc_unseen - 0.05).abs() <= 1e-12);
}

#[test]
fn rescaling_both_domain_weights_cancels() {
    let world = make_discrete_world(20, 3, 2, 0.4, 9).unwrap();
    let q = positive_q(&mut ChaCha8Rng::seed_from_u64(9), 20, 5);
    let a = jensen_bounds(&world, &q, &world_priors(&world, 1.0)).unwrap();
    let b = jensen_bounds(&world, &q, &world_priors(&world, 37.0)).unwrap();
    assert!((a.inv_seen_bound - b.inv_seen_bound).abs() <= 1e-12);
    assert!((a.inv_unseen_bound - b.inv_unseen_bound).abs() <= 1e-12);
}

#[test]
fn larger_sigma_improves_the_harmonic_mean_under_unseen_skew() {
    let world = make_discrete_world(400, 6, 4, 0.2, 17).unwrap();
    let rows = rule_comparison(&world, &[0.5, 2.0, 5.0, 10.0, 100.0]).unwrap();
    let base = rows.iter().find(|r| r.sigma == 1.0).unwrap();
    let bayes = exact_accuracy(&world, &one_hot_rule(&world, argmax)).unwrap();
    assert_eq!(base.acc_h, bayes.acc_h);
    assert!(rows.iter().any(|r| r.sigma > 1.0 && r.acc_h > base.acc_h));
    for w in rows.windows(2) {
        assert!(w[1].acc_seen <= w[0].acc_seen + 1e-12);
        assert!(w[1].acc_unseen >= w[0].acc_unseen - 1e-12);
    }
}

#[test]
fn empty_test_split_is_refused() {
    let is_seen = [true, false];
    let ds = GzslDataset::new(
        table(&is_seen),
        split(vec![0], vec![vec![1.0]], 1),
        split(vec![0], vec![vec![1.0]], 1),
        split(vec![], vec![], 1),
    )
    .unwrap();
    assert!(matches!(evaluate(&|_: &[f64]| 0, &ds), Err(MetricsError::EmptySplit(_))));
    let ds2 = GzslDataset::new(
        table(&is_seen),
        split(vec![0], vec![vec![1.0]], 1),
        split(vec![0], vec![vec![1.0]], 1),
        split(vec![1], vec![vec![1.0]], 1),
    )
    .unwrap();
    assert!(matches!(evaluate(&|_: &[f64]| 7, &ds2), Err(MetricsError::PredictionRange { class: 7, .. })));
}
