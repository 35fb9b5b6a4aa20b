mod common;

use driftclass::prelude::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;

#[test]
fn score_is_additive_over_segments() {
    let spec = ModelSpec::cosine_squared(2.5).unwrap();
    let mut rng = SeedKey::new(4).rng();
    let path = simulate_path(&spec, 1, 100, 1.0, &mut rng).unwrap();
    let drift = DriftEvaluator::truth(&spec, 2).unwrap();
    let full = score_discretized(&drift, &spec, &path).unwrap();
    let cuts = [0, 17, 50, 51, 100];
    let parts: f64 = cuts
        .windows(2)
        .map(|w| score_discretized(&drift, &spec, &path.segment(w[0], w[1]).unwrap()).unwrap())
        .sum();
    assert!((full - parts).abs() < 1e-12 * full.abs().max(1.0));
}

#[test]
fn true_drift_plug_in_is_the_oracle() {
    let spec = ModelSpec::double_layer(2, 5.0).unwrap();
    let data = generate_dataset(&spec, ClassSizes::PerClass(200), 100, 1.0, SeedKey::new(3)).unwrap();
    let drifts = (0..3).map(|k| DriftEvaluator::truth(&spec, k).unwrap()).collect();
    let plug_in = PlugInClassifier::new(&spec, drifts, spec.priors().to_vec()).unwrap();
    let oracle = bayes_oracle(&spec).unwrap();
    for (_, p) in data.labeled() {
        assert_eq!(plug_in.predict(p).unwrap(), oracle.predict(p).unwrap());
    }
    let a = misclassification_risk(&plug_in, &data).unwrap();
    let b = misclassification_risk(&oracle, &data).unwrap();
    assert_eq!(excess_risk(&a, &b), 0.0);
}

#[test]
fn separated_constant_drifts() {
    let spec = ModelSpec::new(
        1,
        DriftFamily::Constant {
            values: vec![vec![5.0], vec![-5.0]],
        },
        Diffusion::Identity,
        InitialLaw::PointMass(vec![0.0]),
        vec![0.5, 0.5],
    )
    .unwrap();
    let data = generate_dataset(&spec, ClassSizes::PerClass(500), 100, 1.0, SeedKey::new(8)).unwrap();
    let risk = misclassification_risk(&bayes_oracle(&spec).unwrap(), &data).unwrap();
    assert!(risk.error_rate < 0.01);
}

#[test]
fn two_class_rule_compares_scores() {
    let spec = ModelSpec::cosine_squared(1.5).unwrap();
    let spec = ModelSpec::new(
        1,
        spec.drift().clone(),
        spec.diffusion().clone(),
        spec.initial_law().clone(),
        vec![1.0 / 3.0; 3],
    )
    .unwrap();
    let oracle = bayes_oracle(&spec).unwrap();
    let data = generate_dataset(&spec, ClassSizes::PerClass(100), 100, 1.0, SeedKey::new(2)).unwrap();
    let pair = PlugInClassifier::new(
        &spec,
        vec![oracle.drifts()[0].clone(), oracle.drifts()[1].clone()],
        vec![0.5, 0.5],
    )
    .unwrap();
    for (_, p) in data.labeled() {
        let s = pair.scores(p).unwrap();
        assert_eq!(pair.predict(p).unwrap() == 0, s.0[0] >= s.0[1]);
    }
}

#[test]
fn risk_ignores_test_order() {
    let spec = ModelSpec::cosine_squared(1.5).unwrap();
    let data = generate_dataset(&spec, ClassSizes::PerClass(60), 100, 1.0, SeedKey::new(6)).unwrap();
    let mut classes = data.classes().to_vec();
    let mut rng = SeedKey::new(1).rng();
    for c in &mut classes {
        c.shuffle(&mut rng);
    }
    let shuffled = LabeledDataset::from_classes(classes, 0).unwrap();
    let oracle = bayes_oracle(&spec).unwrap();
    assert_eq!(
        misclassification_risk(&oracle, &data).unwrap(),
        misclassification_risk(&oracle, &shuffled).unwrap()
    );
}

proptest! {
    #[test]
    fn softmax_normalised_and_shift_invariant(
        scores in prop::collection::vec(-800.0f64..800.0, 2..6),
        shift in -1e3f64..1e3,
        raw_priors in prop::collection::vec(0.05f64..1.0, 6),
    ) {
        let k = scores.len();
        let total: f64 = raw_priors[..k].iter().sum();
        let priors: Vec<f64> = raw_priors[..k].iter().map(|p| p / total).collect();
        let p = posteriors(&ClassScores(scores.clone()), &priors).unwrap();
        prop_assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.0.iter().all(|&v| v >= 0.0));
        let shifted = ClassScores(scores.iter().map(|s| s + shift).collect());
        let q = posteriors(&shifted, &priors).unwrap();
        for (a, b) in p.0.iter().zip(&q.0) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(classify(&p), classify(&q));
    }

    #[test]
    fn argmax_survives_increasing_maps(scores in prop::collection::vec(-5.0f64..5.0, 2..6)) {
        let k = scores.len();
        let priors = vec![1.0 / k as f64; k];
        let base = classify(&posteriors(&ClassScores(scores.clone()), &priors).unwrap());
        let mapped: Vec<f64> = scores.iter().map(|s| 3.0 * s + s.powi(3)).collect();
        let other = classify(&posteriors(&ClassScores(mapped), &priors).unwrap());
        prop_assert_eq!(base, other);
    }
}

#[test]
fn score_matches_explicit_inverse() {
    let gap = common::worst_score_gap();
    assert!(gap < 1e-10, "{gap}");
}
