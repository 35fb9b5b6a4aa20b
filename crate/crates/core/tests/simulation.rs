mod common;

use common::ou;
use driftclass::prelude::*;
use driftclass::sde::{class_counts, euler_maruyama, ClassSizes};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// Sums consecutive pairs of increments.
fn coarsen(fine: &[f64]) -> Vec<f64> {
    fine.chunks_exact(2).map(|p| p[0] + p[1]).collect()
}

#[test]
fn strong_error_shrinks_under_dyadic_refinement() {
    let spec = ou(1.0);
    let finest = 1usize << 10;
    let levels = [16usize, 32, 64, 128, 256];
    let mut gaps = vec![0.0; levels.len()];
    let paths = 2000;
    let mut rng = SeedKey::new(3).rng();
    for _ in 0..paths {
        let fine: Vec<f64> = (0..finest)
            .map(|_| (1.0 / finest as f64).sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut by_level = vec![fine];
        while by_level.last().unwrap().len() > levels[0] {
            let c = coarsen(by_level.last().unwrap());
            by_level.push(c);
        }
        let final_state = |m: usize| -> f64 {
            let inc = by_level.iter().find(|v| v.len() == m).unwrap();
            *euler_maruyama(&spec, 0, &[1.0], 1.0, inc)
                .unwrap()
                .state(m)
                .first()
                .unwrap()
        };
        for (i, &m) in levels.iter().enumerate() {
            gaps[i] += (final_state(m) - final_state(2 * m)).abs() / paths as f64;
        }
    }
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}, gaps {gaps:?}");
    }
}

#[test]
fn deterministic_recursion_without_noise() {
    let spec = ModelSpec::new(
        2,
        DriftFamily::MeanReverting { rates: vec![0.7] },
        Diffusion::Scaled(0.0),
        InitialLaw::PointMass(vec![1.0, -2.0]),
        vec![1.0],
    )
    .unwrap();
    let path = simulate_path(&spec, 0, 50, 1.0, &mut SeedKey::new(0).rng()).unwrap();
    let mut x = [1.0f64, -2.0];
    for m in 0..=50 {
        assert_eq!(path.state(m), &x[..]);
        for v in &mut x {
            *v += -0.7 * *v * 0.02;
        }
    }
}

#[test]
fn multinomial_means() {
    let spec = ModelSpec::double_layer(1, 5.0).unwrap();
    let mut totals = [0usize; 3];
    let seeds = 10_000;
    for s in 0..seeds {
        let c = class_counts(&spec, ClassSizes::Multinomial(99), SeedKey::new(s)).unwrap();
        assert_eq!(c.iter().sum::<usize>(), 99);
        for (t, v) in totals.iter_mut().zip(c) {
            *t += v;
        }
    }
    for t in totals {
        assert!((t as f64 / seeds as f64 - 33.0).abs() < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_drift_paths_are_linear(c in -3.0f64..3.0, x0 in -2.0f64..2.0, steps in 1usize..200) {
        let spec = ModelSpec::new(
            1,
            DriftFamily::Constant { values: vec![vec![c]] },
            Diffusion::Scaled(0.0),
            InitialLaw::PointMass(vec![x0]),
            vec![1.0],
        ).unwrap();
        let path = simulate_path(&spec, 0, steps, 1.0, &mut SeedKey::new(1).rng()).unwrap();
        let delta = 1.0 / steps as f64;
        for m in 0..=steps {
            prop_assert!((path.state(m)[0] - (x0 + c * delta * m as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn datasets_repeat_per_seed(seed in any::<u64>(), n in 1usize..40) {
        let spec = ModelSpec::cosine_squared(2.5).unwrap();
        let a = generate_dataset(&spec, ClassSizes::Multinomial(n), 20, 1.0, SeedKey::new(seed)).unwrap();
        let b = generate_dataset(&spec, ClassSizes::Multinomial(n), 20, 1.0, SeedKey::new(seed)).unwrap();
        prop_assert_eq!(a.counts().iter().sum::<usize>(), n);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn drift_evaluation_is_pure(x in prop::collection::vec(-4.0f64..4.0, 3), k in 0usize..3) {
        let spec = ModelSpec::double_layer(3, 5.0).unwrap();
        let a = spec.eval_drift(k, &x).unwrap();
        let b = spec.eval_drift(k, &x).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn ou_terminal_variance() {
    let (var, exact) = common::ou_variance();
    assert!((var - exact).abs() <= 0.03, "{var} vs {exact}");
}
