//! Oracle checks shared by the test targets and the acceptance run.
#![allow(dead_code)]

use std::sync::Arc;

use driftclass::nn::{train_drift_estimator_monitored, EpochRecord, Phase, SupportBox, TrainMonitor};
use driftclass::prelude::*;
use driftclass::sde::{MatrixField, VectorField};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn random_net(widths: &[usize], seed: u64) -> MlpParams {
    MlpParams::init(widths, 1.0, 1e6, SupportBox::Unbounded, &mut SeedKey::new(seed).rng()).unwrap()
}

/// `max |g - fd| / max(|g|, |fd|, 1e-5)`. The floor keeps coordinates far
/// below the rounding level of the differenced losses (about `eps * loss / h`)
/// from dominating.
pub fn worst_relative_error(net: &MlpParams, xs: &[f64], ys: &[f64], h: f64) -> f64 {
    let g = net.mse_grad(xs, ys).unwrap();
    let mut worst: f64 = 0.0;
    for (j, &gj) in g.iter().enumerate() {
        let mut p = net.params().to_vec();
        p[j] += h;
        let mut plus = net.clone();
        plus.set_params(p.clone()).unwrap();
        p[j] -= 2.0 * h;
        let mut minus = net.clone();
        minus.set_params(p).unwrap();
        let fd = (plus.mse(xs, ys).unwrap() - minus.mse(xs, ys).unwrap()) / (2.0 * h);
        let scale = gj.abs().max(fd.abs()).max(1e-5);
        worst = worst.max((gj - fd).abs() / scale);
    }
    worst
}

/// Worst gradient error over 100 random networks of the default shape, each
/// evaluated on inputs at least `1e-3` away from every ReLU kink.
pub fn worst_gradient_error() -> f64 {
    let mut rng = SeedKey::new(5).rng();
    let mut checked = 0;
    let mut attempt = 0u64;
    let mut worst: f64 = 0.0;
    while checked < 100 {
        attempt += 1;
        let d = 1 + (attempt % 3) as usize;
        let net = random_net(&[d, 16, 32, 32, 16, 1], attempt);
        let xs: Vec<f64> = (0..4 * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ys: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let near_kink = xs
            .chunks(d)
            .any(|x| net.hidden_preactivations(x).iter().any(|z| z.abs() <= 1e-3));
        if near_kink {
            continue;
        }
        worst = worst.max(worst_relative_error(&net, &xs, &ys, 1e-5));
        checked += 1;
    }
    worst
}

#[derive(Default)]
pub struct Recorder {
    pub steps: usize,
    pub violations: usize,
    pub select_losses: Vec<f64>,
}

impl TrainMonitor for Recorder {
    fn on_step(&mut self, _coord: usize, _phase: Phase, net: &MlpParams) {
        self.steps += 1;
        if net.max_abs_param() > 1.0 || net.nonzero_count() > net.sparsity_budget() {
            self.violations += 1;
        }
    }

    fn on_epoch(&mut self, record: &EpochRecord) {
        if record.phase == Phase::Select {
            self.select_losses.push(record.train_loss);
        }
    }
}

/// Trains one two-dimensional drift while checking the sparse class after
/// every optimiser step. Returns the recorder and the final estimator.
pub fn monitored_run() -> (Recorder, DriftEstimator) {
    let spec = ModelSpec::double_layer(2, 5.0).unwrap();
    let data = generate_dataset(&spec, ClassSizes::Balanced(12), 50, 1.0, SeedKey::new(4)).unwrap();
    let cfg = TrainConfig {
        max_epochs: 15,
        patience: 5,
        batch_size: 64,
        seed: 6,
        ..TrainConfig::default()
    };
    let mut rec = Recorder::default();
    let est = train_drift_estimator_monitored(data.class(1), 1, &DriftArchitecture::default(), &cfg, &mut rec).unwrap();
    (rec, est)
}

/// Random affine drifts and a state-dependent nonsingular `sigma` in `d = 3`.
pub struct Instance {
    pub spec: ModelSpec,
    a: Vec<DMatrix<f64>>,
    c: Vec<DVector<f64>>,
    s0: DMatrix<f64>,
}

fn sigma_at(s0: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    let mut s = s0.clone();
    for i in 0..3 {
        s[(i, i)] += 0.3 * x[i].sin();
    }
    s
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = SeedKey::new(seed).rng();
    let mut rand_mat = |shift: f64| {
        DMatrix::from_fn(3, 3, |i, j| {
            rng.random_range(-1.0..1.0) + if i == j { shift } else { 0.0 }
        })
    };
    let a: Vec<DMatrix<f64>> = (0..2).map(|_| rand_mat(0.0)).collect();
    let s0 = rand_mat(2.5);
    let mut rng = SeedKey::new(seed).child(1).rng();
    let c: Vec<DVector<f64>> = (0..2)
        .map(|_| DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let fields: Vec<VectorField> = (0..2)
        .map(|k| {
            let (a, c) = (a[k].clone(), c[k].clone());
            Arc::new(move |x: &[f64], out: &mut [f64]| {
                let v = &a * DVector::from_column_slice(x) + &c;
                out.copy_from_slice(v.as_slice());
            }) as VectorField
        })
        .collect();
    let s = s0.clone();
    let sigma: MatrixField = Arc::new(move |x: &[f64], out: &mut [f64]| {
        let m = sigma_at(&s, x);
        for i in 0..3 {
            for j in 0..3 {
                out[i * 3 + j] = m[(i, j)];
            }
        }
    });
    let spec = ModelSpec::new(
        3,
        DriftFamily::Custom(fields),
        Diffusion::CustomMatrix(sigma),
        InitialLaw::StandardGaussian,
        vec![0.5, 0.5],
    )
    .unwrap();
    Instance { spec, a, c, s0 }
}

/// Per-step loop with an explicit inverse of `a = sigma sigma^T`.
pub fn brute_force(inst: &Instance, k: usize, path: &Trajectory) -> f64 {
    let mut total = 0.0;
    for m in 0..path.steps() {
        let x = DVector::from_column_slice(path.state(m));
        let dx = DVector::from_column_slice(path.state(m + 1)) - &x;
        let b = &inst.a[k] * &x + &inst.c[k];
        let s = sigma_at(&inst.s0, path.state(m));
        let inv = (&s * s.transpose()).try_inverse().unwrap();
        total += (b.transpose() * &inv * dx)[(0, 0)] - 0.5 * path.delta() * (b.transpose() * &inv * &b)[(0, 0)];
    }
    total
}

/// Largest `|fast - slow| / max(|slow|, 1)` over 100 instances and both classes.
pub fn worst_score_gap() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let inst = instance(seed);
        let mut rng = SeedKey::new(seed).child(2).rng();
        let path = simulate_path(&inst.spec, seed as usize % 2, 40, 1.0, &mut rng).unwrap();
        for class in 0..2 {
            let fast =
                score_discretized(&DriftEvaluator::truth(&inst.spec, class).unwrap(), &inst.spec, &path).unwrap();
            let slow = brute_force(&inst, class, &path);
            worst = worst.max((fast - slow).abs() / slow.abs().max(1.0));
        }
    }
    worst
}

pub fn ou(x0: f64) -> ModelSpec {
    ModelSpec::new(
        1,
        DriftFamily::MeanReverting { rates: vec![1.0] },
        Diffusion::Identity,
        InitialLaw::PointMass(vec![x0]),
        vec![1.0],
    )
    .unwrap()
}

/// Sample variance of `X_1` for `dX = -X dt + dW`, `X_0 = 0`, over `10^4`
/// paths, and the exact value `(1 - e^{-2}) / 2`.
pub fn ou_variance() -> (f64, f64) {
    let spec = ou(0.0);
    let mut rng = SeedKey::new(11).rng();
    let finals: Vec<f64> = (0..10_000)
        .map(|_| simulate_path(&spec, 0, 100, 1.0, &mut rng).unwrap().state(100)[0])
        .collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (finals.len() - 1) as f64;
    (var, (1.0 - (-2.0f64).exp()) / 2.0)
}
