use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{scalar_sigma, Diffusion, ModelSpec};
use crate::error::{Error, Result};

/// One discretely observed path: `M + 1` states on the grid `t_m = m * delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    delta: f64,
    horizon: f64,
    /// Row-major `(M + 1) x d`.
    states: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize, horizon: f64, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || !states.len().is_multiple_of(dim) || states.len() / dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "a trajectory needs at least two rows of width {dim}, got {} values",
                states.len()
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let steps = states.len() / dim - 1;
        Ok(Trajectory {
            dim,
            delta: horizon / steps as f64,
            horizon,
            states,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps `M`; there are `M + 1` states.
    pub fn steps(&self) -> usize {
        self.states.len() / self.dim - 1
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn state(&self, m: usize) -> &[f64] {
        &self.states[m * self.dim..(m + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    /// The sub-path on grid indices `start..=end`.
    pub fn segment(&self, start: usize, end: usize) -> Result<Trajectory> {
        if start >= end || end > self.steps() {
            return Err(Error::InvalidArgument(format!(
                "segment {start}..={end} outside 0..={}",
                self.steps()
            )));
        }
        Ok(Trajectory {
            dim: self.dim,
            delta: self.delta,
            horizon: self.delta * (end - start) as f64,
            states: self.states[start * self.dim..(end + 1) * self.dim].to_vec(),
        })
    }
}

/// Euler-Maruyama driven by prescribed Brownian increments.
///
/// `increments` holds `M` rows of `d` values `W_{t_{m+1}} - W_{t_m}`; the
/// scheme is `X_{m+1} = X_m + b_k(X_m) delta + sigma(X_m) dW_m`.
pub fn euler_maruyama(spec: &ModelSpec, k: usize, x0: &[f64], horizon: f64, increments: &[f64]) -> Result<Trajectory> {
    let d = spec.dim();
    if k >= spec.num_classes() {
        return Err(Error::UnknownLabel {
            label: k,
            num_classes: spec.num_classes(),
        });
    }
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    if increments.is_empty() || !increments.len().is_multiple_of(d) {
        return Err(Error::InvalidArgument(
            "increments must hold M >= 1 rows of width d".into(),
        ));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let steps = increments.len() / d;
    let delta = horizon / steps as f64;

    let mut states = Vec::with_capacity((steps + 1) * d);
    states.extend_from_slice(x0);
    let mut drift = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    for (m, dw) in increments.chunks_exact(d).enumerate() {
        let x = &states[m * d..(m + 1) * d];
        spec.drift_unchecked(k, x, &mut drift);
        let mut next: Vec<f64> = x.iter().zip(&drift).map(|(xi, bi)| xi + bi * delta).collect();
        match spec.diffusion() {
            Diffusion::Identity => next.iter_mut().zip(dw).for_each(|(n, w)| *n += w),
            Diffusion::Scaled(c) => next.iter_mut().zip(dw).for_each(|(n, w)| *n += c * w),
            Diffusion::ScalarFn => next[0] += scalar_sigma(x[0]) * dw[0],
            Diffusion::CustomMatrix(f) => {
                f(x, &mut sigma);
                for (i, n) in next.iter_mut().enumerate() {
                    *n += crate::linalg::dot(&sigma[i * d..(i + 1) * d], dw);
                }
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: m + 1 });
        }
        states.extend_from_slice(&next);
    }
    Ok(Trajectory {
        dim: d,
        delta,
        horizon,
        states,
    })
}

/// Simulates one path of class `k` with `steps` Euler-Maruyama steps over `[0, horizon]`.
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &ModelSpec,
    k: usize,
    steps: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let x0 = spec.sample_initial(rng);
    let scale = (horizon / steps as f64).sqrt();
    let increments: Vec<f64> = (0..steps * spec.dim())
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    euler_maruyama(spec, k, &x0, horizon, &increments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedKey;
    use crate::sde::{DriftFamily, InitialLaw};
    use std::sync::Arc;

    fn constant_drift(c: f64, sigma: f64, x0: f64) -> ModelSpec {
        ModelSpec::new(
            1,
            DriftFamily::Constant { values: vec![vec![c]] },
            Diffusion::Scaled(sigma),
            InitialLaw::PointMass(vec![x0]),
            vec![1.0],
        )
        .unwrap()
    }

    fn ou() -> ModelSpec {
        ModelSpec::new(
            1,
            DriftFamily::MeanReverting { rates: vec![1.0] },
            Diffusion::Identity,
            InitialLaw::PointMass(vec![0.0]),
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn frozen_path_is_constant() {
        let spec = constant_drift(0.0, 0.0, 2.5);
        let p = simulate_path(&spec, 0, 50, 1.0, &mut SeedKey::new(1).rng()).unwrap();
        assert_eq!(p.steps(), 50);
        assert!(p.states().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn noiseless_unit_drift_follows_euler_recursion() {
        let spec = constant_drift(1.0, 0.0, 0.0);
        let p = simulate_path(&spec, 0, 100, 1.0, &mut SeedKey::new(1).rng()).unwrap();
        assert_eq!(p.delta(), 0.01);
        let mut x = 0.0f64;
        for m in 0..=100 {
            assert_eq!(p.state(m)[0].to_bits(), x.to_bits(), "step {m}");
            assert!((p.state(m)[0] - 0.01 * m as f64).abs() < 1e-12);
            x += 1.0 * 0.01;
        }
        assert!((p.state(100)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_invariants() {
        let spec = ModelSpec::double_layer(3, 5.0).unwrap();
        let p = simulate_path(&spec, 1, 37, 2.0, &mut SeedKey::new(4).rng()).unwrap();
        assert_eq!(p.states().len(), 38 * 3);
        assert!((p.delta() * 37.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_non_finite_state() {
        let spec = ModelSpec::new(
            1,
            DriftFamily::Custom(vec![Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = if x[0] > 0.5 { f64::INFINITY } else { 1.0 }
            })]),
            Diffusion::Scaled(0.0),
            InitialLaw::PointMass(vec![0.0]),
            vec![1.0],
        )
        .unwrap();
        let err = simulate_path(&spec, 0, 10, 1.0, &mut SeedKey::new(0).rng()).unwrap_err();
        // 0 -> 0.1 -> ... -> 0.6 (step 6), then infinite at step 7
        assert!(matches!(err, Error::NonFiniteState { step: 7 }), "{err}");
    }

    #[test]
    fn ou_terminal_variance() {
        let spec = ou();
        let key = SeedKey::new(2024);
        let n = 10_000;
        let finals: Vec<f64> = (0..n)
            .map(|i| {
                let p = simulate_path(&spec, 0, 100, 1.0, &mut key.child(i).rng()).unwrap();
                p.state(100)[0]
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / n as f64;
        let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((var - exact).abs() < 0.03, "var {var} vs {exact}");
    }

    #[test]
    fn segment_bounds() {
        let spec = ou();
        let p = simulate_path(&spec, 0, 10, 1.0, &mut SeedKey::new(2).rng()).unwrap();
        let s = p.segment(3, 7).unwrap();
        assert_eq!(s.steps(), 4);
        assert_eq!(s.state(0), p.state(3));
        assert!(p.segment(7, 7).is_err());
        assert!(p.segment(0, 11).is_err());
    }
}
