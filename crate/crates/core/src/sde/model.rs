use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// `x -> out`, both of length `d`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `x -> out`, `out` a row-major `d x d` matrix.
pub type MatrixField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Scalar bump used by the double-layer drift.
#[derive(Clone)]
pub enum Bump {
    /// `u -> exp(-u^2 / 2) / sqrt(2 pi)`.
    StandardNormalPdf,
    Custom(ScalarMap),
}

impl Bump {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Bump::StandardNormalPdf => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            Bump::Custom(f) => f(u),
        }
    }
}

impl fmt::Debug for Bump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bump::StandardNormalPdf => write!(f, "StandardNormalPdf"),
            Bump::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Per-class drift vector fields.
#[derive(Clone)]
pub enum DriftFamily {
    /// `b_k(x) = -x + bump(theta (mean(x) + alpha_k)) * 1_d`.
    DoubleLayer {
        theta: f64,
        alphas: Vec<f64>,
        bump: Bump,
    },
    /// Scalar drift `b_k(x) = alpha_k theta (1/4 + 3/4 cos^2 x)`; requires `d = 1`.
    CosineSquared {
        theta: f64,
        alphas: Vec<f64>,
    },
    /// Constant drift `b_k(x) = values[k]`.
    Constant {
        values: Vec<Vec<f64>>,
    },
    /// Linear mean reversion `b_k(x) = -rates[k] x` (Ornstein-Uhlenbeck).
    MeanReverting {
        rates: Vec<f64>,
    },
    Custom(Vec<VectorField>),
}

impl DriftFamily {
    pub fn num_classes(&self) -> usize {
        match self {
            DriftFamily::DoubleLayer { alphas, .. } => alphas.len(),
            DriftFamily::CosineSquared { alphas, .. } => alphas.len(),
            DriftFamily::Constant { values } => values.len(),
            DriftFamily::MeanReverting { rates } => rates.len(),
            DriftFamily::Custom(fields) => fields.len(),
        }
    }
}

impl fmt::Debug for DriftFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftFamily::DoubleLayer { theta, alphas, bump } => f
                .debug_struct("DoubleLayer")
                .field("theta", theta)
                .field("alphas", alphas)
                .field("bump", bump)
                .finish(),
            DriftFamily::CosineSquared { theta, alphas } => f
                .debug_struct("CosineSquared")
                .field("theta", theta)
                .field("alphas", alphas)
                .finish(),
            DriftFamily::Constant { values } => f.debug_struct("Constant").field("values", values).finish(),
            DriftFamily::MeanReverting { rates } => f.debug_struct("MeanReverting").field("rates", rates).finish(),
            DriftFamily::Custom(v) => write!(f, "Custom({} fields)", v.len()),
        }
    }
}

/// Diffusion coefficient `sigma(x)`, shared by all classes and assumed known.
#[derive(Clone)]
pub enum Diffusion {
    Identity,
    /// `sigma(x) = c I_d`. `c = 0` gives deterministic paths (not scoreable).
    Scaled(f64),
    /// `sigma(x) = 0.1 + 0.9 / sqrt(1 + x^2)` as a `1 x 1` matrix; requires `d = 1`.
    ScalarFn,
    CustomMatrix(MatrixField),
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Identity => write!(f, "Identity"),
            Diffusion::Scaled(c) => write!(f, "Scaled({c})"),
            Diffusion::ScalarFn => write!(f, "ScalarFn"),
            Diffusion::CustomMatrix(_) => write!(f, "CustomMatrix(..)"),
        }
    }
}

pub(crate) fn scalar_sigma(x: f64) -> f64 {
    0.1 + 0.9 / (1.0 + x * x).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    StandardGaussian,
    PointMass(Vec<f64>),
}

/// The ground-truth generator: drifts per class, diffusion, initial law and priors.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    dim: usize,
    drift: DriftFamily,
    diffusion: Diffusion,
    initial: InitialLaw,
    priors: Vec<f64>,
}

impl ModelSpec {
    pub fn new(
        dim: usize,
        drift: DriftFamily,
        diffusion: Diffusion,
        initial: InitialLaw,
        priors: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        let k = drift.num_classes();
        if k == 0 {
            return Err(Error::InvalidModel("at least one class is required".into()));
        }
        if priors.len() != k {
            return Err(Error::InvalidModel(format!(
                "{} priors given for {k} classes",
                priors.len()
            )));
        }
        if priors.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidModel("every prior must be positive".into()));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("priors sum to {total}, not 1")));
        }
        match &drift {
            DriftFamily::CosineSquared { .. } if dim != 1 => {
                return Err(Error::InvalidModel(
                    "cosine-squared drift is defined for d = 1 only".into(),
                ))
            }
            DriftFamily::Constant { values } if values.iter().any(|v| v.len() != dim) => {
                return Err(Error::InvalidModel("constant drift values must have length d".into()))
            }
            _ => {}
        }
        if matches!(diffusion, Diffusion::ScalarFn) && dim != 1 {
            return Err(Error::InvalidModel(
                "scalar diffusion map is defined for d = 1 only".into(),
            ));
        }
        if let InitialLaw::PointMass(x0) = &initial {
            if x0.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x0.len(),
                });
            }
        }
        Ok(ModelSpec {
            dim,
            drift,
            diffusion,
            initial,
            priors,
        })
    }

    /// Double-layer potential drifts with `alphas = (0, 1, -1)`, identity
    /// diffusion, standard Gaussian start and equal priors.
    pub fn double_layer(dim: usize, theta: f64) -> Result<Self> {
        Self::new(
            dim,
            DriftFamily::DoubleLayer {
                theta,
                alphas: vec![0.0, 1.0, -1.0],
                bump: Bump::StandardNormalPdf,
            },
            Diffusion::Identity,
            InitialLaw::StandardGaussian,
            vec![1.0 / 3.0; 3],
        )
    }

    /// Cosine-squared drifts with `alphas = (1/theta, 1, -1)`, the scalar
    /// diffusion map, `X_0 = 0` and equal priors.
    pub fn cosine_squared(theta: f64) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::InvalidModel("theta must be positive".into()));
        }
        Self::new(
            1,
            DriftFamily::CosineSquared {
                theta,
                alphas: vec![1.0 / theta, 1.0, -1.0],
            },
            Diffusion::ScalarFn,
            InitialLaw::PointMass(vec![0.0]),
            vec![1.0 / 3.0; 3],
        )
    }

    pub fn with_priors(self, priors: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, self.drift, self.diffusion, self.initial, priors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.priors.len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn drift(&self) -> &DriftFamily {
        &self.drift
    }

    pub fn diffusion(&self) -> &Diffusion {
        &self.diffusion
    }

    pub fn initial_law(&self) -> &InitialLaw {
        &self.initial
    }

    fn check_label(&self, k: usize) -> Result<()> {
        if k >= self.num_classes() {
            return Err(Error::UnknownLabel {
                label: k,
                num_classes: self.num_classes(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// Writes `b_k(x)` into `out`.
    pub fn drift_into(&self, k: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_label(k)?;
        self.check_dim(x.len())?;
        self.check_dim(out.len())?;
        self.drift_unchecked(k, x, out);
        Ok(())
    }

    pub fn eval_drift(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(k, x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn drift_unchecked(&self, k: usize, x: &[f64], out: &mut [f64]) {
        match &self.drift {
            DriftFamily::DoubleLayer { theta, alphas, bump } => {
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                let lift = bump.eval(theta * (mean + alphas[k]));
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -xi + lift;
                }
            }
            DriftFamily::CosineSquared { theta, alphas } => {
                let c = x[0].cos();
                out[0] = alphas[k] * theta * (0.25 + 0.75 * c * c);
            }
            DriftFamily::Constant { values } => out.copy_from_slice(&values[k]),
            DriftFamily::MeanReverting { rates } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -rates[k] * xi;
                }
            }
            DriftFamily::Custom(fields) => fields[k](x, out),
        }
    }

    /// Row-major `d x d` matrix `sigma(x)`.
    pub fn eval_sigma(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        match &self.diffusion {
            Diffusion::Identity => (0..d).for_each(|i| out[i * d + i] = 1.0),
            Diffusion::Scaled(c) => (0..d).for_each(|i| out[i * d + i] = *c),
            Diffusion::ScalarFn => out[0] = scalar_sigma(x[0]),
            Diffusion::CustomMatrix(f) => f(x, &mut out),
        }
        Ok(out)
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.initial {
            InitialLaw::StandardGaussian => (0..self.dim).map(|_| rng.sample(StandardNormal)).collect(),
            InitialLaw::PointMass(x0) => x0.clone(),
        }
    }
}
