//! Discretized likelihood-ratio scores and the resulting classifiers.
//!
//! For a path observed at `t_0 < ... < t_M` and a drift `b`, the score is
//!
//! ```text
//! F(b) = sum_m b(X_m)^T a(X_m)^{-1} (X_{m+1} - X_m) - (delta / 2) sum_m b(X_m)^T a(X_m)^{-1} b(X_m)
//! ```
//!
//! with `a = sigma sigma^T`. Evaluated at the true drifts it yields the
//! Bayes oracle; at estimated drifts, the plug-in classifier. Posteriors are
//! the prior-weighted softmax of the per-class scores.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, dot, outer_self};
use crate::nn::{DirectClassifier, DriftEstimator};
use crate::sde::{Diffusion, LabeledDataset, ModelSpec, Trajectory};

/// A drift vector field: either a true class drift or a trained estimator.
#[derive(Debug, Clone)]
pub enum DriftEvaluator {
    True { spec: Arc<ModelSpec>, class: usize },
    Estimated(Arc<DriftEstimator>),
}

impl DriftEvaluator {
    pub fn truth(spec: &ModelSpec, class: usize) -> Result<Self> {
        if class >= spec.num_classes() {
            return Err(Error::UnknownLabel {
                label: class,
                num_classes: spec.num_classes(),
            });
        }
        Ok(DriftEvaluator::True {
            spec: Arc::new(spec.clone()),
            class,
        })
    }

    pub fn estimated(est: DriftEstimator) -> Self {
        DriftEvaluator::Estimated(Arc::new(est))
    }

    pub fn dim(&self) -> usize {
        match self {
            DriftEvaluator::True { spec, .. } => spec.dim(),
            DriftEvaluator::Estimated(e) => e.dim(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        match self {
            DriftEvaluator::True { spec, class } => spec.drift_into(*class, x, &mut out)?,
            DriftEvaluator::Estimated(e) => e.eval_into(x, &mut out)?,
        }
        Ok(out)
    }

    /// Drift at every row of `xs` (row-major, width `d`).
    pub fn eval_rows(&self, xs: &[f64]) -> Vec<f64> {
        match self {
            DriftEvaluator::True { spec, class } => {
                let d = spec.dim();
                let mut out = vec![0.0; xs.len()];
                for (x, o) in xs.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                    spec.drift_unchecked(*class, x, o);
                }
                out
            }
            DriftEvaluator::Estimated(e) => e.eval_rows(xs),
        }
    }
}

/// Per-class scores of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores(pub Vec<f64>);

/// Per-class posterior probabilities of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors(pub Vec<f64>);

impl Posteriors {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_path(spec: &ModelSpec, traj: &Trajectory) -> Result<()> {
    if traj.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: traj.dim(),
        });
    }
    Ok(())
}

/// Score kernel on precomputed drift rows `b` (row-major `M x d`).
fn score_rows(spec: &ModelSpec, traj: &Trajectory, b: &[f64]) -> Result<f64> {
    let d = traj.dim();
    let delta = traj.delta();
    let s = traj.states();
    let steps = traj.steps();
    let mut linear = 0.0;
    let mut quadratic = 0.0;
    match spec.diffusion() {
        Diffusion::Identity => {
            for m in 0..steps {
                let bm = &b[m * d..(m + 1) * d];
                for i in 0..d {
                    linear += bm[i] * (s[(m + 1) * d + i] - s[m * d + i]);
                    quadratic += bm[i] * bm[i];
                }
            }
        }
        Diffusion::Scaled(c) => {
            let a = c * c;
            if !(a > 0.0) {
                return Err(Error::SingularDiffusion { index: 0 });
            }
            for m in 0..steps {
                let bm = &b[m * d..(m + 1) * d];
                for i in 0..d {
                    linear += bm[i] * (s[(m + 1) * d + i] - s[m * d + i]) / a;
                    quadratic += bm[i] * bm[i] / a;
                }
            }
        }
        Diffusion::ScalarFn => {
            for m in 0..steps {
                let sig = crate::sde::scalar_sigma(s[m]);
                let a = sig * sig;
                linear += b[m] * (s[m + 1] - s[m]) / a;
                quadratic += b[m] * b[m] / a;
            }
        }
        Diffusion::CustomMatrix(f) => {
            let mut sigma = vec![0.0; d * d];
            let mut a = vec![0.0; d * d];
            let mut y = vec![0.0; d];
            for m in 0..steps {
                f(&s[m * d..(m + 1) * d], &mut sigma);
                outer_self(&sigma, d, &mut a);
                if !cholesky_in_place(&mut a, d) {
                    return Err(Error::SingularDiffusion { index: m });
                }
                let bm = &b[m * d..(m + 1) * d];
                y.copy_from_slice(bm);
                cholesky_solve(&a, d, &mut y);
                let dx: Vec<f64> = (0..d).map(|i| s[(m + 1) * d + i] - s[m * d + i]).collect();
                linear += dot(&y, &dx);
                quadratic += dot(&y, bm);
            }
        }
    }
    Ok(linear - 0.5 * delta * quadratic)
}

/// Discretized score of `traj` under drift `drift`.
pub fn score_discretized(drift: &DriftEvaluator, spec: &ModelSpec, traj: &Trajectory) -> Result<f64> {
    check_path(spec, traj)?;
    if drift.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: drift.dim(),
        });
    }
    let xs = &traj.states()[..traj.steps() * traj.dim()];
    score_rows(spec, traj, &drift.eval_rows(xs))
}

/// Prior-weighted softmax `p_k e^{x_k} / sum_j p_j e^{x_j}`, computed after
/// subtracting the largest score.
pub fn posteriors(scores: &ClassScores, priors: &[f64]) -> Result<Posteriors> {
    if scores.0.len() != priors.len() {
        return Err(Error::DimensionMismatch {
            expected: priors.len(),
            got: scores.0.len(),
        });
    }
    let max = scores.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.0.iter().zip(priors).map(|(x, p)| p * (x - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(Posteriors(w.into_iter().map(|v| v / total).collect()))
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// The label with the largest posterior (smallest label on ties).
pub fn classify(post: &Posteriors) -> usize {
    argmax(&post.0)
}

/// Anything that labels trajectories.
pub trait Classifier: Sync {
    fn num_classes(&self) -> usize;
    fn predict(&self, traj: &Trajectory) -> Result<usize>;
}

/// Plug-in rule: scores under per-class drifts, prior-weighted softmax, argmax.
#[derive(Debug, Clone)]
pub struct PlugInClassifier {
    spec: ModelSpec,
    drifts: Vec<DriftEvaluator>,
    priors: Vec<f64>,
}

impl PlugInClassifier {
    pub fn new(spec: &ModelSpec, drifts: Vec<DriftEvaluator>, priors: Vec<f64>) -> Result<Self> {
        if drifts.is_empty() || drifts.len() != priors.len() {
            return Err(Error::InvalidArgument(format!(
                "{} drifts for {} priors",
                drifts.len(),
                priors.len()
            )));
        }
        if let Some(bad) = drifts.iter().find(|d| d.dim() != spec.dim()) {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: bad.dim(),
            });
        }
        Ok(PlugInClassifier {
            spec: spec.clone(),
            drifts,
            priors,
        })
    }

    /// Plug-in classifier over trained estimators, ordered by class.
    pub fn from_estimators(spec: &ModelSpec, estimators: Vec<DriftEstimator>, priors: Vec<f64>) -> Result<Self> {
        Self::new(
            spec,
            estimators.into_iter().map(DriftEvaluator::estimated).collect(),
            priors,
        )
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn drifts(&self) -> &[DriftEvaluator] {
        &self.drifts
    }

    pub fn scores(&self, traj: &Trajectory) -> Result<ClassScores> {
        check_path(&self.spec, traj)?;
        let xs = &traj.states()[..traj.steps() * traj.dim()];
        self.drifts
            .iter()
            .map(|d| score_rows(&self.spec, traj, &d.eval_rows(xs)))
            .collect::<Result<Vec<_>>>()
            .map(ClassScores)
    }

    pub fn posteriors(&self, traj: &Trajectory) -> Result<Posteriors> {
        posteriors(&self.scores(traj)?, &self.priors)
    }
}

impl Classifier for PlugInClassifier {
    fn num_classes(&self) -> usize {
        self.drifts.len()
    }

    fn predict(&self, traj: &Trajectory) -> Result<usize> {
        Ok(classify(&self.posteriors(traj)?))
    }
}

impl Classifier for DirectClassifier {
    fn num_classes(&self) -> usize {
        DirectClassifier::num_classes(self)
    }

    fn predict(&self, traj: &Trajectory) -> Result<usize> {
        DirectClassifier::predict(self, traj)
    }
}

/// The Bayes rule on the observation grid: true drifts and true priors.
pub fn bayes_oracle(spec: &ModelSpec) -> Result<PlugInClassifier> {
    let drifts = (0..spec.num_classes())
        .map(|k| DriftEvaluator::truth(spec, k))
        .collect::<Result<Vec<_>>>()?;
    PlugInClassifier::new(spec, drifts, spec.priors().to_vec())
}

/// Writes `path_id, true_label, predicted_label, score_1..K, posterior_1..K`.
pub fn write_predictions(
    path: &Path,
    classifier: &PlugInClassifier,
    data: &LabeledDataset,
    config_hash: Option<&str>,
) -> Result<()> {
    let rows: Vec<(usize, ClassScores, Posteriors)> = data
        .labeled()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(k, p)| {
            let s = classifier.scores(p)?;
            let post = posteriors(&s, &classifier.priors)?;
            Ok((*k, s, post))
        })
        .collect::<Result<Vec<_>>>()?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let k = classifier.num_classes();
    let header: Vec<String> = config_hash
        .map(|_| "config_hash".to_string())
        .into_iter()
        .chain(
            ["path_id", "true_label", "predicted_label"]
                .iter()
                .map(|s| s.to_string()),
        )
        .chain((0..k).map(|i| format!("score_{i}")))
        .chain((0..k).map(|i| format!("posterior_{i}")))
        .collect();
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (id, (label, s, post)) in rows.iter().enumerate() {
        let mut line = config_hash.map(|h| format!("{h},")).unwrap_or_default();
        line.push_str(&format!("{id},{label},{}", classify(post)));
        for v in s.0.iter().chain(&post.0) {
            line.push(',');
            line.push_str(&crate::sde::fmt_f64(*v));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}
