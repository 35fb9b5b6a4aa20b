//! Per-class drift estimation by sparse network regression on path increments.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::dense::Workspace;
use super::mlp::{MlpParams, SupportBox};
use crate::error::{Error, Result};
use crate::rng::{tag, SeedKey};
use crate::sde::Trajectory;

const SPLIT: u64 = 0x7370_6c74;

/// Optimiser and early-stopping settings shared by all drift networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub retrain_multiplier: usize,
    pub betas: (f64, f64),
    pub epsilon: f64,
    /// Minimum decrease of the validation loss that counts as improvement.
    pub min_improvement: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 20,
            val_fraction: 0.5,
            retrain_multiplier: 2,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            min_improvement: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: &str| Err(Error::config(field, msg));
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate", "must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be positive");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs", "must be positive");
        }
        if self.patience > self.max_epochs {
            return fail("patience", "must not exceed max_epochs");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return fail("val_fraction", "must lie in (0, 1)");
        }
        if self.retrain_multiplier == 0 {
            return fail("retrain_multiplier", "must be positive");
        }
        Ok(())
    }
}

/// Network class used for every drift coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftArchitecture {
    /// Hidden widths `p_1 .. p_L`; input `d` and output 1 are implied.
    pub hidden: Vec<usize>,
    pub sparsity_ratio: f64,
    /// Output clamp `F`; `None` uses `max(1, 1.2 * max |target|)`.
    pub clamp: Option<f64>,
    /// Support box; `None` uses the training bounding box widened by `support_margin`.
    pub support: Option<SupportBox>,
    pub support_margin: f64,
}

impl Default for DriftArchitecture {
    fn default() -> Self {
        DriftArchitecture {
            hidden: vec![16, 32, 32, 16],
            sparsity_ratio: 0.75,
            clamp: None,
            support: None,
            support_margin: 0.05,
        }
    }
}

impl DriftArchitecture {
    pub fn widths(&self, dim: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }
}

/// Per-coordinate training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMeta {
    /// Epoch at which early stopping fired (or `max_epochs`).
    pub stop_epoch: usize,
    /// Epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub early_stopped: bool,
    /// Epochs of the final fit on all data.
    pub refit_epochs: usize,
    pub final_train_loss: f64,
    pub best_val_loss: Option<f64>,
}

/// `d` sparse networks estimating the drift of one class, coordinate by coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimator {
    pub class: usize,
    pub nets: Vec<MlpParams>,
    pub meta: Vec<CoordinateMeta>,
}

impl DriftEstimator {
    pub fn dim(&self) -> usize {
        self.nets.len()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, net) in out.iter_mut().zip(&self.nets) {
            *o = net.forward(x)?;
        }
        Ok(())
    }

    /// Evaluates every coordinate network at all rows of `xs`; returns
    /// row-major `n x d` drifts.
    pub fn eval_rows(&self, xs: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let n = xs.len() / d;
        let mut ws = Workspace::default();
        let mut out = vec![0.0; n * d];
        for (i, net) in self.nets.iter().enumerate() {
            let col = net.forward_many(xs, n, &mut ws);
            for (r, v) in col.into_iter().enumerate() {
                out[r * d + i] = v;
            }
        }
        out
    }
}

/// Scaled increments `(X_{t_{m+1}} - X_{t_m}) / delta`, row-major `M x d`.
pub fn compute_increment_targets(traj: &Trajectory) -> Vec<f64> {
    let d = traj.dim();
    let delta = traj.delta();
    let s = traj.states();
    (0..traj.steps() * d).map(|j| (s[j + d] - s[j]) / delta).collect()
}

/// Flattened regression pairs for one class: inputs `X_{t_m}` and targets
/// `Y_{t_m}` for `m < M`, grouped contiguously by path.
#[derive(Debug, Clone)]
pub struct RegressionSamples {
    pub dim: usize,
    pub steps: usize,
    pub xs: Vec<f64>,
    /// Row-major `n x d` targets.
    pub ys: Vec<f64>,
}

impl RegressionSamples {
    pub fn from_paths(paths: &[Trajectory]) -> Result<Self> {
        let first = paths.first().ok_or(Error::Empty("no training paths"))?;
        let (dim, steps) = (first.dim(), first.steps());
        let mut xs = Vec::with_capacity(paths.len() * steps * dim);
        let mut ys = Vec::with_capacity(paths.len() * steps * dim);
        for p in paths {
            if p.dim() != dim || p.steps() != steps {
                return Err(Error::InvalidArgument("paths must share (d, M)".into()));
            }
            xs.extend_from_slice(&p.states()[..steps * dim]);
            ys.extend(compute_increment_targets(p));
        }
        Ok(RegressionSamples { dim, steps, xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn num_paths(&self) -> usize {
        self.len() / self.steps
    }

    pub fn target(&self, coord: usize) -> Vec<f64> {
        self.ys.iter().skip(coord).step_by(self.dim).copied().collect()
    }

    fn gather(&self, paths: &[usize], coord: usize) -> (Vec<f64>, Vec<f64>) {
        let (d, m) = (self.dim, self.steps);
        let mut xs = Vec::with_capacity(paths.len() * m * d);
        let mut ys = Vec::with_capacity(paths.len() * m);
        for &p in paths {
            xs.extend_from_slice(&self.xs[p * m * d..(p + 1) * m * d]);
            ys.extend(self.ys[p * m * d..(p + 1) * m * d].iter().skip(coord).step_by(d));
        }
        (xs, ys)
    }
}

/// Empirical loss `(1/(N_k M)) sum_n sum_m (Y^i - f(X))^2` of one coordinate network.
pub fn drift_loss(net: &MlpParams, paths: &[Trajectory], coord: usize) -> Result<f64> {
    let samples = RegressionSamples::from_paths(paths)?;
    if coord >= samples.dim {
        return Err(Error::DimensionMismatch {
            expected: samples.dim,
            got: coord + 1,
        });
    }
    net.mse(&samples.xs, &samples.target(coord))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Training on the train split with early stopping.
    Select,
    /// Final fit on all paths.
    Refit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub coord: usize,
    pub phase: Phase,
    /// 1-based.
    pub epoch: usize,
    /// Mean of the minibatch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Hooks into the training loop.
pub trait TrainMonitor {
    /// Called after every optimiser step and projection.
    fn on_step(&mut self, _coord: usize, _phase: Phase, _net: &MlpParams) {}
    fn on_epoch(&mut self, _record: &EpochRecord) {}
}

pub struct NoMonitor;

impl TrainMonitor for NoMonitor {}

fn check_admissible(net: &MlpParams) {
    debug_assert!(net.max_abs_param() <= 1.0, "parameter outside [-1, 1]");
    debug_assert!(net.nonzero_count() <= net.sparsity_budget(), "sparsity budget exceeded");
}

struct Coordinate<'a> {
    samples: &'a RegressionSamples,
    coord: usize,
    widths: Vec<usize>,
    arch: &'a DriftArchitecture,
    cfg: &'a TrainConfig,
    key: SeedKey,
    clamp: f64,
    support: SupportBox,
}

impl Coordinate<'_> {
    /// Initialised and projected, so training starts inside the sparse class.
    fn fresh_net(&self) -> Result<MlpParams> {
        let mut net = MlpParams::init(
            &self.widths,
            self.arch.sparsity_ratio,
            self.clamp,
            self.support.clone(),
            &mut self.key.child(tag::INIT).rng(),
        )?;
        net.project_sparse_clip();
        Ok(net)
    }

    /// Runs `epochs` epochs (or until `stop` says so) and returns the trained
    /// network plus the number of epochs run.
    fn fit(
        &self,
        net: &mut MlpParams,
        phase: Phase,
        train: (&[f64], &[f64]),
        epochs: usize,
        monitor: &mut dyn TrainMonitor,
        mut after_epoch: impl FnMut(usize, &MlpParams) -> Result<(Option<f64>, bool)>,
    ) -> Result<usize> {
        let (xs, ys) = train;
        let d = self.samples.dim;
        let n = ys.len();
        let mut opt = Adam::new(
            net.num_params(),
            self.cfg.learning_rate,
            self.cfg.betas,
            self.cfg.epsilon,
            0.0,
        );
        let phase_tag = match phase {
            Phase::Select => 0,
            Phase::Refit => 1,
        };
        let mut rng = self.key.path(&[tag::TRAIN, phase_tag]).rng();
        let mut order: Vec<usize> = (0..n).collect();
        let bs = self.cfg.batch_size.min(n);
        let mut bx = Vec::with_capacity(bs * d);
        let mut by = Vec::with_capacity(bs);
        let mut grad = vec![0.0; net.num_params()];
        let mut ws = Workspace::default();
        for epoch in 1..=epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(bs) {
                bx.clear();
                by.clear();
                for &i in chunk {
                    bx.extend_from_slice(&xs[i * d..(i + 1) * d]);
                    by.push(ys[i]);
                }
                loss_sum += net.mse_grad_into(&bx, &by, &mut ws, &mut grad);
                batches += 1;
                opt.step(&mut net.params, &grad);
                net.project_sparse_clip();
                check_admissible(net);
                monitor.on_step(self.coord, phase, net);
            }
            let (val_loss, stop) = after_epoch(epoch, net)?;
            monitor.on_epoch(&EpochRecord {
                coord: self.coord,
                phase,
                epoch,
                train_loss: loss_sum / batches as f64,
                val_loss,
            });
            if stop {
                return Ok(epoch);
            }
        }
        Ok(epochs)
    }

    fn train(&self, monitor: &mut dyn TrainMonitor) -> Result<(MlpParams, CoordinateMeta)> {
        let n_paths = self.samples.num_paths();
        let all: Vec<usize> = (0..n_paths).collect();
        let (all_x, all_y) = self.samples.gather(&all, self.coord);

        let (stop_epoch, best_epoch, early_stopped, best_val) = if n_paths < 2 {
            (self.cfg.max_epochs, self.cfg.max_epochs, false, None)
        } else {
            let mut perm = all.clone();
            perm.shuffle(&mut self.key.child(SPLIT).rng());
            let n_val = ((self.cfg.val_fraction * n_paths as f64).round() as usize).clamp(1, n_paths - 1);
            let (val_paths, train_paths) = perm.split_at(n_val);
            let (tx, ty) = self.samples.gather(train_paths, self.coord);
            let (vx, vy) = self.samples.gather(val_paths, self.coord);

            let mut net = self.fresh_net()?;
            let mut best = f64::INFINITY;
            let mut best_epoch = 0;
            let mut stale = 0;
            let mut fired = false;
            let stop = self.fit(
                &mut net,
                Phase::Select,
                (&tx, &ty),
                self.cfg.max_epochs,
                monitor,
                |epoch, net| {
                    let v = net.mse(&vx, &vy)?;
                    if v < best - self.cfg.min_improvement {
                        best = v;
                        best_epoch = epoch;
                        stale = 0;
                    } else {
                        stale += 1;
                    }
                    fired = stale >= self.cfg.patience;
                    Ok((Some(v), fired))
                },
            )?;
            (stop, best_epoch, fired, Some(best))
        };

        let refit_epochs = if best_val.is_some() {
            self.cfg.retrain_multiplier * stop_epoch
        } else {
            self.cfg.max_epochs
        };
        let mut net = self.fresh_net()?;
        self.fit(
            &mut net,
            Phase::Refit,
            (&all_x, &all_y),
            refit_epochs,
            monitor,
            |_, _| Ok((None, false)),
        )?;
        let final_train_loss = net.mse(&all_x, &all_y)?;
        Ok((
            net,
            CoordinateMeta {
                stop_epoch,
                best_epoch,
                early_stopped,
                refit_epochs,
                final_train_loss,
                best_val_loss: best_val,
            },
        ))
    }
}

fn coordinates<'a>(
    samples: &'a RegressionSamples,
    class: usize,
    arch: &'a DriftArchitecture,
    cfg: &'a TrainConfig,
) -> Result<Vec<Coordinate<'a>>> {
    cfg.validate()?;
    let d = samples.dim;
    let widths = arch.widths(d);
    if arch.hidden.is_empty() || arch.hidden.contains(&0) {
        return Err(Error::Widths {
            widths,
            reason: "need at least one hidden layer of positive width".into(),
        });
    }
    if let Some(SupportBox::Bounded(b)) = &arch.support {
        if b.len() != d {
            return Err(Error::Widths {
                widths,
                reason: format!("support box has {} coordinates for d = {d}", b.len()),
            });
        }
    }
    let support = match &arch.support {
        Some(s) => s.clone(),
        None => SupportBox::around(&samples.xs, d, arch.support_margin)?,
    };
    let key = SeedKey::new(cfg.seed).child(class as u64);
    Ok((0..d)
        .map(|coord| {
            let clamp = arch.clamp.unwrap_or_else(|| {
                let peak = samples
                    .ys
                    .iter()
                    .skip(coord)
                    .step_by(d)
                    .fold(0.0f64, |m, y| m.max(y.abs()));
                (1.2 * peak).max(1.0)
            });
            Coordinate {
                samples,
                coord,
                widths: widths.clone(),
                arch,
                cfg,
                key: key.child(coord as u64),
                clamp,
                support: support.clone(),
            }
        })
        .collect())
}

/// Trains the drift estimator of class `class` from its paths. Coordinates
/// train in parallel; results depend only on `cfg.seed` and `class`.
pub fn train_drift_estimator(
    paths: &[Trajectory],
    class: usize,
    arch: &DriftArchitecture,
    cfg: &TrainConfig,
) -> Result<DriftEstimator> {
    let samples = RegressionSamples::from_paths(paths)?;
    let coords = coordinates(&samples, class, arch, cfg)?;
    let trained = coords
        .par_iter()
        .map(|c| c.train(&mut NoMonitor))
        .collect::<Result<Vec<_>>>()?;
    let (nets, meta) = trained.into_iter().unzip();
    Ok(DriftEstimator { class, nets, meta })
}

/// Sequential variant of [`train_drift_estimator`] reporting to `monitor`.
pub fn train_drift_estimator_monitored(
    paths: &[Trajectory],
    class: usize,
    arch: &DriftArchitecture,
    cfg: &TrainConfig,
    monitor: &mut dyn TrainMonitor,
) -> Result<DriftEstimator> {
    let samples = RegressionSamples::from_paths(paths)?;
    let coords = coordinates(&samples, class, arch, cfg)?;
    let mut nets = Vec::new();
    let mut meta = Vec::new();
    for c in &coords {
        let (n, m) = c.train(monitor)?;
        nets.push(n);
        meta.push(m);
    }
    Ok(DriftEstimator { class, nets, meta })
}
