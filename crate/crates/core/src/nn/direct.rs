//! Direct pathwise baseline: a two-hidden-layer ReLU classifier on the
//! flattened observed path, ignoring the diffusion structure.

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::dense::{backward_batch, forward_batch, Layout, Workspace};
use crate::classify::argmax;
use crate::error::{Error, Result};
use crate::rng::{tag, SeedKey};
use crate::sde::{LabeledDataset, Trajectory};

pub const LEARNING_RATES: [f64; 4] = [1e-4, 3e-4, 1e-3, 3e-3];
pub const WEIGHT_DECAYS: [f64; 4] = [0.0, 1e-5, 1e-4, 1e-3];
pub const HIDDEN_SIZES: [(usize, usize); 5] = [(16, 16), (32, 32), (64, 64), (128, 128), (256, 128)];
pub const BATCH_SIZES: [usize; 3] = [64, 128, 256];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectConfig {
    /// Number of grid configurations tried by random search.
    pub search_budget: usize,
    pub max_epochs: usize,
    /// Epochs without validation-accuracy improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        DirectConfig {
            search_budget: 8,
            max_epochs: 200,
            patience: 50,
            val_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub hidden: (usize, usize),
    pub batch_size: usize,
}

/// The full search grid in a fixed order.
pub fn search_grid() -> Vec<Hyperparams> {
    let mut grid = Vec::new();
    for &learning_rate in &LEARNING_RATES {
        for &weight_decay in &WEIGHT_DECAYS {
            for &hidden in &HIDDEN_SIZES {
                for &batch_size in &BATCH_SIZES {
                    grid.push(Hyperparams {
                        learning_rate,
                        weight_decay,
                        hidden,
                        batch_size,
                    });
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub hyper: Hyperparams,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectClassifier {
    widths: Vec<usize>,
    params: Vec<f64>,
    pub selected: Trial,
    pub trials: Vec<Trial>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

impl DirectClassifier {
    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.widths, true).expect("validated at training time")
    }

    /// Class probabilities for one path.
    pub fn probabilities(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.states().len() != self.widths[0] {
            return Err(Error::DimensionMismatch {
                expected: self.widths[0],
                got: traj.states().len(),
            });
        }
        let mut ws = Workspace::default();
        forward_batch(&self.layout(), &self.params, traj.states(), 1, &mut ws);
        let mut p = ws.output().to_vec();
        softmax_in_place(&mut p);
        Ok(p)
    }

    pub fn predict(&self, traj: &Trajectory) -> Result<usize> {
        Ok(argmax(&self.probabilities(traj)?))
    }
}

struct Split {
    xs: Vec<f64>,
    labels: Vec<usize>,
}

impl Split {
    fn len(&self) -> usize {
        self.labels.len()
    }
}

fn accuracy(layout: &Layout, params: &[f64], data: &Split, ws: &mut Workspace) -> f64 {
    let width = layout.input_dim();
    let k = layout.output_dim();
    let mut correct = 0usize;
    for (xc, lc) in data.xs.chunks(512 * width).zip(data.labels.chunks(512)) {
        forward_batch(layout, params, xc, lc.len(), ws);
        for (z, &y) in ws.output().chunks_exact(k).zip(lc) {
            if argmax(z) == y {
                correct += 1;
            }
        }
    }
    correct as f64 / data.len() as f64
}

fn run_trial(
    hyper: Hyperparams,
    input: usize,
    classes: usize,
    train: &Split,
    val: &Split,
    cfg: &DirectConfig,
    key: SeedKey,
) -> Result<(Trial, Vec<f64>)> {
    let layout = Layout::new(&[input, hyper.hidden.0, hyper.hidden.1, classes], true)?;
    let mut params = layout.init(&mut key.child(tag::INIT).rng());
    let mut opt = Adam::new(layout.len, hyper.learning_rate, (0.9, 0.999), 1e-8, hyper.weight_decay);
    let mut rng = key.child(tag::TRAIN).rng();
    let mut ws = Workspace::default();
    let mut grad = vec![0.0; layout.len];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let bs = hyper.batch_size.min(train.len());
    let mut bx = Vec::with_capacity(bs * input);
    let mut best = (-1.0, 0usize, params.clone());
    let mut stale = 0;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        order.shuffle(&mut rng);
        for chunk in order.chunks(bs) {
            bx.clear();
            for &i in chunk {
                bx.extend_from_slice(&train.xs[i * input..(i + 1) * input]);
            }
            forward_batch(&layout, &params, &bx, chunk.len(), &mut ws);
            let scale = 1.0 / chunk.len() as f64;
            let mut dout = ws.output().to_vec();
            for (z, &i) in dout.chunks_exact_mut(classes).zip(chunk) {
                softmax_in_place(z);
                z[train.labels[i]] -= 1.0;
                z.iter_mut().for_each(|v| *v *= scale);
            }
            grad.fill(0.0);
            backward_batch(&layout, &params, &dout, &mut ws, &mut grad);
            opt.step(&mut params, &grad);
        }
        let acc = accuracy(&layout, &params, val, &mut ws);
        if acc > best.0 {
            best = (acc, epoch, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((
        Trial {
            hyper,
            best_val_accuracy: best.0,
            best_epoch: best.1,
            epochs_run,
        },
        best.2,
    ))
}

/// Random search over [`search_grid`], selecting by validation accuracy on a
/// path-level split. The best-validation checkpoint of the winning trial is kept.
pub fn train_direct_classifier(data: &LabeledDataset, cfg: &DirectConfig) -> Result<DirectClassifier> {
    let present = data.counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::SingleClass(present));
    }
    if cfg.search_budget == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidArgument(
            "search budget and max epochs must be positive".into(),
        ));
    }
    if !(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0) {
        return Err(Error::InvalidArgument("val_fraction must lie in (0, 1)".into()));
    }
    let key = SeedKey::new(cfg.seed).child(tag::DIRECT);
    let input = (data.steps() + 1) * data.dim();
    let classes = data.num_classes();

    let mut items: Vec<(usize, &Trajectory)> = data.labeled().collect();
    items.shuffle(&mut key.child(0x73706c74).rng());
    let n_val = ((cfg.val_fraction * items.len() as f64).round() as usize).clamp(1, items.len() - 1);
    let to_split = |part: &[(usize, &Trajectory)]| Split {
        xs: part.iter().flat_map(|(_, p)| p.states().iter().copied()).collect(),
        labels: part.iter().map(|(k, _)| *k).collect(),
    };
    let val = to_split(&items[..n_val]);
    let train = to_split(&items[n_val..]);

    let grid = search_grid();
    let budget = cfg.search_budget.min(grid.len());
    let chosen: Vec<Hyperparams> = grid
        .choose_multiple(&mut key.child(0x67726964).rng(), budget)
        .copied()
        .collect();

    let mut trials = Vec::with_capacity(budget);
    let mut winner: Option<(usize, Vec<f64>)> = None;
    for (t, hyper) in chosen.into_iter().enumerate() {
        let (trial, params) = run_trial(hyper, input, classes, &train, &val, cfg, key.child(t as u64))?;
        let better = winner
            .as_ref()
            .is_none_or(|(w, _)| trial.best_val_accuracy > trials_acc(&trials, *w));
        trials.push(trial);
        if better {
            winner = Some((t, params));
        }
    }
    let (w, params) = winner.expect("budget is positive");
    let h = trials[w].hyper.hidden;
    Ok(DirectClassifier {
        widths: vec![input, h.0, h.1, classes],
        params,
        selected: trials[w].clone(),
        trials,
    })
}

fn trials_acc(trials: &[Trial], i: usize) -> f64 {
    trials[i].best_val_accuracy
}
