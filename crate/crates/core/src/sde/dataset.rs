use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::ModelSpec;
use super::simulate::{simulate_path, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{tag, SeedKey};

/// How the total sample size is split across classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSizes {
    /// `N / K` paths per class; `K` must divide `N`.
    Balanced(usize),
    /// Class counts drawn from `Multinomial(N; priors)`.
    Multinomial(usize),
    /// Explicit per-class count, identical for every class.
    PerClass(usize),
}

/// Labelled paths grouped by class. All paths share `(d, M, delta, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub(crate) dim: usize,
    pub(crate) steps: usize,
    pub(crate) horizon: f64,
    pub(crate) seed: u64,
    pub(crate) classes: Vec<Vec<Trajectory>>,
}

impl LabeledDataset {
    /// Builds a dataset from per-class path lists, checking that all paths share a grid.
    pub fn from_classes(classes: Vec<Vec<Trajectory>>, seed: u64) -> Result<Self> {
        let first = classes
            .iter()
            .flatten()
            .next()
            .ok_or(Error::Empty("dataset has no trajectories"))?;
        let (dim, steps, horizon) = (first.dim(), first.steps(), first.horizon());
        for p in classes.iter().flatten() {
            if p.dim() != dim || p.steps() != steps || (p.horizon() - horizon).abs() > 1e-12 {
                return Err(Error::InvalidArgument("all trajectories must share (d, M, T)".into()));
            }
        }
        Ok(LabeledDataset {
            dim,
            steps,
            horizon,
            seed,
            classes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, k: usize) -> &[Trajectory] {
        &self.classes[k]
    }

    pub fn classes(&self) -> &[Vec<Trajectory>] {
        &self.classes
    }

    pub fn counts(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Empirical class frequencies `N_k / N`.
    pub fn empirical_priors(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.counts().iter().map(|&c| c as f64 / n).collect()
    }

    /// `(label, path)` pairs in class order.
    pub fn labeled(&self) -> impl Iterator<Item = (usize, &Trajectory)> {
        self.classes
            .iter()
            .enumerate()
            .flat_map(|(k, v)| v.iter().map(move |p| (k, p)))
    }
}

/// Draws `Multinomial(n; probs)` by sequential binomial conditioning.
pub fn multinomial_counts<R: Rng + ?Sized>(n: usize, probs: &[f64], rng: &mut R) -> Vec<usize> {
    let mut counts = Vec::with_capacity(probs.len());
    let mut remaining = n as u64;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            counts.push(remaining as usize);
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if remaining == 0 {
            0
        } else {
            Binomial::new(remaining, q)
                .expect("probability clamped to [0, 1]")
                .sample(rng)
        };
        counts.push(draw as usize);
        remaining -= draw;
        mass -= p;
    }
    counts
}

/// Resolves [`ClassSizes`] into per-class counts, drawing from `key` when needed.
pub fn class_counts(spec: &ModelSpec, sizes: ClassSizes, key: SeedKey) -> Result<Vec<usize>> {
    let k = spec.num_classes();
    match sizes {
        ClassSizes::Balanced(n) => {
            if n % k != 0 {
                return Err(Error::ClassSizes(format!(
                    "balanced mode needs K = {k} to divide N = {n}"
                )));
            }
            Ok(vec![n / k; k])
        }
        ClassSizes::PerClass(n) => Ok(vec![n; k]),
        ClassSizes::Multinomial(n) => Ok(multinomial_counts(n, spec.priors(), &mut key.child(tag::SIZES).rng())),
    }
}

/// Simulates a labelled dataset. Path `n` of class `k` uses the stream
/// `key / DATA / k / n`, so the result does not depend on evaluation order.
pub fn generate_dataset(
    spec: &ModelSpec,
    sizes: ClassSizes,
    steps: usize,
    horizon: f64,
    key: SeedKey,
) -> Result<LabeledDataset> {
    let counts = class_counts(spec, sizes, key)?;
    let data_key = key.child(tag::DATA);
    let classes = counts
        .iter()
        .enumerate()
        .map(|(k, &count)| {
            (0..count)
                .into_par_iter()
                .map(|n| {
                    let mut rng = data_key.path(&[k as u64, n as u64]).rng();
                    simulate_path(spec, k, steps, horizon, &mut rng)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset {
        dim: spec.dim(),
        steps,
        horizon,
        seed: key.raw(),
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_split() {
        let spec = ModelSpec::cosine_squared(1.5).unwrap();
        let ds = generate_dataset(&spec, ClassSizes::Balanced(96), 10, 1.0, SeedKey::new(1)).unwrap();
        assert_eq!(ds.counts(), vec![32, 32, 32]);
        assert!(matches!(
            generate_dataset(&spec, ClassSizes::Balanced(100), 10, 1.0, SeedKey::new(1)),
            Err(Error::ClassSizes(_))
        ));
    }

    #[test]
    fn multinomial_total() {
        let spec = ModelSpec::cosine_squared(1.5).unwrap();
        let ds = generate_dataset(&spec, ClassSizes::Multinomial(100), 10, 1.0, SeedKey::new(3)).unwrap();
        assert_eq!(ds.counts().iter().sum::<usize>(), 100);
        assert_eq!(ds.len(), 100);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = ModelSpec::double_layer(2, 5.0).unwrap();
        let a = generate_dataset(&spec, ClassSizes::Multinomial(30), 20, 1.0, SeedKey::new(5)).unwrap();
        let b = generate_dataset(&spec, ClassSizes::Multinomial(30), 20, 1.0, SeedKey::new(5)).unwrap();
        let bits = |d: &LabeledDataset| {
            d.labeled()
                .flat_map(|(_, p)| p.states().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        assert_eq!(a.counts(), b.counts());
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn multinomial_means() {
        let probs = [1.0 / 3.0; 3];
        let reps = 10_000;
        let mut sums = [0usize; 3];
        for s in 0..reps {
            let c = multinomial_counts(100, &probs, &mut SeedKey::new(s).rng());
            assert_eq!(c.iter().sum::<usize>(), 100);
            for k in 0..3 {
                sums[k] += c[k];
            }
        }
        for (k, &sum) in sums.iter().enumerate() {
            let mean = sum as f64 / reps as f64;
            assert!((mean - 100.0 / 3.0).abs() < 1.0, "class {k}: {mean}");
        }
    }

    #[test]
    fn rejects_mixed_grids() {
        let a = Trajectory::new(1, 1.0, vec![0.0, 1.0, 2.0]).unwrap();
        let b = Trajectory::new(1, 1.0, vec![0.0, 1.0]).unwrap();
        assert!(LabeledDataset::from_classes(vec![vec![a], vec![b]], 0).is_err());
    }
}
