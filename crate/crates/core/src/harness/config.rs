use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{DirectConfig, DriftArchitecture, TrainConfig};
use crate::sde::{Bump, ClassSizes, Diffusion, DriftFamily, InitialLaw, ModelSpec};

/// Model family for an experiment. The list-valued fields make one config
/// cover a whole sweep (several dimensions or several `theta`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelPreset {
    /// Double-layer drifts, identity diffusion, Gaussian start.
    Example1 {
        #[serde(default = "default_dims")]
        dims: Vec<usize>,
        #[serde(default = "default_theta1")]
        theta: f64,
        #[serde(default = "default_alphas1")]
        alphas: Vec<f64>,
    },
    /// Cosine-squared drifts in `d = 1` with the state-dependent scalar diffusion.
    Example2 {
        #[serde(default = "default_thetas2")]
        thetas: Vec<f64>,
    },
    Custom(CustomModel),
}

fn default_dims() -> Vec<usize> {
    vec![1]
}
fn default_theta1() -> f64 {
    5.0
}
fn default_alphas1() -> Vec<f64> {
    vec![0.0, 1.0, -1.0]
}
fn default_thetas2() -> Vec<f64> {
    vec![0.5, 1.5, 2.5, 4.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub dim: usize,
    pub drift: DriftSpec,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    /// Defaults to equal priors.
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    DoubleLayer { theta: f64, alphas: Vec<f64> },
    CosineSquared { theta: f64, alphas: Vec<f64> },
    Constant { values: Vec<Vec<f64>> },
    MeanReverting { rates: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    #[default]
    Identity,
    Scaled {
        c: f64,
    },
    ScalarFn,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    StandardGaussian,
    PointMass {
        x: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeMode {
    /// Sizes are per class.
    Balanced,
    /// Sizes are totals split multinomially by the true priors.
    Multinomial,
}

impl SizeMode {
    pub fn sizes(self, n: usize) -> ClassSizes {
        match self {
            SizeMode::Balanced => ClassSizes::PerClass(n),
            SizeMode::Multinomial => ClassSizes::Multinomial(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    True,
    /// Class frequencies of the training set.
    Empirical,
}

/// Where the Bayes risk subtracted in the excess risk comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BayesReference {
    /// Bayes oracle on the repetition's own test set.
    Paired,
    /// Bayes oracle once per scenario on a separate set of `paths` paths.
    Dedicated { paths: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectBaseline {
    pub enabled: bool,
    #[serde(flatten)]
    pub config: DirectConfig,
}

/// Composite smoothness used for the `phi_N` reference column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Smoothness {
    pub betas: Vec<f64>,
    pub ts: Vec<f64>,
}

/// A fully resolved experiment description.
///
/// Parse with [`ExperimentConfig::from_json_str`], which fills preset
/// defaults for omitted fields and validates the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelPreset,
    pub horizon: f64,
    pub steps: usize,
    /// Training sizes; per class or total depending on `class_sizes`.
    pub train_sizes: Vec<usize>,
    /// Test size; per class or total depending on `class_sizes`.
    pub test_size: usize,
    pub repetitions: usize,
    pub class_sizes: SizeMode,
    pub priors: PriorMode,
    pub train: TrainConfig,
    pub architecture: DriftArchitecture,
    pub direct: DirectBaseline,
    pub bayes_reference: BayesReference,
    /// Record drift estimation errors on the test paths.
    pub diagnostics: bool,
    /// Number of largest sizes used for the log-log slope.
    pub fit_window: usize,
    pub smoothness: Option<Smoothness>,
    pub seed: u64,
    /// Not part of the config hash.
    pub out_dir: Option<PathBuf>,
}

/// On-disk form: everything except the model may be omitted.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: ModelPreset,
    horizon: Option<f64>,
    steps: Option<usize>,
    train_sizes: Option<Vec<usize>>,
    test_size: Option<usize>,
    repetitions: Option<usize>,
    class_sizes: Option<SizeMode>,
    priors: Option<PriorMode>,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default)]
    architecture: DriftArchitecture,
    direct: Option<DirectBaseline>,
    bayes_reference: Option<BayesReference>,
    diagnostics: Option<bool>,
    fit_window: Option<usize>,
    smoothness: Option<Smoothness>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

/// One model instance of a sweep.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub spec: ModelSpec,
}

impl ExperimentConfig {
    /// Example 1 defaults: sizes `2^5 .. 2^12` per class, balanced, 50 repetitions.
    pub fn example1(dims: Vec<usize>) -> Self {
        Self::resolve(ConfigFile::bare(ModelPreset::Example1 {
            dims,
            theta: default_theta1(),
            alphas: default_alphas1(),
        }))
    }

    /// Example 2 defaults: `N in {100, 1000}` total, multinomial sizes,
    /// empirical priors, 100 repetitions.
    pub fn example2(thetas: Vec<f64>) -> Self {
        Self::resolve(ConfigFile::bare(ModelPreset::Example2 { thetas }))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        let cfg = Self::resolve(file);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    fn resolve(f: ConfigFile) -> Self {
        let (sizes, test, reps, mode, priors, reference) = match &f.model {
            ModelPreset::Example1 { .. } => (
                (5..=12).map(|e| 1usize << e).collect(),
                1000,
                50,
                SizeMode::Balanced,
                PriorMode::True,
                BayesReference::Dedicated { paths: 30_000 },
            ),
            ModelPreset::Example2 { .. } => (
                vec![100, 1000],
                1000,
                100,
                SizeMode::Multinomial,
                PriorMode::Empirical,
                BayesReference::Paired,
            ),
            ModelPreset::Custom(_) => (
                vec![100],
                1000,
                10,
                SizeMode::Balanced,
                PriorMode::True,
                BayesReference::Paired,
            ),
        };
        ExperimentConfig {
            model: f.model,
            horizon: f.horizon.unwrap_or(1.0),
            steps: f.steps.unwrap_or(100),
            train_sizes: f.train_sizes.unwrap_or(sizes),
            test_size: f.test_size.unwrap_or(test),
            repetitions: f.repetitions.unwrap_or(reps),
            class_sizes: f.class_sizes.unwrap_or(mode),
            priors: f.priors.unwrap_or(priors),
            train: f.train,
            architecture: f.architecture,
            direct: f.direct.unwrap_or(DirectBaseline {
                enabled: false,
                config: DirectConfig::default(),
            }),
            bayes_reference: f.bayes_reference.unwrap_or(reference),
            diagnostics: f.diagnostics.unwrap_or(true),
            fit_window: f.fit_window.unwrap_or(4),
            smoothness: f.smoothness,
            seed: f.seed.unwrap_or(0),
            out_dir: f.out_dir,
        }
    }

    /// Checks every field; errors carry the offending field path.
    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, msg: &str| Err(Error::config(path, msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return fail("horizon", "must be positive and finite");
        }
        if self.steps == 0 {
            return fail("steps", "must be positive");
        }
        if self.train_sizes.is_empty() {
            return fail("train_sizes", "must not be empty");
        }
        if let Some(i) = self.train_sizes.iter().position(|&n| n == 0) {
            return fail(&format!("train_sizes[{i}]"), "must be positive");
        }
        if self.test_size == 0 {
            return fail("test_size", "must be positive");
        }
        if self.repetitions == 0 {
            return fail("repetitions", "must be positive");
        }
        if self.fit_window < 2 {
            return fail("fit_window", "must be at least 2");
        }
        if let BayesReference::Dedicated { paths: 0 } = self.bayes_reference {
            return fail("bayes_reference.paths", "must be positive");
        }
        self.train.validate().map_err(|e| nest("train", e))?;
        if self.architecture.hidden.contains(&0) {
            return fail("architecture.hidden", "widths must be positive");
        }
        if !(self.architecture.sparsity_ratio > 0.0 && self.architecture.sparsity_ratio <= 1.0) {
            return fail("architecture.sparsity_ratio", "must lie in (0, 1]");
        }
        if !(self.architecture.support_margin >= 0.0) {
            return fail("architecture.support_margin", "must be nonnegative");
        }
        if let Some(c) = self.architecture.clamp {
            if !(c > 0.0) {
                return fail("architecture.clamp", "must be positive");
            }
        }
        if self.direct.enabled {
            let d = &self.direct.config;
            if d.search_budget == 0 || d.search_budget > crate::nn::search_grid().len() {
                return fail("direct.search_budget", "must lie in 1..=240");
            }
            if d.max_epochs == 0 {
                return fail("direct.max_epochs", "must be positive");
            }
            if !(d.val_fraction > 0.0 && d.val_fraction < 1.0) {
                return fail("direct.val_fraction", "must lie in (0, 1)");
            }
        }
        if let Some(s) = &self.smoothness {
            if s.betas.is_empty() || s.betas.len() != s.ts.len() {
                return fail("smoothness", "betas and ts must be nonempty and of equal length");
            }
        }
        match &self.model {
            ModelPreset::Example1 { dims, theta, alphas } => {
                if dims.is_empty() {
                    return fail("model.dims", "must not be empty");
                }
                if let Some(i) = dims.iter().position(|&d| d == 0) {
                    return fail(&format!("model.dims[{i}]"), "must be positive");
                }
                if !theta.is_finite() {
                    return fail("model.theta", "must be finite");
                }
                if alphas.is_empty() {
                    return fail("model.alphas", "must not be empty");
                }
            }
            ModelPreset::Example2 { thetas } => {
                if thetas.is_empty() {
                    return fail("model.thetas", "must not be empty");
                }
                if let Some(i) = thetas.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
                    return fail(&format!("model.thetas[{i}]"), "must be positive");
                }
            }
            ModelPreset::Custom(_) => {}
        }
        self.scenarios().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config("model", other.to_string()),
        })?;
        Ok(())
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        match &self.model {
            ModelPreset::Example1 { dims, theta, alphas } => dims
                .iter()
                .map(|&d| {
                    let k = alphas.len();
                    let spec = ModelSpec::new(
                        d,
                        DriftFamily::DoubleLayer {
                            theta: *theta,
                            alphas: alphas.clone(),
                            bump: Bump::StandardNormalPdf,
                        },
                        Diffusion::Identity,
                        InitialLaw::StandardGaussian,
                        vec![1.0 / k as f64; k],
                    )?;
                    Ok(Scenario {
                        label: format!("d={d}"),
                        spec,
                    })
                })
                .collect(),
            ModelPreset::Example2 { thetas } => thetas
                .iter()
                .map(|&t| {
                    Ok(Scenario {
                        label: format!("theta={t}"),
                        spec: ModelSpec::cosine_squared(t)?,
                    })
                })
                .collect(),
            ModelPreset::Custom(c) => Ok(vec![Scenario {
                label: "custom".into(),
                spec: c.build()?,
            }]),
        }
    }

    /// Stable hash of everything that influences results (all fields except `out_dir`).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }
}

impl ConfigFile {
    fn bare(model: ModelPreset) -> Self {
        ConfigFile {
            model,
            horizon: None,
            steps: None,
            train_sizes: None,
            test_size: None,
            repetitions: None,
            class_sizes: None,
            priors: None,
            train: TrainConfig::default(),
            architecture: DriftArchitecture::default(),
            direct: None,
            bayes_reference: None,
            diagnostics: None,
            fit_window: None,
            smoothness: None,
            seed: None,
            out_dir: None,
        }
    }
}

impl CustomModel {
    pub fn build(&self) -> Result<ModelSpec> {
        let drift = match &self.drift {
            DriftSpec::DoubleLayer { theta, alphas } => DriftFamily::DoubleLayer {
                theta: *theta,
                alphas: alphas.clone(),
                bump: Bump::StandardNormalPdf,
            },
            DriftSpec::CosineSquared { theta, alphas } => DriftFamily::CosineSquared {
                theta: *theta,
                alphas: alphas.clone(),
            },
            DriftSpec::Constant { values } => DriftFamily::Constant { values: values.clone() },
            DriftSpec::MeanReverting { rates } => DriftFamily::MeanReverting { rates: rates.clone() },
        };
        let diffusion = match self.diffusion {
            DiffusionSpec::Identity => Diffusion::Identity,
            DiffusionSpec::Scaled { c } => Diffusion::Scaled(c),
            DiffusionSpec::ScalarFn => Diffusion::ScalarFn,
        };
        let initial = match &self.initial {
            InitialSpec::StandardGaussian => InitialLaw::StandardGaussian,
            InitialSpec::PointMass { x } => InitialLaw::PointMass(x.clone()),
        };
        let k = drift.num_classes();
        let priors = self.priors.clone().unwrap_or_else(|| vec![1.0 / k.max(1) as f64; k]);
        ModelSpec::new(self.dim, drift, diffusion, initial, priors)
    }
}

fn nest(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { path, message } => Error::config(format!("{prefix}.{path}"), message),
        other => other,
    }
}
