use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PriorMode, Scenario};
use super::experiment::{monte_carlo_bayes_risk, repetition_key, run_experiment, thread_pool};
use super::report::{reaggregate, Method, RiskReport};
use crate::classify::{bayes_oracle, write_predictions, DriftEvaluator, PlugInClassifier};
use crate::error::{Error, Result};
use crate::metrics::{misclassification_risk, write_confusion};
use crate::nn::{
    train_direct_classifier, train_drift_estimator, DirectClassifier, DirectConfig, DriftEstimator, TrainConfig,
};
use crate::rng::{tag, SeedKey};
use crate::sde::{generate_dataset, read_dataset, write_dataset, LabeledDataset};

#[derive(Parser, Debug)]
#[command(name = "driftclass", version, about = "Classify diffusion paths by their drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a labeled dataset (the training or test set of repetition 0).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "train")]
        split: Split,
        /// Training size; defaults to the first configured size.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        scenario: usize,
    },
    /// Train one drift estimator per class on a dataset.
    TrainDrift {
        #[command(flatten)]
        common: Common,
        /// Dataset stem (`<stem>.csv` + `<stem>.json`).
        #[arg(long)]
        data: PathBuf,
    },
    /// Train the pathwise network baseline on a dataset.
    TrainDirect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Classify a dataset with saved models and the Bayes oracle.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Directory holding `drift_models.json` and/or `direct_model.json`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value_t = 0)]
        scenario: usize,
    },
    /// Monte Carlo Bayes error of every configured scenario.
    BayesRisk {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
    },
    /// Run all repetitions and write the report files.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Re-aggregate the records of saved runs.
    Report {
        #[command(flatten)]
        common: Common,
        /// Run directories containing `meta.json` and `records.jsonl`.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

/// Saved plug-in ingredients.
#[derive(Debug, Serialize, Deserialize)]
pub struct DriftModels {
    pub config_hash: String,
    pub priors: Vec<f64>,
    pub estimators: Vec<DriftEstimator>,
}

/// Saved direct baseline.
#[derive(Debug, Serialize, Deserialize)]
pub struct DirectModel {
    pub config_hash: String,
    pub classifier: DirectClassifier,
}

/// Entry point of the `driftclass` binary. Returns the process exit code:
/// 0 on success, 2 on usage or configuration errors, 1 on runtime failures.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = thread_pool().and_then(|pool| pool.install(|| dispatch(cli.command)));
    match result {
        Ok(()) => 0,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let Some(path) = &common.config else {
        return Err(Error::config("--config", "this command needs a config file"));
    };
    let mut cfg = ExperimentConfig::from_file(path).map_err(|e| match e {
        Error::Config { path: field, message } => Error::config(field, format!("{message} (in {})", path.display())),
        Error::Io { .. } => Error::config("--config", e.to_string()),
        other => other,
    })?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Error::config("out_dir", "no output directory (use --out)"))?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn scenario(cfg: &ExperimentConfig, index: usize) -> Result<Scenario> {
    let mut all = cfg.scenarios()?;
    if index >= all.len() {
        return Err(Error::config(
            "--scenario",
            format!("config has {} scenarios", all.len()),
        ));
    }
    Ok(all.swap_remove(index))
}

fn load_data(stem: &Path) -> Result<LabeledDataset> {
    let stem = stem.with_extension("");
    Ok(read_dataset(&stem)?.0)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            common,
            split,
            size,
            scenario: s,
        } => {
            let cfg = load_config(&common)?;
            let sc = scenario(&cfg, s)?;
            let skey = repetition_key(cfg.seed, 0).child(s as u64);
            let (n, key) = match split {
                Split::Train => {
                    let n = size.unwrap_or(cfg.train_sizes[0]);
                    (n, skey.path(&[tag::TRAIN, n as u64]))
                }
                Split::Test => (size.unwrap_or(cfg.test_size), skey.child(tag::TEST)),
            };
            let data = generate_dataset(&sc.spec, cfg.class_sizes.sizes(n), cfg.steps, cfg.horizon, key)?;
            let dir = out_dir(&cfg)?;
            let (csv, json) = write_dataset(&data, &dir.join("dataset"), Some(&cfg.hash()))?;
            println!(
                "{} paths ({:?} per class) -> {}, {}",
                data.len(),
                data.counts(),
                csv.display(),
                json.display()
            );
        }
        Command::TrainDrift { common, data } => {
            let cfg = load_config(&common)?;
            let data = load_data(&data)?;
            let key = SeedKey::new(cfg.seed);
            let estimators = (0..data.num_classes())
                .map(|k| {
                    let tc = TrainConfig {
                        seed: key.path(&[tag::INIT, k as u64]).raw(),
                        ..cfg.train.clone()
                    };
                    let est = train_drift_estimator(data.class(k), k, &cfg.architecture, &tc)?;
                    let stops: Vec<usize> = est.meta.iter().map(|m| m.stop_epoch).collect();
                    println!("class {k}: {} paths, stop epochs {stops:?}", data.class(k).len());
                    Ok(est)
                })
                .collect::<Result<Vec<_>>>()?;
            let priors = match cfg.priors {
                PriorMode::Empirical => data.empirical_priors(),
                PriorMode::True => vec![1.0 / data.num_classes() as f64; data.num_classes()],
            };
            let models = DriftModels {
                config_hash: cfg.hash(),
                priors,
                estimators,
            };
            let path = out_dir(&cfg)?.join("drift_models.json");
            std::fs::write(&path, serde_json::to_string(&models)?).map_err(|e| Error::io(&path, e))?;
            println!("-> {}", path.display());
        }
        Command::TrainDirect { common, data } => {
            let cfg = load_config(&common)?;
            let data = load_data(&data)?;
            let dc = DirectConfig {
                seed: SeedKey::new(cfg.seed).child(tag::DIRECT).raw(),
                ..cfg.direct.config.clone()
            };
            let classifier = train_direct_classifier(&data, &dc)?;
            println!("selected {:?}", classifier.selected);
            let path = out_dir(&cfg)?.join("direct_model.json");
            let model = DirectModel {
                config_hash: cfg.hash(),
                classifier,
            };
            std::fs::write(&path, serde_json::to_string(&model)?).map_err(|e| Error::io(&path, e))?;
            println!("-> {}", path.display());
        }
        Command::Evaluate {
            common,
            data,
            models,
            scenario: s,
        } => {
            let cfg = load_config(&common)?;
            let sc = scenario(&cfg, s)?;
            let data = load_data(&data)?;
            let dir = out_dir(&cfg)?;
            let hash = cfg.hash();
            let bayes = misclassification_risk(&bayes_oracle(&sc.spec)?, &data)?;
            println!("bayes\t{}", bayes.error_rate);
            write_confusion(&dir.join("confusion_bayes.csv"), &bayes)?;
            let drift_path = models.join("drift_models.json");
            let direct_path = models.join("direct_model.json");
            if !drift_path.exists() && !direct_path.exists() {
                return Err(Error::InvalidArgument(format!(
                    "no saved models in {}",
                    models.display()
                )));
            }
            if drift_path.exists() {
                let text = std::fs::read_to_string(&drift_path).map_err(|e| Error::io(&drift_path, e))?;
                let saved: DriftModels = serde_json::from_str(&text)?;
                let prior = match cfg.priors {
                    PriorMode::True => sc.spec.priors().to_vec(),
                    PriorMode::Empirical => saved.priors,
                };
                let drifts = saved.estimators.into_iter().map(DriftEvaluator::estimated).collect();
                let plug_in = PlugInClassifier::new(&sc.spec, drifts, prior)?;
                let risk = misclassification_risk(&plug_in, &data)?;
                println!("plug_in\t{}", risk.error_rate);
                write_confusion(&dir.join("confusion_plug_in.csv"), &risk)?;
                write_predictions(&dir.join("predictions.csv"), &plug_in, &data, Some(&hash))?;
            }
            if direct_path.exists() {
                let text = std::fs::read_to_string(&direct_path).map_err(|e| Error::io(&direct_path, e))?;
                let saved: DirectModel = serde_json::from_str(&text)?;
                let risk = misclassification_risk(&saved.classifier, &data)?;
                println!("direct\t{}", risk.error_rate);
                write_confusion(&dir.join("confusion_direct.csv"), &risk)?;
            }
        }
        Command::BayesRisk { common, paths } => {
            let cfg = load_config(&common)?;
            if paths == 0 {
                return Err(Error::config("--paths", "must be positive"));
            }
            let mut rows = Vec::new();
            for (s, sc) in cfg.scenarios()?.iter().enumerate() {
                let key = SeedKey::new(cfg.seed).path(&[tag::BAYES, s as u64]);
                let risk = monte_carlo_bayes_risk(sc, cfg.steps, cfg.horizon, paths, key)?;
                println!("{}\t{risk}", sc.label);
                rows.push((sc.label.clone(), risk));
            }
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let mut w = csv::Writer::from_path(dir.join("bayes_risk.csv"))?;
                w.write_record(["config_hash", "scenario", "paths", "bayes_risk"])?;
                for (label, risk) in rows {
                    w.write_record([cfg.hash(), label, paths.to_string(), risk.to_string()])?;
                }
                w.flush().map_err(|e| Error::io(dir, e))?;
            }
        }
        Command::Experiment { common } => {
            let cfg = load_config(&common)?;
            out_dir(&cfg)?;
            let report = run_experiment(&cfg)?;
            print_summary(&report);
        }
        Command::Report { common, runs } => {
            let out = common.out.clone().unwrap_or_else(|| runs[0].clone());
            let report = reaggregate(&runs, &out)?;
            print_summary(&report);
        }
    }
    Ok(())
}

fn print_summary(report: &RiskReport) {
    println!(
        "config {} ({} repetitions, {} failed)",
        report.config_hash, report.n_ok, report.n_failed
    );
    println!("scenario\tN\tmethod\tmean_risk\tmean_excess");
    for r in &report.rows {
        println!(
            "{}\t{}\t{}\t{:.4}\t{:.4}",
            r.scenario,
            r.point.n,
            r.method.name(),
            r.risk.mean,
            r.point.mean_excess
        );
    }
    for f in &report.fits {
        if let (Some(slope), Method::PlugIn) = (f.slope, f.method) {
            println!("{}\tslope {slope:.3} over N = {}..{}", f.scenario, f.n_from, f.n_to);
        }
    }
}
