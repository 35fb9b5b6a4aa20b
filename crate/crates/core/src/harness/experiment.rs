use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BayesReference, ExperimentConfig, PriorMode, Scenario};
use super::report::{aggregate, write_report_files, RiskReport};
use crate::classify::{bayes_oracle, DriftEvaluator, PlugInClassifier};
use crate::error::{Error, Result};
use crate::metrics::{estimation_error, misclassification_risk, Condition};
use crate::nn::{train_direct_classifier, train_drift_estimator, DirectConfig, DriftEstimator, TrainConfig};
use crate::rng::{tag, SeedKey};
use crate::sde::{generate_dataset, ClassSizes, LabeledDataset};

/// Mean squared drift errors of one trained plug-in, per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    /// Averaged over all test paths.
    pub all: Vec<f64>,
    /// Averaged over the test paths of the same class.
    pub by_class: Vec<f64>,
}

/// Results for one (scenario, training size) cell of a repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRecord {
    pub scenario: usize,
    pub n: usize,
    pub train_counts: Vec<usize>,
    pub plug_in: f64,
    /// Bayes oracle on the same test set.
    pub bayes: f64,
    pub direct: Option<f64>,
    pub estimation: Option<EstimationRecord>,
    /// Early-stopping epochs, `[class][coordinate]`.
    pub stop_epochs: Vec<Vec<usize>>,
}

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub config_hash: String,
    pub rep_index: usize,
    pub seed: u64,
    pub results: Vec<SizeRecord>,
    /// Set when the repetition failed; `results` is then empty.
    pub error: Option<String>,
}

/// Bayes risk used as the excess-risk baseline for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRisk {
    pub scenario: usize,
    pub label: String,
    pub error_rate: f64,
    pub paths: usize,
}

/// Seed node of repetition `rep_index`.
pub fn repetition_key(master: u64, rep_index: usize) -> SeedKey {
    SeedKey::new(master).path(&[tag::REP, rep_index as u64])
}

/// Runs one repetition: per scenario, one shared test set and, per training
/// size, fresh training data, K drift estimators, the plug-in classifier, the
/// Bayes oracle and optionally the direct baseline.
pub fn run_repetition(config: &ExperimentConfig, rep_index: usize) -> Result<RepetitionRecord> {
    let key = repetition_key(config.seed, rep_index);
    let scenarios = config.scenarios()?;
    let mut results = Vec::with_capacity(scenarios.len() * config.train_sizes.len());
    for (s, scenario) in scenarios.iter().enumerate() {
        let skey = key.child(s as u64);
        let test = generate_dataset(
            &scenario.spec,
            config.class_sizes.sizes(config.test_size),
            config.steps,
            config.horizon,
            skey.child(tag::TEST),
        )?;
        let bayes = misclassification_risk(&bayes_oracle(&scenario.spec)?, &test)?.error_rate;
        for &n in &config.train_sizes {
            results.push(run_cell(config, scenario, s, n, skey, &test, bayes)?);
        }
    }
    Ok(RepetitionRecord {
        config_hash: config.hash(),
        rep_index,
        seed: key.raw(),
        results,
        error: None,
    })
}

fn run_cell(
    config: &ExperimentConfig,
    scenario: &Scenario,
    s: usize,
    n: usize,
    skey: SeedKey,
    test: &LabeledDataset,
    bayes: f64,
) -> Result<SizeRecord> {
    let spec = &scenario.spec;
    let k = spec.num_classes();
    let train = generate_dataset(
        spec,
        config.class_sizes.sizes(n),
        config.steps,
        config.horizon,
        skey.path(&[tag::TRAIN, n as u64]),
    )?;
    let estimators = (0..k)
        .map(|c| {
            let cfg = TrainConfig {
                seed: skey.path(&[tag::INIT, n as u64, c as u64]).raw(),
                ..config.train.clone()
            };
            train_drift_estimator(train.class(c), c, &config.architecture, &cfg)
        })
        .collect::<Result<Vec<DriftEstimator>>>()?;
    let stop_epochs = estimators
        .iter()
        .map(|e| e.meta.iter().map(|m| m.stop_epoch).collect())
        .collect();
    let priors = match config.priors {
        PriorMode::True => spec.priors().to_vec(),
        PriorMode::Empirical => train.empirical_priors(),
    };
    let drifts: Vec<DriftEvaluator> = estimators.into_iter().map(DriftEvaluator::estimated).collect();
    let plug_in = PlugInClassifier::new(spec, drifts, priors)?;
    let plug_in_rate = misclassification_risk(&plug_in, test)?.error_rate;

    let estimation = if config.diagnostics {
        let mut all = Vec::with_capacity(k);
        let mut by_class = Vec::with_capacity(k);
        for c in 0..k {
            let truth = DriftEvaluator::truth(spec, c)?;
            let est = &plug_in.drifts()[c];
            all.push(estimation_error(est, &truth, test, Condition::All)?);
            by_class.push(if test.class(c).is_empty() {
                f64::NAN
            } else {
                estimation_error(est, &truth, test, Condition::Class(c))?
            });
        }
        Some(EstimationRecord { all, by_class })
    } else {
        None
    };

    let direct = if config.direct.enabled {
        if k == 1 {
            // a single class is always predicted correctly
            Some(0.0)
        } else {
            let cfg = DirectConfig {
                seed: skey.path(&[tag::DIRECT, n as u64]).raw(),
                ..config.direct.config.clone()
            };
            let clf = train_direct_classifier(&train, &cfg)?;
            Some(misclassification_risk(&clf, test)?.error_rate)
        }
    } else {
        None
    };

    Ok(SizeRecord {
        scenario: s,
        n,
        train_counts: train.counts(),
        plug_in: plug_in_rate,
        bayes,
        direct,
        estimation,
        stop_epochs,
    })
}

/// Bayes-oracle error on `paths` fresh paths drawn with the true priors.
pub fn monte_carlo_bayes_risk(
    scenario: &Scenario,
    steps: usize,
    horizon: f64,
    paths: usize,
    key: SeedKey,
) -> Result<f64> {
    let data = generate_dataset(&scenario.spec, ClassSizes::Multinomial(paths), steps, horizon, key)?;
    Ok(misclassification_risk(&bayes_oracle(&scenario.spec)?, &data)?.error_rate)
}

/// Baselines for the excess risk; empty in paired mode.
pub fn reference_risks(config: &ExperimentConfig) -> Result<Vec<ReferenceRisk>> {
    let BayesReference::Dedicated { paths } = config.bayes_reference else {
        return Ok(Vec::new());
    };
    config
        .scenarios()?
        .iter()
        .enumerate()
        .map(|(s, scenario)| {
            let key = SeedKey::new(config.seed).path(&[tag::BAYES, s as u64]);
            Ok(ReferenceRisk {
                scenario: s,
                label: scenario.label.clone(),
                error_rate: monte_carlo_bayes_risk(scenario, config.steps, config.horizon, paths, key)?,
                paths,
            })
        })
        .collect()
}

/// Worker pool sized by `DRIFTCLASS_THREADS`, defaulting to available parallelism.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DRIFTCLASS_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("DRIFTCLASS_THREADS={v} is not a count")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs all repetitions, aggregates them and, if `out_dir` is set, writes
/// `records.jsonl`, `meta.json`, `report.csv`, `table.csv` and `fits.csv`.
///
/// Failed repetitions are excluded from the aggregates; more than 20% failures
/// abort with [`Error::TooManyFailures`] after the records are written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RiskReport> {
    config.validate()?;
    let started = Instant::now();
    let pool = thread_pool()?;
    let hash = config.hash();
    let (references, mut records) = pool.install(|| -> Result<_> {
        let references = reference_risks(config)?;
        let records: Vec<RepetitionRecord> = (0..config.repetitions)
            .into_par_iter()
            .map(|r| {
                let rec = run_repetition(config, r).unwrap_or_else(|e| {
                    log::warn!("repetition {r} failed: {e}");
                    RepetitionRecord {
                        config_hash: hash.clone(),
                        rep_index: r,
                        seed: repetition_key(config.seed, r).raw(),
                        results: Vec::new(),
                        error: Some(e.to_string()),
                    }
                });
                log::info!("repetition {r} done");
                rec
            })
            .collect();
        Ok((references, records))
    })?;
    records.sort_by_key(|r| r.rep_index);

    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let mut report = if failed * 5 > records.len() {
        None
    } else {
        Some(aggregate(config, &records, &references)?)
    };
    if let Some(r) = report.as_mut() {
        r.wall_time_s = Some(started.elapsed().as_secs_f64());
    }
    if let Some(dir) = &config.out_dir {
        write_run(
            dir,
            config,
            &records,
            &references,
            report.as_ref(),
            started.elapsed().as_secs_f64(),
        )?;
    }
    report.ok_or(Error::TooManyFailures {
        failed,
        total: records.len(),
    })
}

/// Run metadata stored in `meta.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub references: Vec<ReferenceRisk>,
    pub rep_seeds: Vec<u64>,
    pub failures: Vec<(usize, String)>,
    pub wall_time_s: f64,
    pub version: String,
    pub notes: Vec<String>,
}

fn write_run(
    dir: &Path,
    config: &ExperimentConfig,
    records: &[RepetitionRecord],
    references: &[ReferenceRisk],
    report: Option<&RiskReport>,
    wall_time_s: f64,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut lines = String::new();
    for r in records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    let path = dir.join("records.jsonl");
    std::fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;

    let meta = RunMeta {
        config_hash: config.hash(),
        config: config.clone(),
        references: references.to_vec(),
        rep_seeds: records.iter().map(|r| r.seed).collect(),
        failures: records
            .iter()
            .filter_map(|r| r.error.clone().map(|e| (r.rep_index, e)))
            .collect(),
        wall_time_s,
        version: env!("CARGO_PKG_VERSION").to_string(),
        notes: vec![super::report::BSPLINE_NOTE.to_string()],
    };
    let path = dir.join("meta.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))?;

    if let Some(report) = report {
        write_report_files(dir, report)?;
    }
    Ok(())
}
