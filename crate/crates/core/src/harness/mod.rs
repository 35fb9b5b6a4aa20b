//! Experiment orchestration: configs, seeded repetitions, aggregation and the CLI.

mod cli;
mod config;
mod experiment;
mod report;

pub use cli::{cli_main, DirectModel, DriftModels};
pub use config::{
    BayesReference, CustomModel, DiffusionSpec, DirectBaseline, DriftSpec, ExperimentConfig, InitialSpec, ModelPreset,
    PriorMode, Scenario, SizeMode, Smoothness,
};
pub use experiment::{
    monte_carlo_bayes_risk, reference_risks, repetition_key, run_experiment, run_repetition, thread_pool,
    EstimationRecord, ReferenceRisk, RepetitionRecord, RunMeta, SizeRecord,
};
pub use report::{
    aggregate, load_run, reaggregate, write_report_files, FitRow, Method, ReportRow, RiskReport, Summary,
};
