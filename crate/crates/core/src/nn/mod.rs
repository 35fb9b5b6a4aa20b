//! From-scratch ReLU networks: the sparse drift regressors and the direct
//! pathwise baseline classifier.

mod adam;
mod dense;
mod direct;
mod drift;
mod mlp;

pub use adam::Adam;
pub use direct::{search_grid, train_direct_classifier, DirectClassifier, DirectConfig, Hyperparams, Trial};
pub use drift::{
    compute_increment_targets, drift_loss, train_drift_estimator, train_drift_estimator_monitored, CoordinateMeta,
    DriftArchitecture, DriftEstimator, EpochRecord, NoMonitor, Phase, RegressionSamples, TrainConfig, TrainMonitor,
};
pub use mlp::{MlpParams, SupportBox};
