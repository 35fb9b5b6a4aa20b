//! Plug-in classification of discretely observed diffusion paths.
//!
//! Each class `k` is a diffusion `dX = b_k(X) dt + sigma(X) dW` with a shared,
//! known diffusion coefficient. A path is assigned to the class maximizing the
//! prior-weighted discretized Girsanov score, with the drifts either known
//! ([`classify::bayes_oracle`]) or estimated by sparse ReLU networks trained on
//! labeled paths ([`nn::train_drift_estimator`]).
//!
//! ```no_run
//! use driftclass::prelude::*;
//!
//! let spec = ModelSpec::cosine_squared(4.0)?;
//! let key = SeedKey::new(7);
//! let train = generate_dataset(&spec, ClassSizes::Multinomial(1000), 100, 1.0, key.child(tag::TRAIN))?;
//! let test = generate_dataset(&spec, ClassSizes::Multinomial(1000), 100, 1.0, key.child(tag::TEST))?;
//!
//! let estimators = (0..spec.num_classes())
//!     .map(|k| train_drift_estimator(train.class(k), k, &DriftArchitecture::default(), &TrainConfig::default()))
//!     .collect::<Result<Vec<_>>>()?;
//! let plug_in = PlugInClassifier::from_estimators(&spec, estimators, train.empirical_priors())?;
//! let risk = misclassification_risk(&plug_in, &test)?;
//! println!("test error {:.3}", risk.error_rate);
//! # Ok::<(), driftclass::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
mod error;
pub mod harness;
pub(crate) mod linalg;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::classify::{
        bayes_oracle, classify, posteriors, score_discretized, ClassScores, Classifier, DriftEvaluator,
        PlugInClassifier, Posteriors,
    };
    pub use crate::metrics::{
        confidence_interval, estimation_error, excess_risk, fit_rate, misclassification_risk, phi_rate, Condition,
        RateCurvePoint, RiskEstimate,
    };
    pub use crate::nn::{
        train_direct_classifier, train_drift_estimator, DirectConfig, DriftArchitecture, DriftEstimator, MlpParams,
        TrainConfig,
    };
    pub use crate::rng::{tag, SeedKey};
    pub use crate::sde::{
        generate_dataset, simulate_path, ClassSizes, Diffusion, DriftFamily, InitialLaw, LabeledDataset, ModelSpec,
        Trajectory,
    };
    pub use crate::{Error, Result};
}
