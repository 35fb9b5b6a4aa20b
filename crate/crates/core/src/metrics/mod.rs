//! Risk estimation, confidence intervals and convergence-rate diagnostics.

mod rate;
mod risk;
mod stats;

pub use rate::{anchored_reference, fit_rate, phi_rate, RateCurvePoint, RateFit};
pub use risk::{estimation_error, excess_risk, misclassification_risk, write_confusion, Condition, RiskEstimate};
pub use stats::{
    confidence_interval, ln_gamma, regularized_incomplete_beta, student_t_cdf, student_t_quantile, ConfidenceInterval,
};
