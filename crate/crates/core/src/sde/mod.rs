//! Ground-truth diffusion models and trajectory generation.
//!
//! A [`ModelSpec`] describes `K` classes of the SDE
//! `dX_t = b_k(X_t) dt + sigma(X_t) dW_t` in dimension `d`, sharing the
//! diffusion coefficient and initial law and differing only in drift.
//! Class labels are 0-based indices `0..K`.

mod dataset;
mod io;
mod model;
mod simulate;

pub use dataset::{class_counts, generate_dataset, multinomial_counts, ClassSizes, LabeledDataset};
pub use io::{read_dataset, write_dataset, DatasetHeader};
pub use model::{Bump, Diffusion, DriftFamily, InitialLaw, MatrixField, ModelSpec, ScalarMap, VectorField};
pub use simulate::{euler_maruyama, simulate_path, Trajectory};

pub(crate) use io::fmt_f64;
pub(crate) use model::scalar_sigma;
