//! Variational Bayes with a Gaussian factor family over `θ`.

pub mod adadelta;
pub mod engine;
pub mod params;

pub use adadelta::Adadelta;
pub use engine::{run_vb, run_vb_identity, DiagnosticPoint, GradientEstimate, SgaConfig, VbFit, VbModel, VbState, VbTiming};
pub use params::VariationalParams;
