//! Model structure, data, design matrices and covariance parameterization.

pub mod covariance;
pub mod dataset;
pub mod design;
pub mod outcome;
pub mod spherical;
pub mod structure;

pub use covariance::FactorCovariance;
pub use dataset::Dataset;
pub use design::{build_design, DesignMatrix};
pub use outcome::{indicator_y_given_z, outcome_from_utilities};
pub use structure::ChoiceStructure;
