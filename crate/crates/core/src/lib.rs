//! Estimation of multivariate multinomial probit models by variational Bayes
//! and Markov chain Monte Carlo.

pub mod dgp;
pub mod error;
pub mod linalg;
pub mod model;
pub mod prior;
pub mod rng;
pub mod truncnorm;
pub mod gibbs;
pub mod likelihood;
pub mod mcmc;
pub mod predictive;
pub mod vb;
pub mod io;
pub mod summary;
pub mod experiment;

pub use error::{MvmnpError, Result};
