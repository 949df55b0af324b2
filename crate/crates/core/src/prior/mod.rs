//! Prior on `θ = (β, ξ)` and its calibration.

pub mod angle_prior;
pub mod psi_prior;
pub mod yeo_johnson;

use serde::{Deserialize, Serialize};

pub use angle_prior::{calibrate_angle_prior, AngleHyper, AnglePriorHyper};
pub use psi_prior::{calibrate_mu_b, sample_psi_prior, PsiPriorHyper};
pub use yeo_johnson::{yeo_johnson, YjEval};

use crate::error::{MvmnpError, Result};
use crate::linalg::{norm_ln_pdf, LN_2PI};
use crate::model::spherical::{angle_bound, angle_to_real, real_to_angle_derivative};
use crate::model::ChoiceStructure;
use crate::rng::{derive_seed, Purpose};

/// Prior precision of every coefficient, `β ~ N(0, I/10)`.
pub const BETA_PRECISION: f64 = 10.0;

/// Full prior `p(θ) = p(β) Π p(ξ_kl)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub structure: ChoiceStructure,
    pub angles: AnglePriorHyper,
}

impl Prior {
    pub fn new(structure: &ChoiceStructure, angles: AnglePriorHyper) -> Result<Self> {
        angles.validate(structure)?;
        Ok(Self { structure: structure.clone(), angles })
    }

    /// Standard-normal angle prior (no calibration).
    pub fn standard(structure: &ChoiceStructure) -> Self {
        Self { structure: structure.clone(), angles: AnglePriorHyper::standard(structure) }
    }

    fn split<'a>(&self, theta: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
        if theta.len() != self.structure.param_dim() {
            return Err(MvmnpError::Shape(format!(
                "θ has {} entries, expected {}",
                theta.len(),
                self.structure.param_dim()
            )));
        }
        Ok(theta.split_at(self.structure.coef_total()))
    }

    /// `log p(β)` including its normalizing constant.
    pub fn log_prior_beta(beta: &[f64]) -> f64 {
        let r = beta.len() as f64;
        -0.5 * r * (LN_2PI - BETA_PRECISION.ln()) - 0.5 * BETA_PRECISION * beta.iter().map(|b| b * b).sum::<f64>()
    }

    pub fn log_prior_xi(&self, xi: &[f64]) -> f64 {
        xi.iter().zip(&self.angles.entries).map(|(&x, h)| h.log_density(x)).sum()
    }

    /// `log p(θ)`.
    pub fn log_prior(&self, theta: &[f64]) -> Result<f64> {
        let (beta, xi) = self.split(theta)?;
        Ok(Self::log_prior_beta(beta) + self.log_prior_xi(xi))
    }

    /// `∇_θ log p(θ)`: `−10β` then the per-angle scores.
    pub fn grad_log_prior(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let (beta, xi) = self.split(theta)?;
        let mut g = Vec::with_capacity(theta.len());
        g.extend(beta.iter().map(|b| -BETA_PRECISION * b));
        for (&x, h) in xi.iter().zip(&self.angles.entries) {
            g.push(h.score(x)?);
        }
        Ok(g)
    }

    /// `log p(κ)` of one angle (index in `ξ` order), the `ξ` density times
    /// `dξ/dκ`. Returns `−∞` outside the angle's bounds.
    pub fn log_prior_kappa(&self, index: usize, kappa: f64) -> f64 {
        let h = &self.angles.entries[index];
        let upper = angle_bound(h.element, self.structure.angle_len(h.choice), self.structure.alternatives(h.choice));
        match angle_to_real(kappa, upper) {
            Ok(xi) => h.log_density(xi) - real_to_angle_derivative(xi, upper).ln(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Upper bound of angle `index` (in `ξ` order).
    pub fn kappa_upper(&self, index: usize) -> f64 {
        let h = &self.angles.entries[index];
        angle_bound(h.element, self.structure.angle_len(h.choice), self.structure.alternatives(h.choice))
    }
}

/// Settings for prior calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Draws used both for the `μ_B` bisection and for the angle fits.
    pub draws: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { draws: 100_000, seed: 1 }
    }
}

/// Calibrates `μ_B`, then fits the angle prior to fresh `ψ̈` draws.
pub fn calibrate_prior(structure: &ChoiceStructure, config: &CalibrationConfig) -> Result<Prior> {
    let cal = calibrate_mu_b(structure, config.draws, derive_seed(config.seed, Purpose::PsiPrior, 0))?;
    let hyper = PsiPriorHyper::new(cal.mu_b);
    let draws = sample_psi_prior(&hyper, structure, config.draws, derive_seed(config.seed, Purpose::PsiPrior, 1))?;
    let angles = calibrate_angle_prior(structure, &draws, cal.mu_b, config.seed)?;
    Prior::new(structure, angles)
}

/// Log-density of the standard normal, re-exported for prior-recovery checks.
pub fn standard_normal_ln_pdf(x: f64) -> f64 {
    norm_ln_pdf(x)
}
