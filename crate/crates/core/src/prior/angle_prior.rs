//! Yeo-Johnson transformed-normal prior on the real-line angle images `ξ`.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::yeo_johnson::yeo_johnson;
use crate::error::{MvmnpError, Result};
use crate::linalg::{norm_ln_pdf, norm_pdf};
use crate::model::spherical::{angles_to_real, spherical_inverse};
use crate::model::ChoiceStructure;

pub const ETA_MIN: f64 = 0.1;
pub const ETA_MAX: f64 = 1.9;

/// Hyperparameters `(μ̂, τ̂, η̂)` of one angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleHyper {
    pub choice: usize,
    pub element: usize,
    pub mu: f64,
    pub tau: f64,
    pub eta: f64,
}

impl AngleHyper {
    pub fn standard(choice: usize, element: usize) -> Self {
        Self { choice, element, mu: 0.0, tau: 1.0, eta: 1.0 }
    }

    /// `log p(ξ) = log φ(t(u)) + log t′(u) − log τ̂`, `u = (ξ − μ̂)/τ̂`.
    pub fn log_density(&self, xi: f64) -> f64 {
        let e = yeo_johnson((xi - self.mu) / self.tau, self.eta);
        norm_ln_pdf(e.t) + e.dt.ln() - self.tau.ln()
    }

    pub fn density(&self, xi: f64) -> f64 {
        let e = yeo_johnson((xi - self.mu) / self.tau, self.eta);
        norm_pdf(e.t) * e.dt / self.tau
    }

    /// `∂ log p(ξ)/∂ξ = (−t t′ + t″/t′)/τ̂`.
    pub fn score(&self, xi: f64) -> Result<f64> {
        let e = yeo_johnson((xi - self.mu) / self.tau, self.eta);
        if !(e.dt > 0.0) {
            return Err(MvmnpError::Numerical(format!(
                "Yeo-Johnson slope {} at ξ = {xi} for angle ({}, {})",
                e.dt, self.choice, self.element
            )));
        }
        Ok((-e.t * e.dt + e.d2t / e.dt) / self.tau)
    }
}

/// Angle prior hyperparameters in `ξ` order, plus calibration metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnglePriorHyper {
    pub entries: Vec<AngleHyper>,
    pub mu_b: f64,
    pub seed: u64,
    pub draws: usize,
}

impl AnglePriorHyper {
    /// `N(0, 1)` on every `ξ`; handy for tests and as a neutral default.
    pub fn standard(structure: &ChoiceStructure) -> Self {
        let entries = (0..structure.num_choices())
            .flat_map(|k| (0..structure.angle_len(k)).map(move |l| AngleHyper::standard(k, l)))
            .collect();
        Self { entries, mu_b: 0.0, seed: 0, draws: 0 }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self, structure: &ChoiceStructure) -> Result<()> {
        if self.entries.len() != structure.angle_total() {
            return Err(MvmnpError::Shape(format!(
                "angle prior has {} entries, structure needs {}",
                self.entries.len(),
                structure.angle_total()
            )));
        }
        for h in &self.entries {
            if !(h.tau > 0.0) || !h.mu.is_finite() || !h.tau.is_finite() || !h.eta.is_finite() {
                return Err(MvmnpError::Config(format!("invalid angle hyperparameters {h:?}")));
            }
        }
        Ok(())
    }
}

/// Maps normalized `ψ_k` draws (`[choice][draw][entry]`) to `ξ` draws
/// (`[coordinate][draw]`, coordinates in `ξ` order).
pub fn xi_draws(structure: &ChoiceStructure, psi_draws: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    if psi_draws.len() != structure.num_choices() {
        return Err(MvmnpError::Shape("one set of ψ draws per choice is required".into()));
    }
    let mut out = vec![Vec::new(); structure.angle_total()];
    for k in 0..structure.num_choices() {
        let j_k = structure.alternatives(k);
        let off = structure.angle_offset(k);
        for psi in &psi_draws[k] {
            let xi = angles_to_real(&spherical_inverse(psi, j_k)?, j_k)?;
            for (l, v) in xi.into_iter().enumerate() {
                out[off + l].push(v);
            }
        }
    }
    Ok(out)
}

struct NegLogLik<'a> {
    data: &'a [f64],
}

fn unpack(p: &[f64]) -> (f64, f64, f64) {
    let eta = ETA_MIN + (ETA_MAX - ETA_MIN) / (1.0 + (-p[2]).exp());
    (p[0], p[1].exp(), eta)
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, ArgminError> {
        let (mu, tau, eta) = unpack(p);
        let h = AngleHyper { choice: 0, element: 0, mu, tau, eta };
        let total: f64 = self.data.iter().map(|&x| h.log_density(x)).sum();
        let value = -total / self.data.len() as f64;
        Ok(if value.is_finite() { value } else { f64::MAX })
    }
}

/// Maximum-likelihood fit of `(μ̂, τ̂, η̂)` to one coordinate's draws.
pub fn fit_angle(data: &[f64], choice: usize, element: usize) -> Result<AngleHyper> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if !(var > 1e-24) || !mean.is_finite() {
        return Err(MvmnpError::Calibration(format!(
            "draws for angle ({choice}, {element}) are degenerate (variance {var})"
        )));
    }
    let sd = var.sqrt();
    let mut start = vec![mean, sd.ln(), 0.0];
    // two rounds: Nelder-Mead tends to stall with a collapsed simplex
    for _ in 0..2 {
        let simplex = vec![
            start.clone(),
            vec![start[0] + 0.2 * sd, start[1], start[2]],
            vec![start[0], start[1] + 0.2, start[2]],
            vec![start[0], start[1], start[2] + 0.5],
        ];
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-12)
            .map_err(|e| MvmnpError::Calibration(e.to_string()))?;
        let res = Executor::new(NegLogLik { data }, solver)
            .configure(|s| s.max_iters(2000))
            .run()
            .map_err(|e| MvmnpError::Calibration(format!("angle ({choice}, {element}): {e}")))?;
        start = res
            .state()
            .get_best_param()
            .cloned()
            .ok_or_else(|| MvmnpError::Calibration("optimizer returned no parameters".into()))?;
    }
    let (mu, tau, eta) = unpack(&start);
    Ok(AngleHyper { choice, element, mu, tau, eta })
}

/// Fits the angle prior to `ψ` draws.
pub fn calibrate_angle_prior(
    structure: &ChoiceStructure,
    psi_draws: &[Vec<Vec<f64>>],
    mu_b: f64,
    seed: u64,
) -> Result<AnglePriorHyper> {
    let draws = xi_draws(structure, psi_draws)?;
    let count = draws.first().map_or(0, |d| d.len());
    let index: Vec<(usize, usize)> = (0..structure.num_choices())
        .flat_map(|k| (0..structure.angle_len(k)).map(move |l| (k, l)))
        .collect();
    let entries = index
        .par_iter()
        .zip(draws.par_iter())
        .map(|(&(k, l), d)| fit_angle(d, k, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnglePriorHyper { entries, mu_b, seed, draws: count })
}
