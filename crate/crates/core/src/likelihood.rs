//! Augmented log-posterior `log g(θ, z)` and its gradient in `θ = (β, ξ)`.
//!
//! The `ξ` gradient never forms Kronecker products. With
//! `S = Σ_{i∈A} η_i η_iᵀ` and scale `N/M`, the derivative of the summed
//! Gaussian log-density with respect to a symmetric `Σ` is
//! `G = ½ (N/M) (Σ⁻¹ S Σ⁻¹ − M Σ⁻¹)`, giving `∂/∂B = 2 G B` and
//! `∂/∂d_j = 2 G_jj d_j`; these are chained through `∂ψ/∂κ` and `dκ/dξ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{MvmnpError, Result};
use crate::gibbs::LatentUtilities;
use crate::linalg::{SpdFactor, LN_2PI};
use crate::model::covariance::{kappa_from_xi, FactorCovariance};
use crate::model::spherical::{angle_bound, real_to_angle_derivative, spherical_jacobian};
use crate::model::{ChoiceStructure, DesignMatrix};
use crate::prior::Prior;

const CHUNK: usize = 64;

/// Observation data needed to evaluate the likelihood.
#[derive(Clone, Copy)]
pub struct LikelihoodInputs<'a> {
    pub structure: &'a ChoiceStructure,
    pub design: &'a DesignMatrix,
    pub latent: &'a LatentUtilities,
}

/// Sufficient statistics of the residuals `η_i = z_i − X_i β` over a subset.
#[derive(Clone, Debug)]
pub struct ResidualStats {
    /// `Σ_i η_i η_iᵀ`.
    pub cross: DMatrix<f64>,
    /// `Σ_i X_iᵀ W η_i` for the weight matrix `W` passed in (`Σ⁻¹` or `I`).
    pub xt_w_eta: Vec<f64>,
    pub count: usize,
}

/// Accumulates residual statistics in fixed-size chunks reduced in order, so
/// results do not depend on the number of threads.
pub fn residual_stats(
    inputs: LikelihoodInputs<'_>,
    beta: &[f64],
    weight: Option<&DMatrix<f64>>,
    subset: &[usize],
) -> ResidualStats {
    let j = inputs.structure.total_alternatives();
    let r = inputs.structure.coef_total();
    let partials: Vec<(DMatrix<f64>, Vec<f64>)> = subset
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut cross = DMatrix::zeros(j, j);
            let mut grad = vec![0.0; r];
            let mut eta = vec![0.0; j];
            let mut w_eta = vec![0.0; j];
            for &i in chunk {
                inputs.design.mul_beta(i, beta, &mut eta);
                let zi = inputs.latent.row(i);
                for l in 0..j {
                    eta[l] = zi[l] - eta[l];
                }
                for a in 0..j {
                    for b in 0..=a {
                        cross[(a, b)] += eta[a] * eta[b];
                    }
                }
                match weight {
                    Some(w) => {
                        for a in 0..j {
                            w_eta[a] = (0..j).map(|b| w[(a, b)] * eta[b]).sum();
                        }
                        inputs.design.add_transpose_mul(i, &w_eta, &mut grad);
                    }
                    None => inputs.design.add_transpose_mul(i, &eta, &mut grad),
                }
            }
            (cross, grad)
        })
        .collect();
    let mut cross = DMatrix::zeros(j, j);
    let mut xt_w_eta = vec![0.0; r];
    for (c, g) in partials {
        cross += c;
        for (a, b) in xt_w_eta.iter_mut().zip(g) {
            *a += b;
        }
    }
    for a in 0..j {
        for b in a + 1..j {
            cross[(a, b)] = cross[(b, a)];
        }
    }
    ResidualStats { cross, xt_w_eta, count: subset.len() }
}

/// `Σ_i log φ_J(z_i; X_i β, Σ)` from the cross-product `S` of `count` residuals.
pub fn gaussian_loglik_from_cross(factor: &SpdFactor, cross: &DMatrix<f64>, count: usize) -> f64 {
    let j = factor.dim() as f64;
    let inv = factor.inverse();
    let trace: f64 = inv.component_mul(cross).sum();
    -0.5 * count as f64 * (j * LN_2PI + factor.log_det()) - 0.5 * trace
}

fn split<'a>(structure: &ChoiceStructure, theta: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
    if theta.len() != structure.param_dim() {
        return Err(MvmnpError::Shape(format!(
            "θ has {} entries, expected {}",
            theta.len(),
            structure.param_dim()
        )));
    }
    if let Some(pos) = theta.iter().position(|v| !v.is_finite()) {
        return Err(MvmnpError::Numerical(format!("θ entry {pos} is not finite")));
    }
    Ok(theta.split_at(structure.coef_total()))
}

fn scale(subset: &[usize], n_total: usize) -> Result<f64> {
    if subset.is_empty() || subset.len() > n_total {
        return Err(MvmnpError::Config(format!(
            "subsample of {} from {n_total} observations",
            subset.len()
        )));
    }
    Ok(n_total as f64 / subset.len() as f64)
}

/// `log g(θ, z_A) = log p(θ) + (N/M) Σ_{i∈A} log φ_J(z_i; X_i β, Σ(ξ))`,
/// assuming `z` is consistent with `y` so `log p(y | z) = 0`.
pub fn log_g(
    inputs: LikelihoodInputs<'_>,
    prior: &Prior,
    theta: &[f64],
    subset: &[usize],
    n_total: usize,
) -> Result<f64> {
    let (beta, xi) = split(inputs.structure, theta)?;
    let w = scale(subset, n_total)?;
    let cov = FactorCovariance::from_xi(inputs.structure, xi)?;
    let factor = SpdFactor::new(&cov.sigma)?;
    let stats = residual_stats(inputs, beta, None, subset);
    Ok(prior.log_prior(theta)? + w * gaussian_loglik_from_cross(&factor, &stats.cross, stats.count))
}

/// Chains `∂f/∂Σ = G` (symmetric) back to `ξ`: returns `∂f/∂ξ`.
pub fn sigma_gradient_to_xi(structure: &ChoiceStructure, xi: &[f64], cov: &FactorCovariance, g: &DMatrix<f64>) -> Vec<f64> {
    let gb = 2.0 * g * &cov.b;
    let kappa = kappa_from_xi(structure, xi);
    let p = structure.factors;
    let mut out = Vec::with_capacity(xi.len());
    for k in 0..structure.num_choices() {
        let j_k = structure.alternatives(k);
        let row = structure.utility_offset(k);
        let n_k = structure.psi_len(k);
        let mut g_psi = DVector::zeros(n_k);
        for c in 0..p {
            for r in 0..j_k {
                g_psi[c * j_k + r] = gb[(row + r, c)];
            }
        }
        for r in 0..j_k {
            g_psi[p * j_k + r] = 2.0 * g[(row + r, row + r)] * cov.d[row + r];
        }
        let off = structure.angle_offset(k);
        let len = structure.angle_len(k);
        let jac = spherical_jacobian(&kappa[off..off + len], j_k);
        let g_kappa = jac.transpose() * g_psi;
        for l in 0..len {
            let upper = angle_bound(l, len, j_k);
            out.push(g_kappa[l] * real_to_angle_derivative(xi[off + l], upper));
        }
    }
    out
}

/// `∇_θ log g(θ, z_A)` with subsample scaling `N/M`.
pub fn grad_log_g(
    inputs: LikelihoodInputs<'_>,
    prior: &Prior,
    theta: &[f64],
    subset: &[usize],
    n_total: usize,
) -> Result<Vec<f64>> {
    let (beta, xi) = split(inputs.structure, theta)?;
    let w = scale(subset, n_total)?;
    let cov = FactorCovariance::from_xi(inputs.structure, xi)?;
    let factor = SpdFactor::new(&cov.sigma)?;
    let inv = factor.inverse();
    let stats = residual_stats(inputs, beta, Some(&inv), subset);
    let mut grad = prior.grad_log_prior(theta)?;
    for (g, v) in grad.iter_mut().zip(&stats.xt_w_eta) {
        *g += w * v;
    }
    let g_sigma = (&inv * &stats.cross * &inv - &inv * stats.count as f64) * (0.5 * w);
    let g_xi = sigma_gradient_to_xi(inputs.structure, xi, &cov, &g_sigma);
    let r = inputs.structure.coef_total();
    for (g, v) in grad[r..].iter_mut().zip(g_xi) {
        *g += v;
    }
    Ok(grad)
}

/// `∇_β log g` with `Σ = I` fixed, for the identity-covariance variant
/// where `θ = β`.
pub fn grad_log_g_identity(
    inputs: LikelihoodInputs<'_>,
    theta: &[f64],
    subset: &[usize],
    n_total: usize,
) -> Result<Vec<f64>> {
    if theta.len() != inputs.structure.coef_total() {
        return Err(MvmnpError::Shape(format!(
            "β has {} entries, expected {}",
            theta.len(),
            inputs.structure.coef_total()
        )));
    }
    let w = scale(subset, n_total)?;
    let stats = residual_stats(inputs, theta, None, subset);
    Ok(theta
        .iter()
        .zip(&stats.xt_w_eta)
        .map(|(b, v)| -crate::prior::BETA_PRECISION * b + w * v)
        .collect())
}

/// `log g` for the identity-covariance variant.
pub fn log_g_identity(inputs: LikelihoodInputs<'_>, theta: &[f64], subset: &[usize], n_total: usize) -> Result<f64> {
    let w = scale(subset, n_total)?;
    let stats = residual_stats(inputs, theta, None, subset);
    let j = inputs.structure.total_alternatives() as f64;
    let ll = -0.5 * stats.count as f64 * j * LN_2PI - 0.5 * stats.cross.trace();
    Ok(Prior::log_prior_beta(theta) + w * ll)
}
