//! Auxiliary prior on the unnormalized factor parameters `ψ̈_k`, used only to
//! calibrate the angle prior.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MvmnpError, Result};
use crate::linalg::{norm_cdf, norm_quantile};
use crate::model::ChoiceStructure;
use crate::rng::{stream, Purpose};

const CHUNK: usize = 1024;

/// Hyperparameters of the `ψ̈` prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiPriorHyper {
    pub mu_b: f64,
    pub sigma2_b: f64,
    /// Inverse-gamma shape `ν`.
    pub nu: f64,
    /// Inverse-gamma rate `s`.
    pub s: f64,
}

impl PsiPriorHyper {
    pub fn new(mu_b: f64) -> Self {
        Self { mu_b, sigma2_b: 1.0, nu: 5.0, s: 4.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2_b > 0.0) || !(self.nu > 1.0) || !(self.s > 0.0) || !self.mu_b.is_finite() {
            return Err(MvmnpError::Config(format!("invalid ψ̈ prior hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// Standardized random inputs for `count` draws of every `ψ̈_k`.
///
/// Keeping the variates fixed and mapping them through the hyperparameters
/// gives common random numbers across calibration steps.
#[derive(Clone, Debug)]
pub struct PsiPriorBase {
    structure: ChoiceStructure,
    count: usize,
    nu: f64,
    /// Per choice, `count × n_k` entries; loadings hold N(0,1) draws (off
    /// the diagonal) or U(0,1) draws (diagonal), the `d` block holds
    /// Gamma(ν, 1) draws.
    variates: Vec<Vec<f64>>,
}

#[inline]
fn is_diagonal(index: usize, j_k: usize) -> bool {
    // ψ index c·J_k + r is B_k(r, c)
    index % j_k == index / j_k
}

impl PsiPriorBase {
    pub fn draw(structure: &ChoiceStructure, count: usize, nu: f64, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(MvmnpError::Config("ψ̈ prior needs at least one draw".into()));
        }
        let gamma = Gamma::new(nu, 1.0).map_err(|e| MvmnpError::Config(format!("gamma shape {nu}: {e}")))?;
        let p = structure.factors;
        let mut variates = Vec::with_capacity(structure.num_choices());
        for k in 0..structure.num_choices() {
            let j_k = structure.alternatives(k);
            let n_k = structure.psi_len(k);
            let mut v = vec![0.0; count * n_k];
            v.par_chunks_mut(CHUNK * n_k).enumerate().for_each(|(chunk, out)| {
                let mut rng = stream(seed, Purpose::PsiPrior, k as u64, chunk as u64);
                for row in out.chunks_mut(n_k) {
                    for (idx, slot) in row.iter_mut().enumerate() {
                        *slot = if idx < p * j_k {
                            if is_diagonal(idx, j_k) {
                                rng.random::<f64>()
                            } else {
                                StandardNormal.sample(&mut rng)
                            }
                        } else {
                            gamma.sample(&mut rng)
                        };
                    }
                }
            });
            variates.push(v);
        }
        Ok(Self { structure: structure.clone(), count, nu, variates })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn structure(&self) -> &ChoiceStructure {
        &self.structure
    }

    /// Writes draw `draw` of `ψ_k` (normalized to radius `√J_k`) into `out`.
    pub fn psi_into(&self, hyper: &PsiPriorHyper, k: usize, draw: usize, out: &mut [f64]) {
        debug_assert_eq!(hyper.nu, self.nu);
        let j_k = self.structure.alternatives(k);
        let n_k = self.structure.psi_len(k);
        let p = self.structure.factors;
        let sd = hyper.sigma2_b.sqrt();
        let mu_std = hyper.mu_b / sd;
        let p_pos = norm_cdf(mu_std);
        let row = &self.variates[k][draw * n_k..(draw + 1) * n_k];
        for idx in 0..n_k {
            let v = row[idx];
            out[idx] = if idx < p * j_k {
                if is_diagonal(idx, j_k) {
                    // N(μ, σ²) truncated to (0, ∞) by inversion from the lower tail
                    let u = (v * p_pos).max(f64::MIN_POSITIVE);
                    sd * (mu_std - norm_quantile(u))
                } else {
                    hyper.mu_b + sd * v
                }
            } else {
                (hyper.s / v).sqrt()
            };
        }
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = (j_k as f64).sqrt() / norm;
        out.iter_mut().for_each(|x| *x *= scale);
    }

    /// Mean off-diagonal entry of the implied `Σ` over all draws.
    pub fn mean_offdiagonal(&self, hyper: &PsiPriorHyper) -> f64 {
        let s = &self.structure;
        let j_total = s.total_alternatives();
        if j_total < 2 {
            return 0.0;
        }
        let p = s.factors;
        let chunks: Vec<f64> = (0..self.count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut psi: Vec<Vec<f64>> = (0..s.num_choices()).map(|k| vec![0.0; s.psi_len(k)]).collect();
                let mut colsum = vec![0.0; p];
                let mut acc = 0.0;
                for draw in chunk * CHUNK..((chunk + 1) * CHUNK).min(self.count) {
                    colsum.iter_mut().for_each(|v| *v = 0.0);
                    let mut row_sq = 0.0;
                    for k in 0..s.num_choices() {
                        self.psi_into(hyper, k, draw, &mut psi[k]);
                        let j_k = s.alternatives(k);
                        for c in 0..p {
                            for r in 0..j_k {
                                let b = psi[k][c * j_k + r];
                                colsum[c] += b;
                                row_sq += b * b;
                            }
                        }
                    }
                    // Σ_{j≠l} (BBᵀ)_{jl} = ‖Bᵀι‖² − Σ_j ‖B_j‖²
                    acc += colsum.iter().map(|v| v * v).sum::<f64>() - row_sq;
                }
                acc
            })
            .collect();
        let total: f64 = chunks.iter().sum();
        total / (self.count as f64 * (j_total * (j_total - 1)) as f64)
    }
}

/// Draws `count` normalized `ψ_k` vectors per choice, returned as
/// `[choice][draw][entry]`.
pub fn sample_psi_prior(
    hyper: &PsiPriorHyper,
    structure: &ChoiceStructure,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    hyper.validate()?;
    let base = PsiPriorBase::draw(structure, count, hyper.nu, seed)?;
    Ok((0..structure.num_choices())
        .map(|k| {
            (0..count)
                .map(|draw| {
                    let mut out = vec![0.0; structure.psi_len(k)];
                    base.psi_into(hyper, k, draw, &mut out);
                    out
                })
                .collect()
        })
        .collect())
}

/// Result of the `μ_B` calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuBCalibration {
    pub mu_b: f64,
    pub mean_offdiagonal: f64,
    pub steps: usize,
}

/// Solves for `μ_B` so that the implied prior mean of `Σ` has off-diagonal
/// entries equal to 1/2, by bisection with common random numbers.
///
/// When `Σ` has no loadings or no off-diagonal entries the target is vacuous
/// and `μ_B = 0` is returned.
pub fn calibrate_mu_b(structure: &ChoiceStructure, count: usize, seed: u64) -> Result<MuBCalibration> {
    const TARGET: f64 = 0.5;
    const MAX_STEPS: usize = 50;
    if structure.factors == 0 || structure.total_alternatives() < 2 {
        return Ok(MuBCalibration { mu_b: 0.0, mean_offdiagonal: 0.0, steps: 0 });
    }
    let template = PsiPriorHyper::new(0.0);
    let base = PsiPriorBase::draw(structure, count, template.nu, seed)?;
    let eval = |mu: f64| base.mean_offdiagonal(&PsiPriorHyper { mu_b: mu, ..template });
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut f_hi = eval(hi);
    let mut steps = 0;
    while f_hi < TARGET {
        lo = hi;
        hi *= 2.0;
        f_hi = eval(hi);
        steps += 1;
        if steps > 20 {
            return Err(MvmnpError::Calibration(format!(
                "mean off-diagonal only reaches {f_hi} at μ_B = {hi}"
            )));
        }
    }
    let mut mid = 0.5 * (lo + hi);
    let mut f_mid = eval(mid);
    for step in 0..MAX_STEPS {
        if (f_mid - TARGET).abs() < 1e-6 || hi - lo < 1e-9 {
            return Ok(MuBCalibration { mu_b: mid, mean_offdiagonal: f_mid, steps: step + 1 });
        }
        if f_mid < TARGET {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        f_mid = eval(mid);
    }
    Err(MvmnpError::Calibration(format!(
        "bisection did not converge in {MAX_STEPS} steps (μ_B = {mid}, mean off-diagonal {f_mid})"
    )))
}
