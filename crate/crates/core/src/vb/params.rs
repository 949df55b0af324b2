//! Gaussian factor approximation `q_λ(θ) = N(μ, C Cᵀ + E²)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MvmnpError, Result};
use crate::linalg::SpdFactor;

/// Smallest allowed `|e_j|`.
pub const E_FLOOR: f64 = 1e-8;

/// `λ = (μ, vech(C), e)` where `C` is `m × s` with zeros above the diagonal.
///
/// `vech(C)` stacks column `c` from row `c` downwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalParams {
    pub m: usize,
    pub s: usize,
    pub mu: Vec<f64>,
    pub c_vech: Vec<f64>,
    pub e: Vec<f64>,
}

/// Length of `vech(C)` for an `m × s` lower-trapezoidal factor.
pub fn vech_len(m: usize, s: usize) -> usize {
    (0..s).map(|c| m - c).sum()
}

impl VariationalParams {
    pub fn new(m: usize, s: usize) -> Result<Self> {
        if s > m {
            return Err(MvmnpError::Config(format!("factor count s = {s} exceeds dimension m = {m}")));
        }
        Ok(Self { m, s, mu: vec![0.0; m], c_vech: vec![0.0; vech_len(m, s)], e: vec![1.0; m] })
    }

    /// `μ = 0`, `e = 0.01`, `C` entries `N(0, 0.01²)` on the pattern.
    pub fn initial<R: Rng + ?Sized>(m: usize, s: usize, rng: &mut R) -> Result<Self> {
        let mut p = Self::new(m, s)?;
        p.e.iter_mut().for_each(|v| *v = 0.01);
        for v in p.c_vech.iter_mut() {
            let n: f64 = StandardNormal.sample(rng);
            *v = 0.01 * n;
        }
        Ok(p)
    }

    pub fn lambda_len(&self) -> usize {
        2 * self.m + self.c_vech.len()
    }

    pub fn to_lambda(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.lambda_len());
        out.extend_from_slice(&self.mu);
        out.extend_from_slice(&self.c_vech);
        out.extend_from_slice(&self.e);
        out
    }

    pub fn set_lambda(&mut self, lambda: &[f64]) {
        let (mu, rest) = lambda.split_at(self.m);
        let (c, e) = rest.split_at(self.c_vech.len());
        self.mu.copy_from_slice(mu);
        self.c_vech.copy_from_slice(c);
        self.e.copy_from_slice(e);
    }

    /// Dense `C`.
    pub fn c_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.m, self.s);
        let mut idx = 0;
        for col in 0..self.s {
            for row in col..self.m {
                c[(row, col)] = self.c_vech[idx];
                idx += 1;
            }
        }
        c
    }

    /// `Ω = C Cᵀ + E²` (dense; for summaries and tests).
    pub fn covariance(&self) -> DMatrix<f64> {
        let c = self.c_matrix();
        let mut omega = &c * c.transpose();
        for j in 0..self.m {
            omega[(j, j)] += self.e[j] * self.e[j];
        }
        omega
    }

    /// Marginal standard deviations `sqrt(diag Ω)`.
    pub fn marginal_sd(&self) -> Vec<f64> {
        let mut var: Vec<f64> = self.e.iter().map(|v| v * v).collect();
        let mut idx = 0;
        for col in 0..self.s {
            for row in col..self.m {
                var[row] += self.c_vech[idx] * self.c_vech[idx];
                idx += 1;
            }
        }
        var.into_iter().map(f64::sqrt).collect()
    }

    /// `θ = μ + C w + e ∘ ε`.
    pub fn reparameterize(&self, w: &[f64], eps: &[f64]) -> Vec<f64> {
        let mut theta: Vec<f64> = (0..self.m).map(|j| self.mu[j] + self.e[j] * eps[j]).collect();
        let mut idx = 0;
        for col in 0..self.s {
            for row in col..self.m {
                theta[row] += self.c_vech[idx] * w[col];
                idx += 1;
            }
        }
        theta
    }

    /// Draws `θ ~ q_λ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let w: Vec<f64> = (0..self.s).map(|_| StandardNormal.sample(rng)).collect();
        let eps: Vec<f64> = (0..self.m).map(|_| StandardNormal.sample(rng)).collect();
        self.reparameterize(&w, &eps)
    }

    /// `∇_θ log q_λ(θ) = −Ω⁻¹(θ − μ)` via the Woodbury identity
    /// `Ω⁻¹ = E⁻² − E⁻² C (I + Cᵀ E⁻² C)⁻¹ Cᵀ E⁻²`.
    pub fn grad_log_q(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let inv_e2: Vec<f64> = self.e.iter().map(|v| 1.0 / (v * v)).collect();
        let dev: Vec<f64> = theta.iter().zip(&self.mu).map(|(t, m)| t - m).collect();
        let scaled: Vec<f64> = dev.iter().zip(&inv_e2).map(|(d, w)| d * w).collect();
        if self.s == 0 {
            return Ok(scaled.into_iter().map(|v| -v).collect());
        }
        let c = self.c_matrix();
        let mut inner = DMatrix::identity(self.s, self.s);
        for a in 0..self.s {
            for b in 0..=a {
                let mut acc = 0.0;
                for j in b.max(a)..self.m {
                    acc += c[(j, a)] * inv_e2[j] * c[(j, b)];
                }
                inner[(a, b)] += acc;
                if a != b {
                    inner[(b, a)] += acc;
                }
            }
        }
        let ct_scaled = c.transpose() * DVector::from_column_slice(&scaled);
        let factor = SpdFactor::new(&inner)
            .map_err(|e| MvmnpError::Numerical(format!("variational covariance is ill-conditioned: {e}")))?;
        let solved = factor.solve(&ct_scaled);
        let back = &c * solved;
        Ok((0..self.m).map(|j| -(scaled[j] - inv_e2[j] * back[j])).collect())
    }

    /// Pulls a `θ`-cotangent `v` back to `λ`: `(v, vech(v wᵀ), v ∘ ε)`.
    pub fn vjp(&self, w: &[f64], eps: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.lambda_len());
        out.extend_from_slice(v);
        for col in 0..self.s {
            for row in col..self.m {
                out.push(v[row] * w[col]);
            }
        }
        out.extend(v.iter().zip(eps).map(|(a, b)| a * b));
        out
    }

    /// Replaces every `|e_j| < 1e-8` by `±1e-8` (sign kept, 0 → +).
    pub fn floor_e(&mut self) {
        for v in self.e.iter_mut() {
            if v.abs() < E_FLOOR {
                *v = if *v < 0.0 { -E_FLOOR } else { E_FLOOR };
            }
        }
    }
}
