//! Latent-utility state and its truncated-normal Gibbs updates.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{MvmnpError, Result};
use crate::linalg::SpdFactor;
use crate::model::outcome::{consistent, first_inconsistent};
use crate::model::{ChoiceStructure, Dataset, DesignMatrix};
use crate::rng::{stream, Purpose};
use crate::truncnorm::{sample_above, sample_below};

/// `N × J` latent utilities, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentUtilities {
    j: usize,
    z: Vec<f64>,
}

impl LatentUtilities {
    pub fn from_vec(j: usize, z: Vec<f64>) -> Result<Self> {
        if j == 0 || z.len() % j != 0 {
            return Err(MvmnpError::Shape(format!("{} latent values do not split into rows of {j}", z.len())));
        }
        Ok(Self { j, z })
    }

    pub fn len(&self) -> usize {
        self.z.len() / self.j
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.j
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.j..(i + 1) * self.j]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.z[i * self.j..(i + 1) * self.j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    /// Checks `p(y_i | z_i) = 1` for every observation.
    pub fn check_consistent(&self, structure: &ChoiceStructure, data: &Dataset) -> Result<()> {
        for i in 0..self.len() {
            if let Some(k) = first_inconsistent(structure, data.choices(i), self.row(i)) {
                return Err(MvmnpError::InconsistentLatent { obs: i, choice: k });
            }
        }
        Ok(())
    }
}

/// Precomputed quantities for Gibbs updates at a fixed `Σ`.
#[derive(Clone, Debug)]
pub struct GibbsKernel {
    structure: ChoiceStructure,
    precision: DMatrix<f64>,
    cond_sd: Vec<f64>,
}

impl GibbsKernel {
    pub fn new(structure: &ChoiceStructure, sigma: &DMatrix<f64>) -> Result<Self> {
        let precision = SpdFactor::new(sigma)?.inverse();
        Ok(Self::from_precision(structure, precision))
    }

    pub fn from_precision(structure: &ChoiceStructure, precision: DMatrix<f64>) -> Self {
        let cond_sd = precision.diagonal().iter().map(|q| (1.0 / q).sqrt()).collect();
        Self { structure: structure.clone(), precision, cond_sd }
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Conditional mean and variance of coordinate `idx` given the rest,
    /// `μ_j − Q_jj⁻¹ Σ_{l≠j} Q_jl (z_l − μ_l)` and `Q_jj⁻¹`.
    pub fn conditional(&self, z: &[f64], mean: &[f64], idx: usize) -> (f64, f64) {
        let q = &self.precision;
        let mut acc = 0.0;
        for l in 0..z.len() {
            if l != idx {
                acc += q[(idx, l)] * (z[l] - mean[l]);
            }
        }
        let qjj = q[(idx, idx)];
        (mean[idx] - acc / qjj, 1.0 / qjj)
    }

    /// One full sweep over the utilities of one observation.
    pub fn sweep<R: Rng + ?Sized>(&self, y: &[usize], mean: &[f64], z: &mut [f64], rng: &mut R) {
        let mut offset = 0;
        for (k, &y_k) in y.iter().enumerate() {
            let j_k = self.structure.alternatives(k);
            for j in 0..j_k {
                let idx = offset + j;
                let (m, _) = self.conditional(z, mean, idx);
                let sd = self.cond_sd[idx];
                let mut bound: f64 = 0.0;
                for l in 0..j_k {
                    if l != j {
                        bound = bound.max(z[offset + l]);
                    }
                }
                z[idx] = if y_k == j + 1 {
                    sample_above(m, sd, bound, rng)
                } else {
                    sample_below(m, sd, bound, rng)
                };
            }
            offset += j_k;
        }
    }

    /// Resamples coordinates of an inconsistent `z_i` from their truncated
    /// conditionals until `p(y_i | z_i) = 1`.
    pub fn repair<R: Rng + ?Sized>(&self, y: &[usize], mean: &[f64], z: &mut [f64], rng: &mut R) {
        let mut offset = 0;
        for (k, &y_k) in y.iter().enumerate() {
            let j_k = self.structure.alternatives(k);
            if !consistent(y_k, &z[offset..offset + j_k]) {
                if y_k == 0 {
                    for j in 0..j_k {
                        if z[offset + j] >= 0.0 {
                            let (m, _) = self.conditional(z, mean, offset + j);
                            z[offset + j] = sample_below(m, self.cond_sd[offset + j], 0.0, rng);
                        }
                    }
                } else {
                    let c = offset + y_k - 1;
                    let mut bound: f64 = 0.0;
                    for l in 0..j_k {
                        if offset + l != c {
                            bound = bound.max(z[offset + l]);
                        }
                    }
                    let (m, _) = self.conditional(z, mean, c);
                    z[c] = sample_above(m, self.cond_sd[c], bound, rng);
                }
            }
            offset += j_k;
        }
    }
}

/// Draws `z_i ~ N(X_i β, Σ)` and repairs it to be consistent with `y_i`.
pub fn initialize_latent(
    structure: &ChoiceStructure,
    data: &Dataset,
    design: &DesignMatrix,
    beta: &[f64],
    sigma: &DMatrix<f64>,
    seed: u64,
) -> Result<LatentUtilities> {
    let j = structure.total_alternatives();
    let chol = SpdFactor::new(sigma)?.lower();
    let kernel = GibbsKernel::new(structure, sigma)?;
    let mut z = vec![0.0; data.len() * j];
    z.par_chunks_mut(j).enumerate().for_each(|(i, zi)| {
        let mut rng = stream(seed, Purpose::LatentInit, 0, i as u64);
        let mut mean = vec![0.0; j];
        design.mul_beta(i, beta, &mut mean);
        let e: Vec<f64> = (0..j).map(|_| StandardNormal.sample(&mut rng)).collect();
        for r in 0..j {
            let mut acc = mean[r];
            for c in 0..=r {
                acc += chol[(r, c)] * e[c];
            }
            zi[r] = acc;
        }
        kernel.repair(data.choices(i), &mean, zi, &mut rng);
    });
    let latent = LatentUtilities { j, z };
    latent.check_consistent(structure, data)?;
    Ok(latent)
}

/// Runs `sweeps` Gibbs sweeps on the observations in `subset` (all
/// observations when `None`). Observation `i` draws from the stream
/// `(seed, Gibbs, counter, i)`.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_sweep_z(
    latent: &mut LatentUtilities,
    kernel: &GibbsKernel,
    data: &Dataset,
    design: &DesignMatrix,
    beta: &[f64],
    subset: Option<&[usize]>,
    sweeps: usize,
    seed: u64,
    counter: u64,
) {
    let j = latent.j;
    let run = |i: usize, zi: &mut [f64]| {
        let mut rng = stream(seed, Purpose::Gibbs, counter, i as u64);
        let mut mean = vec![0.0; j];
        design.mul_beta(i, beta, &mut mean);
        for _ in 0..sweeps {
            kernel.sweep(data.choices(i), &mean, zi, &mut rng);
        }
    };
    match subset {
        None => latent.z.par_chunks_mut(j).enumerate().for_each(|(i, zi)| run(i, zi)),
        Some(idx) => {
            // copy out, update in parallel, write back in a fixed order
            let mut rows: Vec<(usize, Vec<f64>)> = idx.iter().map(|&i| (i, latent.row(i).to_vec())).collect();
            rows.par_iter_mut().for_each(|(i, zi)| run(*i, zi));
            for (i, zi) in rows {
                latent.row_mut(i).copy_from_slice(&zi);
            }
        }
    }
}
