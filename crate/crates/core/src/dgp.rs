//! Synthetic data: intercepts `U(−0.5, 0)`, fixed price coefficients,
//! standard normal covariates and an inverse-Wishart `Σ₀` with equicorrelated
//! scale `½(I + ιιᵀ)` and `J + 3` degrees of freedom.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MvmnpError, Result};
use crate::linalg::SpdFactor;
use crate::model::covariance::trace_normalize_sigma;
use crate::model::outcome::outcome_from_utilities;
use crate::model::{build_design, ChoiceStructure, Dataset};
use crate::rng::{stream, Purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    pub intercept_low: f64,
    pub intercept_high: f64,
    /// Coefficient on every alternative covariate of choice `k`, cycled over `k`.
    pub price_coefficients: Vec<f64>,
    /// Individual-covariate coefficients are drawn from `U(−a, a)`.
    pub individual_coefficient_bound: f64,
    /// Degrees of freedom are `J + df_offset`.
    pub df_offset: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            intercept_low: -0.5,
            intercept_high: 0.0,
            price_coefficients: vec![-0.3, -0.6],
            individual_coefficient_bound: 0.5,
            df_offset: 3.0,
        }
    }
}

/// True parameters of a synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueParameters {
    pub beta: Vec<f64>,
    pub sigma: DMatrix<f64>,
    /// `Σ₀` with every within-choice block rescaled to trace `J_k`.
    pub sigma_normalized: DMatrix<f64>,
    /// `β₀` with choice `k`'s coefficients divided by the same scale as its
    /// utilities, matching `sigma_normalized`.
    pub beta_normalized: Vec<f64>,
}

/// Draws `Σ ~ IW(Ψ, df)` as the inverse of a Bartlett-decomposition
/// Wishart draw with scale `Ψ⁻¹`.
pub fn inverse_wishart<R: Rng + ?Sized>(psi: &DMatrix<f64>, df: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let j = psi.nrows();
    if df <= (j as f64) - 1.0 {
        return Err(MvmnpError::Config(format!("inverse-Wishart needs df > J − 1, got {df} for J = {j}")));
    }
    let l = SpdFactor::new(&SpdFactor::new(psi)?.inverse())?.lower();
    let mut a = DMatrix::zeros(j, j);
    for r in 0..j {
        let chi = ChiSquared::new(df - r as f64).map_err(|e| MvmnpError::Config(e.to_string()))?;
        a[(r, r)] = chi.sample(rng).sqrt();
        for c in 0..r {
            a[(r, c)] = StandardNormal.sample(rng);
        }
    }
    let la = l * a;
    let w = &la * la.transpose();
    Ok(SpdFactor::new(&w)?.inverse())
}

/// Draws the true parameters from stream `(seed, Dgp, 0, 0)`.
pub fn draw_parameters(structure: &ChoiceStructure, config: &DgpConfig, seed: u64) -> Result<TrueParameters> {
    if config.price_coefficients.is_empty() {
        return Err(MvmnpError::Config("at least one price coefficient is required".into()));
    }
    let mut rng = stream(seed, Purpose::Dgp, 0, 0);
    let mut beta = Vec::with_capacity(structure.coef_total());
    for k in 0..structure.num_choices() {
        let j_k = structure.alternatives(k);
        for _ in 0..j_k {
            beta.push(rng.random_range(config.intercept_low..=config.intercept_high));
        }
        let a = config.individual_coefficient_bound;
        for _ in 0..j_k * structure.n_individual {
            beta.push(rng.random_range(-a..=a));
        }
        let price = config.price_coefficients[k % config.price_coefficients.len()];
        beta.extend(std::iter::repeat_n(price, structure.n_alternative));
    }
    let j = structure.total_alternatives();
    let psi = (DMatrix::identity(j, j) + DMatrix::from_element(j, j, 1.0)) * 0.5;
    let sigma = inverse_wishart(&psi, j as f64 + config.df_offset, &mut rng)?;
    let sigma_normalized = trace_normalize_sigma(structure, &sigma);
    let mut beta_normalized = beta.clone();
    for k in 0..structure.num_choices() {
        let off = structure.utility_offset(k);
        let j_k = structure.alternatives(k);
        let tr: f64 = (off..off + j_k).map(|r| sigma[(r, r)]).sum();
        let s = (j_k as f64 / tr).sqrt();
        let c0 = structure.coef_offset(k);
        for b in &mut beta_normalized[c0..c0 + structure.coef_len(k)] {
            *b *= s;
        }
    }
    Ok(TrueParameters { beta, sigma, sigma_normalized, beta_normalized })
}

/// Simulates `n` observations; observation `i` uses stream `(seed, Dgp, counter, i)`.
pub fn simulate_dataset(
    structure: &ChoiceStructure,
    truth: &TrueParameters,
    n: usize,
    seed: u64,
    counter: u64,
) -> Result<Dataset> {
    Ok(simulate_with_latent(structure, truth, n, seed, counter)?.0)
}

/// As [`simulate_dataset`], also returning the utilities `z` (row-major `N × J`).
pub fn simulate_with_latent(
    structure: &ChoiceStructure,
    truth: &TrueParameters,
    n: usize,
    seed: u64,
    counter: u64,
) -> Result<(Dataset, Vec<f64>)> {
    let kc = structure.num_choices();
    let j = structure.total_alternatives();
    let chol = SpdFactor::new(&truth.sigma)?.lower();
    let alt_len: usize = (0..kc).map(|k| (structure.alternatives(k) + 1) * structure.n_alternative).sum();
    let mut individual = Vec::with_capacity(n * structure.n_individual);
    let mut alternative = Vec::with_capacity(n * alt_len);
    let mut errors = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream(seed, Purpose::Dgp, counter, i as u64);
        for _ in 0..structure.n_individual {
            individual.push(StandardNormal.sample(&mut rng));
        }
        for _ in 0..alt_len {
            alternative.push(StandardNormal.sample(&mut rng));
        }
        let e = DVector::from_iterator(j, (0..j).map(|_| StandardNormal.sample(&mut rng)));
        errors.push(&chol * e);
    }
    let placeholder = Dataset::from_flat(structure, n, vec![0; n * kc], individual, alternative)?;
    let design = build_design(&placeholder, structure)?;
    let mut choices = Vec::with_capacity(n * kc);
    let mut latent = vec![0.0; n * j];
    for (i, eps) in errors.iter().enumerate() {
        let z = &mut latent[i * j..(i + 1) * j];
        design.mul_beta(i, &truth.beta, z);
        for (v, e) in z.iter_mut().zip(eps.iter()) {
            *v += e;
        }
        for k in 0..kc {
            let off = structure.utility_offset(k);
            choices.push(outcome_from_utilities(&z[off..off + structure.alternatives(k)]));
        }
    }
    let mut data = placeholder;
    for i in 0..n {
        for k in 0..kc {
            data.set_choice(i, k, choices[i * kc + k]);
        }
    }
    Ok((data, latent))
}

/// Random split into `⌈fraction · N⌉` training and the rest test
/// observations, each kept in original order.
pub fn train_test_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(MvmnpError::Config(format!("train fraction {fraction} outside (0, 1]")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, Purpose::Split, 0, 0));
    let n_train = ((fraction * n as f64).ceil() as usize).min(n);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// A generated dataset with its true parameters.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub data: Dataset,
    pub truth: TrueParameters,
}

pub fn generate_synthetic(structure: &ChoiceStructure, config: &DgpConfig, n: usize, seed: u64) -> Result<Synthetic> {
    let truth = draw_parameters(structure, config, seed)?;
    let data = simulate_dataset(structure, &truth, n, seed, 1)?;
    Ok(Synthetic { data, truth })
}
