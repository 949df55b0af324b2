//! Data-augmentation MCMC: `β | z, Σ` Gibbs, `z | β, Σ, y` truncated-normal
//! Gibbs, and blocked random-walk Metropolis-Hastings for the angles `κ`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MvmnpError, Result};
use crate::gibbs::{gibbs_sweep_z, initialize_latent, GibbsKernel, LatentUtilities};
use crate::likelihood::{gaussian_loglik_from_cross, residual_stats, LikelihoodInputs};
use crate::linalg::SpdFactor;
use crate::model::covariance::{kappa_from_xi, xi_from_kappa, FactorCovariance};
use crate::model::{build_design, ChoiceStructure, Dataset, DesignMatrix};
use crate::predictive::ParamSource;
use crate::prior::{Prior, BETA_PRECISION};
use crate::rng::{stream, Purpose};
use crate::truncnorm::{log_interval_mass, sample_interval};

const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub block_size: usize,
    pub accept_low: f64,
    pub accept_high: f64,
    /// Burn-in iterations between proposal-scale adjustments.
    pub adapt_every: usize,
    pub adapt_factor: f64,
    pub initial_scale: f64,
    pub seed: u64,
    /// Drops the likelihood so the chain targets the prior.
    pub prior_only: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 200_000,
            burn_in: 100_000,
            thin: 10,
            block_size: 5,
            accept_low: 0.15,
            accept_high: 0.30,
            adapt_every: 100,
            adapt_factor: 1.2,
            initial_scale: 0.1,
            seed: 1,
            prior_only: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(MvmnpError::Config(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.block_size == 0 || self.adapt_every == 0 {
            return Err(MvmnpError::Config("thin, block size and adaptation interval must be positive".into()));
        }
        if !(self.initial_scale > 0.0 && self.adapt_factor > 1.0 && self.accept_low < self.accept_high) {
            return Err(MvmnpError::Config("invalid proposal adaptation settings".into()));
        }
        Ok(())
    }

    pub fn stored_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// `Σ_i X_iᵀ W X_i`, reduced over fixed chunks in order.
pub fn weighted_gram(structure: &ChoiceStructure, design: &DesignMatrix, w: &DMatrix<f64>) -> DMatrix<f64> {
    let r = structure.coef_total();
    let n = design.len();
    let idx: Vec<usize> = (0..n).collect();
    let partials: Vec<DMatrix<f64>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = DMatrix::zeros(r, r);
            for &i in chunk {
                let x = design.stacked(i);
                let wx = w * &x;
                acc.gemm_tr(1.0, &x, &wx, 1.0);
            }
            acc
        })
        .collect();
    let mut out = DMatrix::zeros(r, r);
    for p in partials {
        out += p;
    }
    (&out + out.transpose()) * 0.5
}

/// Cache for `Σ_i X_iᵀ W X_i = Σ_{a≤b} W_ab S_ab` with
/// `S_aa = Σ_i x_ia x_iaᵀ` and `S_ab = Σ_i (x_ia x_ibᵀ + x_ib x_iaᵀ)`,
/// `x_ia` being row `a` of `X_i`.
#[derive(Clone, Debug)]
pub struct GramCache {
    j: usize,
    pairs: Vec<DMatrix<f64>>,
}

impl GramCache {
    /// Largest cache, in stored entries, that will be built.
    pub const MAX_ENTRIES: usize = 20_000_000;

    pub fn new(design: &DesignMatrix) -> Option<Self> {
        let (j, r) = (design.rows(), design.cols());
        if j * (j + 1) / 2 * r * r > Self::MAX_ENTRIES {
            return None;
        }
        let idx: Vec<usize> = (0..design.len()).collect();
        let empty = || vec![DMatrix::<f64>::zeros(r, r); j * (j + 1) / 2];
        let partials: Vec<Vec<DMatrix<f64>>> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = empty();
                for &i in chunk {
                    let x = design.stacked(i);
                    let mut p = 0;
                    for a in 0..j {
                        for b in a..j {
                            let xa = x.row(a);
                            let xb = x.row(b);
                            acc[p].ger(1.0, &xa.transpose(), &xb.transpose(), 1.0);
                            p += 1;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut pairs = empty();
        for part in partials {
            for (acc, m) in pairs.iter_mut().zip(part) {
                *acc += m;
            }
        }
        let mut p = 0;
        for a in 0..j {
            for b in a..j {
                if a != b {
                    pairs[p] = &pairs[p] + pairs[p].transpose();
                }
                p += 1;
            }
        }
        Some(Self { j, pairs })
    }

    pub fn gram(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.pairs[0].nrows();
        let mut out = DMatrix::zeros(r, r);
        let mut p = 0;
        for a in 0..self.j {
            for b in a..self.j {
                out += &self.pairs[p] * w[(a, b)];
                p += 1;
            }
        }
        (&out + out.transpose()) * 0.5
    }
}

/// Moments of `β | z, Σ`: the mean `B̄⁻¹ Σ_i X_iᵀ Σ⁻¹ z_i` and the precision
/// `B̄ = Σ_i X_iᵀ Σ⁻¹ X_i + 10 I`.
pub fn beta_conditional_moments(
    inputs: LikelihoodInputs<'_>,
    sigma_inv: &DMatrix<f64>,
    cache: Option<&GramCache>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (mean, bbar, _) = beta_conditional_parts(inputs, sigma_inv, cache)?;
    Ok((mean.iter().copied().collect(), bbar))
}

fn beta_conditional_parts(
    inputs: LikelihoodInputs<'_>,
    sigma_inv: &DMatrix<f64>,
    cache: Option<&GramCache>,
) -> Result<(DVector<f64>, DMatrix<f64>, SpdFactor)> {
    let r = inputs.structure.coef_total();
    let n = inputs.design.len();
    let mut bbar = match cache {
        Some(c) => c.gram(sigma_inv),
        None => weighted_gram(inputs.structure, inputs.design, sigma_inv),
    };
    for a in 0..r {
        bbar[(a, a)] += BETA_PRECISION;
    }
    let all: Vec<usize> = (0..n).collect();
    let stats = residual_stats(inputs, &vec![0.0; r], Some(sigma_inv), &all);
    let factor = SpdFactor::new(&bbar)?;
    let mean = factor.solve(&DVector::from_column_slice(&stats.xt_w_eta));
    Ok((mean, bbar, factor))
}

/// Draws `β` from its full conditional (see [`beta_conditional_moments`]).
pub fn draw_beta_conditional<R: Rng + ?Sized>(
    inputs: LikelihoodInputs<'_>,
    sigma_inv: &DMatrix<f64>,
    cache: Option<&GramCache>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (mean, _, factor) = beta_conditional_parts(inputs, sigma_inv, cache)?;
    draw_around(mean, &factor, rng)
}

/// `mean + L⁻ᵀ u` with `u ~ N(0, I)`, a draw with covariance `(LLᵀ)⁻¹`.
fn draw_around<R: Rng + ?Sized>(mean: DVector<f64>, factor: &SpdFactor, rng: &mut R) -> Result<Vec<f64>> {
    let r = mean.len();
    let u = DVector::from_iterator(r, (0..r).map(|_| StandardNormal.sample(rng)));
    let dev = factor
        .lower()
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or_else(|| MvmnpError::Numerical("singular β posterior precision".into()))?;
    Ok((mean + dev).iter().copied().collect())
}

/// Per-angle proposal scales and acceptance counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalState {
    pub scales: Vec<f64>,
    /// Accepted / attempted updates within the current adaptation window.
    pub window_accepted: Vec<u64>,
    pub window_attempted: Vec<u64>,
    /// Totals after burn-in.
    pub accepted: Vec<u64>,
    pub attempted: Vec<u64>,
}

impl ProposalState {
    pub fn new(len: usize, scale: f64) -> Self {
        Self {
            scales: vec![scale; len],
            window_accepted: vec![0; len],
            window_attempted: vec![0; len],
            accepted: vec![0; len],
            attempted: vec![0; len],
        }
    }

    /// `σ ← 1.2σ` above the band, `σ ← σ/1.2` below it; resets the window.
    pub fn adapt(&mut self, low: f64, high: f64, factor: f64) {
        for l in 0..self.scales.len() {
            if self.window_attempted[l] == 0 {
                continue;
            }
            let rate = self.window_accepted[l] as f64 / self.window_attempted[l] as f64;
            if rate > high {
                self.scales[l] *= factor;
            } else if rate < low {
                self.scales[l] /= factor;
            }
            self.window_accepted[l] = 0;
            self.window_attempted[l] = 0;
        }
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.accepted
            .iter()
            .zip(&self.attempted)
            .map(|(&a, &n)| if n == 0 { f64::NAN } else { a as f64 / n as f64 })
            .collect()
    }
}

/// Log-likelihood of `κ` given residual cross-products, or 0 when the
/// likelihood is switched off.
fn kappa_loglik(structure: &ChoiceStructure, kappa: &[f64], cross: Option<(&DMatrix<f64>, usize)>) -> Result<f64> {
    match cross {
        None => Ok(0.0),
        Some((s, n)) => {
            let cov = FactorCovariance::from_kappa(structure, kappa)?;
            let factor = SpdFactor::new(&cov.sigma)?;
            Ok(gaussian_loglik_from_cross(&factor, s, n))
        }
    }
}

/// One sweep of blocked MH over `κ`. Blocks are a random partition into
/// groups of `block_size` (the last may be smaller). Each element of a block
/// gets a truncated-normal proposal on its interval; the acceptance ratio
/// carries the ratio of truncation masses.
#[allow(clippy::too_many_arguments)]
pub fn mh_update_kappa<R: Rng + ?Sized>(
    structure: &ChoiceStructure,
    prior: &Prior,
    kappa: &mut [f64],
    cross: Option<(&DMatrix<f64>, usize)>,
    proposal: &mut ProposalState,
    block_size: usize,
    record: bool,
    rng: &mut R,
) -> Result<()> {
    let n = kappa.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut current_ll = kappa_loglik(structure, kappa, cross)?;
    for block in order.chunks(block_size) {
        let mut prop = kappa.to_vec();
        let mut log_ratio = 0.0;
        for &l in block {
            let upper = prior.kappa_upper(l);
            let sd = proposal.scales[l];
            let x = sample_interval(kappa[l], sd, 0.0, upper, rng);
            prop[l] = x;
            log_ratio += prior.log_prior_kappa(l, x) - prior.log_prior_kappa(l, kappa[l]);
            log_ratio += log_interval_mass(kappa[l], sd, 0.0, upper) - log_interval_mass(x, sd, 0.0, upper);
        }
        let prop_ll = if log_ratio.is_finite() { kappa_loglik(structure, &prop, cross)? } else { f64::NEG_INFINITY };
        log_ratio += prop_ll - current_ll;
        let u: f64 = rng.random();
        let accept = log_ratio.is_finite() && u.ln() < log_ratio;
        if accept {
            kappa.copy_from_slice(&prop);
            current_ll = prop_ll;
        }
        for &l in block {
            proposal.window_attempted[l] += 1;
            proposal.window_accepted[l] += accept as u64;
            if record {
                proposal.attempted[l] += 1;
                proposal.accepted[l] += accept as u64;
            }
        }
    }
    Ok(())
}

/// Stored post-burn-in draws.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McmcChain {
    pub structure: ChoiceStructure,
    pub config: McmcConfig,
    /// Row-major `draws × r`.
    pub beta: Vec<f64>,
    /// Row-major `draws × (n − K)`.
    pub kappa: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub scales: Vec<f64>,
    #[serde(skip)]
    pub seconds: f64,
}

impl McmcChain {
    pub fn len(&self) -> usize {
        self.beta.len() / self.structure.coef_total().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn beta_draw(&self, d: usize) -> &[f64] {
        let r = self.structure.coef_total();
        &self.beta[d * r..(d + 1) * r]
    }

    pub fn kappa_draw(&self, d: usize) -> &[f64] {
        let a = self.structure.angle_total();
        &self.kappa[d * a..(d + 1) * a]
    }

    /// `θ = (β, ξ)` for every stored draw.
    pub fn thetas(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.len())
            .map(|d| {
                let mut t = self.beta_draw(d).to_vec();
                t.extend(xi_from_kappa(&self.structure, self.kappa_draw(d))?);
                Ok(t)
            })
            .collect()
    }

    pub fn sigma_draw(&self, d: usize) -> Result<DMatrix<f64>> {
        Ok(FactorCovariance::from_kappa(&self.structure, self.kappa_draw(d))?.sigma)
    }

    pub fn source(&self, label: &str) -> Result<ParamSource> {
        ParamSource::from_thetas(label, &self.structure, &self.thetas()?)
    }

    pub fn mean_acceptance(&self) -> f64 {
        let v: Vec<f64> = self.acceptance.iter().copied().filter(|a| a.is_finite()).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }
}

/// Runs the sampler from `β = 0`, `ξ = 0`.
pub fn run_mcmc(data: &Dataset, structure: &ChoiceStructure, prior: &Prior, config: &McmcConfig) -> Result<McmcChain> {
    config.validate()?;
    data.check_structure(structure)?;
    let started = Instant::now();
    let design = build_design(data, structure)?;
    let r = structure.coef_total();
    let a = structure.angle_total();
    let seed = config.seed;

    let mut beta = vec![0.0; r];
    let mut kappa = kappa_from_xi(structure, &vec![0.0; a]);
    let mut cov = FactorCovariance::from_kappa(structure, &kappa)?;
    let mut latent = if config.prior_only {
        LatentUtilities::from_vec(structure.total_alternatives(), Vec::new())?
    } else {
        initialize_latent(structure, data, &design, &beta, &cov.sigma, seed)?
    };
    let mut proposal = ProposalState::new(a, config.initial_scale);
    let all: Vec<usize> = (0..data.len()).collect();
    let cache = if config.prior_only { None } else { GramCache::new(&design) };

    let stored = config.stored_draws();
    let mut beta_out = Vec::with_capacity(stored * r);
    let mut kappa_out = Vec::with_capacity(stored * a);

    for t in 0..config.iterations {
        let burn = t < config.burn_in;
        let mut beta_rng = stream(seed, Purpose::Beta, t as u64, 0);
        let mut kappa_rng = stream(seed, Purpose::Kappa, t as u64, 0);
        let result: Result<()> = (|| {
            if config.prior_only {
                let scale = BETA_PRECISION.sqrt().recip();
                for b in beta.iter_mut() {
                    let u: f64 = StandardNormal.sample(&mut beta_rng);
                    *b = scale * u;
                }
                mh_update_kappa(structure, prior, &mut kappa, None, &mut proposal, config.block_size, !burn, &mut kappa_rng)?;
            } else {
                let factor = SpdFactor::new(&cov.sigma)?;
                let inv = factor.inverse();
                let inputs = LikelihoodInputs { structure, design: &design, latent: &latent };
                beta = draw_beta_conditional(inputs, &inv, cache.as_ref(), &mut beta_rng)?;
                let kernel = GibbsKernel::from_precision(structure, inv);
                gibbs_sweep_z(&mut latent, &kernel, data, &design, &beta, None, 1, seed, t as u64);
                let inputs = LikelihoodInputs { structure, design: &design, latent: &latent };
                let stats = residual_stats(inputs, &beta, None, &all);
                mh_update_kappa(
                    structure,
                    prior,
                    &mut kappa,
                    Some((&stats.cross, stats.count)),
                    &mut proposal,
                    config.block_size,
                    !burn,
                    &mut kappa_rng,
                )?;
                cov = FactorCovariance::from_kappa(structure, &kappa)?;
            }
            Ok(())
        })();
        result.map_err(|e| e.at_iteration("mcmc", t))?;

        if burn && (t + 1) % config.adapt_every == 0 {
            proposal.adapt(config.accept_low, config.accept_high, config.adapt_factor);
        }
        if !burn && (t + 1 - config.burn_in) % config.thin == 0 {
            beta_out.extend_from_slice(&beta);
            kappa_out.extend_from_slice(&kappa);
        }
    }

    Ok(McmcChain {
        structure: structure.clone(),
        config: config.clone(),
        beta: beta_out,
        kappa: kappa_out,
        acceptance: proposal.acceptance_rates(),
        scales: proposal.scales,
        seconds: started.elapsed().as_secs_f64(),
    })
}
