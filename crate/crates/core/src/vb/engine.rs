//! Stochastic gradient ascent on the ELBO of the hybrid family
//! `q(θ, z) = p(z | θ, y, X) q_λ(θ)`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adadelta::Adadelta;
use super::params::VariationalParams;
use crate::error::{MvmnpError, Result};
use crate::gibbs::{gibbs_sweep_z, initialize_latent, GibbsKernel, LatentUtilities};
use crate::likelihood::{grad_log_g, grad_log_g_identity, LikelihoodInputs};
use crate::model::covariance::FactorCovariance;
use crate::model::{build_design, ChoiceStructure, Dataset, DesignMatrix};
use crate::predictive::{predict, ParamSource};
use crate::prior::Prior;
use crate::rng::{derive_seed, stream, Purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgaConfig {
    pub iterations: usize,
    /// Gibbs sweeps `G` over the subsample per iteration.
    pub gibbs_steps: usize,
    /// `M / N`; the subsample size is `max(1, round(fraction · N))`.
    pub subsample_fraction: f64,
    pub rho: f64,
    pub eps: f64,
    /// λ̂ is the mean of λ over this many final iterations.
    pub averaging_window: usize,
    /// Variational factor count `s`; `None` means `min(10, m − 1)`.
    pub factors: Option<usize>,
    pub seed: u64,
    /// Hit-rate diagnostic cadence; 0 disables it.
    pub diagnostic_every: usize,
    pub diagnostic_obs: usize,
    pub diagnostic_draws: usize,
    pub divergence_limit: f64,
}

impl Default for SgaConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            gibbs_steps: 10,
            subsample_fraction: 1.0,
            rho: 0.95,
            eps: 1e-6,
            averaging_window: 100,
            factors: None,
            seed: 1,
            diagnostic_every: 10,
            diagnostic_obs: 500,
            diagnostic_draws: 200,
            divergence_limit: 1e3,
        }
    }
}

impl SgaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(MvmnpError::Config(format!(
                "subsample fraction {} outside (0, 1]",
                self.subsample_fraction
            )));
        }
        if self.gibbs_steps == 0 || self.iterations == 0 {
            return Err(MvmnpError::Config("iterations and Gibbs steps must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rho) || self.eps <= 0.0 {
            return Err(MvmnpError::Config("ADADELTA needs 0 ≤ ρ < 1 and ε > 0".into()));
        }
        Ok(())
    }

    pub fn subsample_size(&self, n: usize) -> usize {
        ((self.subsample_fraction * n as f64).round() as usize).clamp(1, n.max(1))
    }

    pub fn factor_count(&self, m: usize) -> usize {
        self.factors.unwrap_or(10).min(m.saturating_sub(1))
    }
}

/// Which model the variational family approximates.
#[derive(Clone, Copy)]
pub enum VbModel<'a> {
    /// `θ = (β, ξ)` with the factor covariance.
    Full(&'a Prior),
    /// `θ = β` with `Σ = I`.
    Identity,
}

/// One reparametrized ELBO gradient estimate.
#[derive(Clone, Debug)]
pub struct GradientEstimate {
    /// Gradient in λ-space, laid out as `(μ, vech(C), e)`.
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
    pub eps: Vec<f64>,
    pub subset: Vec<usize>,
}

/// SGA state: variational parameters plus the persistent latent utilities.
pub struct VbState<'a> {
    pub structure: &'a ChoiceStructure,
    pub data: &'a Dataset,
    pub design: &'a DesignMatrix,
    pub model: VbModel<'a>,
    pub params: VariationalParams,
    pub latent: LatentUtilities,
    pub config: SgaConfig,
}

impl<'a> VbState<'a> {
    pub fn new(
        structure: &'a ChoiceStructure,
        data: &'a Dataset,
        design: &'a DesignMatrix,
        model: VbModel<'a>,
        config: &SgaConfig,
    ) -> Result<Self> {
        config.validate()?;
        data.check_structure(structure)?;
        if data.is_empty() {
            return Err(MvmnpError::Config("cannot fit an empty dataset".into()));
        }
        let m = match model {
            VbModel::Full(_) => structure.param_dim(),
            VbModel::Identity => structure.coef_total(),
        };
        let s = config.factor_count(m);
        let mut rng = stream(config.seed, Purpose::VariationalInit, 0, 0);
        let params = VariationalParams::initial(m, s, &mut rng)?;
        let sigma = match model {
            VbModel::Full(_) => FactorCovariance::from_xi(structure, &params.mu[structure.coef_total()..])?.sigma,
            VbModel::Identity => DMatrix::identity(structure.total_alternatives(), structure.total_alternatives()),
        };
        let beta = &params.mu[..structure.coef_total()];
        let latent = initialize_latent(structure, data, design, beta, &sigma, config.seed)?;
        Ok(Self { structure, data, design, model, params, latent, config: config.clone() })
    }

    /// Draws `ζ`, forms `θ`, draws the subsample `A`, advances `z_A` by
    /// `sweeps` Gibbs sweeps at `θ` and returns the λ-gradient estimate.
    pub fn gradient_estimate(&mut self, t: u64, sweeps: usize) -> Result<GradientEstimate> {
        let seed = self.config.seed;
        let (m, s) = (self.params.m, self.params.s);
        let mut rng = stream(seed, Purpose::Zeta, t, 0);
        let w: Vec<f64> = (0..s).map(|_| StandardNormal.sample(&mut rng)).collect();
        let eps: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let theta = self.params.reparameterize(&w, &eps);

        let n = self.data.len();
        let size = self.config.subsample_size(n);
        let subset: Vec<usize> = if size == n {
            (0..n).collect()
        } else {
            let mut idx = sample_indices(&mut stream(seed, Purpose::Subsample, t, 0), n, size).into_vec();
            idx.sort_unstable();
            idx
        };

        let r = self.structure.coef_total();
        let sigma = match self.model {
            VbModel::Full(_) => FactorCovariance::from_xi(self.structure, &theta[r..])?.sigma,
            VbModel::Identity => DMatrix::identity(self.latent.dim(), self.latent.dim()),
        };
        if sweeps > 0 {
            let kernel = GibbsKernel::new(self.structure, &sigma)?;
            gibbs_sweep_z(&mut self.latent, &kernel, self.data, self.design, &theta[..r], Some(&subset), sweeps, seed, t);
        }
        let inputs = LikelihoodInputs { structure: self.structure, design: self.design, latent: &self.latent };
        let grad_g = match self.model {
            VbModel::Full(prior) => grad_log_g(inputs, prior, &theta, &subset, n)?,
            VbModel::Identity => grad_log_g_identity(inputs, &theta, &subset, n)?,
        };
        let grad_q = self.params.grad_log_q(&theta)?;
        let v: Vec<f64> = grad_g.iter().zip(&grad_q).map(|(a, b)| a - b).collect();
        let lambda = self.params.vjp(&w, &eps, &v);
        Ok(GradientEstimate { lambda, theta, w, eps, subset })
    }
}

/// Hit-rate diagnostic recorded during the fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticPoint {
    pub iteration: usize,
    pub hit_rate: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VbFit {
    pub label: String,
    pub identity: bool,
    pub structure: ChoiceStructure,
    /// λ̂ averaged over the final window.
    pub params: VariationalParams,
    /// λ at the last iteration.
    pub last: VariationalParams,
    pub config: SgaConfig,
    pub trajectory: Vec<DiagnosticPoint>,
    #[serde(skip)]
    pub timing: VbTiming,
}

/// Wall-clock seconds, kept out of serialized fits so those stay reproducible.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VbTiming {
    pub fit_seconds: f64,
    pub diagnostic_seconds: f64,
}

impl VbFit {
    /// Predictive parameter source with `count` draws from `q_λ̂`.
    pub fn source(&self, count: usize, seed: u64) -> Result<ParamSource> {
        if self.identity {
            ParamSource::from_variational_identity(&self.label, &self.structure, &self.params, count, seed)
        } else {
            ParamSource::from_variational(&self.label, &self.structure, &self.params, count, seed)
        }
    }

    /// Posterior means and sds of `θ` (β only for the identity variant).
    pub fn theta_mean(&self) -> &[f64] {
        &self.params.mu
    }

    pub fn theta_sd(&self) -> Vec<f64> {
        self.params.marginal_sd()
    }
}

fn diagnostic_subset(n: usize, size: usize, seed: u64) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    let mut idx = sample_indices(&mut stream(seed, Purpose::Diagnostic, 0, 0), n, size).into_vec();
    idx.sort_unstable();
    idx
}

fn run(structure: &ChoiceStructure, data: &Dataset, model: VbModel<'_>, config: &SgaConfig, label: &str) -> Result<VbFit> {
    let design = build_design(data, structure)?;
    let mut state = VbState::new(structure, data, &design, model, config)?;
    let identity = matches!(model, VbModel::Identity);

    let diag_idx = diagnostic_subset(data.len(), config.diagnostic_obs, config.seed);
    let diag_data = data.subset(&diag_idx);
    let diag_design = build_design(&diag_data, structure)?;

    let mut lambda = state.params.to_lambda();
    let mut opt = Adadelta::new(lambda.len(), config.rho, config.eps);
    let window_start = config.iterations.saturating_sub(config.averaging_window.max(1));
    let mut sum = vec![0.0; lambda.len()];
    let mut trajectory = Vec::new();
    let mut timing = VbTiming::default();

    for t in 0..config.iterations {
        let started = Instant::now();
        let est = state
            .gradient_estimate(t as u64, config.gibbs_steps)
            .map_err(|e| e.at_iteration("variational update", t))?;
        opt.update(&mut lambda, &est.lambda);
        state.params.set_lambda(&lambda);
        state.params.floor_e();
        lambda = state.params.to_lambda();
        if let Some((index, value)) = lambda
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > config.divergence_limit)
        {
            return Err(MvmnpError::Diverged { iteration: t, index, max_abs: value.abs() });
        }
        if t >= window_start {
            for (acc, v) in sum.iter_mut().zip(&lambda) {
                *acc += v;
            }
        }
        timing.fit_seconds += started.elapsed().as_secs_f64();

        if config.diagnostic_every > 0 && (t + 1) % config.diagnostic_every == 0 {
            let started = Instant::now();
            let seed = derive_seed(config.seed, Purpose::Diagnostic, t as u64 + 1);
            let source = if identity {
                ParamSource::from_variational_identity(label, structure, &state.params, config.diagnostic_draws, seed)?
            } else {
                ParamSource::from_variational(label, structure, &state.params, config.diagnostic_draws, seed)?
            };
            let summary = predict(&source, &diag_design, config.diagnostic_draws, seed);
            let scores = summary.score(&diag_data)?;
            trajectory.push(DiagnosticPoint { iteration: t + 1, hit_rate: scores.hit_rate });
            timing.diagnostic_seconds += started.elapsed().as_secs_f64();
        }
    }

    let count = (config.iterations - window_start) as f64;
    let mut averaged = state.params.clone();
    averaged.set_lambda(&sum.iter().map(|v| v / count).collect::<Vec<_>>());
    averaged.floor_e();
    Ok(VbFit {
        label: label.into(),
        identity,
        structure: structure.clone(),
        params: averaged,
        last: state.params,
        config: config.clone(),
        trajectory,
        timing,
    })
}

/// Fits `q_λ(θ)` for the full model.
pub fn run_vb(data: &Dataset, structure: &ChoiceStructure, prior: &Prior, config: &SgaConfig) -> Result<VbFit> {
    let label = if config.subsample_fraction < 1.0 {
        format!("vb_{}pct", (config.subsample_fraction * 100.0).round())
    } else {
        "vb".to_string()
    };
    run(structure, data, VbModel::Full(prior), config, &label)
}

/// Fits `q_λ(β)` with `Σ = I` fixed.
pub fn run_vb_identity(data: &Dataset, structure: &ChoiceStructure, config: &SgaConfig) -> Result<VbFit> {
    run(structure, data, VbModel::Identity, config, "vb_identity")
}
