//! Posterior summaries and side-by-side comparison of two fits.

use serde::{Deserialize, Serialize};

use crate::error::{MvmnpError, Result};
use crate::mcmc::McmcChain;
use crate::model::covariance::{correlation, FactorCovariance};
use crate::model::ChoiceStructure;
use crate::vb::VbFit;

/// Mean and standard deviation of one scalar functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub mean: f64,
    pub sd: f64,
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> Moment {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Moment { mean, sd: var.sqrt() }
}

/// Posterior moments of `β`, `diag Σ` and the implied correlations
/// (upper triangle, row by row).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub label: String,
    pub structure: ChoiceStructure,
    pub beta: Vec<Moment>,
    pub sigma_diag: Vec<Moment>,
    pub correlations: Vec<Moment>,
}

impl PosteriorSummary {
    /// Moments over draws `θ = (β, ξ)`.
    pub fn from_thetas(label: &str, structure: &ChoiceStructure, thetas: &[Vec<f64>]) -> Result<Self> {
        if thetas.is_empty() {
            return Err(MvmnpError::Config("posterior summary needs draws".into()));
        }
        let r = structure.coef_total();
        let sigmas: Vec<nalgebra::DMatrix<f64>> = thetas
            .iter()
            .map(|t| FactorCovariance::from_xi(structure, &t[r..]).map(|c| c.sigma))
            .collect::<Result<_>>()?;
        Ok(Self::from_parts(label, structure, thetas, &sigmas))
    }

    fn from_parts(label: &str, structure: &ChoiceStructure, betas: &[Vec<f64>], sigmas: &[nalgebra::DMatrix<f64>]) -> Self {
        let r = structure.coef_total();
        let j = structure.total_alternatives();
        let corrs: Vec<_> = sigmas.iter().map(correlation).collect();
        Self {
            label: label.into(),
            structure: structure.clone(),
            beta: (0..r).map(|c| moments(betas.iter().map(move |t| t[c]))).collect(),
            sigma_diag: (0..j).map(|a| moments(sigmas.iter().map(move |s| s[(a, a)]))).collect(),
            correlations: (0..j)
                .flat_map(|a| (a + 1..j).map(move |b| (a, b)))
                .map(|(a, b)| moments(corrs.iter().map(move |c| c[(a, b)])))
                .collect(),
        }
    }

    pub fn from_chain(label: &str, chain: &McmcChain) -> Result<Self> {
        let betas: Vec<Vec<f64>> = (0..chain.len()).map(|d| chain.beta_draw(d).to_vec()).collect();
        let sigmas: Vec<_> = (0..chain.len()).map(|d| chain.sigma_draw(d)).collect::<Result<_>>()?;
        if betas.is_empty() {
            return Err(MvmnpError::Config("chain has no stored draws".into()));
        }
        Ok(Self::from_parts(label, &chain.structure, &betas, &sigmas))
    }

    /// `β` moments are exact; covariance functionals use `draws` draws from `q_λ`.
    pub fn from_vb(fit: &VbFit, draws: usize, seed: u64) -> Result<Self> {
        let s = &fit.structure;
        let r = s.coef_total();
        let j = s.total_alternatives();
        let thetas: Vec<Vec<f64>> = (0..draws.max(1))
            .map(|m| fit.params.sample(&mut crate::rng::stream(seed, crate::rng::Purpose::Posterior, 0, m as u64)))
            .collect();
        let mut out = if fit.identity {
            let sigmas = vec![nalgebra::DMatrix::identity(j, j); thetas.len()];
            Self::from_parts(&fit.label, s, &thetas, &sigmas)
        } else {
            Self::from_thetas(&fit.label, s, &thetas)?
        };
        let sd = fit.params.marginal_sd();
        for c in 0..r {
            out.beta[c] = Moment { mean: fit.params.mu[c], sd: sd[c] };
        }
        Ok(out)
    }
}

/// One compared functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub block: String,
    pub index: usize,
    pub a: Moment,
    pub b: Moment,
}

/// Agreement of one block of functionals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockComparison {
    pub block: String,
    /// Pearson correlation of posterior means.
    pub correlation: f64,
    pub max_abs_deviation: f64,
    /// Mean of `sd_a / sd_b`.
    pub mean_sd_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<CompareRow>,
    pub blocks: Vec<BlockComparison>,
}

impl Comparison {
    pub fn block(&self, name: &str) -> Option<&BlockComparison> {
        self.blocks.iter().find(|b| b.block == name)
    }
}

/// Pearson correlation; two identical constant vectors count as perfectly correlated.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 && sbb == 0.0 && a == b {
        return 1.0;
    }
    sab / (saa * sbb).sqrt()
}

pub fn compare_posteriors(a: &PosteriorSummary, b: &PosteriorSummary) -> Result<Comparison> {
    if a.structure != b.structure {
        return Err(MvmnpError::Shape(format!(
            "cannot compare `{}` and `{}`: different choice structures",
            a.label, b.label
        )));
    }
    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    for (name, xa, xb) in [
        ("beta", &a.beta, &b.beta),
        ("sigma_diag", &a.sigma_diag, &b.sigma_diag),
        ("correlation", &a.correlations, &b.correlations),
    ] {
        if xa.is_empty() {
            continue;
        }
        let ma: Vec<f64> = xa.iter().map(|m| m.mean).collect();
        let mb: Vec<f64> = xb.iter().map(|m| m.mean).collect();
        let ratios: Vec<f64> = xa.iter().zip(xb.iter()).filter(|(_, y)| y.sd > 0.0).map(|(x, y)| x.sd / y.sd).collect();
        blocks.push(BlockComparison {
            block: name.into(),
            correlation: pearson(&ma, &mb),
            max_abs_deviation: ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
            mean_sd_ratio: if ratios.is_empty() { f64::NAN } else { ratios.iter().sum::<f64>() / ratios.len() as f64 },
        });
        rows.extend(
            xa.iter()
                .zip(xb.iter())
                .enumerate()
                .map(|(index, (x, y))| CompareRow { block: name.into(), index, a: *x, b: *y }),
        );
    }
    Ok(Comparison { label_a: a.label.clone(), label_b: b.label.clone(), rows, blocks })
}
