//! Predictive distributions, scoring, price-response curves and baselines.
//!
//! The predictive pmf of observation `i` is the empirical distribution of
//! `y(z)` over `M` draws `θ^m` from the parameter source and
//! `z^m ~ N(X_i β^m, Σ^m)`. Parameter draws are shared across observations;
//! latent draws for observation `i` come from the stream `(seed, Predictive, 0, i)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MvmnpError, Result};
use crate::linalg::SpdFactor;
use crate::model::covariance::FactorCovariance;
use crate::model::outcome::outcome_from_utilities;
use crate::model::{ChoiceStructure, Dataset, DesignMatrix};
use crate::rng::{stream, Purpose};
use crate::vb::VariationalParams;

/// Default number of predictive draws.
pub const DEFAULT_DRAWS: usize = 10_000;

/// A finite set of parameter values `(β^m, chol Σ^m)`; predictive draw `m`
/// uses entry `m mod len`.
#[derive(Clone, Debug)]
pub struct ParamSource {
    pub label: String,
    structure: ChoiceStructure,
    betas: Vec<Vec<f64>>,
    /// Row-major lower Cholesky factors, `J × J` each.
    chols: Vec<Vec<f64>>,
}

fn lower_flat(sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = SpdFactor::new(sigma)?.lower();
    let j = l.nrows();
    Ok((0..j * j).map(|idx| l[(idx / j, idx % j)]).collect())
}

fn identity_flat(j: usize) -> Vec<f64> {
    (0..j * j).map(|idx| if idx / j == idx % j { 1.0 } else { 0.0 }).collect()
}

impl ParamSource {
    /// A single fixed `(β, Σ)`, used for the oracle.
    pub fn fixed(label: &str, structure: &ChoiceStructure, beta: &[f64], sigma: &DMatrix<f64>) -> Result<Self> {
        check_beta(structure, beta)?;
        let j = structure.total_alternatives();
        if sigma.nrows() != j || sigma.ncols() != j {
            return Err(MvmnpError::Shape(format!("Σ is {}x{}, expected {j}x{j}", sigma.nrows(), sigma.ncols())));
        }
        Ok(Self {
            label: label.into(),
            structure: structure.clone(),
            betas: vec![beta.to_vec()],
            chols: vec![lower_flat(sigma)?],
        })
    }

    /// Parameter vectors `θ = (β, ξ)`, e.g. stored MCMC draws.
    pub fn from_thetas(label: &str, structure: &ChoiceStructure, thetas: &[Vec<f64>]) -> Result<Self> {
        if thetas.is_empty() {
            return Err(MvmnpError::Config("parameter source needs at least one draw".into()));
        }
        let r = structure.coef_total();
        let converted: Result<Vec<(Vec<f64>, Vec<f64>)>> = thetas
            .par_iter()
            .map(|theta| {
                if theta.len() != structure.param_dim() {
                    return Err(MvmnpError::Shape(format!(
                        "θ has {} entries, expected {}",
                        theta.len(),
                        structure.param_dim()
                    )));
                }
                let cov = FactorCovariance::from_xi(structure, &theta[r..])?;
                Ok((theta[..r].to_vec(), lower_flat(&cov.sigma)?))
            })
            .collect();
        let (betas, chols) = converted?.into_iter().unzip();
        Ok(Self { label: label.into(), structure: structure.clone(), betas, chols })
    }

    /// `count` draws `θ^m ~ q_λ`, draw `m` from stream `(seed, PredictiveParams, 0, m)`.
    pub fn from_variational(
        label: &str,
        structure: &ChoiceStructure,
        params: &VariationalParams,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        if params.m != structure.param_dim() {
            return Err(MvmnpError::Shape(format!(
                "variational dimension {} does not match θ dimension {}",
                params.m,
                structure.param_dim()
            )));
        }
        let thetas = variational_draws(params, count, seed);
        Self::from_thetas(label, structure, &thetas)
    }

    /// Draws of `β ~ q_λ` with `Σ = I` (identity-covariance variant).
    pub fn from_variational_identity(
        label: &str,
        structure: &ChoiceStructure,
        params: &VariationalParams,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        if params.m != structure.coef_total() {
            return Err(MvmnpError::Shape(format!(
                "variational dimension {} does not match β dimension {}",
                params.m,
                structure.coef_total()
            )));
        }
        let betas = variational_draws(params, count, seed);
        let j = structure.total_alternatives();
        Ok(Self {
            label: label.into(),
            structure: structure.clone(),
            chols: vec![identity_flat(j); betas.len()],
            betas,
        })
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn structure(&self) -> &ChoiceStructure {
        &self.structure
    }
}

fn check_beta(structure: &ChoiceStructure, beta: &[f64]) -> Result<()> {
    if beta.len() != structure.coef_total() {
        return Err(MvmnpError::Shape(format!("β has {} entries, expected {}", beta.len(), structure.coef_total())));
    }
    Ok(())
}

fn variational_draws(params: &VariationalParams, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count.max(1))
        .into_par_iter()
        .map(|m| params.sample(&mut stream(seed, Purpose::PredictiveParams, 0, m as u64)))
        .collect()
}

/// Mixed-radix index of a joint outcome; choice 0 is the most significant digit.
pub fn joint_index(structure: &ChoiceStructure, y: &[usize]) -> usize {
    let mut idx = 0;
    for (k, &v) in y.iter().enumerate() {
        idx = idx * (structure.alternatives(k) + 1) + v;
    }
    idx
}

/// Inverse of [`joint_index`].
pub fn joint_outcome(structure: &ChoiceStructure, mut idx: usize) -> Vec<usize> {
    let kc = structure.num_choices();
    let mut y = vec![0; kc];
    for k in (0..kc).rev() {
        let base = structure.alternatives(k) + 1;
        y[k] = idx % base;
        idx /= base;
    }
    y
}

fn simulate<R: Rng + ?Sized>(source: &ParamSource, design: &DesignMatrix, i: usize, draws: usize, rng: &mut R) -> Vec<f64> {
    let s = &source.structure;
    let j = s.total_alternatives();
    let mut counts = vec![0u64; s.joint_outcomes()];
    let mut mean = vec![0.0; j];
    let mut e = vec![0.0; j];
    let mut z = vec![0.0; j];
    let mut y = vec![0; s.num_choices()];
    for m in 0..draws {
        let p = m % source.len();
        design.mul_beta(i, &source.betas[p], &mut mean);
        for v in e.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let l = &source.chols[p];
        for r in 0..j {
            let row = &l[r * j..r * j + r + 1];
            z[r] = mean[r] + row.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut off = 0;
        for (k, yk) in y.iter_mut().enumerate() {
            let j_k = s.alternatives(k);
            *yk = outcome_from_utilities(&z[off..off + j_k]);
            off += j_k;
        }
        counts[joint_index(s, &y)] += 1;
    }
    counts.into_iter().map(|c| c as f64 / draws as f64).collect()
}

/// Empirical joint pmf of observation `i` of `design` from `draws` simulations.
pub fn draw_predictive(source: &ParamSource, design: &DesignMatrix, i: usize, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Predictive, 0, i as u64);
    simulate(source, design, i, draws.max(1), &mut rng)
}

/// Marginal pmfs per choice from a joint pmf.
pub fn marginalize(structure: &ChoiceStructure, joint: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..structure.num_choices()).map(|k| vec![0.0; structure.alternatives(k) + 1]).collect();
    for (idx, &p) in joint.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (k, &v) in joint_outcome(structure, idx).iter().enumerate() {
            out[k][v] += p;
        }
    }
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn mode(pmf: &[f64]) -> usize {
    let mut best = 0;
    for (idx, &p) in pmf.iter().enumerate() {
        if p > pmf[best] {
            best = idx;
        }
    }
    best
}

/// Per-observation predictive pmfs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub source: String,
    pub draws: usize,
    pub seed: u64,
    pub structure: ChoiceStructure,
    /// `N × Π_k (J_k + 1)` joint pmfs, row-major.
    pub joint: Vec<f64>,
}

/// Scores of one predictive summary against observed choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub source: String,
    pub log_score: Vec<f64>,
    pub hit_rate: Vec<f64>,
    /// Fraction of observations whose full outcome vector equals the joint mode.
    pub joint_hit_rate: f64,
    /// Number of observed cells whose probability was floored before the log.
    pub floored: Vec<usize>,
}

impl PredictiveSummary {
    pub fn len(&self) -> usize {
        self.joint.len() / self.structure.joint_outcomes()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.is_empty()
    }

    pub fn joint_pmf(&self, i: usize) -> &[f64] {
        let o = self.structure.joint_outcomes();
        &self.joint[i * o..(i + 1) * o]
    }

    pub fn marginals(&self, i: usize) -> Vec<Vec<f64>> {
        marginalize(&self.structure, self.joint_pmf(i))
    }

    /// Point forecast: the mode of the joint pmf.
    pub fn forecast(&self, i: usize) -> Vec<usize> {
        joint_outcome(&self.structure, mode(self.joint_pmf(i)))
    }

    /// Probability floor `1/(10 M)` applied before taking logs.
    pub fn floor(&self) -> f64 {
        1.0 / (10.0 * self.draws as f64)
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if data.len() != self.len() || data.alternatives() != self.structure.alternatives.as_slice() {
            return Err(MvmnpError::Shape(format!(
                "predictive summary covers {} observations, dataset has {}",
                self.len(),
                data.len()
            )));
        }
        Ok(())
    }

    /// `(1/N) Σ_i log p̂(y_ik)` with the marginal pmf of choice `k`, and the
    /// number of floored cells.
    pub fn log_score(&self, data: &Dataset, k: usize) -> Result<(f64, usize)> {
        self.check(data)?;
        let floor = self.floor();
        let mut total = 0.0;
        let mut floored = 0;
        for i in 0..self.len() {
            let p = self.marginals(i)[k][data.choice(i, k)];
            if p < floor {
                floored += 1;
            }
            total += p.max(floor).ln();
        }
        Ok((total / self.len().max(1) as f64, floored))
    }

    /// Fraction of observations whose joint-mode forecast gets choice `k` right.
    pub fn hit_rate(&self, data: &Dataset, k: usize) -> Result<f64> {
        self.check(data)?;
        let hits = (0..self.len()).filter(|&i| self.forecast(i)[k] == data.choice(i, k)).count();
        Ok(hits as f64 / self.len().max(1) as f64)
    }

    pub fn score(&self, data: &Dataset) -> Result<Scores> {
        self.check(data)?;
        let kc = self.structure.num_choices();
        let mut log_score = Vec::with_capacity(kc);
        let mut floored = Vec::with_capacity(kc);
        let mut hit_rate = Vec::with_capacity(kc);
        for k in 0..kc {
            let (ls, f) = self.log_score(data, k)?;
            log_score.push(ls);
            floored.push(f);
            hit_rate.push(self.hit_rate(data, k)?);
        }
        let joint_hits = (0..self.len()).filter(|&i| self.forecast(i) == data.choices(i)).count();
        Ok(Scores {
            source: self.source.clone(),
            log_score,
            hit_rate,
            joint_hit_rate: joint_hits as f64 / self.len().max(1) as f64,
            floored,
        })
    }
}

/// Predictive pmfs for every observation of `design`.
pub fn predict(source: &ParamSource, design: &DesignMatrix, draws: usize, seed: u64) -> PredictiveSummary {
    let draws = draws.max(1);
    let rows: Vec<Vec<f64>> = (0..design.len())
        .into_par_iter()
        .map(|i| draw_predictive(source, design, i, draws, seed))
        .collect();
    PredictiveSummary {
        source: source.label.clone(),
        draws,
        seed,
        structure: source.structure.clone(),
        joint: rows.concat(),
    }
}

/// Oracle predictive at the true parameters.
pub fn oracle_forecast(
    structure: &ChoiceStructure,
    beta: &[f64],
    sigma: &DMatrix<f64>,
    design: &DesignMatrix,
    draws: usize,
    seed: u64,
) -> Result<PredictiveSummary> {
    let source = ParamSource::fixed("oracle", structure, beta, sigma)?;
    Ok(predict(&source, design, draws, seed))
}

/// Naive baseline: every observation gets the product of the training
/// category frequencies. Its floor uses `M = N_train`.
pub fn naive_forecast(structure: &ChoiceStructure, train: &Dataset, n_eval: usize) -> Result<PredictiveSummary> {
    train.check_structure(structure)?;
    if train.is_empty() {
        return Err(MvmnpError::Config("naive forecast needs training observations".into()));
    }
    let freq = train.category_frequencies();
    let outcomes = structure.joint_outcomes();
    let row: Vec<f64> = (0..outcomes)
        .map(|idx| joint_outcome(structure, idx).iter().enumerate().map(|(k, &v)| freq[k][v]).product())
        .collect();
    Ok(PredictiveSummary {
        source: "naive".into(),
        draws: train.len(),
        seed: 0,
        structure: structure.clone(),
        joint: row.repeat(n_eval),
    })
}

/// Covariates of a single reference observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateProfile {
    pub individual: Vec<f64>,
    /// Row-major `(J_k + 1) × n_a` alternative covariates per choice.
    pub alternative: Vec<Vec<f64>>,
}

impl CovariateProfile {
    /// Covariates set to their sample means.
    pub fn mean(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(MvmnpError::Config("cannot average covariates of an empty dataset".into()));
        }
        let n = data.len() as f64;
        let mut individual = vec![0.0; data.n_individual()];
        let mut alternative: Vec<Vec<f64>> =
            (0..data.num_choices()).map(|k| vec![0.0; data.alternative_slice(0, k).len()]).collect();
        for i in 0..data.len() {
            for (acc, v) in individual.iter_mut().zip(data.individual(i)) {
                *acc += v / n;
            }
            for (k, block) in alternative.iter_mut().enumerate() {
                for (acc, v) in block.iter_mut().zip(data.alternative_slice(i, k)) {
                    *acc += v / n;
                }
            }
        }
        Ok(Self { individual, alternative })
    }

    fn design(&self, structure: &ChoiceStructure) -> Result<DesignMatrix> {
        let blocks: Vec<&[f64]> = self.alternative.iter().map(|b| b.as_slice()).collect();
        DesignMatrix::single(structure, &self.individual, &blocks)
    }
}

/// Predictive probabilities of every category of choice `k` as the
/// covariate `covariate` of alternative `category` moves along `grid`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceCurve {
    pub source: String,
    pub choice: usize,
    pub category: usize,
    pub covariate: usize,
    pub grid: Vec<f64>,
    /// `grid.len() × (J_k + 1)`.
    pub probabilities: Vec<Vec<f64>>,
}

impl PriceCurve {
    /// Own-category probability along the grid.
    pub fn own(&self) -> Vec<f64> {
        self.probabilities.iter().map(|p| p[self.category]).collect()
    }

    /// Swaps category labels `a` and `b`, undoing a base-category recoding.
    pub fn swap_categories(&mut self, a: usize, b: usize) {
        for p in &mut self.probabilities {
            p.swap(a, b);
        }
        if self.category == a {
            self.category = b;
        } else if self.category == b {
            self.category = a;
        }
    }
}

/// Price-response curve at a reference profile. All grid points share the
/// same random numbers.
#[allow(clippy::too_many_arguments)]
pub fn price_response_curve(
    source: &ParamSource,
    profile: &CovariateProfile,
    choice: usize,
    category: usize,
    covariate: usize,
    grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<PriceCurve> {
    let s = &source.structure;
    if choice >= s.num_choices() || category > s.alternatives(choice) || covariate >= s.n_alternative {
        return Err(MvmnpError::Config(format!(
            "no covariate {covariate} for category {category} of choice {choice}"
        )));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(MvmnpError::Domain("price grid must be finite".into()));
    }
    let n_a = s.n_alternative;
    let probabilities: Result<Vec<Vec<f64>>> = grid
        .par_iter()
        .map(|&price| {
            let mut p = profile.clone();
            p.alternative[choice][category * n_a + covariate] = price;
            let design = p.design(s)?;
            let mut rng = stream(seed, Purpose::Predictive, 1, choice as u64);
            let joint = simulate(source, &design, 0, draws.max(1), &mut rng);
            Ok(marginalize(s, &joint).swap_remove(choice))
        })
        .collect();
    Ok(PriceCurve {
        source: source.label.clone(),
        choice,
        category,
        covariate,
        grid: grid.to_vec(),
        probabilities: probabilities?,
    })
}

/// Pointwise mean of probability vectors of equal length.
pub fn pool_pmfs(pmfs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = pmfs.first().ok_or_else(|| MvmnpError::Config("nothing to pool".into()))?;
    if pmfs.iter().any(|p| p.len() != first.len()) {
        return Err(MvmnpError::Shape("pooled pmfs have different lengths".into()));
    }
    let n = pmfs.len() as f64;
    Ok((0..first.len()).map(|c| pmfs.iter().map(|p| p[c]).sum::<f64>() / n).collect())
}

/// Pools curves from fits under different base categories (already mapped
/// back to common labels). Grids must match exactly.
pub fn pool_base_category(curves: &[PriceCurve]) -> Result<PriceCurve> {
    let first = curves.first().ok_or_else(|| MvmnpError::Config("nothing to pool".into()))?;
    for c in curves {
        if c.grid != first.grid || c.choice != first.choice || c.category != first.category {
            return Err(MvmnpError::Shape("pooled curves use different grids or categories".into()));
        }
    }
    let probabilities: Result<Vec<Vec<f64>>> = (0..first.grid.len())
        .map(|g| pool_pmfs(&curves.iter().map(|c| c.probabilities[g].clone()).collect::<Vec<_>>()))
        .collect();
    Ok(PriceCurve { source: "pooled".into(), probabilities: probabilities?, ..first.clone() })
}

/// Relabels choice `k` so that alternative `new_base` becomes the base: the
/// covariate rows of alternatives 0 and `new_base` are swapped and so are
/// the two labels in `y`.
pub fn recode_base(data: &Dataset, k: usize, new_base: usize) -> Result<Dataset> {
    if k >= data.num_choices() || new_base > data.alternatives()[k] {
        return Err(MvmnpError::Config(format!("choice {k} has no category {new_base}")));
    }
    let mut out = data.clone();
    let n_a = data.n_alternative();
    for i in 0..out.len() {
        let block = out.alternative_slice_mut(i, k);
        for c in 0..n_a {
            block.swap(c, new_base * n_a + c);
        }
        let y = out.choice(i, k);
        if y == 0 {
            out.set_choice(i, k, new_base);
        } else if y == new_base {
            out.set_choice(i, k, 0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_design;

    fn empty_design(structure: &ChoiceStructure) -> DesignMatrix {
        let blocks: Vec<Vec<f64>> = (0..structure.num_choices())
            .map(|k| vec![0.0; (structure.alternatives(k) + 1) * structure.n_alternative])
            .collect();
        let refs: Vec<&[f64]> = blocks.iter().map(|b| b.as_slice()).collect();
        DesignMatrix::single(structure, &vec![0.0; structure.n_individual], &refs).unwrap()
    }

    #[test]
    fn joint_index_round_trip() {
        let s = ChoiceStructure::new(vec![3, 1, 2], 0, 0).unwrap();
        for idx in 0..s.joint_outcomes() {
            assert_eq!(joint_index(&s, &joint_outcome(&s, idx)), idx);
        }
        assert_eq!(joint_index(&s, &[1, 0, 2]), 8);
    }

    #[test]
    fn symmetric_cases() {
        let s1 = ChoiceStructure::new(vec![1], 0, 0).unwrap();
        let src = ParamSource::fixed("t", &s1, &vec![0.0; s1.coef_total()], &DMatrix::identity(1, 1)).unwrap();
        let pmf = draw_predictive(&src, &empty_design(&s1), 0, 200_000, 3);
        assert!((pmf[1] - 0.5).abs() < 0.005);
        let s2 = ChoiceStructure::new(vec![2], 0, 0).unwrap();
        let src = ParamSource::fixed("t", &s2, &vec![0.0; s2.coef_total()], &DMatrix::identity(2, 2)).unwrap();
        let pmf = draw_predictive(&src, &empty_design(&s2), 0, 200_000, 3);
        assert!((pmf[0] - 0.25).abs() < 0.005);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    fn summary(structure: &ChoiceStructure, rows: Vec<Vec<f64>>) -> PredictiveSummary {
        PredictiveSummary { source: "t".into(), draws: 100, seed: 0, structure: structure.clone(), joint: rows.concat() }
    }

    fn data_with_choices(structure: &ChoiceStructure, ys: &[Vec<usize>]) -> Dataset {
        let alt: Vec<Vec<nalgebra::DMatrix<f64>>> = ys
            .iter()
            .map(|_| (0..structure.num_choices()).map(|k| DMatrix::zeros(structure.alternatives(k) + 1, 0)).collect())
            .collect();
        Dataset::new(structure, ys.to_vec(), vec![vec![]; ys.len()], alt).unwrap()
    }

    #[test]
    fn uniform_pmf_log_score() {
        let s = ChoiceStructure::new(vec![2], 0, 0).unwrap();
        let data = data_with_choices(&s, &[vec![0], vec![1], vec![2]]);
        let sm = summary(&s, vec![vec![1.0 / 3.0; 3]; 3]);
        let (ls, floored) = sm.log_score(&data, 0).unwrap();
        assert!((ls + 3f64.ln()).abs() < 1e-12);
        assert_eq!(floored, 0);
    }

    #[test]
    fn perfect_forecast_hit_rate_and_floor() {
        let s = ChoiceStructure::new(vec![2], 0, 0).unwrap();
        let data = data_with_choices(&s, &[vec![0], vec![2]]);
        let sm = summary(&s, vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.1, 0.9]]);
        assert_eq!(sm.hit_rate(&data, 0).unwrap(), 1.0);
        let wrong = summary(&s, vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.1, 0.9]]);
        let (ls, floored) = wrong.log_score(&data, 0).unwrap();
        assert_eq!(floored, 1);
        assert!((ls - 0.5 * (1e-3f64.ln() + 0.9f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn hit_rate_uses_joint_mode() {
        // marginal modes (1, 0) differ from the joint mode (0, 0)
        let s = ChoiceStructure::new(vec![1, 1], 0, 0).unwrap();
        let data = data_with_choices(&s, &[vec![0, 0]]);
        let sm = summary(&s, vec![vec![0.4, 0.0, 0.3, 0.3]]);
        let m = sm.marginals(0);
        assert_eq!((mode(&m[0]), mode(&m[1])), (1, 0));
        assert_eq!(sm.forecast(0), vec![0, 0]);
        assert_eq!(sm.score(&data).unwrap().hit_rate, vec![1.0, 1.0]);
    }

    #[test]
    fn naive_uses_training_frequencies() {
        let s = ChoiceStructure::new(vec![2], 0, 0).unwrap();
        let train = data_with_choices(&s, &[vec![0], vec![2], vec![2], vec![1]]);
        let sm = naive_forecast(&s, &train, train.len()).unwrap();
        let sc = sm.score(&train).unwrap();
        assert!((sc.hit_rate[0] - 0.5).abs() < 1e-12);
        assert_eq!(sm.marginals(0)[0], vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn pooling() {
        let a = vec![0.2, 0.8];
        assert_eq!(pool_pmfs(&[a.clone(), a.clone()]).unwrap(), a);
        let p = pool_pmfs(&[vec![0.2, 0.3, 0.5], vec![0.4, 0.5, 0.1]]).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-15 && (p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let c1 = PriceCurve { source: "a".into(), choice: 0, category: 1, covariate: 0, grid: vec![0.0, 1.0], probabilities: vec![vec![0.5, 0.5]; 2] };
        let mut c2 = c1.clone();
        c2.grid = vec![0.0, 2.0];
        assert!(pool_base_category(&[c1.clone(), c2]).is_err());
        assert_eq!(pool_base_category(&[c1.clone(), c1.clone()]).unwrap().probabilities, c1.probabilities);
    }

    #[test]
    fn recoding_swaps_rows_and_labels() {
        let s = ChoiceStructure::new(vec![2], 0, 1).unwrap();
        let alt = vec![
            vec![DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0])],
            vec![DMatrix::from_row_slice(3, 1, &[4.0, 5.0, 6.0])],
        ];
        let data = Dataset::new(&s, vec![vec![0], vec![2]], vec![vec![]; 2], alt).unwrap();
        let r = recode_base(&data, 0, 2).unwrap();
        assert_eq!(r.alternative_slice(0, 0), &[3.0, 2.0, 1.0]);
        assert_eq!((r.choice(0, 0), r.choice(1, 0)), (2, 0));
        assert_eq!(recode_base(&r, 0, 2).unwrap(), data);
        build_design(&r, &s).unwrap();
    }

    #[test]
    fn curve_probabilities_sum_to_one_and_fall_with_price() {
        let s = ChoiceStructure::new(vec![2], 0, 1).unwrap();
        let beta = vec![-0.2, -0.3, -0.8];
        let src = ParamSource::fixed("t", &s, &beta, &DMatrix::identity(2, 2)).unwrap();
        let profile = CovariateProfile { individual: vec![], alternative: vec![vec![0.0, 0.0, 0.0]] };
        let grid: Vec<f64> = (0..7).map(|g| -1.5 + 0.5 * g as f64).collect();
        let curve = price_response_curve(&src, &profile, 0, 1, 0, &grid, 50_000, 9).unwrap();
        for p in &curve.probabilities {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let own = curve.own();
        for w in own.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
