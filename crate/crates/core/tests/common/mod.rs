//! Shared fixtures and independent reference implementations for the
//! integration tests. Nothing here calls into the crate's transform or
//! density code, so comparisons against it are genuine cross-checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use mvmnp::gibbs::{initialize_latent, LatentUtilities};
use mvmnp::model::{build_design, ChoiceStructure, Dataset, DesignMatrix};
use mvmnp::prior::{AngleHyper, AnglePriorHyper, Prior};

pub struct Instance {
    pub structure: ChoiceStructure,
    pub data: Dataset,
    pub design: DesignMatrix,
    pub latent: LatentUtilities,
    pub prior: Prior,
    pub theta: Vec<f64>,
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_dataset(structure: &ChoiceStructure, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let y = (0..n)
        .map(|_| (0..structure.num_choices()).map(|k| rng.random_range(0..=structure.alternatives(k))).collect())
        .collect();
    let x_d = (0..n).map(|_| (0..structure.n_individual).map(|_| normal(rng)).collect()).collect();
    let x_a = (0..n)
        .map(|_| {
            (0..structure.num_choices())
                .map(|k| DMatrix::from_fn(structure.alternatives(k) + 1, structure.n_alternative, |_, _| normal(rng)))
                .collect()
        })
        .collect();
    Dataset::new(structure, y, x_d, x_a).unwrap()
}

pub fn random_prior(structure: &ChoiceStructure, rng: &mut ChaCha8Rng) -> Prior {
    let mut angles = AnglePriorHyper::standard(structure);
    for h in angles.entries.iter_mut() {
        *h = AngleHyper {
            mu: rng.random_range(-0.5..0.5),
            tau: rng.random_range(0.4..1.5),
            eta: rng.random_range(0.3..1.7),
            ..*h
        };
    }
    Prior::new(structure, angles).unwrap()
}

pub fn random_instance(seed: u64, alternatives: Vec<usize>, factors: usize, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let structure = ChoiceStructure::with_factors(alternatives, 1, 1, factors).unwrap();
    let data = random_dataset(&structure, n, &mut rng);
    let design = build_design(&data, &structure).unwrap();
    let prior = random_prior(&structure, &mut rng);
    let theta: Vec<f64> = (0..structure.param_dim()).map(|_| 0.6 * normal(&mut rng)).collect();
    let beta = &theta[..structure.coef_total()];
    let sigma = oracle_sigma(&structure, &theta[structure.coef_total()..]);
    let latent = initialize_latent(&structure, &data, &design, beta, &sigma, seed).unwrap();
    Instance { structure, data, design, latent, prior, theta }
}

/// Standard normal CDF by adaptive Simpson on the density (independent of
/// the crate's erfc-based implementation); accurate to ~1e-13.
pub fn phi_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - phi_cdf(-x);
    }
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let n = 2000;
    let h = x / n as f64;
    let mut acc = f(0.0) + f(x);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    0.5 + acc * h / 3.0
}

/// `Σ(ξ)` assembled directly from the defining formulas.
pub fn oracle_sigma(structure: &ChoiceStructure, xi: &[f64]) -> DMatrix<f64> {
    let pi = std::f64::consts::PI;
    let j = structure.total_alternatives();
    let p = structure.factors;
    let mut b = DMatrix::zeros(j, p);
    let mut d = DVector::zeros(j);
    let mut off = 0;
    let mut row = 0;
    for k in 0..structure.num_choices() {
        let j_k = structure.alternatives(k);
        let n_k = j_k * (p + 1);
        let kappa: Vec<f64> = (0..n_k - 1)
            .map(|l| {
                // 1-based l + 1 < n_k − J_k + 1 ⇔ l < n_k − J_k
                let c = if l < n_k - j_k { pi } else { pi / 2.0 };
                c * phi_cdf(xi[off + l])
            })
            .collect();
        let r = (j_k as f64).sqrt();
        let psi: Vec<f64> = (0..n_k)
            .map(|l| {
                let sines: f64 = kappa[..l].iter().map(|a| a.sin()).product();
                if l + 1 < n_k {
                    r * kappa[l].cos() * sines
                } else {
                    r * sines
                }
            })
            .collect();
        for c in 0..p {
            for rr in 0..j_k {
                b[(row + rr, c)] = psi[c * j_k + rr];
            }
        }
        for rr in 0..j_k {
            d[row + rr] = psi[p * j_k + rr];
        }
        off += n_k - 1;
        row += j_k;
    }
    &b * b.transpose() + DMatrix::from_diagonal(&d.map(|v| v * v))
}

/// Textbook multivariate normal log-density via explicit inverse and determinant.
pub fn oracle_log_mvn(z: &[f64], mean: &[f64], sigma: &DMatrix<f64>) -> f64 {
    let j = z.len();
    let dev = DVector::from_iterator(j, z.iter().zip(mean).map(|(a, b)| a - b));
    let inv = sigma.clone().try_inverse().unwrap();
    let det = sigma.determinant();
    -0.5 * (j as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + (dev.transpose() * inv * &dev)[(0, 0)])
}

/// `log g` from independent pieces: explicit `Σ`, explicit `X_i` from the raw
/// covariates, textbook density, and the Yeo-Johnson prior written out again.
pub fn oracle_log_g(inst: &Instance, theta: &[f64], subset: &[usize]) -> f64 {
    let s = &inst.structure;
    let r = s.coef_total();
    let (beta, xi) = theta.split_at(r);
    let sigma = oracle_sigma(s, xi);
    let mut ll = 0.0;
    for &i in subset {
        let x = oracle_design(s, &inst.data, i);
        let mean = &x * DVector::from_column_slice(beta);
        ll += oracle_log_mvn(inst.latent.row(i), mean.as_slice(), &sigma);
    }
    let scale = inst.data.len() as f64 / subset.len() as f64;
    let lp_beta: f64 = beta
        .iter()
        .map(|b| -0.5 * (2.0 * std::f64::consts::PI / 10.0).ln() - 5.0 * b * b)
        .sum();
    let lp_xi: f64 = xi
        .iter()
        .zip(&inst.prior.angles.entries)
        .map(|(&x, h)| oracle_log_yj_density(x, h.mu, h.tau, h.eta))
        .sum();
    lp_beta + lp_xi + scale * ll
}

pub fn oracle_log_yj_density(xi: f64, mu: f64, tau: f64, eta: f64) -> f64 {
    let u = (xi - mu) / tau;
    let (t, dt) = if u >= 0.0 {
        (((u + 1.0).powf(eta) - 1.0) / eta, (u + 1.0).powf(eta - 1.0))
    } else {
        (-((1.0 - u).powf(2.0 - eta) - 1.0) / (2.0 - eta), (1.0 - u).powf(1.0 - eta))
    };
    -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * t * t + dt.ln() - tau.ln()
}

/// Stacked `X_i` built from the raw covariates.
pub fn oracle_design(s: &ChoiceStructure, data: &Dataset, i: usize) -> DMatrix<f64> {
    let j = s.total_alternatives();
    let mut x = DMatrix::zeros(j, s.coef_total());
    let (mut row, mut col) = (0, 0);
    for k in 0..s.num_choices() {
        let j_k = s.alternatives(k);
        let xa = data.alternative_matrix(i, k);
        for jj in 0..j_k {
            x[(row + jj, col + jj)] = 1.0;
            for (q, &xd) in data.individual(i).iter().enumerate() {
                x[(row + jj, col + j_k + q * j_k + jj)] = xd;
            }
            for c in 0..s.n_alternative {
                x[(row + jj, col + j_k + j_k * s.n_individual + c)] = xa[(jj + 1, c)] - xa[(0, c)];
            }
        }
        row += j_k;
        col += s.coef_len(k);
    }
    x
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, |b|, 1)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// The 20+ gradient-check configurations: K ∈ {1, 2}, J_k ∈ {1, 2, 3}, p ∈ {0, 1, 2}.
pub fn gradient_cases() -> Vec<(Vec<usize>, usize)> {
    let mut cases = Vec::new();
    for alts in [vec![1], vec![2], vec![3], vec![1, 2], vec![2, 2], vec![3, 1], vec![2, 3], vec![3, 3]] {
        for p in 0..=2 {
            // J_k = 1 with p = 0 has no angles; the β block is still checked
            cases.push((alts.clone(), p));
        }
    }
    cases
}
