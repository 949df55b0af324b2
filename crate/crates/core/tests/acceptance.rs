//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Set `MVMNP_ACCEPT` to a comma-separated
//! list of criterion numbers to run a subset.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use mvmnp::experiment::{run_experiment, ExperimentConfig, ExperimentOutcome, Fitted};
use mvmnp::gibbs::GibbsKernel;
use mvmnp::io;
use mvmnp::likelihood::{grad_log_g, LikelihoodInputs};
use mvmnp::mcmc::{beta_conditional_moments, run_mcmc, McmcConfig};
use mvmnp::model::covariance::{kappa_from_xi, xi_from_kappa, FactorCovariance};
use mvmnp::model::spherical::{spherical_forward, spherical_inverse};
use mvmnp::model::{build_design, ChoiceStructure, Dataset};
use mvmnp::predictive::{predict, ParamSource};
use mvmnp::prior::Prior;
use mvmnp::summary::{compare_posteriors, PosteriorSummary};
use mvmnp::vb::{SgaConfig, VbModel, VbState};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn inputs(inst: &Instance) -> LikelihoodInputs<'_> {
    LikelihoodInputs { structure: &inst.structure, design: &inst.design, latent: &inst.latent }
}

fn gradient_correctness() -> Verdict {
    let cases = gradient_cases();
    let mut worst: f64 = 0.0;
    for (case, (alts, p)) in cases.iter().enumerate() {
        let inst = random_instance(1000 + case as u64, alts.clone(), *p, 5);
        let all: Vec<usize> = (0..5).collect();
        let g = grad_log_g(inputs(&inst), &inst.prior, &inst.theta, &all, 5).unwrap();
        let fd = fd_gradient(|t| oracle_log_g(&inst, t, &all), &inst.theta, 1e-5);
        worst = worst.max(max_rel_err(&g, &fd));
    }
    verdict(worst < 1e-5, format!("{} instances, max relative error {worst:.2e} (tol 1e-5)", cases.len()))
}

fn transforms() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let structures = [
        ChoiceStructure::with_factors(vec![3, 3], 0, 1, 2).unwrap(),
        ChoiceStructure::with_factors(vec![2, 1, 4], 0, 1, 1).unwrap(),
        ChoiceStructure::with_factors(vec![5], 0, 1, 3).unwrap(),
        ChoiceStructure::with_factors(vec![2, 3], 0, 1, 0).unwrap(),
    ];
    let (mut xi_err, mut sph_err, mut trace_err, mut sigma_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for v in 0..1000 {
        let s = &structures[v % structures.len()];
        let xi: Vec<f64> = (0..s.angle_total()).map(|_| normal(&mut rng)).collect();
        let kappa = kappa_from_xi(s, &xi);
        let back = xi_from_kappa(s, &kappa).unwrap();
        xi_err = xi_err.max(max_rel_err(&xi, &back));
        for k in 0..s.num_choices() {
            let off = s.angle_offset(k);
            let ka = &kappa[off..off + s.angle_len(k)];
            let psi = spherical_forward(ka, s.alternatives(k)).unwrap();
            let kb = spherical_inverse(&psi, s.alternatives(k)).unwrap();
            sph_err = sph_err.max(max_rel_err(ka, &kb));
        }
        let cov = FactorCovariance::from_xi(s, &xi).unwrap();
        for k in 0..s.num_choices() {
            trace_err = trace_err.max((cov.block(s, k).trace() - s.alternatives(k) as f64).abs());
        }
        let oracle = oracle_sigma(s, &xi);
        sigma_err = sigma_err.max((&cov.sigma - oracle).abs().max());
    }
    let worst = xi_err.max(sph_err).max(trace_err).max(sigma_err);
    verdict(
        worst < 1e-10,
        format!(
            "10^3 vectors: xi<->kappa {xi_err:.1e}, spherical {sph_err:.1e}, trace {trace_err:.1e}, Sigma vs oracle {sigma_err:.1e} (tol 1e-10)"
        ),
    )
}

fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    if n < m {
        return vec![];
    }
    let mut out = subsets(n - 1, m);
    for mut s in subsets(n - 1, m - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

fn subsampling() -> Verdict {
    let inst = random_instance(31, vec![2, 3], 1, 6);
    let all: Vec<usize> = (0..6).collect();
    let full = grad_log_g(inputs(&inst), &inst.prior, &inst.theta, &all, 6).unwrap();
    let subs = subsets(6, 2);
    let mut avg = vec![0.0; full.len()];
    for sub in &subs {
        let g = grad_log_g(inputs(&inst), &inst.prior, &inst.theta, sub, 6).unwrap();
        for (a, v) in avg.iter_mut().zip(g) {
            *a += v / subs.len() as f64;
        }
    }
    let exhaustive = max_rel_err(&avg, &full);

    // Monte Carlo: subsets come from the engine's own sampler.
    let inst = random_instance(32, vec![2, 2], 1, 200);
    let s = &inst.structure;
    let config = SgaConfig { subsample_fraction: 0.1, seed: 5, ..SgaConfig::default() };
    let mut state = VbState::new(s, &inst.data, &inst.design, VbModel::Full(&inst.prior), &config).unwrap();
    state.latent = inst.latent.clone();
    let all: Vec<usize> = (0..200).collect();
    let full = grad_log_g(inputs(&inst), &inst.prior, &inst.theta, &all, 200).unwrap();
    let draws = 10_000;
    let d = full.len();
    let (mut sum, mut sq) = (vec![0.0; d], vec![0.0; d]);
    for t in 0..draws {
        let sub = state.gradient_estimate(t, 0).unwrap().subset;
        assert_eq!(sub.len(), 20);
        let g = grad_log_g(inputs(&inst), &inst.prior, &inst.theta, &sub, 200).unwrap();
        for c in 0..d {
            sum[c] += g[c];
            sq[c] += g[c] * g[c];
        }
    }
    let mut worst_z: f64 = 0.0;
    for c in 0..d {
        let mean = sum[c] / draws as f64;
        let var = (sq[c] / draws as f64 - mean * mean).max(0.0);
        let se = (var / draws as f64).sqrt();
        if se > 0.0 {
            worst_z = worst_z.max((mean - full[c]).abs() / se);
        } else {
            worst_z = worst_z.max(if (mean - full[c]).abs() < 1e-9 { 0.0 } else { f64::INFINITY });
        }
    }
    verdict(
        exhaustive < 1e-10 && worst_z < 4.0,
        format!("exhaustive N=6,M=2 rel err {exhaustive:.1e}; Monte Carlo N=200,M=20 max |z| {worst_z:.2} over {d} coords"),
    )
}

/// Largest gap between the empirical CDF of `sample` and `cdf`.
fn ks(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// CDF of the angle prior in ξ-space by trapezoidal quadrature of its density.
fn angle_cdf(mu: f64, tau: f64, eta: f64) -> impl Fn(f64) -> f64 {
    let (lo, hi, n) = (mu - 40.0 * tau, mu + 40.0 * tau, 400_000);
    let h = (hi - lo) / n as f64;
    let dens: Vec<f64> = (0..=n).map(|i| oracle_log_yj_density(lo + i as f64 * h, mu, tau, eta).exp()).collect();
    let mut cum = vec![0.0; n + 1];
    for i in 1..=n {
        cum[i] = cum[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let total = cum[n];
    move |x: f64| {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let pos = (x - lo) / h;
        let i = (pos.floor() as usize).min(n - 1);
        let w = pos - i as f64;
        (cum[i] * (1.0 - w) + cum[i + 1] * w) / total
    }
}

fn mcmc_validity() -> Verdict {
    // prior recovery with the likelihood switched off
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let s = ChoiceStructure::with_factors(vec![2, 3], 0, 1, 2).unwrap();
    let data = random_dataset(&s, 20, &mut rng);
    let prior = random_prior(&s, &mut rng);
    let stored = 10_000;
    let thin = 50;
    let config = McmcConfig {
        iterations: 20_000 + stored * thin,
        burn_in: 20_000,
        thin,
        prior_only: true,
        seed: 3,
        ..McmcConfig::default()
    };
    let chain = run_mcmc(&data, &s, &prior, &config).unwrap();
    let thetas = chain.thetas().unwrap();
    let r = s.coef_total();
    let mut ks_beta: f64 = 0.0;
    for c in 0..r {
        let col: Vec<f64> = thetas.iter().map(|t| t[c]).collect();
        ks_beta = ks_beta.max(ks(col, |x| phi_cdf(x * 10f64.sqrt())));
    }
    let mut ks_angle: f64 = 0.0;
    for (a, h) in prior.angles.entries.iter().enumerate() {
        let col: Vec<f64> = thetas.iter().map(|t| t[r + a]).collect();
        ks_angle = ks_angle.max(ks(col, angle_cdf(h.mu, h.tau, h.eta)));
    }

    // conditional moments against partitioned-Gaussian and dense oracles
    let inst = random_instance(42, vec![3, 2], 2, 30);
    let is = &inst.structure;
    let sigma = oracle_sigma(is, &inst.theta[is.coef_total()..]);
    let kernel = GibbsKernel::new(is, &sigma).unwrap();
    let j = is.total_alternatives();
    let mut cond_err: f64 = 0.0;
    for i in 0..5 {
        let z = inst.latent.row(i);
        let x = oracle_design(is, &inst.data, i);
        let mean = &x * DVector::from_column_slice(&inst.theta[..is.coef_total()]);
        for idx in 0..j {
            let rest: Vec<usize> = (0..j).filter(|&l| l != idx).collect();
            let s22 = DMatrix::from_fn(j - 1, j - 1, |a, b| sigma[(rest[a], rest[b])]);
            let s12 = DMatrix::from_fn(1, j - 1, |_, b| sigma[(idx, rest[b])]);
            let dev = DVector::from_iterator(j - 1, rest.iter().map(|&l| z[l] - mean[l]));
            let w = &s12 * s22.clone().try_inverse().unwrap();
            let m_oracle = mean[idx] + (&w * dev)[(0, 0)];
            let v_oracle = sigma[(idx, idx)] - (&w * s12.transpose())[(0, 0)];
            let (m, v) = kernel.conditional(z, mean.as_slice(), idx);
            cond_err = cond_err.max((m - m_oracle).abs() / m_oracle.abs().max(1.0));
            cond_err = cond_err.max((v - v_oracle).abs() / v_oracle.abs().max(1.0));
        }
    }
    let sigma_inv = sigma.clone().try_inverse().unwrap();
    let (bmean, bprec) = beta_conditional_moments(inputs(&inst), &sigma_inv, None).unwrap();
    let rr = is.coef_total();
    let mut prec = DMatrix::<f64>::identity(rr, rr) * 10.0;
    let mut rhs = DVector::<f64>::zeros(rr);
    for i in 0..inst.data.len() {
        let x = oracle_design(is, &inst.data, i);
        prec += x.transpose() * &sigma_inv * &x;
        rhs += x.transpose() * &sigma_inv * DVector::from_column_slice(inst.latent.row(i));
    }
    let m_oracle = prec.clone().try_inverse().unwrap() * rhs;
    cond_err = cond_err.max(max_rel_err(&bmean, m_oracle.as_slice()));
    cond_err = cond_err.max((&bprec - &prec).abs().max() / prec.abs().max());

    // binary probit against grid integration
    let bs = ChoiceStructure::with_factors(vec![1], 0, 1, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let truth = [0.3, -0.8];
    let n = 300;
    let xs: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let ys: Vec<usize> = xs.iter().map(|x| usize::from(truth[0] + truth[1] * x + normal(&mut rng) > 0.0)).collect();
    let data = Dataset::new(
        &bs,
        ys.iter().map(|&y| vec![y]).collect(),
        vec![vec![]; n],
        xs.iter().map(|&x| vec![DMatrix::from_row_slice(2, 1, &[0.0, x])]).collect(),
    )
    .unwrap();
    let grid_mean = binary_grid_mean(&xs, &ys);
    let chain = run_mcmc(
        &data,
        &bs,
        &Prior::standard(&bs),
        &McmcConfig { iterations: 30_000, burn_in: 5_000, thin: 5, seed: 9, ..McmcConfig::default() },
    )
    .unwrap();
    let mc: Vec<f64> = (0..2).map(|c| (0..chain.len()).map(|d| chain.beta_draw(d)[c]).sum::<f64>() / chain.len() as f64).collect();
    let binary_err = mc.iter().zip(&grid_mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    verdict(
        ks_beta < 0.02 && ks_angle < 0.02 && cond_err < 1e-12 && binary_err < 0.02,
        format!(
            "prior KS beta {ks_beta:.4}, kappa {ks_angle:.4} (tol 0.02); conditional moments {cond_err:.1e} (tol 1e-12); binary probit |mean - grid| {binary_err:.4} (tol 0.02)"
        ),
    )
}

/// Posterior mean of `(β_0, β_1)` for a binary probit with `N(0, I/10)` prior.
fn binary_grid_mean(xs: &[f64], ys: &[usize]) -> Vec<f64> {
    let (lo, hi, g) = (-2.5, 2.5, 401);
    let h = (hi - lo) / (g - 1) as f64;
    let mut logp = vec![0.0; g * g];
    for a in 0..g {
        for b in 0..g {
            let (b0, b1) = (lo + a as f64 * h, lo + b as f64 * h);
            let mut lp = -5.0 * (b0 * b0 + b1 * b1);
            for (x, &y) in xs.iter().zip(ys) {
                let eta = b0 + b1 * x;
                let p = if y == 1 { phi_cdf_fast(eta) } else { phi_cdf_fast(-eta) };
                lp += p.ln();
            }
            logp[a * g + b] = lp;
        }
    }
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m0, mut m1) = (0.0, 0.0, 0.0);
    for a in 0..g {
        for b in 0..g {
            let w = (logp[a * g + b] - max).exp();
            z += w;
            m0 += w * (lo + a as f64 * h);
            m1 += w * (lo + b as f64 * h);
        }
    }
    vec![m0 / z, m1 / z]
}

/// `Φ` through `statrs`' erfc, independent of the crate's own implementation.
fn phi_cdf_fast(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

struct Desk {
    outcome: ExperimentOutcome,
    prior: Prior,
}

fn desk(dir: &Path) -> Desk {
    let config = ExperimentConfig::desk();
    let started = Instant::now();
    let outcome = run_experiment(&config, dir).expect("desk experiment");
    eprintln!("desk experiment finished in {:.0}s", started.elapsed().as_secs_f64());
    let prior: Prior = io::read_json(&dir.join("prior.json")).unwrap();
    Desk { outcome, prior }
}

fn vb_mcmc_agreement(desk: &Desk) -> Verdict {
    let o = &desk.outcome;
    let Fitted::Vb(vb) = &o.fits["vb"] else { unreachable!() };
    let config = McmcConfig { iterations: 20_000, burn_in: 10_000, thin: 2, seed: 17, ..McmcConfig::default() };
    let chain = run_mcmc(&o.data.train, &o.data.structure, &desk.prior, &config).unwrap();
    let a = PosteriorSummary::from_vb(vb, 10_000, 3).unwrap();
    let b = PosteriorSummary::from_chain("mcmc", &chain).unwrap();
    let c = compare_posteriors(&a, &b).unwrap();
    let beta = c.block("beta").unwrap();
    let corr = c.block("correlation").unwrap();
    let sd_ratio = beta.mean_sd_ratio;
    // Reference only: a second chain of the same length shows how far two
    // MCMC runs disagree at this length. It does not enter the verdict.
    let second = run_mcmc(&o.data.train, &o.data.structure, &desk.prior, &McmcConfig { seed: 18, ..config }).unwrap();
    let r = compare_posteriors(&b, &PosteriorSummary::from_chain("mcmc_2", &second).unwrap()).unwrap();
    verdict(
        beta.correlation > 0.99 && corr.max_abs_deviation <= 0.10 && sd_ratio <= 1.0,
        format!(
            "beta-mean correlation {:.4} (> 0.99); implied correlations max |dev| {:.3} (<= 0.10); mean VB/MCMC sd ratio for beta {:.3} (<= 1); reference MCMC vs second MCMC chain: beta correlation {:.4}, implied correlations max |dev| {:.3}",
            beta.correlation,
            corr.max_abs_deviation,
            sd_ratio,
            r.block("beta").unwrap().correlation,
            r.block("correlation").unwrap().max_abs_deviation
        ),
    )
}

fn predictive_ordering(desk: &Desk) -> Verdict {
    let o = &desk.outcome;
    let kc = o.data.structure.num_choices();
    let ls = |label: &str, k: usize| o.scores[label].1.log_score[k];
    let hr = |label: &str, k: usize| o.scores[label].1.hit_rate[k];
    let models = ["oracle", "mcmc", "vb", "vb_10pct", "vb_1pct", "vb_identity"];
    let mut pass = true;
    let mut notes = Vec::new();
    for k in 0..kc {
        let best_fit = ls("mcmc", k).max(ls("vb", k));
        let worst_fit = ls("mcmc", k).min(ls("vb", k));
        let gaps = [
            ls("oracle", k) - best_fit,
            worst_fit - ls("vb_10pct", k),
            ls("vb_10pct", k) - ls("vb_1pct", k),
            ls("vb_1pct", k) - ls("vb_identity", k),
            -(ls("mcmc", k) - ls("vb", k)).abs(),
        ];
        let naive_gap = models.iter().map(|m| ls(m, k)).fold(f64::INFINITY, f64::min) - ls("naive", k);
        let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hits: Vec<f64> = models.iter().map(|m| hr(m, k)).collect();
        let spread = hits.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - hits.iter().cloned().fold(f64::INFINITY, f64::min);
        pass &= min_gap >= -0.01 && naive_gap >= 0.05 && spread <= 0.02;
        let scores: Vec<String> = models.iter().chain(["naive"].iter()).map(|m| format!("{m} {:.4}", ls(m, k))).collect();
        notes.push(format!(
            "choice {}: [{}] worst adjacent gap {min_gap:.4} (>= -0.01), naive trails by {naive_gap:.3} (>= 0.05), hit-rate spread {spread:.3} (<= 0.02)",
            k + 1,
            scores.join(", ")
        ));
    }
    verdict(pass, notes.join("; "))
}

fn pmf_correctness() -> Verdict {
    let s = ChoiceStructure::with_factors(vec![2], 0, 0, 1).unwrap();
    let data = Dataset::new(&s, vec![vec![0]], vec![vec![]], vec![vec![DMatrix::zeros(3, 0)]]).unwrap();
    let design = build_design(&data, &s).unwrap();
    let cases = [([0.2, -0.3], 0.7), ([-0.5, 0.4], -0.5), ([0.0, 0.0], 0.0), ([1.0, 0.6], 0.9)];
    let mut worst: f64 = 0.0;
    for (c, (mean, rho)) in cases.iter().enumerate() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, *rho, *rho, 1.0]);
        let src = ParamSource::fixed("fixed", &s, mean, &sigma).unwrap();
        let pmf = predict(&src, &design, 1_000_000, 100 + c as u64).joint_pmf(0).to_vec();
        let exact = bivariate_outcome_probs(mean[0], mean[1], *rho);
        worst = worst.max(pmf.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    verdict(worst < 0.005, format!("{} correlated J=2 cases at M=10^6, max |pmf - quadrature| {worst:.5} (tol 0.005)", cases.len()))
}

/// Outcome probabilities of `z ~ N(m, [[1, ρ], [ρ, 1]])` by Simpson quadrature
/// over `z_1`, integrating the conditional law of `z_2` in closed form.
fn bivariate_outcome_probs(m1: f64, m2: f64, rho: f64) -> Vec<f64> {
    let sd = (1.0 - rho * rho).sqrt();
    let cond = |z1: f64, upper: f64| phi_cdf_fast((upper - (m2 + rho * (z1 - m1))) / sd);
    let dens = |z1: f64| (-0.5 * (z1 - m1).powi(2)).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        acc * h / 3.0
    };
    let (lo, hi) = (m1 - 12.0, m1 + 12.0);
    // y = 0: z_1 ≤ 0 and z_2 ≤ 0; y = 1: z_1 > 0 and z_2 < z_1
    let p0 = simpson(&|z| dens(z) * cond(z, 0.0), lo, 0.0_f64.max(lo));
    let p1 = simpson(&|z| dens(z) * cond(z, z), 0.0_f64.min(hi), hi);
    vec![p0, p1, 1.0 - p0 - p1]
}

fn timing_ordering(desk: &Desk) -> Verdict {
    let t = &desk.outcome.fit_seconds;
    let order = ["vb_1pct", "vb_10pct", "vb", "mcmc"];
    let ratios: Vec<f64> = order.windows(2).map(|w| t[w[1]] / t[w[0]]).collect();
    verdict(
        ratios.iter().all(|&r| r >= 2.0),
        format!(
            "seconds {}; adjacent ratios {:?} (each >= 2)",
            order.iter().map(|l| format!("{l} {:.1}", t[*l])).collect::<Vec<_>>().join(", "),
            ratios.iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>()
        ),
    )
}

fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Verdict {
    let config = ExperimentConfig::quick();
    let root = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (run, threads) in [1usize, 8, 1, 8].into_iter().enumerate() {
        let dir = root.path().join(format!("run{run}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let outcome = pool.install(|| run_experiment(&config, &dir)).unwrap();
        runs.push((outputs(&dir), outcome.manifest.files));
    }
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    let files = runs[0].0.len();
    verdict(
        identical && files > 10,
        format!("4 runs (threads 1, 8, 1, 8): {files} output files byte-identical: {identical}; manifests differ only in timings"),
    )
}

fn main() {
    let selected: Option<Vec<usize>> =
        std::env::var("MVMNP_ACCEPT").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |c: usize| selected.as_ref().is_none_or(|s| s.contains(&c));
    let names = [
        "gradient correctness",
        "transform suite",
        "subsampling unbiasedness",
        "MCMC validity",
        "VB-MCMC agreement",
        "predictive ordering",
        "predictive pmf correctness",
        "timing ordering",
        "determinism",
    ];
    let dir = tempfile::tempdir().unwrap();
    let desk = if [5, 6, 8].iter().any(|&c| wanted(c)) { Some(desk(dir.path())) } else { None };
    let mut failed = 0;
    for c in 1..=9 {
        if !wanted(c) {
            continue;
        }
        let started = Instant::now();
        let v = match c {
            1 => gradient_correctness(),
            2 => transforms(),
            3 => subsampling(),
            4 => mcmc_validity(),
            5 => vb_mcmc_agreement(desk.as_ref().unwrap()),
            6 => predictive_ordering(desk.as_ref().unwrap()),
            7 => pmf_correctness(),
            8 => timing_ordering(desk.as_ref().unwrap()),
            _ => determinism(),
        };
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {c} ({}): {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            names[c - 1],
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
