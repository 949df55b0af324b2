//! End-to-end experiments: data, prior calibration, estimation, prediction,
//! scoring and comparison, with every output listed in a checksummed manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dgp::{draw_parameters, simulate_dataset, train_test_split, DgpConfig, TrueParameters};
use crate::error::{MvmnpError, Result};
use crate::io;
use crate::mcmc::{run_mcmc, McmcChain, McmcConfig};
use crate::model::{build_design, ChoiceStructure, Dataset};
use crate::predictive::{
    naive_forecast, predict, price_response_curve, CovariateProfile, ParamSource, PredictiveSummary, PriceCurve, Scores,
};
use crate::prior::{calibrate_prior, CalibrationConfig, Prior};
use crate::rng::{derive_seed, Purpose};
use crate::summary::{compare_posteriors, Comparison, PosteriorSummary};
use crate::vb::{run_vb, run_vb_identity, SgaConfig, VbFit};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConfig {
    pub alternatives: Vec<usize>,
    #[serde(default)]
    pub n_individual: usize,
    #[serde(default)]
    pub n_alternative: usize,
    /// Factor count `p`; defaults to the number of choices.
    #[serde(default)]
    pub factors: Option<usize>,
}

impl StructureConfig {
    pub fn build(&self) -> Result<ChoiceStructure> {
        let s = ChoiceStructure::new(self.alternatives.clone(), self.n_individual, self.n_alternative)?;
        Ok(match self.factors {
            Some(p) => s.with_factor_count(p),
            None => s,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataConfig {
    /// Training and test sets drawn from the same synthetic process.
    Synthetic {
        n_train: usize,
        n_test: usize,
        #[serde(default)]
        dgp: DgpConfig,
    },
    /// A CSV file split at random into training and test observations.
    Csv {
        path: PathBuf,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Vb {
        #[serde(default = "one")]
        fraction: f64,
        /// Overrides the SGA iteration count for this estimator.
        #[serde(default)]
        iterations: Option<usize>,
    },
    VbIdentity,
    Mcmc,
    Naive,
    Oracle,
}

fn one() -> f64 {
    1.0
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Vb { fraction, .. } if *fraction < 1.0 => format!("vb_{}pct", (fraction * 100.0).round()),
            EstimatorSpec::Vb { .. } => "vb".into(),
            EstimatorSpec::VbIdentity => "vb_identity".into(),
            EstimatorSpec::Mcmc => "mcmc".into(),
            EstimatorSpec::Naive => "naive".into(),
            EstimatorSpec::Oracle => "oracle".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub choice: usize,
    pub category: usize,
    #[serde(default)]
    pub covariate: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub points: usize,
}

impl CurveConfig {
    pub fn grid(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.grid_min];
        }
        let step = (self.grid_max - self.grid_min) / (self.points - 1) as f64;
        (0..self.points).map(|g| self.grid_min + step * g as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub structure: StructureConfig,
    pub data: DataConfig,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub vb: SgaConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default = "default_draws")]
    pub predictive_draws: usize,
    /// Draws from `q_λ` used for VB covariance summaries.
    #[serde(default = "default_draws")]
    pub posterior_draws: usize,
    #[serde(default)]
    pub curves: Option<CurveConfig>,
    /// Master seed; every component seed is derived from it.
    pub seed: u64,
}

fn default_draws() -> usize {
    crate::predictive::DEFAULT_DRAWS
}

impl ExperimentConfig {
    /// Two choices with three alternatives each and one price covariate,
    /// 2000 training and 10,000 test observations, all estimators.
    pub fn desk() -> Self {
        Self {
            version: CONFIG_VERSION,
            structure: StructureConfig { alternatives: vec![3, 3], n_individual: 0, n_alternative: 1, factors: None },
            data: DataConfig::Synthetic { n_train: 2000, n_test: 10_000, dgp: DgpConfig::default() },
            estimators: vec![
                EstimatorSpec::Vb { fraction: 0.01, iterations: None },
                EstimatorSpec::Vb { fraction: 0.1, iterations: None },
                EstimatorSpec::Vb { fraction: 1.0, iterations: None },
                EstimatorSpec::VbIdentity,
                EstimatorSpec::Mcmc,
                EstimatorSpec::Naive,
                EstimatorSpec::Oracle,
            ],
            vb: SgaConfig::default(),
            mcmc: McmcConfig::default(),
            calibration: CalibrationConfig::default(),
            predictive_draws: default_draws(),
            posterior_draws: default_draws(),
            curves: Some(CurveConfig { choice: 0, category: 1, covariate: 0, grid_min: -2.0, grid_max: 2.0, points: 21 }),
            seed: 2024,
        }
    }

    /// A small configuration that runs in seconds, for smoke tests.
    pub fn quick() -> Self {
        Self {
            structure: StructureConfig { alternatives: vec![2, 2], n_individual: 1, n_alternative: 1, factors: None },
            data: DataConfig::Synthetic { n_train: 200, n_test: 200, dgp: DgpConfig::default() },
            estimators: vec![
                EstimatorSpec::Vb { fraction: 0.1, iterations: None },
                EstimatorSpec::Vb { fraction: 1.0, iterations: None },
                EstimatorSpec::VbIdentity,
                EstimatorSpec::Mcmc,
                EstimatorSpec::Naive,
                EstimatorSpec::Oracle,
            ],
            vb: SgaConfig { iterations: 150, averaging_window: 50, diagnostic_every: 50, diagnostic_obs: 100, ..SgaConfig::default() },
            mcmc: McmcConfig { iterations: 600, burn_in: 200, thin: 4, ..McmcConfig::default() },
            calibration: CalibrationConfig { draws: 2000, seed: 1 },
            predictive_draws: 500,
            posterior_draws: 200,
            curves: Some(CurveConfig { choice: 1, category: 2, covariate: 0, grid_min: -1.0, grid_max: 1.0, points: 5 }),
            seed: 7,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(MvmnpError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let structure = self.structure.build()?;
        self.vb.validate()?;
        self.mcmc.validate()?;
        for e in &self.estimators {
            if let EstimatorSpec::Vb { fraction, .. } = e {
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err(MvmnpError::Config(format!("subsample fraction {fraction} outside (0, 1]")));
                }
            }
        }
        let mut labels: Vec<String> = self.estimators.iter().map(|e| e.label()).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.estimators.len() {
            return Err(MvmnpError::Config("estimator labels must be unique".into()));
        }
        match &self.data {
            DataConfig::Synthetic { n_train, n_test, .. } => {
                if *n_train == 0 || *n_test == 0 {
                    return Err(MvmnpError::Config("synthetic data needs positive n_train and n_test".into()));
                }
            }
            DataConfig::Csv { train_fraction, .. } => {
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    return Err(MvmnpError::Config(format!("train fraction {train_fraction} outside (0, 1)")));
                }
                if self.estimators.contains(&EstimatorSpec::Oracle) {
                    return Err(MvmnpError::Config("the oracle needs synthetic data".into()));
                }
            }
        }
        if let Some(c) = &self.curves {
            if c.choice >= structure.num_choices()
                || c.category > structure.alternatives(c.choice)
                || c.covariate >= structure.n_alternative
                || c.points == 0
            {
                return Err(MvmnpError::Config("curve settings do not match the choice structure".into()));
            }
        }
        Ok(())
    }
}

/// Data of one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub structure: ChoiceStructure,
    pub train: Dataset,
    pub test: Dataset,
    pub truth: Option<TrueParameters>,
}

pub fn prepare_data(config: &ExperimentConfig) -> Result<ExperimentData> {
    let structure = config.structure.build()?;
    match &config.data {
        DataConfig::Synthetic { n_train, n_test, dgp } => {
            let seed = derive_seed(config.seed, Purpose::Dgp, 0);
            let truth = draw_parameters(&structure, dgp, seed)?;
            let train = simulate_dataset(&structure, &truth, *n_train, seed, 1)?;
            let test = simulate_dataset(&structure, &truth, *n_test, seed, 2)?;
            Ok(ExperimentData { structure, train, test, truth: Some(truth) })
        }
        DataConfig::Csv { path, train_fraction } => {
            let data = io::load_csv(path, &structure)?;
            let (tr, te) = train_test_split(data.len(), *train_fraction, derive_seed(config.seed, Purpose::Split, 0))?;
            Ok(ExperimentData { structure, train: data.subset(&tr), test: data.subset(&te), truth: None })
        }
    }
}

/// A fitted estimator.
#[derive(Clone, Debug)]
pub enum Fitted {
    Vb(Box<VbFit>),
    Mcmc(Box<McmcChain>),
    Naive,
    Oracle,
}

/// Everything an experiment produced, for programmatic use.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub manifest: RunManifest,
    pub data: ExperimentData,
    pub fits: BTreeMap<String, Fitted>,
    /// `(in-sample, out-of-sample)` scores per estimator.
    pub scores: BTreeMap<String, (Scores, Scores)>,
    pub comparisons: Vec<Comparison>,
    /// Estimation wall-clock seconds per estimator (VB excludes its diagnostic).
    pub fit_seconds: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub config: ExperimentConfig,
    /// Component seeds derived from the master seed.
    pub seeds: BTreeMap<String, u64>,
    pub timings: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.path(name), value)?;
        self.record(name);
        Ok(())
    }

    fn table(&mut self, name: &str, header: Vec<String>, rows: &[Vec<String>]) -> Result<()> {
        io::write_table(&self.path(name), &header, rows)?;
        self.record(name);
        Ok(())
    }

    fn cleanup(&self) {
        for name in &self.written {
            let _ = std::fs::remove_file(self.path(name));
        }
    }
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// Runs an experiment, writing outputs to `out_dir`. On failure the files
/// written so far are removed.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| MvmnpError::io(out_dir, e))?;
    let mut out = Outputs { dir: out_dir.to_path_buf(), written: Vec::new() };
    match run_inner(config, &mut out) {
        Ok(o) => Ok(o),
        Err(e) => {
            out.cleanup();
            Err(e)
        }
    }
}

fn run_inner(config: &ExperimentConfig, out: &mut Outputs) -> Result<ExperimentOutcome> {
    let mut timings = BTreeMap::new();
    let mut seeds = BTreeMap::new();
    let seed = config.seed;

    let started = Instant::now();
    let data = prepare_data(config)?;
    let s = data.structure.clone();
    io::write_csv(&out.path("train.csv"), &data.train, &s)?;
    out.record("train.csv");
    io::write_csv(&out.path("test.csv"), &data.test, &s)?;
    out.record("test.csv");
    if let Some(t) = &data.truth {
        out.json("truth.json", t)?;
    }
    timings.insert("data".to_string(), started.elapsed().as_secs_f64());

    let needs_prior = config.estimators.iter().any(|e| matches!(e, EstimatorSpec::Vb { .. } | EstimatorSpec::Mcmc));
    let prior = if needs_prior {
        let started = Instant::now();
        let cal = CalibrationConfig { seed: derive_seed(seed, Purpose::PsiPrior, 0), ..config.calibration };
        seeds.insert("calibration".to_string(), cal.seed);
        let p = calibrate_prior(&s, &cal)?;
        out.json("prior.json", &p)?;
        timings.insert("calibration".to_string(), started.elapsed().as_secs_f64());
        Some(p)
    } else {
        None
    };

    let train_design = build_design(&data.train, &s)?;
    let test_design = build_design(&data.test, &s)?;
    let pred_seed = derive_seed(seed, Purpose::Predictive, 0);
    let param_seed = derive_seed(seed, Purpose::PredictiveParams, 0);
    seeds.insert("predictive".to_string(), pred_seed);
    seeds.insert("predictive_params".to_string(), param_seed);
    let profile = CovariateProfile::mean(&data.train)?;

    let mut fits = BTreeMap::new();
    let mut scores = BTreeMap::new();
    let mut fit_seconds = BTreeMap::new();
    let mut curves: Vec<PriceCurve> = Vec::new();
    let mut summaries: Vec<PosteriorSummary> = Vec::new();

    for (idx, spec) in config.estimators.iter().enumerate() {
        let label = spec.label();
        let started = Instant::now();
        let fitted = fit_estimator(config, spec, idx, &s, &data.train, data.truth.as_ref(), prior.as_ref())?;
        if let Some(sd) = fitted.seed {
            seeds.insert(label.clone(), sd);
        }
        let (fitted, source, secs) = (fitted.fitted, fitted.source, fitted.seconds);
        let wall = started.elapsed().as_secs_f64();
        timings.insert(format!("fit_{label}"), wall);
        fit_seconds.insert(label.clone(), secs);

        let started = Instant::now();
        match &fitted {
            Fitted::Vb(fit) => {
                out.json(&format!("lambda_{label}.json"), fit.as_ref())?;
                let kc = s.num_choices();
                let mut header = vec!["iteration".to_string()];
                header.extend((1..=kc).map(|k| format!("hit_rate_{k}")));
                let rows: Vec<Vec<String>> = fit
                    .trajectory
                    .iter()
                    .map(|p| std::iter::once(p.iteration.to_string()).chain(p.hit_rate.iter().map(|v| fmt(*v))).collect())
                    .collect();
                out.table(&format!("trajectory_{label}.csv"), header, &rows)?;
                if !fit.identity {
                    let ps = derive_seed(seed, Purpose::Posterior, idx as u64);
                    summaries.push(PosteriorSummary::from_vb(fit, config.posterior_draws, ps)?);
                }
            }
            Fitted::Mcmc(chain) => {
                let mut buf = Vec::new();
                io::write_chain(chain, &mut buf)?;
                io::write_atomic(&out.path("chain.csv"), &buf)?;
                out.record("chain.csv");
                out.json(
                    "chain_summary.json",
                    &serde_json::json!({
                        "config": chain.config,
                        "stored_draws": chain.len(),
                        "acceptance": chain.acceptance,
                        "mean_acceptance": chain.mean_acceptance(),
                        "proposal_scales": chain.scales,
                    }),
                )?;
                summaries.push(PosteriorSummary::from_chain(&label, chain)?);
            }
            _ => {}
        }

        let (ins, outs) = match &source {
            Some(src) => (
                predict(src, &train_design, config.predictive_draws, pred_seed),
                predict(src, &test_design, config.predictive_draws, pred_seed),
            ),
            None => (
                naive_forecast(&s, &data.train, data.train.len())?,
                naive_forecast(&s, &data.train, data.test.len())?,
            ),
        };
        scores.insert(label.clone(), (ins.score(&data.train)?, outs.score(&data.test)?));
        write_pmfs(out, &format!("predictive_{label}.csv"), &outs)?;

        if let (Some(c), Some(src)) = (&config.curves, &source) {
            curves.push(price_response_curve(
                src,
                &profile,
                c.choice,
                c.category,
                c.covariate,
                &c.grid(),
                config.predictive_draws,
                pred_seed,
            )?);
        }
        timings.insert(format!("predict_{label}"), started.elapsed().as_secs_f64());
        fits.insert(label, fitted);
    }

    write_scores(out, config, &s, &scores)?;
    if !curves.is_empty() {
        write_curves(out, &curves)?;
    }
    let comparisons = compare_all(&summaries)?;
    if !comparisons.is_empty() {
        write_comparisons(out, &comparisons)?;
    }

    let mut files = Vec::new();
    for name in &out.written {
        let path = out.path(name);
        let bytes = std::fs::metadata(&path).map_err(|e| MvmnpError::io(&path, e))?.len();
        files.push(FileEntry { name: name.clone(), bytes, sha256: io::sha256_file(&path)? });
    }
    let manifest = RunManifest {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seeds,
        timings,
        files,
    };
    io::write_json(&out.path("manifest.json"), &manifest)?;
    Ok(ExperimentOutcome { manifest, data, fits, scores, comparisons, fit_seconds })
}

/// A fitted estimator with its predictive parameter source.
pub struct EstimatorFit {
    pub fitted: Fitted,
    /// `None` for the naive forecast, which has no parameters.
    pub source: Option<ParamSource>,
    /// Estimation seconds (VB excludes its diagnostic).
    pub seconds: f64,
    pub seed: Option<u64>,
}

/// Fits estimator number `idx` of an experiment on `train`. Seeds derive
/// from the master seed and `idx`.
pub fn fit_estimator(
    config: &ExperimentConfig,
    spec: &EstimatorSpec,
    idx: usize,
    structure: &ChoiceStructure,
    train: &Dataset,
    truth: Option<&TrueParameters>,
    prior: Option<&Prior>,
) -> Result<EstimatorFit> {
    let s = structure;
    let label = spec.label();
    let param_seed = derive_seed(config.seed, Purpose::PredictiveParams, 0);
    let m = config.predictive_draws;
    let need_prior = || prior.ok_or_else(|| MvmnpError::Config(format!("`{label}` needs a calibrated prior")));
    match spec {
        EstimatorSpec::Vb { fraction, iterations } => {
            let seed = derive_seed(config.seed, Purpose::VariationalInit, idx as u64);
            let cfg = SgaConfig {
                subsample_fraction: *fraction,
                iterations: iterations.unwrap_or(config.vb.iterations),
                seed,
                ..config.vb.clone()
            };
            let mut fit = run_vb(train, s, need_prior()?, &cfg)?;
            fit.label = label.clone();
            let source = Some(fit.source(m, param_seed)?);
            let seconds = fit.timing.fit_seconds;
            Ok(EstimatorFit { fitted: Fitted::Vb(Box::new(fit)), source, seconds, seed: Some(seed) })
        }
        EstimatorSpec::VbIdentity => {
            let seed = derive_seed(config.seed, Purpose::VariationalInit, idx as u64);
            let cfg = SgaConfig { seed, ..config.vb.clone() };
            let fit = run_vb_identity(train, s, &cfg)?;
            let source = Some(fit.source(m, param_seed)?);
            let seconds = fit.timing.fit_seconds;
            Ok(EstimatorFit { fitted: Fitted::Vb(Box::new(fit)), source, seconds, seed: Some(seed) })
        }
        EstimatorSpec::Mcmc => {
            let seed = derive_seed(config.seed, Purpose::Kappa, idx as u64);
            let cfg = McmcConfig { seed, ..config.mcmc.clone() };
            let chain = run_mcmc(train, s, need_prior()?, &cfg)?;
            let source = Some(chain.source(&label)?);
            let seconds = chain.seconds;
            Ok(EstimatorFit { fitted: Fitted::Mcmc(Box::new(chain)), source, seconds, seed: Some(seed) })
        }
        EstimatorSpec::Naive => Ok(EstimatorFit { fitted: Fitted::Naive, source: None, seconds: 0.0, seed: None }),
        EstimatorSpec::Oracle => {
            let truth = truth.ok_or_else(|| MvmnpError::Config("the oracle needs synthetic data".into()))?;
            let source = Some(ParamSource::fixed("oracle", s, &truth.beta, &truth.sigma)?);
            Ok(EstimatorFit { fitted: Fitted::Oracle, source, seconds: 0.0, seed: None })
        }
    }
}

/// Compares every summarized fit with the MCMC fit, if there is one.
fn compare_all(summaries: &[PosteriorSummary]) -> Result<Vec<Comparison>> {
    let Some(reference) = summaries.iter().find(|p| p.label == "mcmc") else {
        return Ok(Vec::new());
    };
    summaries
        .iter()
        .filter(|p| p.label != "mcmc")
        .map(|p| compare_posteriors(p, reference))
        .collect()
}

fn write_pmfs(out: &mut Outputs, name: &str, summary: &PredictiveSummary) -> Result<()> {
    let s = &summary.structure;
    let mut header = vec!["obs".to_string()];
    for k in 0..s.num_choices() {
        header.extend((0..=s.alternatives(k)).map(|j| format!("p{}_{j}", k + 1)));
    }
    let rows: Vec<Vec<String>> = (0..summary.len())
        .map(|i| {
            std::iter::once((i + 1).to_string())
                .chain(summary.marginals(i).into_iter().flatten().map(fmt))
                .collect()
        })
        .collect();
    out.table(name, header, &rows)
}

/// Rows are sample × metric × choice; columns are estimators.
fn write_scores(
    out: &mut Outputs,
    config: &ExperimentConfig,
    s: &ChoiceStructure,
    scores: &BTreeMap<String, (Scores, Scores)>,
) -> Result<()> {
    let labels: Vec<String> = config.estimators.iter().map(|e| e.label()).collect();
    let mut header = vec!["sample".to_string(), "metric".to_string(), "choice".to_string()];
    header.extend(labels.iter().cloned());
    let mut rows = Vec::new();
    for (sample, pick) in [("in", 0), ("out", 1)] {
        for metric in ["log_score", "hit_rate", "floored"] {
            for k in 0..s.num_choices() {
                let mut row = vec![sample.to_string(), metric.to_string(), (k + 1).to_string()];
                for l in &labels {
                    let (a, b) = &scores[l];
                    let sc = if pick == 0 { a } else { b };
                    row.push(match metric {
                        "log_score" => fmt(sc.log_score[k]),
                        "hit_rate" => fmt(sc.hit_rate[k]),
                        _ => sc.floored[k].to_string(),
                    });
                }
                rows.push(row);
            }
        }
    }
    out.table("scores.csv", header, &rows)
}

fn write_curves(out: &mut Outputs, curves: &[PriceCurve]) -> Result<()> {
    let header: Vec<String> =
        ["source", "choice", "varied_category", "covariate", "price", "category", "probability"].map(String::from).into();
    let mut rows = Vec::new();
    for c in curves {
        for (g, price) in c.grid.iter().enumerate() {
            for (cat, p) in c.probabilities[g].iter().enumerate() {
                rows.push(vec![
                    c.source.clone(),
                    (c.choice + 1).to_string(),
                    c.category.to_string(),
                    (c.covariate + 1).to_string(),
                    fmt(*price),
                    cat.to_string(),
                    fmt(*p),
                ]);
            }
        }
    }
    out.table("curves.csv", header, &rows)
}

fn write_comparisons(out: &mut Outputs, comparisons: &[Comparison]) -> Result<()> {
    let header: Vec<String> =
        ["a", "b", "block", "index", "mean_a", "mean_b", "sd_a", "sd_b"].map(String::from).into();
    let mut rows = Vec::new();
    for c in comparisons {
        for r in &c.rows {
            rows.push(vec![
                c.label_a.clone(),
                c.label_b.clone(),
                r.block.clone(),
                (r.index + 1).to_string(),
                fmt(r.a.mean),
                fmt(r.b.mean),
                fmt(r.a.sd),
                fmt(r.b.sd),
            ]);
        }
    }
    out.table("posterior_compare.csv", header, &rows)?;
    let header: Vec<String> =
        ["a", "b", "block", "correlation", "max_abs_deviation", "mean_sd_ratio"].map(String::from).into();
    let rows: Vec<Vec<String>> = comparisons
        .iter()
        .flat_map(|c| {
            c.blocks.iter().map(move |b| {
                vec![
                    c.label_a.clone(),
                    c.label_b.clone(),
                    b.block.clone(),
                    fmt(b.correlation),
                    fmt(b.max_abs_deviation),
                    fmt(b.mean_sd_ratio),
                ]
            })
        })
        .collect();
    out.table("posterior_compare_summary.csv", header, &rows)
}
