use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mvmnp::dgp::{draw_parameters, simulate_dataset};
use mvmnp::experiment::{fit_estimator, run_experiment, CurveConfig, DataConfig, EstimatorSpec, ExperimentConfig, Fitted};
use mvmnp::io;
use mvmnp::model::{build_design, ChoiceStructure, Dataset};
use mvmnp::predictive::{naive_forecast, predict, price_response_curve, CovariateProfile, ParamSource};
use mvmnp::prior::{calibrate_prior, CalibrationConfig, Prior};
use mvmnp::rng::{derive_seed, Purpose};
use mvmnp::summary::{compare_posteriors, PosteriorSummary};
use mvmnp::vb::VbFit;

/// Multivariate multinomial probit estimation by variational Bayes and MCMC.
#[derive(Parser)]
#[command(name = "mvmnp", version)]
struct Cli {
    /// Experiment configuration (JSON). Defaults to the desk preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Quick,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Vb,
    VbIdentity,
    Mcmc,
}

#[derive(Subcommand)]
enum Command {
    /// Print a configuration preset as JSON.
    Config {
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
    },
    /// Simulate training and test sets from the synthetic process.
    Dgp,
    /// Calibrate the covariance prior and write prior.json.
    Calibrate,
    /// Fit one estimator to a training CSV.
    Fit {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        train: PathBuf,
        /// Calibrated prior; calibrated afresh if omitted.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Subsample fraction for VB.
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
    },
    /// Write per-choice predictive probabilities for a dataset.
    Predict {
        /// A lambda_*.json or chain.csv file.
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Log-scores and hit-rates of fits (or `naive`) on a dataset.
    Score {
        /// lambda_*.json, chain.csv or `naive`.
        #[arg(long, required = true, num_args = 1..)]
        fit: Vec<String>,
        #[arg(long)]
        data: PathBuf,
        /// Training data, needed by `naive`.
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Price-response curves at the mean covariate profile of a dataset.
    Curves {
        #[arg(long, required = true, num_args = 1..)]
        fit: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare the posterior moments of two fits.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Run a full experiment.
    Run,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let mut config = match &cli.config {
        Some(path) => io::read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::desk(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Config { preset } => {
            let mut c = match preset {
                Preset::Desk => ExperimentConfig::desk(),
                Preset::Quick => ExperimentConfig::quick(),
            };
            if let Some(seed) = cli.seed {
                c.seed = seed;
            }
            println!("{}", serde_json::to_string_pretty(&c)?);
        }
        Command::Dgp => dgp(&config, out)?,
        Command::Calibrate => {
            config.validate()?;
            let prior = calibrate(&config)?;
            write(out, "prior.json", |p| io::write_json(p, &prior))?;
        }
        Command::Fit { method, train, prior, fraction } => fit(&config, out, method, &train, prior.as_deref(), fraction)?,
        Command::Predict { fit, data } => {
            let s = config.structure.build()?;
            let data = io::load_csv(&data, &s)?;
            let source = load_source(&config, &s, &fit)?;
            let summary = predict(&source, &build_design(&data, &s)?, config.predictive_draws, predictive_seed(&config));
            let mut header = vec!["obs".to_string()];
            for k in 0..s.num_choices() {
                header.extend((0..=s.alternatives(k)).map(|j| format!("p{}_{j}", k + 1)));
            }
            let rows: Vec<Vec<String>> = (0..summary.len())
                .map(|i| {
                    std::iter::once((i + 1).to_string())
                        .chain(summary.marginals(i).into_iter().flatten().map(|v| v.to_string()))
                        .collect()
                })
                .collect();
            write(out, &format!("predictive_{}.csv", source.label), |p| io::write_table(p, &header, &rows))?;
        }
        Command::Score { fit, data, train } => score(&config, out, &fit, &data, train.as_deref())?,
        Command::Curves { fit, data } => curves(&config, out, &fit, &data)?,
        Command::Compare { a, b } => {
            let s = config.structure.build()?;
            let pa = load_summary(&config, &s, &a)?;
            let pb = load_summary(&config, &s, &b)?;
            let c = compare_posteriors(&pa, &pb)?;
            let header: Vec<String> =
                ["block", "index", "mean_a", "mean_b", "sd_a", "sd_b"].map(String::from).into();
            let rows: Vec<Vec<String>> = c
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.block.clone(),
                        (r.index + 1).to_string(),
                        r.a.mean.to_string(),
                        r.b.mean.to_string(),
                        r.a.sd.to_string(),
                        r.b.sd.to_string(),
                    ]
                })
                .collect();
            write(out, "posterior_compare.csv", |p| io::write_table(p, &header, &rows))?;
            for b in &c.blocks {
                println!(
                    "{:12} correlation {:.4}  max |dev| {:.4}  mean sd ratio {:.3}",
                    b.block, b.correlation, b.max_abs_deviation, b.mean_sd_ratio
                );
            }
        }
        Command::Run => {
            let outcome = run_experiment(&config, out)?;
            for (label, (_, o)) in &outcome.scores {
                println!("{label:12} out-of-sample log-score {:?} hit-rate {:?}", o.log_score, o.hit_rate);
            }
            println!("manifest written to {}", out.join("manifest.json").display());
        }
    }
    Ok(())
}

fn write(out: &Path, name: &str, f: impl FnOnce(&Path) -> mvmnp::Result<()>) -> Result<()> {
    let path = out.join(name);
    f(&path).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn predictive_seed(config: &ExperimentConfig) -> u64 {
    derive_seed(config.seed, Purpose::Predictive, 0)
}

fn calibrate(config: &ExperimentConfig) -> Result<Prior> {
    let s = config.structure.build()?;
    let cal = CalibrationConfig { seed: derive_seed(config.seed, Purpose::PsiPrior, 0), ..config.calibration };
    Ok(calibrate_prior(&s, &cal)?)
}

fn dgp(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let DataConfig::Synthetic { n_train, n_test, dgp } = &config.data else {
        bail!("the configuration does not describe synthetic data");
    };
    let s = config.structure.build()?;
    let seed = derive_seed(config.seed, Purpose::Dgp, 0);
    let truth = draw_parameters(&s, dgp, seed)?;
    let train = simulate_dataset(&s, &truth, *n_train, seed, 1)?;
    let test = simulate_dataset(&s, &truth, *n_test, seed, 2)?;
    write(out, "train.csv", |p| io::write_csv(p, &train, &s))?;
    write(out, "test.csv", |p| io::write_csv(p, &test, &s))?;
    write(out, "truth.json", |p| io::write_json(p, &truth))
}

fn fit(config: &ExperimentConfig, out: &Path, method: Method, train: &Path, prior: Option<&Path>, fraction: f64) -> Result<()> {
    config.validate()?;
    let s = config.structure.build()?;
    let data = io::load_csv(train, &s)?;
    let spec = match method {
        Method::Vb => EstimatorSpec::Vb { fraction, iterations: None },
        Method::VbIdentity => EstimatorSpec::VbIdentity,
        Method::Mcmc => EstimatorSpec::Mcmc,
    };
    let prior = match (&spec, prior) {
        (EstimatorSpec::VbIdentity, _) => None,
        (_, Some(p)) => Some(io::read_json::<Prior>(p)?),
        (_, None) => Some(calibrate(config)?),
    };
    let fitted = fit_estimator(config, &spec, 0, &s, &data, None, prior.as_ref())?;
    match fitted.fitted {
        Fitted::Vb(fit) => {
            write(out, &format!("lambda_{}.json", fit.label), |p| io::write_json(p, fit.as_ref()))?;
        }
        Fitted::Mcmc(chain) => {
            write(out, "chain.csv", |p| {
                let mut buf = Vec::new();
                io::write_chain(&chain, &mut buf)?;
                io::write_atomic(p, &buf)
            })?;
            println!("mean acceptance {:.3}", chain.mean_acceptance());
        }
        _ => unreachable!("fit only runs parametric estimators"),
    }
    println!("estimation took {:.1}s", fitted.seconds);
    Ok(())
}

enum LoadedFit {
    Vb(Box<VbFit>),
    Chain(Vec<Vec<f64>>),
}

fn load_fit(s: &ChoiceStructure, path: &Path) -> Result<LoadedFit> {
    if path.extension().is_some_and(|e| e == "json") {
        let fit: VbFit = io::read_json(path)?;
        if fit.structure != *s {
            bail!("{} was fitted with a different choice structure", path.display());
        }
        Ok(LoadedFit::Vb(Box::new(fit)))
    } else {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(LoadedFit::Chain(io::read_chain(std::io::BufReader::new(file), s)?))
    }
}

fn label_of(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_prefix("lambda_").map(String::from).unwrap_or(if stem == "chain" { "mcmc".into() } else { stem })
}

fn load_source(config: &ExperimentConfig, s: &ChoiceStructure, path: &Path) -> Result<ParamSource> {
    let seed = derive_seed(config.seed, Purpose::PredictiveParams, 0);
    Ok(match load_fit(s, path)? {
        LoadedFit::Vb(fit) => fit.source(config.predictive_draws, seed)?,
        LoadedFit::Chain(thetas) => ParamSource::from_thetas(&label_of(path), s, &thetas)?,
    })
}

fn load_summary(config: &ExperimentConfig, s: &ChoiceStructure, path: &Path) -> Result<PosteriorSummary> {
    Ok(match load_fit(s, path)? {
        LoadedFit::Vb(fit) => {
            PosteriorSummary::from_vb(&fit, config.posterior_draws, derive_seed(config.seed, Purpose::Posterior, 0))?
        }
        LoadedFit::Chain(thetas) => PosteriorSummary::from_thetas(&label_of(path), s, &thetas)?,
    })
}

fn score(config: &ExperimentConfig, out: &Path, fits: &[String], data: &Path, train: Option<&Path>) -> Result<()> {
    let s = config.structure.build()?;
    let data = io::load_csv(data, &s)?;
    let design = build_design(&data, &s)?;
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    for f in fits {
        let summary = if f == "naive" {
            let Some(train) = train else { bail!("`naive` needs --train") };
            labels.push("naive".to_string());
            naive_forecast(&s, &io::load_csv(train, &s)?, data.len())?
        } else {
            let source = load_source(config, &s, Path::new(f))?;
            labels.push(source.label.clone());
            predict(&source, &design, config.predictive_draws, predictive_seed(config))
        };
        scores.push(summary.score(&data)?);
    }
    let mut header = vec!["metric".to_string(), "choice".to_string()];
    header.extend(labels.iter().cloned());
    let mut rows = Vec::new();
    for metric in ["log_score", "hit_rate"] {
        for k in 0..s.num_choices() {
            let mut row = vec![metric.to_string(), (k + 1).to_string()];
            for sc in &scores {
                row.push(if metric == "log_score" { sc.log_score[k] } else { sc.hit_rate[k] }.to_string());
            }
            println!("{}", row.join("  "));
            rows.push(row);
        }
    }
    write(out, "scores.csv", |p| io::write_table(p, &header, &rows))
}

fn curves(config: &ExperimentConfig, out: &Path, fits: &[PathBuf], data: &Path) -> Result<()> {
    let s = config.structure.build()?;
    let data: Dataset = io::load_csv(data, &s)?;
    let c: CurveConfig = config.curves.clone().context("the configuration has no `curves` section")?;
    let profile = CovariateProfile::mean(&data)?;
    let header: Vec<String> =
        ["source", "choice", "varied_category", "covariate", "price", "category", "probability"].map(String::from).into();
    let mut rows = Vec::new();
    for f in fits {
        let source = load_source(config, &s, f)?;
        let curve = price_response_curve(
            &source,
            &profile,
            c.choice,
            c.category,
            c.covariate,
            &c.grid(),
            config.predictive_draws,
            predictive_seed(config),
        )?;
        for (g, price) in curve.grid.iter().enumerate() {
            for (cat, p) in curve.probabilities[g].iter().enumerate() {
                rows.push(vec![
                    curve.source.clone(),
                    (c.choice + 1).to_string(),
                    c.category.to_string(),
                    (c.covariate + 1).to_string(),
                    price.to_string(),
                    cat.to_string(),
                    p.to_string(),
                ]);
            }
        }
    }
    write(out, "curves.csv", |p| io::write_table(p, &header, &rows))
}
