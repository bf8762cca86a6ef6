//! Command-line front end: fit, simulate, summarize.
//!
//! Exit codes: 1 configuration error, 2 data error, 3 sampler failure.

use clap::{Args, Parser, Subcommand};
use qjoint::config::{Mode, RunConfig};
use qjoint::diagnostics::emit_figure_data;
use qjoint::joint::{run_chain_with, run_quantile_battery, FitMode, PosteriorSample};
use qjoint::output;
use qjoint::simulate::{simulate, SimScenario};
use qjoint::{Error, Result};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "qjoint", version, about = "Bayesian joint quantile/survival modelling")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model to longitudinal (and survival) CSV data.
    Fit(FitArgs),
    /// Generate a synthetic joint dataset.
    Simulate(SimArgs),
    /// Print a posterior summary table for a samples.csv file.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct FitArgs {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// long-quantile | mean-joint | quantile-joint
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    longitudinal: Option<PathBuf>,
    #[arg(long)]
    survival: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated quantile levels, e.g. 0.1,0.5,0.9
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chain_length: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    grid_k: Option<usize>,
    /// Worker threads (0 = library default).
    #[arg(long)]
    jobs: Option<usize>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SimArgs {
    /// TOML run configuration carrying a [scenario] table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario name: default | quantile-flip.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Path to a samples.csv written by fit.
    samples: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => 1,
        Error::Data(_) | Error::Csv(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Fit(args) => cmd_fit(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Summarize(args) => cmd_summarize(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(mode) = &args.mode {
        cfg.mode = mode.parse()?;
    }
    if let Some(p) = args.longitudinal {
        cfg.longitudinal_csv = Some(p);
    }
    if let Some(p) = args.survival {
        cfg.survival_csv = Some(p);
    }
    if let Some(p) = args.out {
        cfg.output_dir = p;
    }
    if let Some(tau) = args.tau {
        cfg.model.tau_levels = tau;
    }
    if let Some(v) = args.seed {
        cfg.model.mcmc.seed = v;
    }
    if let Some(v) = args.chain_length {
        cfg.model.mcmc.chain_length = v;
    }
    if let Some(v) = args.burn_in {
        cfg.model.mcmc.burn_in = v;
    }
    if let Some(v) = args.thin {
        cfg.model.mcmc.thin = v;
    }
    if let Some(v) = args.grid_k {
        cfg.model.grid_k = v;
    }
    if let Some(v) = args.jobs {
        cfg.jobs = v;
    }
    if cfg.mode == Mode::Simulate {
        return Err(Error::Config(
            "fit cannot run in simulate mode; use the simulate subcommand".into(),
        ));
    }
    cfg.validate()?;
    init_pool(cfg.jobs);

    let data = cfg.load_dataset()?;
    let quiet = args.quiet;
    let progress = move |done: usize, total: usize| {
        if !quiet {
            eprintln!("iteration {done}/{total}");
        }
    };

    let samples: Vec<PosteriorSample> = match cfg.mode {
        Mode::MeanJoint => {
            vec![run_chain_with(
                &data,
                &cfg.model,
                FitMode::MeanJoint,
                cfg.model.mcmc.seed,
                Some(&progress),
            )?]
        }
        Mode::LongQuantile => run_quantile_battery(&data, &cfg.model, false)?,
        Mode::QuantileJoint => run_quantile_battery(&data, &cfg.model, true)?,
        Mode::Simulate => unreachable!(),
    };

    std::fs::create_dir_all(&cfg.output_dir)?;
    for sample in &samples {
        let dir = output::write_chain(&cfg.output_dir, sample)?;
        if !quiet {
            eprintln!("wrote {}", dir.display());
        }
    }
    if cfg.mode.is_joint() {
        let rows = emit_figure_data(&samples, "alpha");
        if !rows.is_empty() {
            output::write_figure_csv(&cfg.output_dir.join("figure-alpha.csv"), &rows)?;
        }
    }
    output::write_run_manifest(
        &cfg.output_dir,
        cfg.mode.as_str(),
        &cfg.hash(),
        cfg.model.mcmc.seed,
        samples.len(),
    )?;
    Ok(())
}

fn cmd_simulate(args: SimArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(name) = &args.scenario {
        match name.as_str() {
            "default" => cfg.scenario = SimScenario::default(),
            "quantile-flip" => cfg.scenario = SimScenario::quantile_flip(),
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario {other:?}; available: default, quantile-flip"
                )))
            }
        }
    }
    if let Some(seed) = args.seed {
        cfg.model.mcmc.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    cfg.scenario.validate()?;

    let seed = cfg.model.mcmc.seed;
    let (data, truth) = simulate(&cfg.scenario, seed)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    qjoint::model::write_longitudinal_csv(
        &cfg.output_dir.join("longitudinal.csv"),
        &data.covariate_names,
        &data.longitudinal,
    )?;
    qjoint::model::write_survival_csv(&cfg.output_dir.join("survival.csv"), &data.survival)?;
    let truth_json = serde_json::to_string_pretty(&truth)
        .map_err(|e| Error::Data(format!("truth serialization: {e}")))?;
    std::fs::write(cfg.output_dir.join("truth.json"), truth_json)?;
    output::write_run_manifest(
        &cfg.output_dir,
        "simulate",
        &cfg.scenario.hash(),
        seed,
        0,
    )?;
    eprintln!(
        "simulated {} subjects, {} records -> {}",
        data.n_subjects(),
        data.longitudinal.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<()> {
    let sample = output::read_samples_csv(&args.samples)?;
    let summary = qjoint::diagnostics::summarize(&sample);
    println!(
        "{:<24} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8}  {}",
        "parameter", "mean", "sd", "2.5%", "50%", "97.5%", "ess", "signif"
    );
    for (name, s) in &summary.parameters {
        println!(
            "{:<24} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8.1}  {}",
            name,
            s.mean,
            s.sd,
            s.quantiles[0],
            s.quantiles[2],
            s.quantiles[4],
            s.ess,
            if s.significant { "*" } else { "" }
        );
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn init_pool(jobs: usize) {
    if jobs > 0 {
        // best effort: a later global-pool init failure only means the
        // default thread count stays in effect
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_pool(_jobs: usize) {}
