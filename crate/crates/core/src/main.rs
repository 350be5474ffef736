//! Command-line interface: dataset generation, linear solving, network
//! training, KKT certification, error evaluation, and experiment batches.
//!
//! Exit codes: 0 success, 2 validation/config error, 3 infeasibility or
//! training failure, 1 other errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use marginlab::data_gen::Dataset;
use marginlab::error::Error;
use marginlab::eval::{test_error_mc, Predictor};
use marginlab::harness::{
    records_to_csv, run_experiment, sweep, sweep_to_csv, DistConfig, ExperimentConfig, ModelConfig,
    TrainSection,
};
use marginlab::leaky::{
    effective_linear_direction, extract_net_kkt, init_network, rescale_to_unit_margin,
    train_to_margin, KktCertificate, NetCheckpoint,
};
use marginlab::maxmargin::{solve_max_margin, verify_linear_kkt, KktReport, MarginSolution};

#[derive(Parser)]
#[command(
    name = "marginlab",
    about = "Max-margin interpolation laboratory: generators, solvers, certificates, experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a distribution config and write the binary form.
    Gen(GenArgs),
    /// Solve the hard-margin linear problem for a dataset file.
    SolveLinear(SolveArgs),
    /// Train a leaky network on a dataset file and write a checkpoint.
    TrainNet(TrainArgs),
    /// Extract a KKT certificate from a checkpoint on its dataset.
    Certify(CertifyArgs),
    /// Estimate the test error of a stored predictor under a distribution.
    Eval(EvalArgs),
    /// Run a full experiment config (all seeds) and emit records.
    Run(RunArgs),
    /// Sweep one numeric axis of an experiment config.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenArgs {
    /// TOML file with `n` and a [distribution] table.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also export a CSV copy (binary is always written).
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
}

#[derive(Args)]
struct SolveArgs {
    /// Dataset file produced by `gen`.
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
}

#[derive(Args)]
struct TrainArgs {
    data: PathBuf,
    /// TOML file with [model] (leaky_net) and optional [training] tables.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Seed for weight initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CertifyArgs {
    data: PathBuf,
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    kink_tol: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// Stored predictor: a solve-linear solution or a train-net checkpoint.
    predictor: PathBuf,
    /// TOML file with a [distribution] table (n is ignored).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    n_test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.99)]
    ci_level: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment TOML config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Name of the numeric field to sweep (n, d, eta, rho, mu_norm, m, gamma).
    #[arg(long)]
    axis: String,
    /// Comma-separated numeric values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

/// Config for `gen`: sample size plus the distribution.
#[derive(Serialize, Deserialize)]
struct GenConfig {
    n: usize,
    distribution: DistConfig,
}

/// Config for `train-net`: model plus optional training schedule.
#[derive(Serialize, Deserialize)]
struct TrainNetConfig {
    model: ModelConfig,
    #[serde(default)]
    training: TrainSection,
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    solution: &'a MarginSolution,
    kkt_report: &'a KktReport,
}

#[derive(Serialize)]
struct CertificateFile<'a> {
    certificate: &'a KktCertificate,
    effective_direction: &'a [f64],
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string(value).map_err(|e| Error::Serde(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen(args) => {
            let cfg: GenConfig = read_toml(&args.config)?;
            let spec = cfg.distribution.build()?;
            let data = spec.sample(cfg.n, args.seed)?;
            ensure_dir(&args.out)?;
            let base = args.out.join(format!("dataset_{}", args.seed));
            data.write_binary(&base.with_extension("mld"))?;
            if matches!(args.format, OutputFormat::Csv) {
                let mut buf = Vec::new();
                data.write_csv(&mut buf)?;
                fs::write(base.with_extension("csv"), buf)?;
            }
            println!("wrote {}", base.with_extension("mld").display());
            Ok(())
        }
        Command::SolveLinear(args) => {
            let data = Dataset::read_binary(&args.data)?;
            let sol = solve_max_margin(&data, args.tol, args.max_iter)?;
            let report = verify_linear_kkt(&sol, &data, args.tol.max(1e-6))?;
            ensure_dir(&args.out)?;
            let path = args.out.join("solution.json");
            write_json(
                &path,
                &SolutionFile {
                    solution: &sol,
                    kkt_report: &report,
                },
            )?;
            println!(
                "wrote {} (objective {:.6e}, kkt passes: {})",
                path.display(),
                sol.objective,
                report.passes
            );
            Ok(())
        }
        Command::TrainNet(args) => {
            let data = Dataset::read_binary(&args.data)?;
            let cfg: TrainNetConfig = read_toml(&args.config)?;
            let ModelConfig::LeakyNet { m, gamma, scale } = cfg.model else {
                return Err(Error::validation("train-net needs a leaky_net model"));
            };
            let params = init_network(m, data.d, gamma, scale, args.seed)?;
            let (trained, trace) =
                train_to_margin(&params, &data, &cfg.training.to_train_config())?;
            ensure_dir(&args.out)?;
            let path = args.out.join("checkpoint.json");
            write_json(
                &path,
                &NetCheckpoint {
                    params: trained,
                    trace,
                },
            )?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Certify(args) => {
            let data = Dataset::read_binary(&args.data)?;
            let text = fs::read_to_string(&args.checkpoint)?;
            let ckpt: NetCheckpoint =
                serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
            let unit = rescale_to_unit_margin(&ckpt.params, &data)?;
            let cert = extract_net_kkt(&unit, &data, args.kink_tol)?;
            let z = effective_linear_direction(&cert.lambda, &data, unit.gamma)?;
            ensure_dir(&args.out)?;
            let path = args.out.join("certificate.json");
            write_json(
                &path,
                &CertificateFile {
                    certificate: &cert,
                    effective_direction: &z,
                },
            )?;
            println!(
                "wrote {} (residual {:.3e}, passes: {})",
                path.display(),
                cert.stationarity_residual,
                cert.passes
            );
            Ok(())
        }
        Command::Eval(args) => {
            let cfg: GenConfig = read_toml(&args.config)?;
            let spec = cfg.distribution.build()?;
            let text = fs::read_to_string(&args.predictor)?;
            let predictor = parse_predictor(&text)?;
            let est = test_error_mc(&predictor, &spec, args.n_test, args.seed, args.ci_level)?;
            ensure_dir(&args.out)?;
            let path = args.out.join("estimate.json");
            write_json(&path, &est)?;
            println!(
                "wrote {} (error {:.4} in [{:.4}, {:.4}])",
                path.display(),
                est.point_estimate,
                est.ci_low,
                est.ci_high
            );
            Ok(())
        }
        Command::Run(args) => {
            let text = fs::read_to_string(&args.config)?;
            let cfg = ExperimentConfig::from_toml(&text)?;
            let records = run_experiment(&cfg)?;
            ensure_dir(&args.out)?;
            // provenance: the config travels with the records
            fs::write(args.out.join("config.toml"), cfg.to_toml()?)?;
            match args.format {
                OutputFormat::Csv => {
                    fs::write(args.out.join("records.csv"), records_to_csv(&records))?
                }
                OutputFormat::Json => write_json(&args.out.join("records.json"), &records)?,
            }
            let failures = records.iter().filter(|r| r.status != "ok").count();
            println!(
                "{} runs ({} failed) -> {}",
                records.len(),
                failures,
                args.out.display()
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let text = fs::read_to_string(&args.config)?;
            let cfg = ExperimentConfig::from_toml(&text)?;
            let rows = sweep(&cfg, &args.axis, &args.values)?;
            ensure_dir(&args.out)?;
            fs::write(args.out.join("config.toml"), cfg.to_toml()?)?;
            fs::write(args.out.join("sweep.csv"), sweep_to_csv(&rows))?;
            println!("{} sweep rows -> {}", rows.len(), args.out.display());
            Ok(())
        }
    }
}

/// Accept either a solve-linear solution file or a train-net checkpoint.
fn parse_predictor(text: &str) -> Result<Predictor, Error> {
    if let Ok(ckpt) = serde_json::from_str::<NetCheckpoint>(text) {
        return Ok(Predictor::Net {
            params: ckpt.params,
        });
    }
    #[derive(Deserialize)]
    struct SolutionIn {
        solution: MarginSolution,
    }
    if let Ok(f) = serde_json::from_str::<SolutionIn>(text) {
        return Ok(Predictor::Linear { w: f.solution.w });
    }
    if let Ok(sol) = serde_json::from_str::<MarginSolution>(text) {
        return Ok(Predictor::Linear { w: sol.w });
    }
    Err(Error::validation(
        "predictor file is neither a solution nor a checkpoint",
    ))
}
