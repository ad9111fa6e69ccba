//! Command-line front door for the volsamp library.
//!
//! Machine-readable results (JSON, CSV) go to standard output or `--out`;
//! diagnostics go to standard error. Exit codes: 0 success, 1 check
//! failure, 2 input error, 3 sampler or runtime error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use volsamp::error::Error;
use volsamp::estimators::{rescaled_estimator, subset_estimator};
use volsamp::experiments::{
    aggregate, expand_monomials, load_matrix, load_problem, lower_bound_instance, run_loss_curves,
    solve_gamma_for_loss, write_records_csv, write_summary_csv, ExperimentConfig, InputFormat,
    Method,
};
use volsamp::linalg::{leverage_scores, Matrix};
use volsamp::rng::RngState;
use volsamp::sampling::{
    leverage_iid_sample, leveraged_volume_sample, volume_sample, FastLeveragedSampler,
    FastSamplerOptions, SampleSequence,
};
use volsamp::verify::{run_suite, CheckReport, Suite};
use volsamp::Result;

const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_INPUT_ERROR: u8 = 2;
const EXIT_RUNTIME_ERROR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "volsamp",
    version,
    about = "Volume sampling and relatives for subsampled least squares"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw row indices (and weights where applicable) from a matrix file.
    Sample(SampleArgs),
    /// Fit a subsampled least-squares estimator and report its loss.
    Estimate(EstimateArgs),
    /// Run the library's self-checks and report pass/fail per check.
    Verify(VerifyArgs),
    /// Run a loss-curve experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Reproduce the worst-case bound for unweighted subsampling.
    Lowerbound(LowerboundArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Matrix file (dense rows, or sparse label idx:val lines).
    matrix: PathBuf,
    /// volume | leverage-iid | leveraged-volume | fast-leveraged-volume
    #[arg(long)]
    method: String,
    #[arg(long)]
    k: usize,
    /// Defaults to $VOLSAMP_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// auto | dense | libsvm
    #[arg(long, default_value = "auto")]
    format: String,
    /// Sketch accuracy for fast-leveraged-volume; 0 uses the exact Gram.
    #[arg(long, default_value_t = 0.0)]
    fast_epsilon: f64,
    /// Write JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Regression file (sparse label idx:val lines, or dense rows with the
    /// response in the first column).
    data: PathBuf,
    #[arg(long)]
    method: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "auto")]
    format: String,
    /// Prepend a constant-1 feature column.
    #[arg(long)]
    intercept: bool,
    /// Expand features to all degree-2 monomials.
    #[arg(long)]
    expand_monomials: bool,
    #[arg(long, default_value_t = 0.0)]
    fast_epsilon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// identities | statistical | all
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the statistical checks; 0 = rayon default.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Write JSON-lines reports here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append a synthetic failing report (exercises the exit-code path).
    #[arg(long, hide = true)]
    inject_failure: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON file matching the ExperimentConfig schema.
    config: PathBuf,
    #[arg(long, default_value = "records.csv")]
    records: PathBuf,
    #[arg(long, default_value = "summary.csv")]
    summary: PathBuf,
    /// Divide losses by n in the CSVs (average instead of total loss).
    #[arg(long)]
    per_row: bool,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct LowerboundArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Optimum loss the instance is calibrated to.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    target_loss: f64,
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Lowerbound(args) => cmd_lowerbound(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Input-shaped problems exit 2; sampler and numeric trouble exits 3.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::EmptyDataset
        | Error::InvalidConfig { .. }
        | Error::ShapeMismatch { .. }
        | Error::ExpansionTooLarge { .. }
        | Error::RankDeficient { .. }
        | Error::InvalidEpsilon { .. } => EXIT_INPUT_ERROR,
        _ => EXIT_RUNTIME_ERROR,
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("VOLSAMP_SEED") {
        Ok(text) => text.parse().map_err(|_| Error::InvalidConfig {
            reason: format!("VOLSAMP_SEED='{text}' is not a 64-bit unsigned integer"),
        }),
        Err(_) => Ok(0),
    }
}

fn parse_format(s: &str) -> Result<InputFormat> {
    match s {
        "auto" => Ok(InputFormat::Auto),
        "dense" => Ok(InputFormat::Dense),
        "libsvm" => Ok(InputFormat::Libsvm),
        other => Err(Error::InvalidConfig {
            reason: format!("unknown format '{other}', expected auto|dense|libsvm"),
        }),
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::InvalidConfig {
            reason: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

enum Drawn {
    Subset(Vec<usize>),
    Sequence(SampleSequence),
}

fn draw(
    x: &Matrix,
    method: Method,
    k: usize,
    fast_epsilon: f64,
    rng: &mut RngState,
) -> Result<Drawn> {
    match method {
        Method::Volume => Ok(Drawn::Subset(volume_sample(x, k, rng)?.indices().to_vec())),
        Method::LeverageIid => {
            let q = volsamp::sampling::RescalingDistribution::from_leverage_scores(
                &leverage_scores(x)?,
            )?;
            Ok(Drawn::Sequence(leverage_iid_sample(&q, k, rng)?))
        }
        Method::LeveragedVolume => Ok(Drawn::Sequence(leveraged_volume_sample(x, k, rng)?)),
        Method::FastLeveragedVolume => {
            let sampler =
                FastLeveragedSampler::new(x, FastSamplerOptions::for_epsilon(fast_epsilon), rng)?;
            Ok(Drawn::Sequence(sampler.sample(x, k, rng)?))
        }
    }
}

fn cmd_sample(args: SampleArgs) -> Result<ExitCode> {
    let method: Method = args.method.parse()?;
    let seed = resolve_seed(args.seed)?;
    let x = load_matrix(&args.matrix, parse_format(&args.format)?)?;
    let mut rng = RngState::new(seed);
    let body = match draw(&x, method, args.k, args.fast_epsilon, &mut rng)? {
        Drawn::Subset(indices) => json!({
            "method": method.name(),
            "k": args.k,
            "seed": seed,
            "n": x.nrows(),
            "d": x.ncols(),
            "indices": indices,
        }),
        Drawn::Sequence(seq) => json!({
            "method": method.name(),
            "k": args.k,
            "seed": seed,
            "n": x.nrows(),
            "d": x.ncols(),
            "indices": seq.indices(),
            "weights": seq.rescale_weights(),
        }),
    };
    emit(args.out.as_ref(), &serde_json::to_string(&body).unwrap())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_estimate(args: EstimateArgs) -> Result<ExitCode> {
    let method: Method = args.method.parse()?;
    let seed = resolve_seed(args.seed)?;
    let loaded = load_problem(&args.data, parse_format(&args.format)?, args.intercept)?;
    if loaded.dropped_rows > 0 {
        eprintln!("dropped {} all-zero rows", loaded.dropped_rows);
    }
    let mut problem = loaded.problem;
    if args.expand_monomials {
        problem = expand_monomials(&problem, volsamp::experiments::DEFAULT_MONOMIAL_CAP)?;
    }
    let mut rng = RngState::new(seed);
    let est = match draw(problem.x(), method, args.k, args.fast_epsilon, &mut rng)? {
        Drawn::Subset(indices) => {
            subset_estimator(&problem, &volsamp::sampling::SubsetSample::new(indices)?)?
        }
        Drawn::Sequence(seq) => rescaled_estimator(&problem, &seq)?,
    };
    let body = json!({
        "method": method.name(),
        "k": args.k,
        "seed": seed,
        "n": problem.n(),
        "d": problem.d(),
        "weights": est.weights.as_slice(),
        "loss": est.loss,
        "loss_ratio": est.loss_ratio,
        "optimum_loss": problem.optimum_loss(),
    });
    emit(args.out.as_ref(), &serde_json::to_string(&body).unwrap())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let suite: Suite = args.suite.parse()?;
    let seed = resolve_seed(args.seed)?;
    let mut reports = run_suite(suite, seed, args.jobs)?;
    if args.inject_failure {
        reports.push(CheckReport::at_most(
            "injected_failure",
            1.0,
            0.0,
            0.0,
            "synthetic report from --inject-failure",
        ));
    }
    let mut lines = String::new();
    for r in &reports {
        lines.push_str(&serde_json::to_string(r).unwrap());
        lines.push('\n');
        eprintln!("{}", r.summary_line());
    }
    emit(args.out.as_ref(), lines.trim_end_matches('\n'))?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    eprintln!("{} checks, {} failed", reports.len(), failed);
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILURE)
    })
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::InvalidConfig {
        reason: format!("cannot read {}: {e}", args.config.display()),
    })?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::InvalidConfig {
        reason: format!("invalid config: {e}"),
    })?;
    let curves = run_loss_curves(&cfg, args.jobs)?;
    for f in &curves.failures {
        eprintln!(
            "cell failed: method={} k={} repetition={}: {}",
            f.method.name(),
            f.k,
            f.repetition,
            f.message
        );
    }
    let n = curves.n;
    write_csv(&args.records, |w| {
        write_records_csv(w, &curves.records, args.per_row, n)
    })?;
    let summary = aggregate(&curves.records);
    write_csv(&args.summary, |w| {
        write_summary_csv(w, &summary, args.per_row, n)
    })?;
    let body = json!({
        "dataset": curves.dataset,
        "records": curves.records.len(),
        "failures": curves.failures.len(),
        "records_csv": args.records,
        "summary_csv": args.summary,
    });
    println!("{}", serde_json::to_string(&body).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn write_csv(
    path: &PathBuf,
    writer: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::InvalidConfig {
        reason: format!("cannot create {}: {e}", path.display()),
    })?;
    writer(&mut file).map_err(|e| Error::InvalidConfig {
        reason: format!("cannot write {}: {e}", path.display()),
    })
}

#[derive(Serialize)]
struct LowerboundOutput {
    n: usize,
    d: usize,
    k: usize,
    gamma: f64,
    optimum_loss: f64,
    repetitions: usize,
    /// Empirical Pr[loss >= 1.5 optimum] under plain volume sampling.
    tail_probability: f64,
    tail_threshold: f64,
    mean_ratio: f64,
    /// Small-gamma prediction 1 + (n-k)/(n-d) for the mean ratio.
    predicted_mean_ratio: f64,
}

fn cmd_lowerbound(args: LowerboundArgs) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed)?;
    if args.reps == 0 {
        return Err(Error::InvalidConfig {
            reason: "reps must be at least 1".into(),
        });
    }
    let gamma = solve_gamma_for_loss(args.n, args.d, args.target_loss)?;
    let problem = lower_bound_instance(args.n, args.d, gamma)?;
    let mut rng = RngState::new(seed);
    let mut ratios = Vec::with_capacity(args.reps);
    for _ in 0..args.reps {
        let s = volume_sample(problem.x(), args.k, &mut rng)?;
        ratios.push(subset_estimator(&problem, &s)?.loss_ratio);
    }
    let tail = ratios.iter().filter(|&&r| r >= 1.5).count() as f64 / args.reps as f64;
    let mean = ratios.iter().sum::<f64>() / args.reps as f64;
    let body = LowerboundOutput {
        n: args.n,
        d: args.d,
        k: args.k,
        gamma,
        optimum_loss: problem.optimum_loss(),
        repetitions: args.reps,
        tail_probability: tail,
        tail_threshold: 0.25,
        mean_ratio: mean,
        predicted_mean_ratio: 1.0 + (args.n - args.k) as f64 / (args.n - args.d) as f64,
    };
    emit(args.out.as_ref(), &serde_json::to_string(&body).unwrap())?;
    Ok(ExitCode::SUCCESS)
}
