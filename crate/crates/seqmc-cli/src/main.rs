//! Command-line driver for the particle filtering library.
//!
//! `compare` runs the bootstrap, auxiliary, and SISR filters side by side
//! over one observation series and prints their filter means and per-step
//! log conditional likelihood estimates as CSV. `simulate` draws a
//! synthetic observation series from a bundled model.
//!
//! Exit codes: 0 on success, 1 on runtime failures (unreadable data,
//! weight collapse), 2 on invalid flags.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqmc::ensemble::ObsVec;
use seqmc::filter::{AuxiliaryFilter, BootstrapFilter, ParticleFilter, SisrFilter, TestFunction};
use seqmc::io::{read_csv, write_row};
use seqmc::models::{simulate, LgssmModel, LgssmParams, SvolModel, SvolParams, TransitionProposal};
use seqmc::nalgebra::DMatrix;
use seqmc::resample::{ResamplePolicy, ResampleScheme, ResampleTrigger};
use seqmc::rv::Prng;
use seqmc::Scalar;

#[derive(Parser)]
#[command(
    name = "seqmc",
    version,
    about = "Particle filtering for state-space models",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run bootstrap, auxiliary, and SISR filters over one observation
    /// series and print their outputs as CSV
    Compare(CompareArgs),
    /// Draw a synthetic observation series from a bundled model
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ResamplerArg {
    Multinomial,
    Residual,
    Stratified,
    Systematic,
}

impl From<ResamplerArg> for ResampleScheme {
    fn from(value: ResamplerArg) -> Self {
        match value {
            ResamplerArg::Multinomial => ResampleScheme::Multinomial,
            ResamplerArg::Residual => ResampleScheme::Residual,
            ResamplerArg::Stratified => ResampleScheme::Stratified,
            ResamplerArg::Systematic => ResampleScheme::Systematic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Svol,
    Lgssm,
}

#[derive(Args)]
struct SvolFlags {
    /// Volatility persistence, must lie strictly inside (-1, 1)
    #[arg(long, default_value_t = 0.91, value_parser = parse_phi)]
    phi: Scalar,

    /// Observation scale, must be nonzero
    #[arg(long, default_value_t = 0.5, value_parser = parse_beta)]
    beta: Scalar,

    /// Volatility innovation standard deviation, must be positive
    #[arg(long, default_value_t = 1.0, value_parser = parse_sigma)]
    sigma: Scalar,
}

impl SvolFlags {
    fn model(&self) -> SvolModel {
        let params = SvolParams::new(self.phi, self.beta, self.sigma)
            .expect("flag parsers enforce the parameter domain");
        SvolModel::new(params).expect("parameters already validated")
    }
}

#[derive(Args)]
struct CompareArgs {
    /// CSV file of observations, one value per line
    #[arg(
        long,
        value_name = "PATH",
        required_unless_present = "simulate",
        conflicts_with = "simulate"
    )]
    data: Option<PathBuf>,

    /// Instead of reading a file, simulate T steps (T+1 observations)
    /// of stochastic-volatility data with the same parameters
    #[arg(long, value_name = "T")]
    simulate: Option<usize>,

    /// Number of particles per filter
    #[arg(long, default_value_t = 5000, value_parser = parse_particles)]
    particles: usize,

    /// Base seed; simulation and the three filters use derived streams
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Resampling scheme
    #[arg(long, value_enum, default_value_t = ResamplerArg::Multinomial)]
    resampler: ResamplerArg,

    /// When to resample: "always", "never", or "ess:<ratio>" to trigger
    /// when the effective sample size drops below ratio * N
    #[arg(long, default_value = "always", value_parser = parse_criterion)]
    criterion: ResampleTrigger,

    #[command(flatten)]
    svol: SvolFlags,
}

#[derive(Args)]
struct SimulateArgs {
    /// Which bundled model to draw from
    #[arg(long, value_enum, default_value_t = ModelArg::Svol)]
    model: ModelArg,

    /// Number of time steps T; T+1 observations are printed
    #[arg(long, value_name = "T")]
    steps: usize,

    /// Seed for the simulation stream
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    svol: SvolFlags,

    /// State coefficient of the scalar linear-Gaussian model
    #[arg(long, default_value_t = 0.9)]
    a: Scalar,

    /// Observation coefficient of the scalar linear-Gaussian model
    #[arg(long, default_value_t = 1.0)]
    c: Scalar,

    /// State noise variance of the scalar linear-Gaussian model
    #[arg(long, default_value_t = 1.0)]
    q: Scalar,

    /// Observation noise variance of the scalar linear-Gaussian model
    #[arg(long, default_value_t = 1.0)]
    r: Scalar,

    /// Initial state mean of the scalar linear-Gaussian model
    #[arg(long, default_value_t = 0.0)]
    m0: Scalar,

    /// Initial state variance of the scalar linear-Gaussian model
    #[arg(long, default_value_t = 1.0)]
    p0: Scalar,
}

fn parse_phi(s: &str) -> Result<Scalar, String> {
    let v: Scalar = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v.is_finite() && v.abs() < 1.0 {
        Ok(v)
    } else {
        Err("phi must lie strictly inside (-1, 1)".to_string())
    }
}

fn parse_beta(s: &str) -> Result<Scalar, String> {
    let v: Scalar = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v.is_finite() && v != 0.0 {
        Ok(v)
    } else {
        Err("beta must be finite and nonzero".to_string())
    }
}

fn parse_sigma(s: &str) -> Result<Scalar, String> {
    let v: Scalar = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("sigma must be finite and positive".to_string())
    }
}

fn parse_particles(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("at least one particle is required".to_string())
    }
}

fn parse_criterion(s: &str) -> Result<ResampleTrigger, String> {
    match s {
        "always" => Ok(ResampleTrigger::Always),
        "never" => Ok(ResampleTrigger::Never),
        _ => {
            let ratio = s
                .strip_prefix("ess:")
                .ok_or_else(|| format!("expected always, never, or ess:<ratio>, got {s:?}"))?;
            let r: Scalar = ratio
                .parse()
                .map_err(|_| format!("not a number: {ratio}"))?;
            if r.is_finite() && r > 0.0 && r <= 1.0 {
                Ok(ResampleTrigger::EssBelow(r))
            } else {
                Err("the ESS ratio must lie in (0, 1]".to_string())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compare(args) => run_compare(args),
        Command::Simulate(args) => run_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run_compare(args: CompareArgs) -> Result<(), String> {
    let model = args.svol.model();
    let observations: Vec<ObsVec<1>> = match (&args.data, args.simulate) {
        (Some(path), None) => read_csv::<1>(path).map_err(|e| e.to_string())?,
        (None, Some(steps)) => {
            let mut rng = Prng::seed_from(args.seed);
            simulate(&model, steps, &mut rng).1
        }
        _ => unreachable!("clap enforces exactly one input source"),
    };

    let policy =
        ResamplePolicy::new(args.resampler.into(), args.criterion).map_err(|e| e.to_string())?;
    let n = args.particles;
    let mut bootstrap =
        BootstrapFilter::<_, 1, 1>::new(model.clone(), n, policy).map_err(|e| e.to_string())?;
    let mut auxiliary =
        AuxiliaryFilter::<_, 1, 1>::new(model.clone(), n, policy).map_err(|e| e.to_string())?;
    let mut sisr = SisrFilter::<_, 1, 1>::new(TransitionProposal(model), n, policy)
        .map_err(|e| e.to_string())?;

    // independent streams so each filter is reproducible on its own
    let mut rng_bootstrap = Prng::seed_from(args.seed.wrapping_add(1));
    let mut rng_auxiliary = Prng::seed_from(args.seed.wrapping_add(2));
    let mut rng_sisr = Prng::seed_from(args.seed.wrapping_add(3));

    let mean: &TestFunction<1> = &|x| DMatrix::from_element(1, 1, x[0]);

    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    writeln!(
        out,
        "bs_mean, bs_log_cond_like, apf_mean, apf_log_cond_like, sisr_mean, sisr_log_cond_like"
    )
    .map_err(|e| e.to_string())?;

    for y in &observations {
        // a full row is assembled only after all three filters succeed, so a
        // failure never leaves a truncated line behind
        bootstrap
            .filter(y, &[mean], &mut rng_bootstrap)
            .map_err(|e| format!("bootstrap filter: {e}"))?;
        auxiliary
            .filter(y, &[mean], &mut rng_auxiliary)
            .map_err(|e| format!("auxiliary filter: {e}"))?;
        sisr.filter(y, &[mean], &mut rng_sisr)
            .map_err(|e| format!("sisr filter: {e}"))?;

        let row = [
            bootstrap.expectations().map_err(|e| e.to_string())?[0][(0, 0)],
            bootstrap.log_cond_like().map_err(|e| e.to_string())?,
            auxiliary.expectations().map_err(|e| e.to_string())?[0][(0, 0)],
            auxiliary.log_cond_like().map_err(|e| e.to_string())?,
            sisr.expectations().map_err(|e| e.to_string())?[0][(0, 0)],
            sisr.log_cond_like().map_err(|e| e.to_string())?,
        ];
        write_row(&mut out, &row).map_err(|e| e.to_string())?;
    }
    out.flush().map_err(|e| e.to_string())
}

fn run_simulate(args: SimulateArgs) -> Result<(), String> {
    let mut rng = Prng::seed_from(args.seed);
    let rows: Vec<ObsVec<1>> = match args.model {
        ModelArg::Svol => simulate(&args.svol.model(), args.steps, &mut rng).1,
        ModelArg::Lgssm => {
            let params =
                LgssmParams::<1, 1>::scalar(args.a, args.c, args.q, args.r, args.m0, args.p0)
                    .map_err(|e| e.to_string())?;
            let model = LgssmModel::new(params).map_err(|e| e.to_string())?;
            simulate(&model, args.steps, &mut rng).1
        }
    };

    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for y in &rows {
        write_row(&mut out, &[y[0]]).map_err(|e| e.to_string())?;
    }
    out.flush().map_err(|e| e.to_string())
}
