//! `cvprivacy`: security reports, region sweeps, protocol Monte Carlo and
//! the Fock-space certification suite from the command line.
//!
//! Exit codes: 0 success, 1 bad input (schema, arguments, I/O), 2 unphysical
//! state, 3 insufficient statistics, 4 certification check failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvprivacy::certify::{run_suite, SuiteOptions};
use cvprivacy::region::{sweep, to_csv, GridRange, SweepSpec};
use cvprivacy::security::{analyze, default_coords};
use cvprivacy::sim::{simulate, slope_check, ProtocolConfig, Sampler, SlopeFit, SimulationResult};
use cvprivacy::{BipartiteSplit, Error, GaussianState};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cvprivacy", version, about = "Gaussian-state secret-key security analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Security report for one state, as JSON.
    Analyze(AnalyzeArgs),
    /// Classify the isotropic symmetric family on a (lambda, c) grid, as CSV.
    Sweep(SweepArgs),
    /// Monte Carlo of post-selection and advantage distillation.
    Simulate(SimulateArgs),
    /// Cross-check the closed forms against the truncated Fock-space oracle.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct StateArgs {
    /// JSON state file: {"n_modes": n, "cov": [[...]], "disp": [...]}.
    #[arg(long)]
    state: PathBuf,
    /// Modes held by Alice and Bob, e.g. `1,2`. Defaults to one mode for
    /// Alice and the rest for Bob.
    #[arg(long, value_parser = parse_split)]
    split: Option<BipartiteSplit>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: StateArgs,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    /// Block length for the key-rate estimate; omitted when absent.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// `lmin:lmax:steps,cmin:cmax:steps`.
    #[arg(long, default_value = "1:3:200,0:3:200", value_parser = parse_grid)]
    grid: (GridRange, GridRange),
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Direct,
    Windowed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: StateArgs,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    /// Half-width of the acceptance window around ±X0.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Raw draws (direct sampler) or accepted pairs (windowed sampler).
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, env = "CVPRIVACY_SEED", default_value_t = 0)]
    seed: u64,
    /// Largest distillation block length.
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, value_enum, default_value = "direct")]
    sampler: SamplerArg,
    /// Fit the distillation slope over N = 1..n; needs this many errors per N.
    #[arg(long)]
    slope_min_errors: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, env = "CVPRIVACY_SEED", default_value_t = SuiteOptions::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SuiteOptions::default().fidelity_states)]
    states: usize,
    #[arg(long, default_value_t = SuiteOptions::default().cutoff)]
    cutoff: usize,
    #[arg(long, default_value_t = SuiteOptions::default().rerun_cutoff)]
    rerun_cutoff: usize,
    #[arg(long, default_value_t = SuiteOptions::default().chain_states)]
    chain_states: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_split(s: &str) -> Result<BipartiteSplit, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected nA,nB, got `{s}`"))?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a mode count"));
    let (n_a, n_b) = (n(a)?, n(b)?);
    if n_a == 0 || n_b == 0 {
        return Err("both parties need at least one mode".into());
    }
    Ok(BipartiteSplit::new(n_a, n_b))
}

fn parse_grid(s: &str) -> Result<(GridRange, GridRange), String> {
    let (l, c) = s.split_once(',').ok_or_else(|| format!("expected lmin:lmax:steps,cmin:cmax:steps, got `{s}`"))?;
    let l: GridRange = l.parse().map_err(|e: Error| e.to_string())?;
    let c: GridRange = c.parse().map_err(|e: Error| e.to_string())?;
    Ok((l, c))
}

enum Failure {
    Lib(Error),
    CertificationFailed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Lib(Error::Unphysical(_)) => 2,
        Failure::Lib(Error::InsufficientStatistics(_) | Error::NoAcceptedSamples) => 3,
        Failure::Lib(_) => 1,
        Failure::CertificationFailed(_) => 4,
    }
}

fn load(input: &StateArgs) -> Result<(GaussianState<f64>, BipartiteSplit), Failure> {
    let text = fs::read_to_string(&input.state)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", input.state.display())))?;
    let state = GaussianState::<f64>::from_json(&text)?;
    let split = match input.split {
        Some(s) => s,
        None if state.n_modes() >= 2 => BipartiteSplit::new(1, state.n_modes() - 1),
        None => return Err(Error::InvalidParameter("a bipartite state needs at least two modes".into()).into()),
    };
    split.check(&state)?;
    state.require_physical()?;
    Ok((state, split))
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| Error::Io(e).into()),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let (state, split) = load(&args.input)?;
    let report = analyze(&state, split, None, args.x0, args.n)?;
    emit(args.out.as_deref(), &json(&report))
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let (lambda_range, c_range) = args.grid;
    let cells = sweep(&SweepSpec { lambda_range, c_range, x0: args.x0 })?;
    emit(args.out.as_deref(), &to_csv(&cells))
}

#[derive(Serialize)]
struct SimulationOutput {
    #[serde(flatten)]
    result: SimulationResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope: Option<SlopeFit>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let (state, split) = load(&args.input)?;
    let sampler = match args.sampler {
        SamplerArg::Direct => Sampler::Direct,
        SamplerArg::Windowed => Sampler::Windowed,
    };
    let cfg = ProtocolConfig::new(args.x0, args.delta, args.n, args.samples, args.seed).with_sampler(sampler);
    let result = simulate(&state, default_coords(split), &cfg)?;
    let slope = match args.slope_min_errors {
        Some(min) => Some(slope_check(&result, &(1..=args.n).collect::<Vec<_>>(), min)?),
        None => None,
    };
    let body = match args.format {
        Format::Json => json(&SimulationOutput { result, slope }),
        Format::Csv => result.to_csv(),
    };
    emit(args.out.as_deref(), &body)
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let opts = SuiteOptions {
        seed: args.seed,
        fidelity_states: args.states,
        cutoff: args.cutoff,
        rerun_cutoff: args.rerun_cutoff,
        chain_states: args.chain_states,
    };
    let report = run_suite(opts)?;
    emit(args.out.as_deref(), &json(&report))?;
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::CertificationFailed(failed.join("; ")))
    }
}

fn main() -> ExitCode {
    // Argument errors share the bad-input code rather than clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::CertificationFailed(names) => eprintln!("certification failed: {names}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}
