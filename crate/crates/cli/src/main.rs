//! `regbat`: cycle counting, regret bounds, simulations and the offline
//! oracle from the command line.
//!
//! Exit status: 0 on success, 1 when a run breaks an invariant, 2 on bad
//! input, 3 when the oracle runs out of budget.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regbat_core::{ConfigFile, Error, PolicyKind, Scenario};

#[derive(Parser, Debug)]
#[command(
    name = "regbat",
    version,
    about = "Battery regulation with cycle-aging costs"
)]
struct Cli {
    /// TOML file with scenario keys (e_min, e_max, E, P, eta_c, eta_d, R, T,
    /// theta, pi, alpha, beta, e0)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one scenario key, e.g. --set theta=80 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for synthetic traces
    #[arg(long, default_value_t = 1, global = true)]
    seed: u64,
    /// Write here instead of stdout
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Output format (each command has its own default)
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Worker threads for batch trials and the oracle
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output on stderr (-v info, -vv debug)
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rainflow-count a one-column CSV of normalized SoC samples
    Count { profile: PathBuf },
    /// Threshold depth, half-cycle depths and worst-case gap for the scenario
    Gap,
    /// Run a policy over a synthetic or recorded trace
    Simulate {
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long, value_enum, default_value_t = PolicyArg::Threshold)]
        policy: PolicyArg,
        /// Run several policies on the same trace and print a cost breakdown
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            conflicts_with = "sweep_theta"
        )]
        compare: Vec<PolicyArg>,
        /// Re-run with theta = pi set to each price and print the costs
        #[arg(long, value_delimiter = ',')]
        sweep_theta: Vec<f64>,
        /// Also solve the offline problem and report the gap
        #[arg(long)]
        with_oracle: bool,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Solve the offline problem on a short trace
    Oracle {
        #[command(flatten)]
        trace: TraceArgs,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Seeded trials over the nine standard price cases
    Batch {
        /// Trials per case (seeds 1..=trials)
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Steps per trace before repetition
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Compare with the offline optimum (only for traces within --max-steps)
        #[arg(long)]
        with_oracle: bool,
        #[command(flatten)]
        oracle: OracleArgs,
    },
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Trace CSV with header `t,r`
    #[arg(long, conflicts_with = "steps")]
    trace: Option<PathBuf>,
    /// Length of a synthetic uniform trace (seeded by --seed)
    #[arg(long)]
    steps: Option<usize>,
    /// The `r` column is in MW rather than normalized to [-1, 1]
    #[arg(long)]
    raw: bool,
    /// Flip the sign of `r`
    #[arg(long)]
    negate: bool,
    /// Interval of the trace file in seconds
    #[arg(long, default_value_t = 2.0)]
    interval_seconds: f64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Action levels per step
    #[arg(long, default_value_t = 9)]
    levels: usize,
    /// Longest trace the oracle accepts
    #[arg(long, default_value_t = 12)]
    max_steps: usize,
    /// Maximum number of complete action sequences to evaluate
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Threshold,
    Simple,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Threshold => PolicyKind::Threshold,
            PolicyArg::Simple => PolicyKind::Simple,
        }
    }
}

fn scenario(cli: &Cli) -> regbat_core::Result<Scenario> {
    let mut cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    cfg.scenario()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Invariant(_) | Error::SocBound { .. } | Error::Complementarity { .. }) => 1,
        Some(Error::BudgetExceeded { .. }) => 3,
        _ => 2,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let sc = scenario(cli)?;
    let mut out = output::open(cli.output.as_deref())?;
    match &cli.command {
        Command::Count { profile } => commands::count(profile, &sc, cli.format, &mut out),
        Command::Gap => commands::gap(&sc, cli.format, &mut out),
        Command::Simulate {
            trace,
            policy,
            compare,
            sweep_theta,
            with_oracle,
            oracle,
        } => {
            let seed = trace.trace.is_none().then_some(cli.seed);
            let (trace, sc) = commands::load_trace(trace, sc, cli.seed)?;
            let oracle = with_oracle.then(|| commands::oracle_config(oracle));
            if !compare.is_empty() {
                let kinds: Vec<PolicyKind> = compare.iter().map(|&p| p.into()).collect();
                commands::compare(&trace, &sc, &kinds, cli.format, &mut out)
            } else if !sweep_theta.is_empty() {
                commands::sweep(
                    &trace,
                    &sc,
                    (*policy).into(),
                    sweep_theta,
                    cli.format,
                    &mut out,
                )
            } else {
                commands::simulate(
                    &trace,
                    &sc,
                    (*policy).into(),
                    oracle.as_ref(),
                    seed,
                    cli.format,
                    &mut out,
                )
            }
        }
        Command::Oracle { trace, oracle } => {
            let (trace, sc) = commands::load_trace(trace, sc, cli.seed)?;
            commands::oracle(
                &trace,
                &sc,
                &commands::oracle_config(oracle),
                cli.format,
                &mut out,
            )
        }
        Command::Batch {
            trials,
            steps,
            with_oracle,
            oracle,
        } => {
            let oracle = with_oracle.then(|| commands::oracle_config(oracle));
            commands::batch(*trials, *steps, sc, oracle, cli.format, &mut out)
        }
    }?;
    out.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
