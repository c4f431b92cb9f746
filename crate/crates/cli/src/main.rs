//! `tow-bombe`: run TOW / TOW-bombe experiments and self-checks.
//!
//! Settings resolve as flags > `--config` file > built-in defaults, and the
//! resolved config heads every CSV written.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tow_bombe::environment::EpdTable;
use tow_bombe::harness::{
    run_bp, run_experiment, run_sweep, write_experiment, write_regret, write_sweep, EnvKind,
    ExperimentConfig,
};
use tow_bombe::verify::{verify_invariants, verify_tables, InvariantBudget};
use tow_bombe::Error;

#[derive(Parser, Debug)]
#[command(name = "tow-bombe", version, about = "Tug-of-war bandit dynamics and the TOW bombe")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single-player two-machine TOW (optionally next to baselines); writes regret.csv.
    RunBp(BpArgs),
    /// The canonical competitive bandit experiment; writes records, summary and clusters.
    RunCbp(CbpArgs),
    /// The bombe on the Extended Prisoner's Dilemma.
    RunEpd(EpdArgs),
    /// Amplitude sweep over fluctuation kinds; writes sweep.csv.
    Sweep(SweepArgs),
    /// Checks the payoff tables and reports EPD degree discrepancies.
    VerifyTables(TableArgs),
    /// Runs the conservation and identity property suites.
    VerifyInvariants(InvariantArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Config file (`key = value` with [environment], [dynamics], [fluctuation], [output]).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; sample s uses stream s [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Samples (independent runs) [default: 1000]
    #[arg(long)]
    samples: Option<usize>,
    /// Plays per sample [default: 1000]
    #[arg(long)]
    plays: Option<usize>,
    /// Fluctuation kind: none|fixed|random|m-random|external [default: random]
    #[arg(long, value_name = "KIND")]
    fluct: Option<String>,
    /// Fluctuation amplitude A [default: 1]
    #[arg(long)]
    amplitude: Option<f64>,
    /// Sheets per random fluctuation D [default: 10]
    #[arg(long)]
    depth: Option<usize>,
    /// Weighting parameter: auto or a number [default: auto]
    #[arg(long, value_name = "auto|REAL")]
    omega: Option<String>,
    /// Worker threads, 0 = all cores [default: 0]
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CbpArgs {
    #[command(flatten)]
    common: Common,
    /// Machine probabilities, comma separated [default: 0.03,0.05,0.1,0.2,0.9]
    #[arg(long, value_name = "CSV")]
    machines: Option<String>,
    /// Players M [default: 3]
    #[arg(long)]
    players: Option<usize>,
    /// Collision policy: split-prob|split-value [default: split-prob]
    #[arg(long)]
    policy: Option<String>,
    /// bombe, or selfish learners: epsilon-greedy[:E]|softmax[:TAU]|ucb1-tuned [default: bombe]
    #[arg(long)]
    learner: Option<String>,
}

#[derive(Args, Debug)]
struct EpdArgs {
    #[command(flatten)]
    common: Common,
    /// Replacement payoff table (125 rows) [default: bundled]
    #[arg(long, value_name = "PATH")]
    epd_table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BpArgs {
    #[command(flatten)]
    common: Common,
    /// Probability of machine A [default: 0.9]
    #[arg(long)]
    pa: Option<f64>,
    /// Probability of machine B [default: 0.2]
    #[arg(long)]
    pb: Option<f64>,
    /// Comparators, comma separated: epsilon-greedy[:E], softmax[:TAU], ucb1-tuned
    #[arg(long)]
    baselines: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Amplitude grid [default: 0,0.5,1,2,4,8,16]
    #[arg(long, value_name = "CSV")]
    amplitudes: Option<String>,
    /// Fluctuation kinds [default: fixed,random,external]
    #[arg(long, value_name = "CSV")]
    kinds: Option<String>,
    /// Machine probabilities, comma separated [default: 0.03,0.05,0.1,0.2,0.9]
    #[arg(long, value_name = "CSV")]
    machines: Option<String>,
    /// Players M [default: 3]
    #[arg(long)]
    players: Option<usize>,
    /// Collision policy: split-prob|split-value [default: split-prob]
    #[arg(long)]
    policy: Option<String>,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Table to check [default: bundled]
    #[arg(long, value_name = "PATH")]
    epd_table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InvariantArgs {
    /// Master seed [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Random bombe steps [default: 100000]
    #[arg(long)]
    steps: Option<usize>,
    /// Generations per fluctuation kind [default: 10000]
    #[arg(long)]
    generations: Option<usize>,
    /// Random identity tuples [default: 1000]
    #[arg(long)]
    tuples: Option<usize>,
}

/// Layers `--config` and then every given flag over the defaults.
fn resolve(common: &Common, extra: &[(&str, Option<String>)]) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    let flags = [
        ("dynamics.seed", common.seed.map(|v| v.to_string())),
        ("dynamics.samples", common.samples.map(|v| v.to_string())),
        ("dynamics.plays", common.plays.map(|v| v.to_string())),
        ("fluctuation.kind", common.fluct.clone()),
        ("fluctuation.amplitude", common.amplitude.map(|v| v.to_string())),
        ("fluctuation.depth", common.depth.map(|v| v.to_string())),
        ("dynamics.omega", common.omega.clone()),
        ("output.workers", common.workers.map(|v| v.to_string())),
        ("output.dir", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags.iter().chain(extra) {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::RunCbp(args) => {
            let cfg = resolve(
                &args.common,
                &[
                    ("environment.probs", args.machines),
                    ("environment.players", args.players.map(|v| v.to_string())),
                    ("environment.policy", args.policy),
                    ("dynamics.learner", args.learner),
                ],
            )?;
            experiment(&cfg)
        }
        Command::RunEpd(args) => {
            let mut cfg = resolve(
                &args.common,
                &[(
                    "environment.epd_table",
                    args.epd_table.map(|p| p.display().to_string()),
                )],
            )?;
            cfg.env = EnvKind::Epd;
            cfg.players = 3;
            experiment(&cfg)
        }
        Command::RunBp(args) => {
            let mut cfg = resolve(
                &args.common,
                &[("dynamics.baselines", args.baselines)],
            )?;
            if args.pa.is_some() || args.pb.is_some() || args.common.config.is_none() {
                cfg.probs = vec![args.pa.unwrap_or(0.9), args.pb.unwrap_or(0.2)];
            }
            cfg.players = 1;
            let curves = run_bp(&cfg)?;
            for c in &curves {
                println!(
                    "{}: mean regret after {} steps = {:.4}",
                    c.learner,
                    cfg.plays,
                    c.regret.last().copied().unwrap_or(0.0)
                );
            }
            print_files(&[write_regret(&cfg, &curves, &cfg.out)?]);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let cfg = resolve(
                &args.common,
                &[
                    ("fluctuation.sweep_amplitudes", args.amplitudes),
                    ("fluctuation.sweep_kinds", args.kinds),
                    ("environment.probs", args.machines),
                    ("environment.players", args.players.map(|v| v.to_string())),
                    ("environment.policy", args.policy),
                ],
            )?;
            let rows = run_sweep(&cfg)?;
            println!("kind      A        mean_total  mean_fairness  sm_freq  ne_freq");
            for r in &rows {
                println!(
                    "{:<9} {:<8} {:>10.2}  {:>13.2}  {:>7.3}  {:>7.3}",
                    r.kind.to_string(),
                    r.amplitude,
                    r.summary.mean_total,
                    r.summary.mean_fairness,
                    r.summary.sm_freq,
                    r.summary.ne_freq
                );
            }
            print_files(&[write_sweep(&cfg, &rows, &cfg.out)?]);
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyTables(args) => {
            let table = match &args.epd_table {
                Some(p) => EpdTable::load(p)?,
                None => EpdTable::bundled()?,
            };
            let report = verify_tables(&table)?;
            print!("{report}");
            if report.is_consistent() {
                println!("tables consistent");
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Error::Integrity("payoff tables are inconsistent".into()))
            }
        }
        Command::VerifyInvariants(args) => {
            let defaults = InvariantBudget::default();
            let budget = InvariantBudget {
                bombe_steps: args.steps.unwrap_or(defaults.bombe_steps),
                generations: args.generations.unwrap_or(defaults.generations),
                tuples: args.tuples.unwrap_or(defaults.tuples),
            };
            let checks = verify_invariants(args.seed.unwrap_or(1), budget)?;
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().all(|c| c.passed) {
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Error::Integrity("invariant suite failed".into()))
            }
        }
    }
}

fn experiment(cfg: &ExperimentConfig) -> Result<ExitCode, Error> {
    let result = run_experiment(cfg)?;
    let s = &result.summary;
    println!(
        "samples {}  mean total {:.2}  mean fairness {:.2}  SM {:.3}  NE {:.3}  other {:.3}",
        s.samples, s.mean_total, s.mean_fairness, s.sm_freq, s.ne_freq, s.other_freq
    );
    print_files(&write_experiment(cfg, &result, &cfg.out)?);
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Integrity(_) => 3,
        Error::Io { .. } | Error::Csv { .. } => 4,
        Error::Input(_) | Error::Domain(_) | Error::Config(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
