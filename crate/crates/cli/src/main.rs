mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Overrides};
use output::Outcome;

#[derive(Parser)]
#[command(name = "sheetcap", version, about = "Hitting probabilities, capacities and verification for Brownian sheets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit with status 3 when a verification fails.
    #[arg(long)]
    strict: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "SHEETCAP_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Sample paths and dump every grid node.
    Simulate(Common),
    /// Riesz capacity of one or more sets.
    Capacity(Common),
    /// Monte Carlo hitting probability.
    Hitprob(Common),
    /// Hitting probability of shrinking balls and its log-log slope.
    Scaling(Common),
    /// Occupation density at a point.
    VerifyH1(Common),
    /// Pair occupation ratio against the kernel.
    VerifyH2(Common),
    /// Marginal density against Gaussian envelopes.
    VerifyDensity(Common),
    /// Conditional increment density of the SPDE.
    VerifyConditional(Common),
    /// Drift removal cross-check.
    Girsanov(Common),
    /// The radial integral phi(r).
    Phi(Common),
    /// Hitting probability against capacity over several sets.
    Sandwich(Common),
    /// Box-counting dimension of the range.
    Dimension(Common),
    /// Covariance hypothesis check.
    CheckA1(Common),
}

impl Command {
    fn split(&self) -> (&'static str, &Common, fn(&ExperimentConfig) -> Result<Outcome>) {
        match self {
            Command::Simulate(c) => ("simulate", c, commands::simulate),
            Command::Capacity(c) => ("capacity", c, commands::capacity),
            Command::Hitprob(c) => ("hitprob", c, commands::hitprob),
            Command::Scaling(c) => ("scaling", c, commands::scaling),
            Command::VerifyH1(c) => ("verify-h1", c, commands::verify_h1),
            Command::VerifyH2(c) => ("verify-h2", c, commands::verify_h2),
            Command::VerifyDensity(c) => ("verify-density", c, commands::verify_density),
            Command::VerifyConditional(c) => ("verify-conditional", c, commands::verify_conditional),
            Command::Girsanov(c) => ("girsanov", c, commands::girsanov),
            Command::Phi(c) => ("phi", c, commands::phi),
            Command::Sandwich(c) => ("sandwich", c, commands::sandwich),
            Command::Dimension(c) => ("dimension", c, commands::dimension),
            Command::CheckA1(c) => ("check-a1", c, commands::check_a1),
        }
    }
}

/// Errors caused by the run itself rather than by its inputs.
fn is_runtime(err: &anyhow::Error) -> bool {
    use sheetcap_core::Error as E;
    err.chain().any(|e| {
        if let Some(core) = e.downcast_ref::<E>() {
            return matches!(
                core,
                E::NotPositiveDefinite(_)
                    | E::SingularDiffusion { .. }
                    | E::NumericalFailure { .. }
                    | E::NaN(_)
                    | E::Quadrature(_)
            );
        }
        e.is::<std::io::Error>() || e.is::<csv::Error>()
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (name, common, func) = cli.command.split();
    let text = match &common.config {
        Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?),
        None => None,
    };
    let cfg = config::resolve(text.as_deref(), &common.overrides)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(common.threads).build()?;
    let threads = pool.current_num_threads();
    let start = Instant::now();
    let outcome = pool.install(|| func(&cfg))?;
    let wall = start.elapsed().as_secs_f64();
    for path in output::write_outputs(name, &cfg, &outcome, threads, wall)? {
        println!("{}", path.display());
    }
    match outcome.pass {
        Some(p) => eprintln!("{name}: {}", if p { "PASS" } else { "FAIL" }),
        None => {}
    }
    Ok(if common.strict && outcome.pass == Some(false) { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_runtime(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
