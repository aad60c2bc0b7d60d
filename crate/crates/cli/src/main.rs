use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use quasilab_cli::selftest::{Fault, SelftestOptions};
use quasilab_cli::{cmd_cfrac, cmd_gordon, cmd_lyap, cmd_selftest, CliError, Outcome, RunConfig, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "quasilab", version, about = "Numerical lab for quasi-periodic Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Convergents, ratios r_n and distance bounds of the configured frequency.
    Cfrac {
        #[arg(long)]
        config: PathBuf,
    },
    /// Lyapunov exponent scan over the energy grid.
    Lyap {
        #[arg(long)]
        config: PathBuf,
    },
    /// Periodicity defects, three-block norms and exclusion verdicts.
    Gordon {
        #[arg(long)]
        config: PathBuf,
    },
    /// Oracle suites; exits 3 if any fails.
    Selftest {
        /// Seed for the fuzz suites.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Integration step for all suites.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    DetDrift,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Cfrac { config } => cmd_cfrac(&RunConfig::load(&config)?),
        Command::Lyap { config } => cmd_lyap(&RunConfig::load(&config)?),
        Command::Gordon { config } => cmd_gordon(&RunConfig::load(&config)?),
        Command::Selftest { seed, step, inject_fault } => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(CliError::Config(format!("--step must be positive, got {step}")));
            }
            let opts = SelftestOptions {
                seed,
                step,
                fault: inject_fault.map(|FaultArg::DetDrift| Fault::DetDrift),
                ..SelftestOptions::default()
            };
            Ok(cmd_selftest(&opts))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("quasilab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
