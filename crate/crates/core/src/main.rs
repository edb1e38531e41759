use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graphon_lqr::cli::{
    check_experiment, compare_files, exit_code, load_experiment, run_experiment, run_oracle_only,
    sbm_adjacency, RunOptions, EXIT_APPROXIMATE_ONLY,
};
use graphon_lqr::error::Result;
use graphon_lqr::io::write_matrix_csv;

/// LQR control of graphon-coupled systems by invariant subspace decomposition.
#[derive(Parser)]
#[command(name = "graphon-lqr", version)]
struct Cli {
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of time steps.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Suppresses the summary on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize, simulate and compare against the centralized solution.
    Run { config: PathBuf },
    /// Write the sampled network of coupling a as CSV.
    SbmGen {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve only the centralized nN × nN problem.
    Oracle { config: PathBuf },
    /// Compare trajectory A against reference trajectory B.
    Compare {
        trajectory_a: PathBuf,
        trajectory_b: PathBuf,
        #[arg(long, requires = "cost_b")]
        cost_a: Option<f64>,
        #[arg(long, requires = "cost_a")]
        cost_b: Option<f64>,
    },
    /// Report subspace certificate residuals; exits 10 if only the
    /// approximate law applies.
    Check { config: PathBuf },
}

fn execute(cli: Cli) -> Result<i32> {
    let opts = RunOptions {
        output_dir: cli.output_dir,
        seed: cli.seed,
        steps: cli.steps,
    };
    let say = |lines: Vec<String>| {
        if !cli.quiet {
            for l in lines {
                println!("{l}");
            }
        }
    };
    match cli.command {
        Command::Run { config } => {
            let exp = load_experiment(&config, &opts)?;
            let outcome = run_experiment(&exp)?;
            let mut lines = outcome.report.lines();
            lines.push(format!("output_dir = {}", exp.output_dir.display()));
            say(lines);
        }
        Command::SbmGen { config, output } => {
            let exp = load_experiment(&config, &opts)?;
            write_matrix_csv(&output, sbm_adjacency(&exp)?)?;
            say(vec![format!("wrote {}", output.display())]);
        }
        Command::Oracle { config } => {
            let exp = load_experiment(&config, &opts)?;
            let report = run_oracle_only(&exp)?;
            say(vec![
                format!("oracle.cost = {}", report.cost),
                format!("oracle.synthesis_seconds = {}", report.synthesis_seconds),
                format!("output_dir = {}", exp.output_dir.display()),
            ]);
        }
        Command::Compare {
            trajectory_a,
            trajectory_b,
            cost_a,
            cost_b,
        } => {
            let report = compare_files(&trajectory_a, &trajectory_b, cost_a.zip(cost_b))?;
            say(report.lines(""));
        }
        Command::Check { config } => {
            let exp = load_experiment(&config, &opts)?;
            let outcome = check_experiment(&exp)?;
            say(outcome.lines());
            return Ok(match (outcome.invariant, outcome.low_rank) {
                (true, true) => 0,
                (true, false) => EXIT_APPROXIMATE_ONLY,
                _ => 3,
            });
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
