use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ofmlmc::cli::{self, CommandOptions, ReportOptions, ResumeOutcome, EXIT_OK};
use ofmlmc::controller::IterationState;
use ofmlmc::estimator::Objective;
use ofmlmc::scheduler::resolve_store_root;
use ofmlmc::{Error, Result};

/// Optimal-fidelity multi-level Monte Carlo campaigns.
#[derive(Parser)]
#[command(name = "ofmlmc", version)]
struct Cli {
    /// Campaign store directory (default: $OFMLMC_STORE, then ./ofmlmc-store).
    #[arg(long, global = true)]
    store: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a new campaign from a configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, hide = true)]
        max_samples: Option<usize>,
    },
    /// Continue a stored campaign without recomputing recorded samples.
    Resume {
        id: String,
        #[arg(long)]
        workers: Option<usize>,
        /// Continue with this total budget.
        #[arg(long, conflicts_with = "tolerance")]
        budget: Option<f64>,
        /// Continue with this tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, hide = true)]
        max_samples: Option<usize>,
    },
    /// Regenerate statistics products from the ledger.
    Report {
        id: String,
        /// Output to estimate; the steering output by default.
        #[arg(long)]
        qoi: Option<String>,
        /// Comma-separated products: bands, pdf, joint, correlation, smoothing, speedup.
        #[arg(long, value_delimiter = ',')]
        products: Option<Vec<String>>,
    },
    /// Print the OF-MLMC / MLMC / MC comparison table.
    Compare { id: String },
}

fn print_progress(state: &IterationState) {
    for line in state.progress_lines() {
        println!("{line}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Interrupted { .. } = e {
                eprintln!("the campaign can be continued with `ofmlmc resume`");
            }
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let root = resolve_store_root(cli.store.as_deref());
    match cli.command {
        Command::Run {
            config,
            workers,
            max_samples,
        } => {
            let options = CommandOptions {
                store_root: root.clone(),
                workers,
                max_samples,
                objective: None,
            };
            let report = cli::run(&config, &options, print_progress)?;
            print!("{}", report.summary());
            println!(
                "report written to {}",
                root.join(&report.campaign).join("report").display()
            );
        }
        Command::Resume {
            id,
            workers,
            budget,
            tolerance,
            max_samples,
        } => {
            let objective = match (budget, tolerance) {
                (Some(b), _) => Some(Objective::Budget(b)),
                (None, Some(t)) => Some(Objective::Tolerance(t)),
                (None, None) => None,
            };
            let options = CommandOptions {
                store_root: root,
                workers,
                max_samples,
                objective,
            };
            match cli::resume(&id, &options, print_progress)? {
                ResumeOutcome::Complete => {
                    println!("campaign {id} is already complete; nothing to do")
                }
                ResumeOutcome::Finished(report) => print!("{}", report.summary()),
            }
        }
        Command::Report { id, qoi, products } => {
            let report = cli::report(&root, &id, &ReportOptions { qoi, products })?;
            print!("{}", report.summary());
            for p in &report.products {
                println!("  {:<12} {}", p.product, p.file);
            }
        }
        Command::Compare { id } => {
            let table = cli::compare(&root, &id)?;
            print!("{}", table.to_text());
        }
    }
    Ok(())
}
