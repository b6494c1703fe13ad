use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wormsim::exec::{default_workers, execute, ExecOptions};
use wormsim::spec::load_spec;

/// Worm epidemics on wireless ad hoc networks.
#[derive(Parser)]
#[command(name = "wormsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a spec and write CSV results.
    Run {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long, env = "WORMSIM_WORKERS")]
        workers: Option<usize>,
        /// Wipe an existing output directory.
        #[arg(long, conflicts_with = "resume")]
        force: bool,
        /// Continue an interrupted run, reusing finished cells.
        #[arg(long)]
        resume: bool,
        /// Suppress per-cell progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Recompute thresholds.csv and the collapse summary from stored cells.
    Analyze { dir: PathBuf },
    /// Build the spec's graphs and print their metrics as CSV.
    GraphMetrics {
        spec: PathBuf,
        /// Append degree histograms.
        #[arg(long)]
        histogram: bool,
        /// Write edge lists and node positions to this directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            spec,
            out,
            workers,
            force,
            resume,
            quiet,
        } => {
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(e) => return fail(1, &e.to_string()),
            };
            let opts = ExecOptions {
                workers: workers.unwrap_or_else(default_workers),
                force,
                resume,
                progress: !quiet,
            };
            let res = execute(&spec, &out, &opts)
                .and_then(|r| wormsim::output::emit(&r, &out).map(|w| (r, w)));
            match res {
                Ok((r, warnings)) => {
                    for w in warnings.iter().skip(r.warnings.len()) {
                        eprintln!("warning: {w}");
                    }
                    eprintln!(
                        "{} cells ({} computed) written to {}",
                        r.cells.len(),
                        r.computed_cells,
                        out.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(2, &format!("{e:#}")),
            }
        }
        Command::Analyze { dir } => match wormsim::analyze::analyze(&dir) {
            Ok((report, warnings)) => {
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                print!("{report}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(2, &format!("{e:#}")),
        },
        Command::GraphMetrics {
            spec,
            histogram,
            export,
        } => {
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(e) => return fail(1, &e.to_string()),
            };
            match wormsim::graph_metrics(&spec, histogram, export.as_deref()) {
                Ok(csv) => {
                    print!("{csv}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(2, &format!("{e:#}")),
            }
        }
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}
