//! Command-line front end: scenario listing, single runs, sweeps and
//! transcript replay.
//!
//! [`main_with`] takes the arguments, environment, HTTP transport and output
//! streams explicitly, so the binary and the tests drive the same code.

mod commands;
mod config;
mod error;

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use precoding_pipeline::remote::Transport;

pub use config::{BackendKind, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "agentic-precoding",
    version,
    about = "Agentic solver generation and benchmarks for MIMO precoding"
)]
pub struct Cli {
    /// TOML configuration file with dotted keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for channel draws and randomized methods.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON array of catalog entries merged over the built-in scenarios.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scenario catalog commands.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Solve one scenario instance with the pipeline or a single method.
    Run(RunArgs),
    /// Monte-Carlo sweep writing CSV, Markdown and plot-series reports.
    Sweep(SweepArgs),
    /// Rebuild a recorded pipeline run and re-execute its plans.
    Replay { transcript: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioAction {
    /// Print the catalog entries.
    List,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: u32,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub snr: f64,
    /// `pipeline`, a baseline id such as `zf`, or a solver name.
    #[arg(long, default_value = "pipeline")]
    pub method: String,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Fault injection: iteration limit of the first plan.
    #[arg(long)]
    pub fault_max_iter: Option<u32>,
    /// Fault injection: post-processing step appended to the first plan.
    #[arg(long)]
    pub fault_post: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snrs: Option<Vec<f64>>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// Worker threads (default: one per processor).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Report directory; defaults to `<paths.report_dir>/<run_id>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything a command may touch outside its arguments.
pub struct Context<'a> {
    pub env: HashMap<String, String>,
    pub transport: Arc<dyn Transport>,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I, ctx: &mut Context<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(ctx.stdout, "{e}");
                return 0;
            }
            let _ = write!(ctx.stderr, "{e}");
            let err = CliError::Usage(e.kind().to_string());
            let _ = writeln!(ctx.stderr, "{}", err.to_line());
            return err.exit_code();
        }
    };
    match commands::dispatch(&cli, ctx) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(ctx.stderr, "{}", e.to_line());
            e.exit_code()
        }
    }
}
