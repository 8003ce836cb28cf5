use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod svg;

use commands::{Outcome, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "pra", version, about = "Patient-to-room assignment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Batch {
    /// Instance documents; several are processed independently.
    #[arg(long = "instance", required = true, num_args = 1..)]
    pub instances: Vec<PathBuf>,
    /// Output file, or a directory when several instances are given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Instances processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Clone)]
pub struct BackendArgs {
    /// External solver command with {model_path}, {solution_path} and
    /// {time_limit} placeholders; the embedded search is used otherwise.
    #[arg(long)]
    pub backend_cmd: Option<String>,
    /// Decision budget of the embedded search per objective stage.
    #[arg(long, default_value_t = 10_000_000)]
    pub node_limit: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Per-period combinatorial feasibility.
    Check {
        #[command(flatten)]
        batch: Batch,
    },
    /// Per-period bound on private single-room days.
    Smax {
        #[command(flatten)]
        batch: Batch,
    },
    /// Solve one integer-program variant and write the assignment.
    Solve {
        #[command(flatten)]
        batch: Batch,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value = "H")]
        variant: String,
        /// Seconds per objective stage.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Add pairwise conflict constraints.
        #[arg(long)]
        conflicts: bool,
        /// Add the per-period objective cuts.
        #[arg(long)]
        cuts: bool,
    },
    /// Rolling-horizon run over every period.
    Dynamic {
        #[command(flatten)]
        batch: Batch,
        #[command(flatten)]
        backend: BackendArgs,
        /// Seconds for the Ostar stage of the cascade.
        #[arg(long, default_value_t = 20.0)]
        time_limit: f64,
        /// Seconds per objective stage for the other cascade stages.
        #[arg(long)]
        stage_time_limit: Option<f64>,
        /// SVG chart of per-iteration runtimes.
        #[arg(long)]
        chart: Option<PathBuf>,
        /// Realized assignment document.
        #[arg(long)]
        assignment: Option<PathBuf>,
    },
    /// Generate a synthetic instance.
    Generate(commands::GenerateArgs),
    /// Solve an LP file with the embedded search (external backend shim).
    #[command(hide = true)]
    Adapter {
        model: PathBuf,
        solution: PathBuf,
        time_limit: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check { batch } => commands::batch(&batch, "csv", commands::check),
        Command::Smax { batch } => commands::batch(&batch, "csv", commands::smax),
        Command::Solve {
            batch,
            backend,
            variant,
            time_limit,
            conflicts,
            cuts,
        } => match commands::SolveOptions::new(&backend, &variant, time_limit, conflicts, cuts) {
            Ok(opts) => commands::batch(&batch, "assignment.json", |path, out| commands::solve(path, out, &opts)),
            Err(e) => Outcome::error(e, EXIT_INPUT),
        },
        Command::Dynamic {
            batch,
            backend,
            time_limit,
            stage_time_limit,
            chart,
            assignment,
        } => match commands::DynamicOptions::new(&backend, time_limit, stage_time_limit) {
            Ok(opts) => commands::batch(&batch, "csv", |path, out| {
                let chart = commands::derived_path(chart.as_deref(), path, "svg", batch.instances.len());
                let assignment = commands::derived_path(assignment.as_deref(), path, "assignment.json", batch.instances.len());
                commands::dynamic(path, out, chart.as_deref(), assignment.as_deref(), &opts)
            }),
            Err(e) => Outcome::error(e, EXIT_INPUT),
        },
        Command::Generate(args) => commands::generate_cmd(&args),
        Command::Adapter {
            model,
            solution,
            time_limit,
        } => commands::adapter(&model, &solution, time_limit.as_deref()),
    };
    outcome.emit()
}
