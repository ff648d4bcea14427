//! `cts` command-line front end.

mod commands;
mod error;
mod svg;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cts", version, about = "Clustered tensegrity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a structure file; prints "pass" or the list of violations.
    Validate { structure: PathBuf },
    /// Prestress modes, or anchored prestress design with --anchor.
    Prestress(PrestressArgs),
    /// Quasi-static path under a schedule.
    Static(StaticArgs),
    /// Nonlinear time history.
    Dynamic(DynamicArgs),
    /// Natural frequencies and mode shapes at the stored configuration.
    Modal(ModalArgs),
    /// Linearized state-space matrices.
    Linearize(LinearizeArgs),
    /// Closed-loop shape control.
    Control(ControlArgs),
    /// Built-in structures.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Parallel parameter sweeps (thread count from CTS_THREADS).
    Sweep {
        #[command(subcommand)]
        command: SweepCommand,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Tangent {
    Consistent,
    ForceDensity,
}

impl From<Tangent> for cts::assembly::TangentForm {
    fn from(t: Tangent) -> Self {
        match t {
            Tangent::Consistent => Self::Consistent,
            Tangent::ForceDensity => Self::ForceDensity,
        }
    }
}

#[derive(Args, Debug)]
struct Output {
    /// CSV destination (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Directory for one SVG line plot per tracked column.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Column to plot, e.g. n3_y_m (repeatable; default: every free coordinate).
    #[arg(long = "track")]
    track: Vec<String>,
}

#[derive(Args, Debug)]
struct PrestressArgs {
    structure: PathBuf,
    /// Anchor `element=force` (1-based element, N; repeat once per mode).
    #[arg(long = "anchor")]
    anchors: Vec<String>,
    /// Write a copy of the structure with the designed rest lengths.
    #[arg(long)]
    write: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StaticArgs {
    structure: PathBuf,
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    substeps: usize,
    /// Absolute residual tolerance, N (default: scaled roundoff floor).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Tangent::Consistent)]
    tangent: Tangent,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct DynamicArgs {
    structure: PathBuf,
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// End time, s (default: end of the schedule, or 1 s).
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 100)]
    stride: usize,
    /// Damping scale ζ.
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    /// Skip the step-size estimate (it only warns).
    #[arg(long)]
    no_stability_check: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ModalArgs {
    structure: PathBuf,
    #[arg(long, value_enum, default_value_t = Tangent::Consistent)]
    tangent: Tangent,
    #[arg(long, default_value_t = cts::linear::DEFAULT_RIGID_THRESHOLD)]
    rigid_threshold: f64,
    /// Frequency table as CSV.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Mass-normalized mode shapes as CSV, one row per mode.
    #[arg(long)]
    shapes: Option<PathBuf>,
    /// Write K_Taa and M_aa as dense text matrices into this directory.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LinearizeArgs {
    structure: PathBuf,
    /// Directory for A.txt, B.txt, M_aa.txt, D_aa.txt, K_Taa.txt.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    #[arg(long, value_enum, default_value_t = Tangent::Consistent)]
    tangent: Tangent,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AllocationArg {
    MinimumNorm,
    NearestCurrent,
}

#[derive(Args, Debug)]
struct ControlArgs {
    structure: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    /// External loads and boundary motion (no active rest lengths).
    #[arg(long)]
    loads: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 2.0)]
    t_end: f64,
    #[arg(long, default_value_t = 100)]
    stride: usize,
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    /// Override the allocation rule of the target file.
    #[arg(long, value_enum)]
    allocation: Option<AllocationArg>,
    #[command(flatten)]
    output: Output,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Tbar,
    Tower2,
    Levy,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Support {
    Pinned,
    Planar,
}

#[derive(Args, Debug, Clone)]
struct LevyOptions {
    /// Number of sectors (multiple of 3).
    #[arg(long, default_value_t = 6)]
    complexity: usize,
    /// Outer ring radius, m.
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    /// Inner ring radius over intermediate ring radius.
    #[arg(long, default_value_t = 0.5)]
    deployment: f64,
}

#[derive(Subcommand, Debug)]
enum ScenarioCommand {
    /// Write a structure file (and optionally its schedule and targets).
    Gen {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Support::Pinned)]
        support: Support,
        #[command(flatten)]
        levy: LevyOptions,
        /// Also write the scenario's actuation schedule.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Also write control targets (tbar only).
        #[arg(long)]
        targets: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum SweepCommand {
    /// Levy dome over a range of deployment ratios.
    Levy {
        #[arg(long, default_value_t = 0.3)]
        from: f64,
        #[arg(long, default_value_t = 0.9)]
        to: f64,
        #[arg(long, default_value_t = 7)]
        steps: usize,
        #[arg(long, default_value_t = 6)]
        complexity: usize,
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Dynamic deployment at several durations against the quasi-static end state.
    Speed {
        structure: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        /// Deployment durations, s.
        #[arg(long, value_delimiter = ',', required = true)]
        durations: Vec<f64>,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        #[arg(long, default_value_t = 0.0)]
        damping: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
