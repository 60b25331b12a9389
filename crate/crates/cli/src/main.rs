//! `mnl`: detect, eliminate and mitigate measurement noise on simulated devices.

mod commands;
mod config;
mod device;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

const DEVICE_HELP: &str = "Measurement device: ry:N:ANGLE | ideal:N | povm:PATH | confusion:PATH";

const GLOBAL_HELP: &str = "\
Devices:
  ry:N:ANGLE      N qubits, each rotated by Ry(ANGLE) before a Z readout
  ideal:N         noiseless N-qubit Z readout
  povm:PATH       POVM JSON {\"n\": int, \"elements\": [[[re, im], ...row-major], ...]}
  confusion:PATH  classical device from calibration JSON {\"n\": int, \"A\": [row-major floats]}

Configuration:
  --config FILE takes a JSON object whose keys match the long flags with dashes
  replaced by underscores (seed, threads, device, state, k, shots, harmonics, mode,
  method, methods, twirls, elimination_mode, mitigator, mitigators, repeats, phis,
  restarts, layers, sweeps, tol, calibration, calibration_shots, input, output, csv,
  csv_dir). Unknown keys are rejected. Flags override the file. The seed falls back
  to the MNL_SEED environment variable, then to 0.

Outputs are written atomically; JSON goes to standard output when --output is absent.
Bitstrings list qubit 0 first. Identical settings and seed give byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 numerical or validation error.";

#[derive(Parser, Debug)]
#[command(name = "mnl", version, about = "Simulate, detect, eliminate and mitigate quantum measurement noise")]
#[command(after_help = GLOBAL_HELP)]
struct Cli {
    /// JSON file with default values for any flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root RNG seed (default: $MNL_SEED, else 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the coherent-noise witness at random phases and fit its Fourier series
    #[command(after_help = commands::DETECT_HELP)]
    Detect(DetectArgs),
    /// Measure a state through a twirled device and report the outcome distribution
    #[command(after_help = commands::ELIMINATE_HELP)]
    Eliminate(EliminateArgs),
    /// Correct an observed distribution with a calibration matrix
    #[command(after_help = commands::MITIGATE_HELP)]
    Mitigate(MitigateArgs),
    /// Reproduce the Mermin, GHZ-parity and VQE benchmarks
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Export, inspect, twirl and calibrate devices
    #[command(subcommand)]
    PovmTools(PovmToolsCommand),
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long, help = DEVICE_HELP)]
    pub device: Option<String>,
    /// Number of random phases [default: 100]
    #[arg(long)]
    pub k: Option<usize>,
    /// Shots per probe and per maximally-mixed reference [default: 8192]
    #[arg(long)]
    pub shots: Option<u64>,
    /// Highest fitted harmonic [default: qubit count]
    #[arg(long)]
    pub harmonics: Option<usize>,
    /// shots | analytic [default: shots]
    #[arg(long)]
    pub mode: Option<String>,
    /// Fit report path
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Directory for per-outcome estimate CSVs
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EliminateArgs {
    #[arg(long, help = DEVICE_HELP)]
    pub device: Option<String>,
    /// Twirl set: iz | xy | pauli [default: pauli]
    #[arg(long)]
    pub method: Option<String>,
    /// sampled | exhaustive | analytic [default: sampled]
    #[arg(long)]
    pub mode: Option<String>,
    /// Random Paulis drawn in sampled mode [default: 100]
    #[arg(long)]
    pub twirls: Option<usize>,
    /// Shots per Pauli (total shots in analytic mode) [default: exact probabilities]
    #[arg(long)]
    pub shots: Option<u64>,
    /// Input state: zero | basis:BITS | plus:THETA | mixed | ghz | cat:PHI [default: zero]
    #[arg(long)]
    pub state: Option<String>,
    /// Distribution output path
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MitigateArgs {
    /// Observed distribution JSON {"n": int, "p": [floats]}
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Calibration matrix JSON; alternative to --device
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Device to calibrate when no --calibration file is given
    #[arg(long)]
    pub device: Option<String>,
    /// Shots per basis input when calibrating a device [default: exact]
    #[arg(long)]
    pub calibration_shots: Option<u64>,
    /// none | inverse | lsq | ibu [default: lsq]
    #[arg(long)]
    pub mitigator: Option<String>,
    /// Result path
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Measurement settings shared by the experiments.
#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(long, help = DEVICE_HELP)]
    pub device: Option<String>,
    /// shots | analytic [default: shots]
    #[arg(long)]
    pub mode: Option<String>,
    /// Shots per measured basis [default: 8192]
    #[arg(long)]
    pub shots: Option<u64>,
    /// How twirling is applied: analytic | exhaustive | sampled [default: analytic]
    #[arg(long)]
    pub elimination_mode: Option<String>,
    /// Random Paulis per estimate in sampled elimination mode [default: 100]
    #[arg(long)]
    pub twirls: Option<usize>,
    /// Summary JSON path
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Results CSV path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// Four-qubit Mermin polynomial for every method/mitigator pair
    #[command(after_help = commands::MERMIN_HELP)]
    Mermin {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Comma-separated: raw, iz, xy, pauli [default: all]
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Comma-separated: none, inverse, lsq, ibu [default: all]
        #[arg(long, value_delimiter = ',')]
        mitigators: Option<Vec<String>>,
        /// Independent estimates per cell [default: 1000; 1 in analytic mode]
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Parity of the rotated GHZ state over a grid of phases
    #[command(after_help = commands::GHZ_HELP)]
    Ghz {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Comma-separated: raw, iz, xy, pauli [default: raw,pauli]
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// none | inverse | lsq | ibu [default: none]
        #[arg(long)]
        mitigator: Option<String>,
        /// Number of phases evenly spaced in [0, 2π) [default: 32]
        #[arg(long)]
        phis: Option<usize>,
        /// Independent estimates per phase [default: 100; 1 in analytic mode]
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// H2 ground energy with a layered Ry/CZ ansatz and sequential minimal optimization
    #[command(after_help = commands::VQE_HELP)]
    Vqe {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// raw | iz | xy | pauli [default: raw]
        #[arg(long)]
        method: Option<String>,
        /// none | inverse | lsq | ibu [default: none]
        #[arg(long)]
        mitigator: Option<String>,
        /// Independent random initializations [default: 10]
        #[arg(long)]
        restarts: Option<usize>,
        /// Ansatz layers [default: 6]
        #[arg(long)]
        layers: Option<usize>,
        /// Maximum optimizer sweeps [default: 30]
        #[arg(long)]
        sweeps: Option<usize>,
        /// Stop when a sweep lowers the energy by less than this [default: 1e-6]
        #[arg(long)]
        tol: Option<f64>,
    },
}

/// Device selection plus output path for the POVM utilities.
#[derive(Args, Debug)]
pub struct ToolArgs {
    #[arg(long, help = DEVICE_HELP)]
    pub device: Option<String>,
    /// Output path
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum PovmToolsCommand {
    /// Write the device as POVM JSON
    Export(ToolArgs),
    /// Summary statistics of the device
    #[command(after_help = commands::INFO_HELP)]
    Info(ToolArgs),
    /// Pauli transfer matrix {"n": int, "ptm": [[floats]]}, rows and columns in Pauli index order
    Ptm(ToolArgs),
    /// Write the effective POVM after twirling
    Twirl {
        #[command(flatten)]
        tool: ToolArgs,
        /// iz | xy | pauli [default: pauli]
        #[arg(long)]
        method: Option<String>,
    },
    /// Write the device's calibration matrix JSON {"n": int, "A": [row-major floats]}
    Calibrate {
        #[command(flatten)]
        tool: ToolArgs,
        /// Shots per basis input [default: exact]
        #[arg(long)]
        calibration_shots: Option<u64>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = file.resolve_seed(cli.seed)?;
    if let Some(t) = config::pick(cli.threads, &file.threads) {
        let t = config::positive("threads", t)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    match cli.command {
        Command::Detect(a) => commands::detect(a, &file, seed),
        Command::Eliminate(a) => commands::eliminate(a, &file, seed),
        Command::Mitigate(a) => commands::mitigate(a, &file, seed),
        Command::Experiment(ExperimentCommand::Mermin {
            pipeline,
            methods,
            mitigators,
            repeats,
        }) => commands::mermin(pipeline, methods, mitigators, repeats, &file, seed),
        Command::Experiment(ExperimentCommand::Ghz {
            pipeline,
            methods,
            mitigator,
            phis,
            repeats,
        }) => commands::ghz(pipeline, methods, mitigator, phis, repeats, &file, seed),
        Command::Experiment(ExperimentCommand::Vqe {
            pipeline,
            method,
            mitigator,
            restarts,
            layers,
            sweeps,
            tol,
        }) => commands::vqe(
            pipeline,
            commands::VqeOptions {
                method,
                mitigator,
                restarts,
                layers,
                sweeps,
                tol,
            },
            &file,
            seed,
        ),
        Command::PovmTools(t) => match t {
            PovmToolsCommand::Export(a) => commands::export(a, &file),
            PovmToolsCommand::Info(a) => commands::info(a, &file),
            PovmToolsCommand::Ptm(a) => commands::ptm(a, &file),
            PovmToolsCommand::Twirl { tool, method } => commands::twirl(tool, method, &file),
            PovmToolsCommand::Calibrate { tool, calibration_shots } => {
                commands::calibrate_tool(tool, calibration_shots, &file, seed)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        // clap exits 0 for --help/--version and 2 for usage errors
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mnl: {e}");
            ExitCode::from(e.code)
        }
    }
}
