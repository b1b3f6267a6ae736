//! `opo` — spectra, squeezing, scaling surveys, and quantum trajectories for
//! a single two-level atom inside a weakly driven degenerate parametric
//! oscillator. Rates are quoted in units of the atomic linewidth gamma.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use opo_cli::{exit_code, resolve, CliResult, RunSummary, Scenario, ScenarioConfig, TaskKind};
use opo_qed::presets::{PresetTask, PRESETS};

#[derive(Parser)]
#[command(
    name = "opo",
    version,
    about = "Single-atom optical parametric oscillator: spectra, squeezing, and quantum trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in parameter presets
    Presets,
    /// Compute an incoherent optical spectrum (transmitted or fluorescent)
    Spectrum(SpectrumArgs),
    /// Compute squeezing spectra at quadrature angles 0 and 90 degrees
    Squeeze(GridArgs),
    /// Fit weak-drive scaling exponents of the stationary state
    Scaling(CommonArgs),
    /// Sample one conditioned quantum trajectory
    Trajectory(TrajectoryArgs),
    /// Average an ensemble of quantum trajectories
    Ensemble(TrajectoryArgs),
    /// Deterministic conditioned evolution after a cavity emission
    Conditioned(TrajectoryArgs),
    /// Cross-check the spectral engine against its time-domain oracle
    Validate(ValidateArgs),
}

/// Flags shared by every computing subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Built-in parameter set to start from (see `opo presets`)
    #[arg(long)]
    preset: Option<String>,
    /// JSON scenario file layered over the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory the output files are written into
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Atom-cavity coupling g (units of gamma)
    #[arg(long)]
    g: Option<f64>,
    /// Cavity field decay rate kappa (units of gamma)
    #[arg(long)]
    kappa: Option<f64>,
    /// Atomic decay rate gamma (fixes the unit scale; default 1)
    #[arg(long)]
    gamma: Option<f64>,
    /// Two-photon pump amplitude F
    #[arg(long)]
    drive: Option<f64>,
    /// Total-quanta truncation of the joint state space
    #[arg(long)]
    n_max: Option<usize>,
}

impl CommonArgs {
    fn flags(&self) -> ScenarioConfig {
        ScenarioConfig {
            g: self.g,
            kappa: self.kappa,
            gamma: self.gamma,
            drive: self.drive,
            n_max: self.n_max,
            ..Default::default()
        }
    }

    fn resolve_with(&self, kind: TaskKind, flags: ScenarioConfig) -> CliResult<Scenario> {
        let file = self
            .config
            .as_deref()
            .map(ScenarioConfig::from_file)
            .transpose()?;
        resolve(kind, self.preset.as_deref(), file.as_ref(), &flags)
    }
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Half-width of the symmetric frequency grid
    #[arg(long)]
    omega_max: Option<f64>,
    /// Number of grid points (odd counts sample omega = 0 exactly)
    #[arg(long)]
    omega_points: Option<usize>,
}

impl GridArgs {
    fn resolve(&self, kind: TaskKind) -> CliResult<Scenario> {
        let mut flags = self.common.flags();
        flags.omega_max = self.omega_max;
        flags.omega_points = self.omega_points;
        self.common.resolve_with(kind, flags)
    }
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Which emission to analyze: "transmitted" or "fluorescent"
    #[arg(long)]
    channel: Option<String>,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Seed of the reproducible random stream family
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trajectories in an ensemble
    #[arg(long)]
    trajectories: Option<usize>,
    /// Which stream of the seed a single trajectory uses
    #[arg(long)]
    index: Option<u64>,
    /// Length of the simulated window
    #[arg(long)]
    t_end: Option<f64>,
    /// Spacing of the observable samples
    #[arg(long)]
    sample_dt: Option<f64>,
}

impl TrajectoryArgs {
    fn resolve(&self) -> CliResult<Scenario> {
        let mut flags = self.common.flags();
        flags.seed = self.seed;
        flags.trajectories = self.trajectories;
        flags.index = self.index;
        flags.t_end = self.t_end;
        flags.sample_dt = self.sample_dt;
        self.common.resolve_with(TaskKind::Trajectory, flags)
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Fault injection: perturb the spectral path to prove the check trips
    #[arg(long, hide = true)]
    corrupt_regression: bool,
}

fn list_presets() -> RunSummary {
    let mut lines = vec![format!(
        "{:<8} {:<12} {:>7} {:>7} {:>7} {:>9} {:>6}  note",
        "name", "task", "g", "kappa", "gamma", "drive", "n_max"
    )];
    for p in PRESETS {
        let task = match p.task {
            PresetTask::Transmitted => "transmitted",
            PresetTask::Fluorescent => "fluorescent",
            PresetTask::Trajectory => "trajectory",
        };
        lines.push(format!(
            "{:<8} {:<12} {:>7} {:>7} {:>7} {:>9} {:>6}  {}",
            p.name, task, p.g, p.kappa, p.gamma, p.drive, p.n_max, p.note
        ));
    }
    RunSummary {
        lines,
        files: Vec::new(),
    }
}

fn execute(cli: Cli) -> CliResult<RunSummary> {
    match cli.command {
        Command::Presets => Ok(list_presets()),
        Command::Spectrum(args) => {
            let mut flags = args.grid.common.flags();
            flags.omega_max = args.grid.omega_max;
            flags.omega_points = args.grid.omega_points;
            flags.channel = args.channel.clone();
            let scn = args.grid.common.resolve_with(TaskKind::Spectral, flags)?;
            opo_cli::run_spectrum(&scn, &args.grid.common.out)
        }
        Command::Squeeze(args) => {
            let scn = args.resolve(TaskKind::Spectral)?;
            opo_cli::run_squeeze(&scn, &args.common.out)
        }
        Command::Scaling(args) => {
            let scn = args.resolve_with(TaskKind::Spectral, args.flags())?;
            opo_cli::run_scaling(&scn, &args.out)
        }
        Command::Trajectory(args) => {
            let scn = args.resolve()?;
            opo_cli::run_trajectory(&scn, &args.common.out)
        }
        Command::Ensemble(args) => {
            let scn = args.resolve()?;
            opo_cli::run_ensemble(&scn, &args.common.out)
        }
        Command::Conditioned(args) => {
            let scn = args.resolve()?;
            opo_cli::run_conditioned(&scn, &args.common.out)
        }
        Command::Validate(args) => {
            let scn = args.grid.resolve(TaskKind::Spectral)?;
            opo_cli::run_validate(&scn, &args.grid.common.out, args.corrupt_regression)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}
