//! Library half of the `opo` command-line tool: scenario configuration,
//! deterministic output writing, and the command implementations. The binary
//! in `main.rs` only parses arguments and maps errors to exit codes.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    run_conditioned, run_ensemble, run_scaling, run_spectrum, run_squeeze, run_trajectory,
    run_validate, RunSummary,
};
pub use config::{resolve, Scenario, ScenarioConfig, SpectrumChannel, TaskKind};

/// Everything completed.
pub const EXIT_OK: i32 = 0;
/// The request itself was unusable: bad flags, bad config file, bad
/// parameters. Nothing was written.
pub const EXIT_CONFIG: i32 = 2;
/// The request was valid but the computation could not be completed or did
/// not validate.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] opo_qed::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

/// Process exit code for an error: problems a user can fix by changing the
/// request are configuration errors; everything else is a numerical or
/// environment failure.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Config(_) => EXIT_CONFIG,
        CliError::Core(opo_qed::Error::InvalidParams(_))
        | CliError::Core(opo_qed::Error::InsufficientGrid { .. }) => EXIT_CONFIG,
        CliError::Core(_) => EXIT_NUMERICAL,
        CliError::Io(_) => EXIT_NUMERICAL,
    }
}
