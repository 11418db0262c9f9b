//! Command-line front end: `spinkubo <subcommand> <config> [--output-dir D] [--threads T]`.
//!
//! Exit codes: 0 success, 1 output failure, 2 configuration error, 3 numerical
//! failure. Failures are reported on stderr as one JSON object.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "spinkubo",
    version,
    about = "Spin transport coefficients of periodic lattice models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    pub config: PathBuf,
    /// Overrides `[output] directory`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band energies on the Brillouin-zone grid (bands.csv).
    Bands(CommonArgs),
    /// Spectral gap and Fermi level (gap.json).
    Gap(CommonArgs),
    /// Fermi projection kernel and its decay fit.
    Projector(CommonArgs),
    /// Spin conductivity, torque and charge response (sigma.json).
    Sigma(CommonArgs),
    /// Spin torque response (torque.json).
    Torque(CommonArgs),
    /// Spin conductance partial sums (conductance.csv).
    Conductance(CommonArgs),
    /// Chern numbers, total and per spin sector (chern.json).
    Chern(CommonArgs),
    /// Conductance split into approximate-position parts.
    Decomposition(CommonArgs),
    /// Pipeline versus dense torus comparison (oracle.csv).
    OracleCheck(CommonArgs),
    /// Parameter sweep (sweep.csv).
    Sweep(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bands(_) => "bands",
            Command::Gap(_) => "gap",
            Command::Projector(_) => "projector",
            Command::Sigma(_) => "sigma",
            Command::Torque(_) => "torque",
            Command::Conductance(_) => "conductance",
            Command::Chern(_) => "chern",
            Command::Decomposition(_) => "decomposition",
            Command::OracleCheck(_) => "oracle-check",
            Command::Sweep(_) => "sweep",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Bands(a)
            | Command::Gap(a)
            | Command::Projector(a)
            | Command::Sigma(a)
            | Command::Torque(a)
            | Command::Conductance(a)
            | Command::Chern(a)
            | Command::Decomposition(a)
            | Command::OracleCheck(a)
            | Command::Sweep(a) => a,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{message}")]
    Numerical { kind: String, message: String },
    #[error("cannot write output: {0}")]
    Output(String),
}

/// Innermost variant name of a nested error enum's `Debug` output,
/// e.g. `Spectral(GapClosed { .. })` gives `GapClosed`.
fn variant_name(debug: &str) -> String {
    let mut s = debug;
    loop {
        let end = s
            .find(|c: char| !c.is_alphanumeric() && c != '_')
            .unwrap_or(s.len());
        let (name, rest) = s.split_at(end);
        match rest.strip_prefix('(') {
            Some(inner) if inner.starts_with(|c: char| c.is_ascii_uppercase()) => s = inner,
            _ => return name.to_string(),
        }
    }
}

impl CliError {
    pub fn numerical<E: std::error::Error + std::fmt::Debug>(e: E) -> Self {
        CliError::Numerical {
            kind: variant_name(&format!("{e:?}")),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> String {
        match self {
            CliError::Config(_) => "ConfigInvalid".into(),
            CliError::Numerical { kind, .. } => kind.clone(),
            CliError::Output(_) => "OutputFailed".into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Output(_) => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}

/// Loads the configuration, prepares the output directory and runs one subcommand.
pub fn execute(command: &Command) -> Result<serde_json::Value, CliError> {
    let args = command.args();
    let cfg = RunConfig::load(&args.config)?;
    let dir = args
        .output_dir
        .clone()
        .unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let run = || match command {
        Command::Bands(_) => commands::bands(&cfg, &dir),
        Command::Gap(_) => commands::gap(&cfg, &dir),
        Command::Projector(_) => commands::projector(&cfg, &dir),
        Command::Sigma(_) => commands::sigma(&cfg, &dir),
        Command::Torque(_) => commands::torque(&cfg, &dir),
        Command::Conductance(_) => commands::conductance(&cfg, &dir),
        Command::Chern(_) => commands::chern(&cfg, &dir),
        Command::Decomposition(_) => commands::decomposition(&cfg, &dir),
        Command::OracleCheck(_) => commands::oracle(&cfg, &dir),
        Command::Sweep(_) => commands::sweep(&cfg, &dir),
    };
    match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| CliError::Output(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = serde_json::json!({ "error": "UsageError", "message": e.to_string(), "exit_code": 2 });
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli.command) {
        Ok(v) => {
            commands::print_summary(&v);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_variant_names() {
        assert_eq!(
            variant_name("Spectral(GapClosed { lower: 1.0, upper: 2.0 })"),
            "GapClosed"
        );
        assert_eq!(
            variant_name("TailNotControlled { density: 1.0, cutoff: 3 }"),
            "TailNotControlled"
        );
        assert_eq!(
            variant_name("Trace(Kernel(WindowTooSmall { omitted: 1.0 }))"),
            "WindowTooSmall"
        );
        assert_eq!(variant_name("RankNotConstant"), "RankNotConstant");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            CliError::Config(ConfigError::Invalid("x".into())).exit_code(),
            2
        );
        let e = CliError::numerical(crate::spectral::SpectralError::MuOutsideGap {
            mu: 2.0,
            lower: -1.0,
            upper: 1.0,
        });
        assert_eq!(e.exit_code(), 3);
        assert_eq!(e.kind(), "MuOutsideGap");
    }
}
