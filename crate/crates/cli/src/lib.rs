//! Command-line front end: one subcommand per figure-style dataset plus a
//! validation run. Every run writes a JSON manifest next to its outputs that
//! `wqed rerun` can replay exactly.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use commands::{
    DdiCurveArgs, EfficiencyMapArgs, LocalizationArgs, PmaxArgs, RunContext, SpectrumArgs, ValidateArgs,
};
use config::{Config, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] wqed_core::Error),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 0 ok, 1 usage or input error, 2 numerical failure, 3 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Validation(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wqed", version, about = "Single-photon routing in chiral waveguide-QED ladders")]
pub struct Cli {
    /// TOML file with [emitter], [units] and [run] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Dipole coupling versus separation, periodic and disorder-averaged.
    DdiCurve(DdiCurveArgs),
    /// Port probabilities versus detuning.
    Spectrum(SpectrumArgs),
    /// Peak Port-4 probability versus chain length.
    Pmax(PmaxArgs),
    /// Routing efficiency over detuning and separation.
    EfficiencyMap(EfficiencyMapArgs),
    /// Localization length versus disorder strength.
    Localization(LocalizationArgs),
    /// Run the solver property suites.
    Validate(ValidateArgs),
    /// Replay a run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DdiCurve(_) => "ddi-curve",
            Command::Spectrum(_) => "spectrum",
            Command::Pmax(_) => "pmax",
            Command::EfficiencyMap(_) => "efficiency-map",
            Command::Localization(_) => "localization",
            Command::Validate(_) => "validate",
            Command::Rerun(_) => "rerun",
        }
    }

    fn primary_output(&self) -> Option<&Path> {
        match self {
            Command::DdiCurve(a) => Some(&a.output),
            Command::Spectrum(a) => Some(&a.output),
            Command::Pmax(a) => Some(&a.output),
            Command::EfficiencyMap(a) => Some(&a.output),
            Command::Localization(a) => Some(&a.output),
            Command::Validate(a) => Some(&a.output),
            Command::Rerun(_) => None,
        }
    }
}

pub const MANIFEST_SCHEMA: &str = "wqed.manifest/1";

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: String,
    pub subcommand: String,
    pub command: Command,
    pub config: Config,
    pub seed: u64,
    pub threads: Option<usize>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub duration_s: f64,
    /// Set when the run ended in an error (validation failures still write a manifest).
    pub error: Option<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad manifest {}: {e}", path.display())))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(CliError::Usage(format!("unsupported manifest schema `{}`", m.schema)));
        }
        Ok(m)
    }
}

/// Manifest path for a command: the primary output with `.manifest.json`.
pub fn manifest_path(out_dir: &Path, command: &Command) -> PathBuf {
    let stem = command
        .primary_output()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| command.name().to_string());
    let parent = command.primary_output().and_then(Path::parent).unwrap_or(Path::new(""));
    out_dir.join(parent).join(format!("{stem}.manifest.json"))
}

/// Executes one resolved command and writes its manifest.
pub fn execute(command: &Command, config: Config, out_dir: &Path, threads: Option<usize>) -> Result<RunManifest, CliError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    let mut ctx = RunContext::new(out_dir.to_path_buf(), config);
    let start = Instant::now();
    let result = pool.install(|| match command {
        Command::DdiCurve(a) => commands::ddi_curve(a, &mut ctx),
        Command::Spectrum(a) => commands::spectrum_cmd(a, &mut ctx),
        Command::Pmax(a) => commands::pmax(a, &mut ctx),
        Command::EfficiencyMap(a) => commands::efficiency_map(a, &mut ctx),
        Command::Localization(a) => commands::localization(a, &mut ctx),
        Command::Validate(a) => commands::validate(a, &mut ctx),
        Command::Rerun(_) => Err(CliError::Usage("a manifest cannot replay another rerun".into())),
    });
    // usage errors leave nothing worth recording
    if let Err(e @ (CliError::Usage(_) | CliError::Io(_))) = result {
        return Err(e);
    }
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.to_string(),
        version: output::VERSION.to_string(),
        subcommand: command.name().to_string(),
        command: command.clone(),
        config,
        seed: config.run.seed,
        threads,
        outputs: ctx.outputs,
        warnings: ctx.warnings,
        duration_s: start.elapsed().as_secs_f64(),
        error: result.as_ref().err().map(ToString::to_string),
    };
    output::write_json(&manifest_path(out_dir, command), &manifest)?;
    result.map(|()| manifest)
}

/// Resolves config and flags, then runs the selected subcommand.
pub fn run(cli: Cli) -> Result<RunManifest, CliError> {
    if let Command::Rerun(r) = &cli.command {
        let m = RunManifest::load(&r.manifest)?;
        return execute(&m.command, m.config, &cli.out_dir, cli.threads);
    }
    let mut config = Config::load(cli.config.as_deref())?;
    config.apply(&cli.overrides);
    execute(&cli.command, config, &cli.out_dir, cli.threads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(wqed_core::Error::Singular { delta: 0.0 }).exit_code(), 2);
        assert_eq!(CliError::Core(wqed_core::Error::UndefinedEfficiency).exit_code(), 1);
        assert_eq!(CliError::Validation("oracle".into()).exit_code(), 3);
    }

    #[test]
    fn manifest_sits_next_to_output() {
        let cmd = Cli::try_parse_from(["wqed", "spectrum", "-o", "sub/s.csv"]).unwrap().command;
        assert_eq!(manifest_path(Path::new("out"), &cmd), Path::new("out/sub/s.manifest.json"));
    }

    #[test]
    fn command_round_trips_through_json() {
        let cli = Cli::try_parse_from(["wqed", "localization", "--case", "2:30,20:200", "--sigma", "0.05,0.2"]).unwrap();
        let text = serde_json::to_string(&cli.command).unwrap();
        assert_eq!(serde_json::from_str::<Command>(&text).unwrap(), cli.command);
    }

    #[test]
    fn negative_detuning_flags_parse() {
        let cli = Cli::try_parse_from(["wqed", "spectrum", "--delta-min", "-50", "--delta-max", "-10"]).unwrap();
        let Command::Spectrum(a) = cli.command else { panic!() };
        assert_eq!((a.delta_min, a.delta_max), (-50.0, -10.0));
    }
}
