//! Run configuration: a TOML file with `[emitter]`, `[units]` and `[run]`
//! tables, every key optional, then command-line overrides on top.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use wqed_core::ensemble::ProblemTemplate;
use wqed_core::{ChiralityMode, EmitterParams, PhaseConvention, UnitSystem};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub realizations: u64,
    pub mode: ChiralityMode,
    /// Multiplies every propagation phase; 1 is physical units.
    pub phase_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            realizations: 1000,
            mode: ChiralityMode::Chiral,
            phase_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub emitter: EmitterParams,
    pub units: UnitSystem,
    pub run: RunConfig,
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Master seed for disorder ensembles.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Disorder realizations per ensemble.
    #[arg(long, global = true)]
    pub realizations: Option<u64>,
    /// Coupling mode: chiral or bidirectional.
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<ChiralityMode>,
    /// Residual decay rate γ, units of Γ0.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Waveguide coupling Γ, applied to every channel.
    #[arg(long, global = true)]
    pub big_gamma: Option<f64>,
    /// Dipole angle to the chain axis, radians.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub phase_scale: Option<f64>,
}

fn parse_mode(s: &str) -> Result<ChiralityMode, String> {
    match s {
        "chiral" => Ok(ChiralityMode::Chiral),
        "bidirectional" => Ok(ChiralityMode::Bidirectional),
        _ => Err(format!("unknown mode `{s}` (expected chiral or bidirectional)")),
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.run.seed = v;
        }
        if let Some(v) = o.realizations {
            self.run.realizations = v;
        }
        if let Some(v) = o.mode {
            self.run.mode = v;
        }
        if let Some(v) = o.gamma {
            self.emitter.gamma = v;
        }
        if let Some(v) = o.big_gamma {
            let e = &mut self.emitter;
            e.big_gamma_bottom = v;
            e.big_gamma_top = v;
            e.big_gamma_bottom_left = v;
            e.big_gamma_top_left = v;
        }
        if let Some(v) = o.theta {
            self.emitter.theta_dipole = v;
        }
        if let Some(v) = o.phase_scale {
            self.run.phase_scale = v;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.emitter.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.units.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.run.realizations == 0 {
            return Err(CliError::Usage("realizations must be at least 1".into()));
        }
        if !self.run.phase_scale.is_finite() {
            return Err(CliError::Usage("phase_scale must be finite".into()));
        }
        Ok(())
    }

    pub fn template(&self, n: usize) -> ProblemTemplate {
        ProblemTemplate {
            phase: PhaseConvention::Physical {
                phase_scale: self.run.phase_scale,
            },
            ..ProblemTemplate::new(n, self.emitter, self.units, self.run.mode)
        }
    }

    /// Default inter-emitter spacing, `λe/20`.
    pub fn spacing_nm(&self) -> f64 {
        self.units.lambda_e_nm / 20.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: Config = toml::from_str("[emitter]\ngamma = 0.0\n[run]\nseed = 5\n").unwrap();
        assert_eq!(c.emitter.gamma, 0.0);
        assert_eq!(c.emitter.big_gamma_top, EmitterParams::default().big_gamma_top);
        assert_eq!(c.run.seed, 5);
        assert_eq!(c.run.realizations, 1000);
        assert_eq!(c.units, UnitSystem::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Config>("[run]\nsed = 5\n").is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut c: Config = toml::from_str("[run]\nseed = 5\nmode = \"bidirectional\"\n").unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            big_gamma: Some(0.0),
            ..Overrides::default()
        });
        assert_eq!(c.run.seed, 9);
        assert_eq!(c.run.mode, ChiralityMode::Bidirectional);
        assert_eq!(c.emitter.big_gamma_bottom_left, 0.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<Config>(&text).unwrap(), c);
    }
}
