//! Structured-text configuration files.
//!
//! A config file carries up to three sections of `key = value` pairs:
//!
//! - `[system]` (required) — receiver and channel constants, one key per
//!   [`SystemModel`] field;
//! - `[protocol]` (optional) — deployed source intensities, probabilities
//!   and receiver bias; its key set depends on `variant`;
//! - `[simulator]` (optional) — forward-model switches (after-pulse model,
//!   dead-time correction).
//!
//! Unknown keys are rejected everywhere, parse errors carry the offending
//! line, and every semantic invariant is re-checked by the core
//! constructors so a parsed file is a validated file.

use std::path::Path;

use decoyrate_core::{ModelError, ProtocolConfig, SystemModel, Variant};
use decoyrate_sim::{AfterpulseModel, SimOptions};
use serde::Deserialize;
use thiserror::Error;

/// Everything a config file can specify.
#[derive(Debug, Clone)]
pub struct FileConfig {
    /// Receiver/channel constants from `[system]`.
    pub system: SystemModel,
    /// Deployed protocol parameters from `[protocol]`, when present.
    pub protocol: Option<ProtocolConfig>,
    /// Forward-model switches from `[simulator]` (defaults when absent).
    pub sim: SimOptions,
}

/// Configuration-file failures.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// File could not be read.
    #[error("cannot read {path}: {source}")]
    Io {
        /// Offending path.
        path: String,
        /// Underlying I/O failure.
        source: std::io::Error,
    },
    /// Structural parse failure (reported with line/column by the parser).
    #[error("{path}: {message}")]
    Parse {
        /// Offending path.
        path: String,
        /// Parser message including the source location.
        message: String,
    },
    /// A required section is absent.
    #[error("{path}: missing required section [{section}]")]
    MissingSection {
        /// Offending path.
        path: String,
        /// Name of the absent section.
        section: &'static str,
    },
    /// A key demanded by the declared variant is absent.
    #[error("[protocol] key `{key}` is required for variant {variant}")]
    MissingKey {
        /// Name of the absent key.
        key: &'static str,
        /// Variant that demands it.
        variant: Variant,
    },
    /// A key that does not belong to the declared variant is present.
    #[error("[protocol] key `{key}` does not apply to variant {variant}")]
    ForeignKey {
        /// Name of the misplaced key.
        key: &'static str,
        /// Variant that forbids it.
        variant: Variant,
    },
    /// A semantic invariant failed (named by the core validator).
    #[error(transparent)]
    Invariant(#[from] ModelError),
}

/// `[system]` section: one key per receiver/channel constant, all
/// required so a fixture is self-contained.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    dark_rate: f64,
    afterpulse: f64,
    dead_time_s: f64,
    misalignment: f64,
    loss_coeff_db_per_km: f64,
    extra_bob_loss_db: f64,
    error_correction_f: f64,
    epsilon: f64,
    pulses: f64,
    clock_hz: f64,
    eta_z: f64,
    eta_x: f64,
}

/// `[protocol]` section: superset of both variant layouts; which keys are
/// demanded or forbidden is decided by `variant` after parsing.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolSection {
    variant: String,
    distance_km: f64,
    q_x: f64,
    // 4-intensity layout: per-basis decoy/signal intensity pairs.
    mu_z1: Option<f64>,
    mu_z2: Option<f64>,
    mu_x1: Option<f64>,
    mu_x2: Option<f64>,
    p_z1: Option<f64>,
    p_z2: Option<f64>,
    p_x1: Option<f64>,
    p_x2: Option<f64>,
    // 3-intensity layout: one intensity pair shared by both bases, plus a
    // vacuum source.
    mu_1: Option<f64>,
    mu_2: Option<f64>,
    p_1: Option<f64>,
    p_2: Option<f64>,
    p_vac: Option<f64>,
}

/// `[simulator]` section: optional forward-model switches.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulatorSection {
    afterpulse_model: Option<String>,
    dead_time: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSections {
    system: Option<SystemSection>,
    protocol: Option<ProtocolSection>,
    simulator: Option<SimulatorSection>,
}

fn require(
    value: Option<f64>,
    key: &'static str,
    variant: Variant,
) -> Result<f64, ConfigError> {
    value.ok_or(ConfigError::MissingKey { key, variant })
}

fn forbid(
    value: Option<f64>,
    key: &'static str,
    variant: Variant,
) -> Result<(), ConfigError> {
    match value {
        Some(_) => Err(ConfigError::ForeignKey { key, variant }),
        None => Ok(()),
    }
}

fn build_protocol(section: ProtocolSection) -> Result<ProtocolConfig, ConfigError> {
    let variant: Variant = section.variant.parse()?;
    match variant {
        Variant::FourIntensity => {
            forbid(section.mu_1, "mu_1", variant)?;
            forbid(section.mu_2, "mu_2", variant)?;
            forbid(section.p_1, "p_1", variant)?;
            forbid(section.p_2, "p_2", variant)?;
            forbid(section.p_vac, "p_vac", variant)?;
            let mus = [
                require(section.mu_z1, "mu_z1", variant)?,
                require(section.mu_z2, "mu_z2", variant)?,
                require(section.mu_x1, "mu_x1", variant)?,
                require(section.mu_x2, "mu_x2", variant)?,
            ];
            let ps = [
                require(section.p_z1, "p_z1", variant)?,
                require(section.p_z2, "p_z2", variant)?,
                require(section.p_x1, "p_x1", variant)?,
                require(section.p_x2, "p_x2", variant)?,
            ];
            Ok(ProtocolConfig::four_intensity(
                section.distance_km,
                mus,
                ps,
                section.q_x,
            )?)
        }
        Variant::ThreeIntensityAsym | Variant::ThreeIntensitySym => {
            forbid(section.mu_z1, "mu_z1", variant)?;
            forbid(section.mu_z2, "mu_z2", variant)?;
            forbid(section.mu_x1, "mu_x1", variant)?;
            forbid(section.mu_x2, "mu_x2", variant)?;
            forbid(section.p_z1, "p_z1", variant)?;
            forbid(section.p_z2, "p_z2", variant)?;
            forbid(section.p_x1, "p_x1", variant)?;
            forbid(section.p_x2, "p_x2", variant)?;
            let mu_1 = require(section.mu_1, "mu_1", variant)?;
            let mu_2 = require(section.mu_2, "mu_2", variant)?;
            let p_1 = require(section.p_1, "p_1", variant)?;
            let p_2 = require(section.p_2, "p_2", variant)?;
            let p_vac = require(section.p_vac, "p_vac", variant)?;
            Ok(ProtocolConfig::three_intensity(
                variant,
                section.distance_km,
                mu_1,
                mu_2,
                p_1,
                p_2,
                p_vac,
                section.q_x,
            )?)
        }
    }
}

fn build_sim(section: Option<SimulatorSection>) -> Result<SimOptions, ConfigError> {
    let mut sim = SimOptions::default();
    if let Some(section) = section {
        if let Some(model) = section.afterpulse_model {
            sim.afterpulse = model.parse::<AfterpulseModel>()?;
        }
        if let Some(dead_time) = section.dead_time {
            sim.dead_time = dead_time;
        }
    }
    Ok(sim)
}

/// Parse and fully validate a configuration file.
///
/// The `[system]` section is mandatory; `[protocol]` and `[simulator]`
/// are optional. Every returned value has passed its core validator.
pub fn parse_config(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}

/// [`parse_config`] on in-memory text; `label` names the source in errors.
pub fn parse_config_str(text: &str, label: &str) -> Result<FileConfig, ConfigError> {
    let sections: FileSections = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: label.to_string(),
        message: e.to_string(),
    })?;
    let system_section = sections.system.ok_or(ConfigError::MissingSection {
        path: label.to_string(),
        section: "system",
    })?;
    let system = SystemModel {
        dark_rate: system_section.dark_rate,
        afterpulse: system_section.afterpulse,
        dead_time_s: system_section.dead_time_s,
        misalignment: system_section.misalignment,
        loss_coeff_db_per_km: system_section.loss_coeff_db_per_km,
        extra_bob_loss_db: system_section.extra_bob_loss_db,
        error_correction_f: system_section.error_correction_f,
        epsilon: system_section.epsilon,
        pulses: system_section.pulses,
        clock_hz: system_section.clock_hz,
        eta_z: system_section.eta_z,
        eta_x: system_section.eta_x,
    };
    system.validate()?;
    let protocol = sections.protocol.map(build_protocol).transpose()?;
    let sim = build_sim(sections.simulator)?;
    Ok(FileConfig {
        system,
        protocol,
        sim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYSTEM: &str = "\
[system]
dark_rate = 2.5e-7
afterpulse = 0.01
dead_time_s = 5.0e-7
misalignment = 0.015
loss_coeff_db_per_km = 0.2
extra_bob_loss_db = 2.6
error_correction_f = 1.14
epsilon = 1.0e-10
pulses = 1.0e10
clock_hz = 6.25e8
eta_z = 0.1
eta_x = 0.05
";

    #[test]
    fn system_only_file_parses_with_default_sim_options() {
        let cfg = parse_config_str(SYSTEM, "test").unwrap();
        assert_eq!(cfg.system, SystemModel::default());
        assert!(cfg.protocol.is_none());
        assert_eq!(cfg.sim, SimOptions::default());
    }

    #[test]
    fn unknown_system_key_is_rejected() {
        let text = format!("{SYSTEM}dark_count = 1.0e-6\n");
        let err = parse_config_str(&text, "test").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }), "{err}");
        assert!(err.to_string().contains("dark_count"), "{err}");
    }

    #[test]
    fn missing_system_section_is_named() {
        let err = parse_config_str("[protocol]\nvariant = \"4int\"\n", "test").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("[system]") || text.contains("missing field"), "{text}");
    }

    #[test]
    fn three_intensity_file_without_vacuum_probability_is_rejected() {
        let text = format!(
            "{SYSTEM}
[protocol]
variant = \"3int-asym\"
distance_km = 87.0
mu_1 = 0.125
mu_2 = 0.521
p_1 = 0.062
p_2 = 0.428
q_x = 0.5
"
        );
        let err = parse_config_str(&text, "test").unwrap_err();
        assert!(
            matches!(
                err,
                ConfigError::MissingKey {
                    key: "p_vac",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn probabilities_summing_to_0_9_name_the_simplex_invariant() {
        let text = format!(
            "{SYSTEM}
[protocol]
variant = \"4int\"
distance_km = 87.0
mu_z1 = 0.02
mu_z2 = 0.516
mu_x1 = 0.17
mu_x2 = 0.473
p_z1 = 0.094
p_z2 = 0.672
p_x1 = 0.116
p_x2 = 0.018
q_x = 0.13
"
        );
        let err = parse_config_str(&text, "test").unwrap_err();
        assert!(
            matches!(err, ConfigError::Invariant(ModelError::ProbabilitySum { .. })),
            "{err}"
        );
    }

    #[test]
    fn four_intensity_file_rejects_vacuum_keys() {
        let text = format!(
            "{SYSTEM}
[protocol]
variant = \"4int\"
distance_km = 87.0
mu_z1 = 0.02
mu_z2 = 0.516
mu_x1 = 0.17
mu_x2 = 0.473
p_z1 = 0.094
p_z2 = 0.772
p_x1 = 0.116
p_x2 = 0.019
p_vac = 0.0
q_x = 0.13
"
        );
        let err = parse_config_str(&text, "test").unwrap_err();
        assert!(
            matches!(err, ConfigError::ForeignKey { key: "p_vac", .. }),
            "{err}"
        );
    }

    #[test]
    fn simulator_section_switches_are_honored() {
        let text = format!(
            "{SYSTEM}
[simulator]
afterpulse_model = \"off\"
dead_time = false
"
        );
        let cfg = parse_config_str(&text, "test").unwrap();
        assert_eq!(cfg.sim, SimOptions::noiseless_detector());
    }
}
