//! Report rendering: a human-readable summary table and a flat
//! machine-readable record (`key = value`, one pair per line).
//!
//! Records are the interchange format between subcommands: `rate` and
//! `optimize` write them with `--out`, `compare` reads two of them back.
//! Floats are emitted with shortest round-trip formatting so records are
//! byte-stable and re-parse to the exact same numbers.

use std::collections::BTreeMap;

use decoyrate_core::{
    BasisBreakdown, EnginePolicy, KeyRateReport, ProtocolConfig, SystemModel,
};
use thiserror::Error;

/// Record-parsing failures.
#[derive(Debug, Error)]
pub enum RecordError {
    /// A line is not `key = value` (or a comment/blank).
    #[error("line {line}: expected `key = value`, found {found:?}")]
    Malformed {
        /// 1-based line number.
        line: usize,
        /// The offending text.
        found: String,
    },
    /// The same key appeared twice.
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    /// A key required by the consumer is absent.
    #[error("record is missing key {0:?}")]
    MissingKey(&'static str),
    /// A value failed to parse as a number.
    #[error("key {key:?}: value {value:?} is not a number")]
    NotANumber {
        /// Offending key.
        key: String,
        /// Offending value.
        value: String,
    },
}

/// An ordered flat record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    entries: Vec<(String, String)>,
}

impl Record {
    /// Empty record.
    pub fn new() -> Self {
        Record::default()
    }

    /// Append a key/value pair (order preserved on emission).
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Value for `key`, if present.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Numeric value for `key`; errors name the key.
    pub fn number(&self, key: &'static str) -> Result<f64, RecordError> {
        let value = self.get(key).ok_or(RecordError::MissingKey(key))?;
        value.parse().map_err(|_| RecordError::NotANumber {
            key: key.to_string(),
            value: value.to_string(),
        })
    }

    /// Iterate entries in emission order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Render as `key = value` lines (LF endings).
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.entries {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }

    /// Parse `key = value` lines; `#` comments and blank lines are
    /// skipped, duplicate keys rejected.
    pub fn parse(text: &str) -> Result<Record, RecordError> {
        let mut record = Record::new();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| RecordError::Malformed {
                line: i + 1,
                found: raw.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(RecordError::Malformed {
                    line: i + 1,
                    found: raw.to_string(),
                });
            }
            if seen.insert(key.to_string(), ()).is_some() {
                return Err(RecordError::DuplicateKey(key.to_string()));
            }
            record.push(key, value);
        }
        Ok(record)
    }
}

fn push_policy(record: &mut Record, policy: EnginePolicy) {
    record.push("chernoff_arg", policy.chernoff_arg);
    record.push("theta_log_base", policy.theta_log_base);
    record.push("min_policy", policy.min_policy);
}

fn push_breakdown(record: &mut Record, prefix: &str, side: &BasisBreakdown) {
    record.push(&format!("{prefix}_s1_mean_lower"), side.s1_mean_lower);
    record.push(&format!("{prefix}_s1_lower"), side.s1_lower);
    record.push(&format!("{prefix}_phase_error_upper"), side.phase_error_upper);
    record.push(&format!("{prefix}_signal_gain"), side.signal_gain);
    record.push(&format!("{prefix}_signal_error_rate"), side.signal_error_rate);
    record.push(&format!("{prefix}_contribution"), side.contribution);
}

/// Machine-readable record for a `rate` evaluation.
pub fn rate_record(
    report: &KeyRateReport,
    cfg: &ProtocolConfig,
    sys: &SystemModel,
    policy: EnginePolicy,
) -> Record {
    let mut record = Record::new();
    record.push("command", "rate");
    record.push("variant", cfg.variant);
    record.push("distance_km", cfg.distance_km);
    record.push("eta_z", sys.eta_z);
    record.push("eta_x", sys.eta_x);
    push_policy(&mut record, policy);
    record.push("rate_per_pulse", report.rate);
    record.push("bits_per_second", report.bits_per_second);
    record.push("rect_z_lower", report.rectangle.z.lower);
    record.push("rect_z_upper", report.rectangle.z.upper);
    record.push("rect_x_lower", report.rectangle.x.lower);
    record.push("rect_x_upper", report.rectangle.x.upper);
    record.push("worst_s0_z", report.worst_point.0);
    record.push("worst_s0_x", report.worst_point.1);
    push_breakdown(&mut record, "z", &report.z);
    push_breakdown(&mut record, "x", &report.x);
    match &report.infeasible {
        Some(reason) => record.push("infeasible", reason),
        None => record.push("infeasible", "none"),
    }
    record
}

/// Human-readable summary table for a `rate` evaluation.
pub fn rate_table(
    report: &KeyRateReport,
    cfg: &ProtocolConfig,
    sys: &SystemModel,
) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} at {} km (eta_z {}, eta_x {})\n",
        cfg.variant, cfg.distance_km, sys.eta_z, sys.eta_x
    ));
    out.push_str(&format!(
        "  secret-key rate   {:>12.4e} per pulse   {:>12.3} bit/s\n",
        report.rate, report.bits_per_second
    ));
    out.push_str(&format!(
        "  vacuum yield s0   Z in [{:.3e}, {:.3e}]   X in [{:.3e}, {:.3e}]\n",
        report.rectangle.z.lower,
        report.rectangle.z.upper,
        report.rectangle.x.lower,
        report.rectangle.x.upper,
    ));
    out.push_str(&format!(
        "  worst case at     s0_Z = {:.3e}, s0_X = {:.3e}\n",
        report.worst_point.0, report.worst_point.1
    ));
    out.push_str("  basis      s1_lower      phase_err_up   signal_E    contribution\n");
    for (name, side) in [("Z", &report.z), ("X", &report.x)] {
        out.push_str(&format!(
            "  {name}      {:>12.4e}   {:>10.4e}   {:>8.4}   {:>12.4e}\n",
            side.s1_lower, side.phase_error_upper, side.signal_error_rate, side.contribution
        ));
    }
    if let Some(reason) = &report.infeasible {
        out.push_str(&format!("  infeasible: {reason}\n"));
    }
    out
}

/// Machine-readable record for an `optimize` run.
pub fn optimize_record(
    cfg: &ProtocolConfig,
    sys: &SystemModel,
    rate: f64,
    seed: u64,
    restarts: usize,
    converged: bool,
    policy: EnginePolicy,
) -> Record {
    let mut record = Record::new();
    record.push("command", "optimize");
    record.push("variant", cfg.variant);
    record.push("distance_km", cfg.distance_km);
    record.push("eta_z", sys.eta_z);
    record.push("eta_x", sys.eta_x);
    record.push("seed", seed);
    record.push("restarts", restarts);
    record.push("converged", converged);
    push_policy(&mut record, policy);
    record.push("rate_per_pulse", rate);
    record.push("bits_per_second", rate * sys.clock_hz);
    record.push("mu_z1", cfg.mu_z1);
    record.push("mu_z2", cfg.mu_z2);
    record.push("mu_x1", cfg.mu_x1);
    record.push("mu_x2", cfg.mu_x2);
    record.push("p_z1", cfg.p_z1);
    record.push("p_z2", cfg.p_z2);
    record.push("p_x1", cfg.p_x1);
    record.push("p_x2", cfg.p_x2);
    record.push("p_vac", cfg.p_vac);
    record.push("q_x", cfg.q_x);
    record
}

/// Ratio table comparing two rate records (`a` over `b`).
///
/// Returns human text and a machine record carrying the ratios.
pub fn compare_reports(a: &Record, b: &Record) -> Result<(String, Record), RecordError> {
    let rate_a = a.number("rate_per_pulse")?;
    let rate_b = b.number("rate_per_pulse")?;
    let ratio = if rate_b > 0.0 { rate_a / rate_b } else { f64::INFINITY };
    let label = |r: &Record| {
        format!(
            "{} @ {} km",
            r.get("variant").unwrap_or("?"),
            r.get("distance_km").unwrap_or("?")
        )
    };
    let mut table = String::new();
    table.push_str(&format!(
        "  {:<24} {:>14}\n",
        "report", "rate_per_pulse"
    ));
    table.push_str(&format!("  {:<24} {:>14.4e}\n", label(a), rate_a));
    table.push_str(&format!("  {:<24} {:>14.4e}\n", label(b), rate_b));
    table.push_str(&format!("  ratio (first/second)     {ratio:>14.4}\n"));
    let mut record = Record::new();
    record.push("command", "compare");
    record.push("rate_a", rate_a);
    record.push("rate_b", rate_b);
    record.push("rate_ratio", ratio);
    Ok((table, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip_preserves_entries_and_bytes() {
        let mut record = Record::new();
        record.push("command", "rate");
        record.push("rate_per_pulse", 6.30e-5);
        record.push("infeasible", "none");
        let text = record.emit();
        let reparsed = Record::parse(&text).unwrap();
        assert_eq!(reparsed, record);
        assert_eq!(reparsed.emit(), text);
    }

    #[test]
    fn parse_skips_comments_and_rejects_junk() {
        let ok = Record::parse("# header\n\nrate_per_pulse = 1e-5\n").unwrap();
        assert_eq!(ok.number("rate_per_pulse").unwrap(), 1e-5);
        let err = Record::parse("rate_per_pulse 1e-5\n").unwrap_err();
        assert!(matches!(err, RecordError::Malformed { line: 1, .. }), "{err}");
        let dup = Record::parse("a = 1\na = 2\n").unwrap_err();
        assert!(matches!(dup, RecordError::DuplicateKey(_)), "{dup}");
    }

    #[test]
    fn compare_produces_the_rate_ratio() {
        let a = Record::parse("variant = 4int\ndistance_km = 87\nrate_per_pulse = 6e-5\n").unwrap();
        let b = Record::parse("variant = 3int-sym\ndistance_km = 87\nrate_per_pulse = 2e-5\n").unwrap();
        let (_, record) = compare_reports(&a, &b).unwrap();
        assert_eq!(record.number("rate_ratio").unwrap(), 3.0);
    }

    #[test]
    fn missing_rate_key_is_named() {
        let a = Record::parse("variant = 4int\n").unwrap();
        let b = Record::parse("rate_per_pulse = 2e-5\n").unwrap();
        let err = compare_reports(&a, &b).unwrap_err();
        assert!(matches!(err, RecordError::MissingKey("rate_per_pulse")), "{err}");
    }
}
