//! Experiment runner: configuration, gated checks, and report artifacts.

pub mod config;
pub mod report;
pub mod runner;
pub mod selftest;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{finite_or_tag, ExtrapolationSeries};

pub use config::ExperimentConfig;
pub use report::{write_artifacts, ARTIFACT_VERSION, SUMMARY_SCHEMA_VERSION};
pub use runner::{mcmillan_rows, run, verify_theorem1, McMillanRow, TheoremReport, TheoremRow};
pub use selftest::{run_selftest, SelftestReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// The buffer-drift gate tripped, so no verdict is reported.
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pressure,
    EntropyDensity,
    InfoRate,
    RelEntDensity,
    MeanField,
    VerifyGibbsProduct,
    PbGt,
    LogGap,
    VerifyTheorem1,
    Mcmillan,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 11] = [
        Command::Pressure,
        Command::EntropyDensity,
        Command::InfoRate,
        Command::RelEntDensity,
        Command::MeanField,
        Command::VerifyGibbsProduct,
        Command::PbGt,
        Command::LogGap,
        Command::VerifyTheorem1,
        Command::Mcmillan,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::EntropyDensity => "entropy-density",
            Command::InfoRate => "info-rate",
            Command::RelEntDensity => "rel-ent-density",
            Command::MeanField => "mean-field",
            Command::VerifyGibbsProduct => "verify-gibbs-product",
            Command::PbGt => "pb-gt",
            Command::LogGap => "log-gap",
            Command::VerifyTheorem1 => "verify-theorem1",
            Command::Mcmillan => "mcmillan",
            Command::Selftest => "selftest",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown command `{s}`")))
    }
}

/// One gated assertion. A failed drift gate makes the run inconclusive
/// instead of failed.
#[derive(Clone, Debug, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    #[serde(serialize_with = "finite_or_tag")]
    pub observed: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub threshold: f64,
    pub drift: bool,
}

impl Gate {
    /// Passes when `observed <= threshold`.
    pub fn at_most(name: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Gate { name: name.into(), passed: observed <= threshold, observed, threshold, drift: false }
    }

    /// Passes when `observed >= threshold`.
    pub fn at_least(name: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Gate { name: name.into(), passed: observed >= threshold, observed, threshold, drift: false }
    }

    /// A yes/no condition; `observed` is 1 when it holds.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Gate { name: name.into(), passed: ok, observed: if ok { 1.0 } else { 0.0 }, threshold: 1.0, drift: false }
    }

    pub fn drift(observed: f64, threshold: f64) -> Self {
        Gate { name: "buffer-drift".into(), passed: observed < threshold, observed, threshold, drift: true }
    }
}

/// Overall status: inconclusive if a drift gate failed, else fail if any
/// other gate failed.
pub fn status_of(gates: &[Gate]) -> Status {
    if gates.iter().any(|g| g.drift && !g.passed) {
        Status::Inconclusive
    } else if gates.iter().all(|g| g.passed) {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Everything one command produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub command: Command,
    pub status: Status,
    pub gates: Vec<Gate>,
    pub results: serde_json::Value,
    pub series: Vec<ExtrapolationSeries>,
}

impl RunOutcome {
    pub fn new(command: Command, gates: Vec<Gate>, results: serde_json::Value, series: Vec<ExtrapolationSeries>) -> Self {
        RunOutcome { command, status: status_of(&gates), gates, results, series }
    }

    pub fn failed_gates(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(|g| !g.passed)
    }
}

/// True when consecutive values strictly decrease.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Largest increase between consecutive values (0 if none).
pub fn max_growth(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
            assert_eq!(serde_json::to_value(c).unwrap(), serde_json::Value::String(c.name().into()));
        }
        assert!("verify".parse::<Command>().is_err());
    }

    #[test]
    fn drift_gate_wins() {
        let ok = Gate::at_most("a", 1.0, 2.0);
        let bad = Gate::at_most("b", 3.0, 2.0);
        assert_eq!(status_of(&[ok.clone()]), Status::Pass);
        assert_eq!(status_of(&[ok.clone(), bad.clone()]), Status::Fail);
        assert_eq!(status_of(&[bad, Gate::drift(0.5, 0.02)]), Status::Inconclusive);
        assert_eq!(status_of(&[ok, Gate::drift(0.01, 0.02)]), Status::Pass);
        assert_eq!(Status::Inconclusive.exit_code(), 2);
    }

    #[test]
    fn trends() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
        assert_eq!(max_growth(&[1.0, 0.5, 0.75, 0.7]), 0.25);
        assert_eq!(max_growth(&[1.0]), 0.0);
    }
}
