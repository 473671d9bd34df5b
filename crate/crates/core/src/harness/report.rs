//! Run artifacts: one CSV per series and one JSON summary per run.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::ExperimentConfig;
use super::RunOutcome;
use crate::error::{Error, Result};
use crate::series::{format_value, ExtrapolationSeries};

pub const ARTIFACT_VERSION: &str = concat!("qgibbs ", env!("CARGO_PKG_VERSION"));
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
/// Column layout of every series CSV.
pub const CSV_COLUMNS: [&str; 2] = ["volume", "value"];
pub const CSV_SCHEMA_VERSION: u32 = 1;

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::validation(format!("cannot write {}: {e}", path.display()))
}

pub fn write_series_csv(series: &ExtrapolationSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(CSV_COLUMNS).map_err(|e| io_error(path, e))?;
    for (volume, value) in series.points() {
        w.write_record([volume.to_string(), format_value(value)]).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// The JSON summary of a run.
pub fn summary_json(outcome: &RunOutcome, cfg: &ExperimentConfig) -> serde_json::Value {
    json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "artifact_version": ARTIFACT_VERSION,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "command": outcome.command,
        "status": outcome.status,
        "seed": cfg.seed,
        "config": cfg,
        "gates": outcome.gates,
        "results": outcome.results,
        "series": outcome.series,
    })
}

/// Writes `<command>-<label>.csv` per series and `<command>-summary.json`
/// into `dir`; returns the written paths.
pub fn write_artifacts(outcome: &RunOutcome, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    for s in &outcome.series {
        let path = dir.join(format!("{}-{}.csv", outcome.command.name(), s.label()));
        write_series_csv(s, &path)?;
        written.push(path);
    }
    let path = dir.join(format!("{}-summary.json", outcome.command.name()));
    let text = serde_json::to_string_pretty(&summary_json(outcome, cfg)).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Command, Gate};
    use crate::lattice::{ModelSpec, Preset};

    #[test]
    fn artifacts_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::for_model(ModelSpec::new(Preset::Field { g: 1.0 }, 1.0, 1).unwrap());
        let s = ExtrapolationSeries::new("rel", vec![(2, f64::INFINITY), (3, 0.5), (4, 0.25), (5, 0.2), (6, 0.1)]).unwrap();
        let out = RunOutcome::new(Command::RelEntDensity, vec![Gate::at_most("x", 0.0, 1.0)], json!({}), vec![s]);
        let paths = write_artifacts(&out, &cfg, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let csv = fs::read_to_string(&paths[0]).unwrap();
        assert!(csv.starts_with("volume,value\n"));
        assert!(csv.contains("2,inf\n"));
        let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(summary["status"], "pass");
        assert_eq!(summary["artifact_version"], ARTIFACT_VERSION);
        assert_eq!(summary["config"]["model"]["preset"], "field");
        assert_eq!(summary["series"][0]["points"][0]["value"], "inf");
    }
}
