//! Machine-readable outputs: effect and calibration CSVs and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::calibration::SplitCalibration;
use crate::math::fmt17;

/// One row of `effects.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectRow {
    pub scenario_label: String,
    pub stratum: String,
    pub n_members: usize,
    pub value: f64,
    pub se: f64,
}

pub const EFFECTS_HEADER: [&str; 5] = ["scenario_label", "stratum", "n_members", "value", "se"];
pub const CALIBRATION_HEADER: [&str; 6] =
    ["scenario_label", "estimator", "R", "mean_offset", "se_offset", "n_failed_splits"];

pub fn write_effects_csv<W: Write>(rows: &[EffectRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EFFECTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario_label.clone(),
            r.stratum.clone(),
            r.n_members.to_string(),
            fmt17(r.value),
            fmt17(r.se),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub scenario_label: String,
    pub estimator: String,
    pub calibration: SplitCalibration,
}

pub fn write_calibration_csv<W: Write>(rows: &[CalibrationRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CALIBRATION_HEADER)?;
    for r in rows {
        let c = &r.calibration;
        w.write_record([
            r.scenario_label.clone(),
            r.estimator.clone(),
            c.r.to_string(),
            fmt17(c.mean_offset),
            fmt17(c.se_offset),
            c.n_failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Record of one CLI run. Written last: a run is complete iff its manifest exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario_label: String,
    pub command: String,
    pub timestamp: String,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
