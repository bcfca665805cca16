//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! results always produce byte-identical files.

use crate::platoon::{SimEvent, SimOutput, VehicleSeries, VehicleSummary};
use crate::string_stability::StringStabilityReport;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_vehicle_csv(series: &VehicleSeries, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "t,e_lat,delta_c,delta_f,X,Y,theta")?;
    for i in 0..series.t.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            series.t[i],
            series.e_lat[i],
            series.delta_c[i],
            series.delta_f[i],
            series.x[i],
            series.y[i],
            series.theta[i]
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSummary {
    pub vehicles: Vec<VehicleSummary>,
    pub events: Vec<SimEvent>,
}

/// Writes `vehicle_NN.csv` per vehicle and `summary.json`; returns the paths
/// in write order.
pub fn write_sim_output(out: &SimOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    for v in &out.vehicles {
        let path = dir.join(format!("vehicle_{:02}.csv", v.id));
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(f);
        write_vehicle_csv(v, &mut w).map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    write_json(
        &path,
        &SimSummary {
            vehicles: out.summaries.clone(),
            events: out.events.clone(),
        },
    )?;
    written.push(path);
    Ok(written)
}

/// Parses a string-stability report file, rejecting unknown fields.
pub fn parse_reports(text: &str) -> Result<Vec<StringStabilityReport>> {
    Ok(serde_json::from_str(text)?)
}
