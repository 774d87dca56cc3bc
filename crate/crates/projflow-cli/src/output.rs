//! Artifact writers: trajectory tables, potential tables, state dumps,
//! and the machine-readable summary next to its human-readable twin.

use std::fs;
use std::path::Path;

use serde::Serialize;

use projflow::dynamics::Trajectory;
use projflow::measure::{Field, Partition};

use crate::Failure;

/// One row of the equilibrium potential table.
pub struct PhiRow {
    pub xi: f64,
    pub phi: f64,
    pub phi_prime: f64,
}

/// Shortest decimal that parses back to the same float. NaN comes out as
/// an empty cell so downstream tools treat it as missing data.
fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn write_error(path: &Path, err: impl core::fmt::Display) -> Failure {
    Failure::Usage(format!("cannot write {}: {err}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|err| write_error(dir, err))
}

/// Diagnostic time series, one row per recorded instant.
pub fn write_trajectory(path: &Path, trajectory: &Trajectory) -> Result<(), Failure> {
    let mut writer = csv::Writer::from_path(path).map_err(|err| write_error(path, err))?;
    writer
        .write_record(["t", "Gamma", "V_a", "V_b", "beta", "min_y", "max_y", "dist_M"])
        .map_err(|err| write_error(path, err))?;
    for record in trajectory.records() {
        writer
            .write_record([
                cell(record.t),
                cell(record.gamma),
                cell(record.v_a),
                cell(record.v_b),
                cell(record.beta),
                cell(record.min_y),
                cell(record.max_y),
                cell(record.dist_m),
            ])
            .map_err(|err| write_error(path, err))?;
    }
    writer.flush().map_err(|err| write_error(path, err))
}

/// Potential values along the admissible ray parameter.
pub fn write_phi_table(path: &Path, rows: &[PhiRow]) -> Result<(), Failure> {
    let mut writer = csv::Writer::from_path(path).map_err(|err| write_error(path, err))?;
    writer.write_record(["xi", "phi", "phi_prime"]).map_err(|err| write_error(path, err))?;
    for row in rows {
        writer
            .write_record([cell(row.xi), cell(row.phi), cell(row.phi_prime)])
            .map_err(|err| write_error(path, err))?;
    }
    writer.flush().map_err(|err| write_error(path, err))
}

/// Per-cell snapshot of the initial and final states.
pub fn write_states(
    path: &Path,
    partition: &Partition,
    y0: &Field,
    y_final: Option<&Field>,
) -> Result<(), Failure> {
    let mut writer = csv::Writer::from_path(path).map_err(|err| write_error(path, err))?;
    writer
        .write_record(["cell", "weight", "center", "y0", "y_final"])
        .map_err(|err| write_error(path, err))?;
    let centers = partition.centers();
    for i in 0..partition.len() {
        let center = centers.map(|c| cell(c[i])).unwrap_or_default();
        let last = y_final.map(|f| cell(f.values()[i])).unwrap_or_default();
        writer
            .write_record([
                i.to_string(),
                cell(partition.weights()[i]),
                center,
                cell(y0.values()[i]),
                last,
            ])
            .map_err(|err| write_error(path, err))?;
    }
    writer.flush().map_err(|err| write_error(path, err))
}

/// Write `summary.json` and `summary.txt`, and echo the text to stdout.
pub fn write_summary<S: Serialize>(dir: &Path, summary: &S, text: &str) -> Result<(), Failure> {
    let json_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(summary)
        .map_err(|err| write_error(&json_path, err))?;
    fs::write(&json_path, json + "\n").map_err(|err| write_error(&json_path, err))?;

    let txt_path = dir.join("summary.txt");
    fs::write(&txt_path, text).map_err(|err| write_error(&txt_path, err))?;

    print!("{text}");
    Ok(())
}
