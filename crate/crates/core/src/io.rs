//! Result files: CSV for traces and grids, JSON for reports and run manifests.
//!
//! Floating-point values in CSV are written with 17 significant digits so
//! that reruns can be compared byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::material::MaterialParams;
use crate::simulation::EnergyTrace;
use crate::spectrum::SpectrumGrid;

/// `x` with 17 significant digits (round-trips exactly).
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn write_rows<P: AsRef<Path>>(path: P, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t,E,vdot_L,pdot_L`.
pub fn write_trace_csv<P: AsRef<Path>>(path: P, trace: &EnergyTrace) -> Result<()> {
    let rows = (0..trace.len()).map(|k| {
        vec![
            fmt17(trace.times[k]),
            fmt17(trace.energies[k]),
            fmt17(trace.boundary_v_dot[k]),
            fmt17(trace.boundary_p_dot[k]),
        ]
    });
    write_rows(path, &["t", "E", "vdot_L", "pdot_L"], rows)
}

/// Columns `t,E_over_E0`, for normalized-energy plots.
pub fn write_normalized_csv<P: AsRef<Path>>(path: P, trace: &EnergyTrace) -> Result<()> {
    let norm = trace.normalized();
    let rows = trace.times.iter().zip(norm).map(|(t, e)| vec![fmt17(*t), fmt17(e)]);
    write_rows(path, &["t", "E_over_E0"], rows)
}

/// Columns `xi1,xi2,max_real,in_design_box`; failed cells carry `NaN`.
pub fn write_grid_csv<P: AsRef<Path>>(path: P, grid: &SpectrumGrid) -> Result<()> {
    let rows = grid.cells.iter().map(|c| {
        vec![
            fmt17(c.xi1),
            fmt17(c.xi2),
            fmt17(c.max_real.unwrap_or(f64::NAN)),
            c.in_design_box.to_string(),
        ]
    });
    write_rows(path, &["xi1", "xi2", "max_real", "in_design_box"], rows)
}

pub fn write_json<P: AsRef<Path>, T: Serialize + ?Sized>(path: P, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Record of one command-line run, written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: MaterialParams,
    /// Fully resolved options, defaults included.
    pub options: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    /// Seconds.
    pub wall_time: f64,
    pub version: String,
}

impl RunManifest {
    /// `<primary>.manifest.json`.
    pub fn path_for(primary: &Path) -> PathBuf {
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write(&self, primary: &Path) -> Result<PathBuf> {
        let path = Self::path_for(primary);
        write_json(&path, self)?;
        Ok(path)
    }
}
