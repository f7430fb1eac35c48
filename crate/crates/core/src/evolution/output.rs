//! Snapshot CSV files and the run manifest.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Snapshot, SolverConfig, Variable};
use crate::coordinates::FrameFields;
use crate::error::Result;
use crate::grid::Grid;

/// Describes a directory of snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config_hash: String,
    pub nu: f64,
    pub mu: i8,
    pub k0: u32,
    pub grid: Grid,
    pub dt: f64,
    pub steps: usize,
    pub solver: SolverConfig,
    /// Snapshot times, in file order.
    pub times: Vec<f64>,
    pub files: Vec<String>,
    /// Error that stopped the run early, if any.
    pub failure: Option<String>,
}

/// Writes `y, W, Z, g` for one snapshot.
pub fn write_snapshot_csv<W: Write>(out: W, snap: &Snapshot, variable: Variable, frame: &FrameFields) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "W", "Z", "g"])?;
    let y = frame.grid.nodes();
    for i in 0..frame.grid.n() {
        let v = snap.field.values()[i];
        let (wv, zv) = match variable {
            Variable::W => (v, v * frame.rho_m56.values()[i]),
            Variable::Z => (v * frame.rho56.values()[i], v),
        };
        let g = (1.0 + zv).powi(5) - 1.0;
        w.write_record([y[i], wv, zv, g].iter().map(|x| format!("{x:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}
