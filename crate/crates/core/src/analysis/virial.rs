//! Moment identities and conservation drift of Eulerian trajectories.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, integrate, Field};
use crate::profiles::{conserved_quantities, Mu};

/// Seam leak above which moment diagnostics are unreliable.
pub const LEAK_THRESHOLD: f64 = 1e-8;

/// `d/dt ∫ x u²` and `d/dt ∫ x u` predicted from a single snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialRates {
    /// `-5 ∫ |u u_x|² + (3μ/2) ∫ u⁴`.
    pub rate_xu2: f64,
    /// `-∫ u u_x² + μ ∫ u³`.
    pub rate_xu: f64,
    /// `max |u|` over the outer tenth of each side, relative to `max |u|`.
    pub leak: f64,
}

impl VirialRates {
    pub fn reliable(&self) -> bool {
        self.leak <= LEAK_THRESHOLD
    }
}

/// Relative size of `u` near the periodic seam.
pub fn seam_leak(u: &Field) -> f64 {
    let v = u.values();
    let peak = u.max_abs();
    if peak == 0.0 {
        return 0.0;
    }
    let edge = (v.len() / 10).max(1);
    let outer = v[..edge].iter().chain(&v[v.len() - edge..]).fold(0.0f64, |m, x| m.max(x.abs()));
    outer / peak
}

pub fn virial_rates(u: &Field, mu: Mu) -> Result<VirialRates> {
    let m = mu.value();
    let ux = derivative(u, 1)?;
    // |u u_x|² = ((u²)_x)² / 4 keeps square-root edges smooth.
    let rho_x = derivative(&u.map(|v| v * v)?, 1)?;
    let grad = integrate(&rho_x.map(|d| 0.25 * d * d)?);
    let quartic = integrate(&u.map(|v| v.powi(4))?);
    let cubic = integrate(&u.map(|v| v.powi(3))?);
    let u_ux2 = integrate(&u.zip_with(&ux, |a, b| a * b * b)?);
    Ok(VirialRates {
        rate_xu2: -5.0 * grad + 1.5 * m * quartic,
        rate_xu: -u_ux2 + m * cubic,
        leak: seam_leak(u),
    })
}

/// `∫ x u²` and `∫ x u` over the grid coordinates.
pub fn moments(u: &Field) -> (f64, f64) {
    let g = u.grid();
    let h = g.spacing();
    u.values().iter().enumerate().fold((0.0, 0.0), |(a, b), (i, v)| {
        let x = g.node(i);
        (a + h * x * v * v, b + h * x * v)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub positive_momentum: f64,
    pub hamiltonian: f64,
    /// Drifts relative to the first snapshot (absolute when that value is 0).
    pub mass_drift: f64,
    pub momentum_drift: f64,
    pub hamiltonian_drift: f64,
    pub xu2_num: f64,
    pub xu2_pred: f64,
    pub xu_num: f64,
    pub xu_pred: f64,
    pub leak: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub rows: Vec<DiagnosticsRow>,
}

fn drift(now: f64, start: f64) -> f64 {
    if start == 0.0 {
        now
    } else {
        (now - start) / start.abs()
    }
}

/// Second-order derivative of samples `y(t)`: three-point centered formula
/// inside, one-sided three-point formulas at the ends.
fn time_derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n < 2 {
        return vec![0.0; n];
    }
    if n == 2 {
        let s = (y[1] - y[0]) / (t[1] - t[0]);
        return vec![s, s];
    }
    // Derivative at t[j] of the parabola through samples a, b, c.
    let three = |j: usize, a: usize, b: usize, c: usize| {
        let (ta, tb, tc, tj) = (t[a], t[b], t[c], t[j]);
        y[a] * ((tj - tb) + (tj - tc)) / ((ta - tb) * (ta - tc))
            + y[b] * ((tj - ta) + (tj - tc)) / ((tb - ta) * (tb - tc))
            + y[c] * ((tj - ta) + (tj - tb)) / ((tc - ta) * (tc - tb))
    };
    (0..n)
        .map(|j| match j {
            0 => three(0, 0, 1, 2),
            j if j == n - 1 => three(j, j - 2, j - 1, j),
            j => three(j, j - 1, j, j + 1),
        })
        .collect()
}

/// Conservation and virial diagnostics for snapshots `u(t_j)`.
pub fn drift_report(times: &[f64], snapshots: &[Field], mu: Mu) -> Result<DiagnosticsRecord> {
    if times.len() != snapshots.len() || times.is_empty() {
        return Err(Error::Data("drift report needs one time per snapshot".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Data("snapshot times must increase".into()));
    }
    let sets = snapshots.iter().map(|u| conserved_quantities(u, mu)).collect::<Result<Vec<_>>>()?;
    let rates = snapshots.iter().map(|u| virial_rates(u, mu)).collect::<Result<Vec<_>>>()?;
    let (xu2, xu): (Vec<f64>, Vec<f64>) = snapshots.iter().map(moments).unzip();
    let dxu2 = time_derivative(times, &xu2);
    let dxu = time_derivative(times, &xu);
    let first = sets[0];
    let rows = (0..times.len())
        .map(|j| DiagnosticsRow {
            t: times[j],
            mass: sets[j].mass,
            momentum: sets[j].momentum,
            positive_momentum: sets[j].positive_momentum,
            hamiltonian: sets[j].hamiltonian,
            mass_drift: drift(sets[j].mass, first.mass),
            momentum_drift: drift(sets[j].momentum, first.momentum),
            hamiltonian_drift: drift(sets[j].hamiltonian, first.hamiltonian),
            xu2_num: dxu2[j],
            xu2_pred: rates[j].rate_xu2,
            xu_num: dxu[j],
            xu_pred: rates[j].rate_xu,
            leak: rates[j].leak,
        })
        .collect();
    Ok(DiagnosticsRecord { rows })
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 13] = [
        "t", "M", "J", "Jplus", "H", "dM", "dJ", "dH", "xu2_num", "xu2_pred", "xu_num", "xu_pred", "leak",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::COLUMNS)?;
        for r in &self.rows {
            let vals = [
                r.t,
                r.mass,
                r.momentum,
                r.positive_momentum,
                r.hamiltonian,
                r.mass_drift,
                r.momentum_drift,
                r.hamiltonian_drift,
                r.xu2_num,
                r.xu2_pred,
                r.xu_num,
                r.xu_pred,
                r.leak,
            ];
            w.write_record(vals.iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Largest `|numeric - predicted|` relative to the largest predicted
    /// rate, for `∫ x u²` and `∫ x u`.
    pub fn virial_mismatch(&self) -> (f64, f64) {
        let rel = |num: fn(&DiagnosticsRow) -> (f64, f64)| {
            let scale = self.rows.iter().map(|r| num(r).1.abs()).fold(0.0, f64::max);
            let gap = self.rows.iter().map(|r| (num(r).0 - num(r).1).abs()).fold(0.0, f64::max);
            if scale > 0.0 {
                gap / scale
            } else {
                gap
            }
        };
        (rel(|r| (r.xu2_num, r.xu2_pred)), rel(|r| (r.xu_num, r.xu_pred)))
    }
}
