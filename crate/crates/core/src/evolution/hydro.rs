//! Pseudo-spectral solver for `u_t + (b u)_x = 0`, `b = ½ (u²)_xx + μ u²`,
//! valid while `u` stays strictly positive.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lawson::IntegratingFactor;
use super::spectral::Spectral;
use crate::error::{Error, Result};
use crate::grid::{derivative_multiplier, Field, Grid};
use crate::profiles::Mu;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroConfig {
    pub dt: Option<f64>,
    /// Fraction of the RK4 stability interval used by the automatic step.
    pub cfl: f64,
    /// Modes `|m| <= cutoff_fraction · n/2` are evolved; the rest stay zero.
    pub cutoff_fraction: f64,
    pub snapshot_stride: usize,
}

impl Default for HydroConfig {
    fn default() -> Self {
        Self {
            dt: None,
            cfl: 0.5,
            cutoff_fraction: 2.0 / 3.0,
            snapshot_stride: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HydroRun {
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
}

impl HydroRun {
    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("initial state is stored")
    }
}

/// Edge of the imaginary-axis stability interval of classical RK4.
const RK4_IMAGINARY_LIMIT: f64 = 2.8;

fn band_limit(grid: &Grid, fraction: f64) -> (Vec<bool>, f64) {
    let keep = grid.dealias_mask(fraction);
    let k = grid
        .wavenumbers()
        .iter()
        .zip(&keep)
        .filter(|(_, &on)| on)
        .map(|(k, _)| k.abs())
        .fold(0.0, f64::max);
    (keep, k)
}

/// Evolves strictly positive periodic data `u0` to `t_final`.
pub fn solve_hydrodynamic(u0: &Field, mu: Mu, t_final: f64, config: &HydroConfig) -> Result<HydroRun> {
    if !(t_final >= 0.0) {
        return Err(Error::Parameter(format!("T must be nonnegative, got {t_final}")));
    }
    if !(config.cutoff_fraction > 0.0 && config.cutoff_fraction <= 1.0) || config.snapshot_stride == 0 {
        return Err(Error::Parameter("cutoff_fraction must lie in (0, 1] and snapshot_stride >= 1".into()));
    }
    let grid = *u0.grid();
    let n = grid.n();
    let min = u0.values().iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::Domain(format!(
            "hydrodynamic solver needs strictly positive data (min u0 = {min:.3e})"
        )));
    }
    let (keep, kc) = band_limit(&grid, config.cutoff_fraction);
    let mut sp = Spectral::new(grid, 3);

    // Project the data onto the evolved band.
    let mut hat = vec![Complex64::default(); n];
    sp.forward(u0.values(), &mut hat);
    for (h, &on) in hat.iter_mut().zip(&keep) {
        if !on {
            *h = Complex64::default();
        }
    }
    let mut u = vec![0.0; n];
    sp.inverse(&hat, &mut u);

    let rho_max = u.iter().map(|v| v * v).fold(0.0, f64::max);
    let rho_min = u.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    let rho_bar = 0.5 * (rho_max + rho_min);
    let mu_v = mu.value();

    let nominal = config.dt.unwrap_or_else(|| {
        let d = sp.derivatives(&u, 2);
        let uux = (0..n).map(|i| (u[i] * d[1][i]).abs()).fold(0.0, f64::max);
        let first = (0..n)
            .map(|i| d[1][i] * d[1][i] + (u[i] * d[2][i]).abs() + 3.0 * mu_v.abs() * u[i] * u[i])
            .fold(0.0, f64::max);
        let stiff = (rho_max - rho_bar).max(rho_bar - rho_min) * kc.powi(3) + 3.0 * uux * kc * kc + first * kc;
        config.cfl * RK4_IMAGINARY_LIMIT / stiff.max(f64::MIN_POSITIVE)
    });
    let steps = if t_final == 0.0 { 0 } else { (t_final / nominal).ceil() as usize };
    let dt = if steps == 0 { nominal } else { t_final / steps as f64 };

    // Linear part -rho_bar ∂³ is integrated exactly.
    let symbol: Vec<Complex64> = derivative_multiplier(&grid, 3).iter().map(|m| -rho_bar * m).collect();
    let factor = IntegratingFactor::new(&symbol, dt, Some(keep));

    let rate = |sp: &mut Spectral, _: f64, u: &[f64], _: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(i) = u.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Degeneracy {
                node: i,
                coordinate: grid.node(i),
                reason: format!("u = {:.3e} left the positive regime", u[i]),
            });
        }
        let s: Vec<f64> = u.iter().map(|v| v * v).collect();
        let ds = sp.derivatives(&s, 2);
        let du = sp.derivatives(u, 3);
        let flux: Vec<f64> = (0..n).map(|i| (0.5 * ds[2][i] + mu_v * s[i]) * u[i]).collect();
        let dflux = sp.derivatives(&flux, 1);
        Ok(((0..n).map(|i| -dflux[1][i] + rho_bar * du[3][i]).collect(), Vec::new()))
    };

    let mut run = HydroRun {
        dt,
        steps,
        times: vec![0.0],
        snapshots: vec![Field::new(grid, u.clone())?.with_label("u")],
    };
    for k in 1..=steps {
        let t = (k - 1) as f64 * dt;
        let (next, _) = factor
            .step(&mut sp, t, &u, &[], rate)
            .map_err(|e| Error::StepFailed { time: t, source: Box::new(e) })?;
        if let Some(i) = next.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::StepFailed {
                time: k as f64 * dt,
                source: Box::new(Error::Degeneracy {
                    node: i,
                    coordinate: grid.node(i),
                    reason: "u left the positive regime".into(),
                }),
            });
        }
        u = next;
        if k % config.snapshot_stride == 0 || k == steps {
            run.times.push(k as f64 * dt);
            run.snapshots.push(Field::new(grid, u.clone())?.with_label("u"));
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_is_steady() {
        let g = Grid::new(64, 10.0, 0.0).unwrap();
        let u0 = Field::constant(g, 0.7).unwrap();
        let run = solve_hydrodynamic(&u0, Mu::Focusing, 1.0, &HydroConfig { dt: Some(0.01), ..Default::default() }).unwrap();
        assert!(run.last().values().iter().all(|v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn rejects_degenerate_data() {
        let g = Grid::new(64, 10.0, 0.0).unwrap();
        let u0 = Field::from_fn(g, |x| (x / 10.0 * std::f64::consts::PI).sin()).unwrap();
        assert!(matches!(
            solve_hydrodynamic(&u0, Mu::Focusing, 1.0, &HydroConfig::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn small_wave_moves_with_linear_speed() {
        // u = 1 + ε cos(kx): linearization gives u_t + u_xxx + 3μ u_x = 0.
        let len = 2.0 * std::f64::consts::PI;
        let g = Grid::new(32, len, 0.0).unwrap();
        let eps = 1e-7;
        let u0 = Field::from_fn(g, |x| 1.0 + eps * x.cos()).unwrap();
        let t = 0.3;
        let run = solve_hydrodynamic(&u0, Mu::Neutral, t, &HydroConfig::default()).unwrap();
        // Phase speed of cos(x) under u_t + u_xxx = 0 is -1.
        for (x, v) in g.nodes().iter().zip(run.last().values()) {
            let expect = 1.0 + eps * (x + t).cos();
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }
}
