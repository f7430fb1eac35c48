//! Time integration of the flattened `W` and `Z` equations, the Duhamel
//! iteration for mild solutions and the Eulerian hydrodynamic solver.

mod duhamel;
mod flattened;
mod hydro;
pub(crate) mod lawson;
mod output;
pub(crate) mod spectral;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use duhamel::{duhamel_fixed_point, DuhamelOptions, DuhamelReport};
pub use flattened::{rhs_w, rhs_z, rhs_z_x_form};
pub use hydro::{solve_hydrodynamic, HydroConfig, HydroRun};
pub use output::{write_snapshot_csv, RunManifest};

use crate::coordinates::{drift_point, origin_node, FrameFields};
use crate::error::{Error, Result};
use crate::grid::{derivative_multiplier, Field, Grid};
use flattened::{w_remainder, z_rate, z_regularization};
use lawson::IntegratingFactor;
use spectral::Spectral;

/// Numerical knobs of the flattened solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Fixed step; derived from `cfl_constant` when absent.
    pub dt: Option<f64>,
    pub cfl_constant: f64,
    pub dealias: bool,
    /// Fraction of the Nyquist band kept by the dealiasing filter.
    pub dealias_fraction: f64,
    pub duhamel_tol: f64,
    pub duhamel_max_iter: usize,
    pub snapshot_stride: usize,
    /// Abort once `max |g|` exceeds this.
    pub g_guard: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: None,
            cfl_constant: 0.5,
            dealias: true,
            dealias_fraction: 2.0 / 3.0,
            duhamel_tol: 1e-12,
            duhamel_max_iter: 60,
            snapshot_stride: 1,
            g_guard: 0.6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.cfl_constant > 0.0) {
            return Err(Error::Parameter("cfl_constant must be positive".into()));
        }
        if !(self.duhamel_tol > 0.0) {
            return Err(Error::Parameter("duhamel_tol must be positive".into()));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::Parameter("dealias_fraction must lie in (0, 1]".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Parameter("snapshot_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// `dt = cfl h³ / (π³ max(1 + g))`, or the fixed step.
    pub fn time_step(&self, grid: &Grid, max_metric: f64) -> f64 {
        self.dt.unwrap_or_else(|| {
            let h = grid.spacing();
            self.cfl_constant * h.powi(3) / (std::f64::consts::PI.powi(3) * max_metric.max(1.0))
        })
    }
}

/// Health of the run at a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: f64,
    pub max_g: f64,
    /// `max |rho^(-5/6) W|`, the deviation of `1 + rho^(-5/6) W` from one.
    pub max_deviation: f64,
    /// Share of `∫ W²` in the outer tenth of the grid on each side.
    pub boundary_leak: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    W,
    Z,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
    /// Position of the characteristic through `x = 0`, when `y = 0` is a
    /// grid node.
    pub xi: Option<f64>,
}

/// Output of [`evolve`] and [`evolve_z`]. A run that hits the degeneracy
/// guard keeps everything up to the last good state and records the error.
#[derive(Debug)]
pub struct Trajectory {
    pub variable: Variable,
    pub nu: f64,
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
    pub reports: Vec<StepReport>,
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a trajectory holds its initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Snapshots as `W` fields.
    pub fn w_fields(&self, frame: &FrameFields) -> Result<Vec<Field>> {
        self.snapshots
            .iter()
            .map(|s| match self.variable {
                Variable::W => Ok(s.field.clone()),
                Variable::Z => crate::coordinates::w_from_z(&s.field, frame),
            })
            .collect()
    }

    /// Snapshots as `Z` fields.
    pub fn z_fields(&self, frame: &FrameFields) -> Result<Vec<Field>> {
        self.snapshots
            .iter()
            .map(|s| match self.variable {
                Variable::Z => Ok(s.field.clone()),
                Variable::W => crate::coordinates::z_from_w(&s.field, frame),
            })
            .collect()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Mutable state of a flattened run.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub w: Field,
    pub nu: f64,
    pub xi: f64,
}

impl EvolutionState {
    /// Zero data at `t = 0`.
    pub fn zero(frame: &FrameFields, nu: f64) -> Self {
        Self {
            t: 0.0,
            w: Field::zeros(frame.grid).with_label("W"),
            nu,
            xi: 0.0,
        }
    }
}

fn linear_symbol(grid: &Grid, nu: f64) -> Vec<Complex64> {
    let d3 = derivative_multiplier(grid, 3);
    let d4 = derivative_multiplier(grid, 4);
    d3.iter().zip(&d4).map(|(a, b)| -a - nu * b).collect()
}

fn keep_mask(grid: &Grid, config: &SolverConfig) -> Option<Vec<bool>> {
    config.dealias.then(|| grid.dealias_mask(config.dealias_fraction))
}

fn report(t: f64, z: &[f64], w: &[f64], guard_g: f64) -> StepReport {
    let n = z.len();
    let max_g = z.iter().map(|v| ((1.0 + v).powi(5) - 1.0).abs()).fold(0.0, f64::max);
    let max_deviation = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let edge = n / 10;
    let total: f64 = w.iter().map(|v| v * v).sum();
    let outer: f64 = w[..edge].iter().chain(&w[n - edge..]).map(|v| v * v).sum();
    StepReport {
        t,
        max_g,
        max_deviation,
        boundary_leak: if total > 0.0 { outer / total } else { 0.0 },
        rejected: !(max_g <= guard_g),
    }
}

/// Drift at the origin node from `Z` and its first two derivatives there.
fn origin_drift(frame: &FrameFields, i0: usize, z: f64, zy: f64, zyy: f64) -> f64 {
    drift_point(
        1.0 + z,
        zy,
        zyy,
        frame.log_deriv(1)[i0],
        frame.log_deriv(2)[i0],
        frame.rho13.values()[i0],
        frame.rho.values()[i0],
        frame.mu.value(),
    )
}

/// One integrating-factor RK4 step of the regularized `W` equation.
pub fn step(state: &EvolutionState, frame: &FrameFields, config: &SolverConfig) -> Result<EvolutionState> {
    let dt = config.time_step(&frame.grid, 1.0);
    let mut sp = Spectral::new(frame.grid, 4);
    let factor = IntegratingFactor::new(&linear_symbol(&frame.grid, state.nu), dt, keep_mask(&frame.grid, config));
    let i0 = origin_node(&frame.grid).ok();
    let (w, side) = factor.step(&mut sp, state.t, state.w.values(), &[state.xi], |sp, _, w, _| {
        w_stage(sp, w, frame, i0)
    })?;
    Ok(EvolutionState {
        t: state.t + dt,
        w: Field::new(frame.grid, w)?.with_label("W"),
        nu: state.nu,
        xi: side[0],
    })
}

fn w_stage(sp: &mut Spectral, w: &[f64], frame: &FrameFields, i0: Option<usize>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (r, p) = w_remainder(sp, w, frame)?;
    let b = match i0 {
        Some(i) => {
            let rm = frame.rho_m56.values()[i];
            let (l1, l2) = (frame.log_deriv(1)[i], frame.log_deriv(2)[i]);
            let (w0, wy, wyy) = (p.d[0][i], p.d[1][i], p.d[2][i]);
            let z = rm * w0;
            let zy = rm * (wy - 5.0 / 6.0 * l1 * w0);
            let zyy = rm * (wyy - 5.0 / 3.0 * l1 * wy - 5.0 / 6.0 * l2 * w0 + 55.0 / 36.0 * l1 * l1 * w0);
            origin_drift(frame, i, z, zy, zyy)
        }
        None => 0.0,
    };
    Ok((r, vec![b]))
}

fn z_stage(
    sp: &mut Spectral,
    z: &[f64],
    frame: &FrameFields,
    nu: f64,
    i0: Option<usize>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = sp.derivatives(z, 4);
    let mut r = z_rate(&d, frame)?;
    let reg = z_regularization(&d, frame, nu);
    for i in 0..r.len() {
        // The linear part -Z_yyy - ν Z_yyyy is integrated exactly.
        r[i] += d[3][i] + reg[i] + nu * d[4][i];
    }
    let b = i0.map_or(0.0, |i| origin_drift(frame, i, d[0][i], d[1][i], d[2][i]));
    Ok((r, vec![b]))
}

/// Evolves the regularized `W` equation from `w0` (zero when absent) to
/// `t_final`.
pub fn evolve(
    frame: &FrameFields,
    w0: Option<&Field>,
    nu: f64,
    t_final: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    evolve_observed(frame, w0, nu, t_final, config, |_, _| {})
}

/// [`evolve`] with a callback invoked at each snapshot.
pub fn evolve_observed(
    frame: &FrameFields,
    w0: Option<&Field>,
    nu: f64,
    t_final: f64,
    config: &SolverConfig,
    observer: impl FnMut(&Snapshot, &StepReport),
) -> Result<Trajectory> {
    let start = match w0 {
        Some(w) => w.values().to_vec(),
        None => vec![0.0; frame.grid.n()],
    };
    let to_z = |w: &[f64]| -> Vec<f64> { w.iter().zip(frame.rho_m56.values()).map(|(a, b)| a * b).collect() };
    run(
        frame,
        Variable::W,
        start,
        nu,
        t_final,
        config,
        |sp, w, i0| w_stage(sp, w, frame, i0),
        |w| (to_z(w), w.to_vec()),
        observer,
    )
}

/// Evolves the flattened `Z` equation, regularized by
/// `-ν rho^(-5/6) ∂⁴(rho^(5/6) Z)` so that it matches the `W` run.
pub fn evolve_z(
    frame: &FrameFields,
    z0: Option<&Field>,
    nu: f64,
    t_final: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let start = match z0 {
        Some(z) => z.values().to_vec(),
        None => vec![0.0; frame.grid.n()],
    };
    let to_w = |z: &[f64]| -> Vec<f64> { z.iter().zip(frame.rho56.values()).map(|(a, b)| a * b).collect() };
    run(
        frame,
        Variable::Z,
        start,
        nu,
        t_final,
        config,
        |sp, z, i0| z_stage(sp, z, frame, nu, i0),
        |z| (z.to_vec(), to_w(z)),
        |_, _| {},
    )
}

#[allow(clippy::too_many_arguments)]
fn run(
    frame: &FrameFields,
    variable: Variable,
    start: Vec<f64>,
    nu: f64,
    t_final: f64,
    config: &SolverConfig,
    mut stage: impl FnMut(&mut Spectral, &[f64], Option<usize>) -> Result<(Vec<f64>, Vec<f64>)>,
    views: impl Fn(&[f64]) -> (Vec<f64>, Vec<f64>),
    mut observer: impl FnMut(&Snapshot, &StepReport),
) -> Result<Trajectory> {
    config.validate()?;
    if !(nu >= 0.0) || !(t_final >= 0.0) {
        return Err(Error::Parameter(format!("need nu >= 0 and T >= 0 (nu = {nu}, T = {t_final})")));
    }
    let grid = frame.grid;
    let label = match variable {
        Variable::W => "W",
        Variable::Z => "Z",
    };
    let (z0, _) = views(&start);
    let max_metric = z0.iter().map(|v| (1.0 + v).powi(5)).fold(1.0, f64::max);
    let nominal = config.time_step(&grid, max_metric);
    let steps = if t_final == 0.0 { 0 } else { (t_final / nominal).ceil() as usize };
    let dt = if steps == 0 { nominal } else { t_final / steps as f64 };
    let factor = IntegratingFactor::new(&linear_symbol(&grid, nu), dt, keep_mask(&grid, config));
    let mut sp = Spectral::new(grid, 4);
    let i0 = origin_node(&grid).ok();

    let mut traj = Trajectory {
        variable,
        nu,
        dt,
        steps: 0,
        snapshots: Vec::new(),
        reports: Vec::new(),
        failure: None,
    };
    let mut push = |traj: &mut Trajectory, t: f64, u: &[f64], xi: f64| -> Result<bool> {
        let (z, w) = views(u);
        let rep = report(t, &z, &w, config.g_guard);
        let snap = Snapshot {
            t,
            field: Field::new(grid, u.to_vec())?.with_label(label),
            xi: i0.map(|_| xi),
        };
        observer(&snap, &rep);
        traj.snapshots.push(snap);
        traj.reports.push(rep);
        Ok(rep.rejected)
    };
    let mut u = start;
    let mut xi = vec![0.0];
    if push(&mut traj, 0.0, &u, 0.0)? {
        traj.failure = Some(guard_error(0.0, traj.reports[0].max_g));
        return Ok(traj);
    }
    for k in 1..=steps {
        let t = (k - 1) as f64 * dt;
        let result = factor.step(&mut sp, t, &u, &xi, |sp, _, v, _| stage(sp, v, i0));
        let (next, side) = match result {
            Ok(r) => r,
            Err(e) => {
                traj.failure = Some(Error::StepFailed { time: t, source: Box::new(e) });
                return Ok(traj);
            }
        };
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            traj.failure = Some(Error::StepFailed {
                time: t,
                source: Box::new(Error::Degeneracy {
                    node: i,
                    coordinate: grid.node(i),
                    reason: "non-finite value".into(),
                }),
            });
            return Ok(traj);
        }
        let (z, w) = views(&next);
        let rep = report(k as f64 * dt, &z, &w, config.g_guard);
        if rep.rejected {
            traj.snapshots.push(Snapshot {
                t: k as f64 * dt,
                field: Field::new(grid, next)?.with_label(label),
                xi: i0.map(|_| side[0]),
            });
            traj.reports.push(rep);
            traj.steps = k;
            traj.failure = Some(guard_error(rep.t, rep.max_g));
            return Ok(traj);
        }
        u = next;
        xi = side;
        traj.steps = k;
        if k % config.snapshot_stride == 0 || k == steps {
            push(&mut traj, k as f64 * dt, &u, xi[0])?;
        }
    }
    Ok(traj)
}

fn guard_error(t: f64, max_g: f64) -> Error {
    Error::StepFailed {
        time: t,
        source: Box::new(Error::Degeneracy {
            node: 0,
            coordinate: f64::NAN,
            reason: format!("max |g| = {max_g:.3e} exceeds the guard"),
        }),
    }
}
