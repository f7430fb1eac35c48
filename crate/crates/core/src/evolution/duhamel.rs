//! Picard iteration of the mild (Duhamel) formulation
//! `W(t) = -∫_0^t S(t - s) (G(s) + rho^(5/6) F) ds`, `S(t) = e^{-ν t ∂⁴}`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::flattened::w_parts;
use super::spectral::{phi12, Spectral};
use super::SolverConfig;
use crate::analysis::norms::{z_norm, NormRequest};
use crate::coordinates::FrameFields;
use crate::error::{Error, Result};
use crate::grid::{derivative_multiplier, Field};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuhamelOptions {
    /// Move `-∂³` into the semigroup instead of treating `W_yyy` as data.
    pub include_airy: bool,
    /// Norm used to measure successive iterates.
    pub norm: NormRequest,
    /// Iterations allowed before a ratio at or above one counts as
    /// non-contraction.
    pub warmup: usize,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self {
            include_airy: false,
            norm: NormRequest::new(0, 0),
            warmup: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DuhamelReport {
    pub iterations: usize,
    /// `||W_{k+1} - W_k|| / ||W_k - W_{k-1}||` per iteration.
    pub ratios: Vec<f64>,
    pub last_difference: f64,
    pub times: Vec<f64>,
}

impl DuhamelReport {
    /// Largest ratio after the warm-up iterations.
    pub fn contraction(&self) -> f64 {
        self.ratios.iter().skip(1).copied().fold(0.0, f64::max)
    }
}

/// Fixed point of the mild map on the time grid of `config`, starting from
/// zero data. Returns `W` at every grid time.
pub fn duhamel_fixed_point(
    frame: &FrameFields,
    nu: f64,
    t_final: f64,
    config: &SolverConfig,
    opts: DuhamelOptions,
) -> Result<(Vec<Field>, DuhamelReport)> {
    config.validate()?;
    if !(nu > 0.0) || !(t_final > 0.0) {
        return Err(Error::Parameter(format!("mild map needs nu > 0 and T > 0 (nu = {nu}, T = {t_final})")));
    }
    let grid = frame.grid;
    let n = grid.n();
    let nominal = config.time_step(&grid, 1.0);
    let steps = (t_final / nominal).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();

    let d3 = derivative_multiplier(&grid, 3);
    let d4 = derivative_multiplier(&grid, 4);
    let symbol: Vec<Complex64> = (0..n)
        .map(|j| {
            let parabolic = -nu * d4[j];
            if opts.include_airy {
                parabolic - d3[j]
            } else {
                parabolic
            }
        })
        .collect();
    let mut prop = Vec::with_capacity(n);
    let mut w_old = Vec::with_capacity(n);
    let mut w_new = Vec::with_capacity(n);
    for s in &symbol {
        let z = s * dt;
        let (p1, p2) = phi12(z);
        prop.push(z.exp());
        w_old.push((p1 - p2) * dt);
        w_new.push(p2 * dt);
    }

    let mut sp = Spectral::new(grid, 3);
    let mut current = vec![vec![0.0; n]; steps + 1];
    let mut ratios = Vec::new();
    let mut previous: Option<f64> = None;
    let mut last = f64::INFINITY;
    for iteration in 1..=config.duhamel_max_iter {
        let mut sources = Vec::with_capacity(steps + 1);
        for w in &current {
            let p = w_parts(&mut sp, w, frame, 3)?;
            let f = frame.forcing.values();
            let mut s = vec![Complex64::default(); n];
            let v: Vec<f64> = (0..n)
                .map(|i| {
                    let lead = if opts.include_airy { p.g[i] } else { 1.0 + p.g[i] };
                    lead * p.d[3][i] + 1.4 * p.gy[i] * p.d[2][i] + p.lower[i] + f[i]
                })
                .collect();
            sp.forward(&v, &mut s);
            sources.push(s);
        }
        let mut next = vec![vec![0.0; n]; steps + 1];
        let mut hat = vec![Complex64::default(); n];
        for k in 0..steps {
            for j in 0..n {
                hat[j] = prop[j] * hat[j] - (w_old[j] * sources[k][j] + w_new[j] * sources[k + 1][j]);
            }
            sp.inverse(&hat, &mut next[k + 1]);
        }
        let diffs: Vec<Field> = next
            .iter()
            .zip(&current)
            .map(|(a, b)| Field::new(grid, a.iter().zip(b).map(|(x, y)| x - y).collect()))
            .collect::<Result<_>>()?;
        let diff = z_norm(&times, &diffs, nu, opts.norm)?;
        current = next;
        last = diff;
        if let Some(prev) = previous {
            let ratio = if prev > 0.0 { diff / prev } else { 0.0 };
            ratios.push(ratio);
            if iteration > opts.warmup + 1 && ratio >= 1.0 && diff > config.duhamel_tol {
                return Err(Error::NonContraction { ratio });
            }
        }
        previous = Some(diff);
        if diff < config.duhamel_tol {
            let fields = current
                .into_iter()
                .map(|v| Field::new(grid, v).map(|f| f.with_label("W")))
                .collect::<Result<_>>()?;
            return Ok((
                fields,
                DuhamelReport { iterations: iteration, ratios, last_difference: diff, times },
            ));
        }
    }
    Err(Error::Consistency(format!(
        "mild iteration did not reach {:.1e} in {} iterations (last difference {last:.3e})",
        config.duhamel_tol, config.duhamel_max_iter
    )))
}
