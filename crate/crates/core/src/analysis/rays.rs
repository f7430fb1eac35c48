//! Bicharacteristics `ẋ = -3 ρ(x) ξ²`, `ξ̇ = ρ_x(x) ξ³` of the symbol
//! `-ρ ξ³`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::Density;

/// Frequencies beyond this count as blowup.
pub const BLOWUP_FREQUENCY: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub t: f64,
    pub x: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayTrace {
    /// States at multiples of the output step, plus the final state.
    pub states: Vec<RayState>,
    /// Time at which `|ξ|` crossed [`BLOWUP_FREQUENCY`].
    pub blowup: Option<f64>,
}

impl RayTrace {
    pub fn last(&self) -> &RayState {
        self.states.last().expect("initial state is stored")
    }
}

/// Largest relative change of `x - edge` or `ξ` allowed in one substep.
const RELATIVE_STEP: f64 = 2e-3;

fn field<D: Density + ?Sized>(d: &D, x: f64, xi: f64) -> (f64, f64) {
    (-3.0 * d.rho(x) * xi * xi, d.rho_x(x) * xi.powi(3))
}

fn rk4<D: Density + ?Sized>(d: &D, x: f64, xi: f64, h: f64) -> (f64, f64) {
    let k1 = field(d, x, xi);
    let k2 = field(d, x + 0.5 * h * k1.0, xi + 0.5 * h * k1.1);
    let k3 = field(d, x + 0.5 * h * k2.0, xi + 0.5 * h * k2.1);
    let k4 = field(d, x + h * k3.0, xi + h * k3.1);
    (
        x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        xi + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// RK4 along the ray from `(x0, ξ0)` with output every `dt` up to `t_final`.
/// Substeps shrink as the ray approaches a support edge or its frequency
/// grows, so finite-time blowup is resolved rather than stepped over.
pub fn trace_ray<D: Density + ?Sized>(density: &D, x0: f64, xi0: f64, t_final: f64, dt: f64) -> Result<RayTrace> {
    let (lo, hi) = density.support();
    if !(x0 > lo && x0 < hi) {
        return Err(Error::Parameter(format!("ray start x0 = {x0} is outside the support ({lo}, {hi})")));
    }
    if !(dt > 0.0 && t_final >= 0.0 && xi0.is_finite()) {
        return Err(Error::Parameter("ray tracing needs dt > 0, T >= 0 and finite ξ0".into()));
    }
    let mut state = RayState { t: 0.0, x: x0, xi: xi0 };
    let mut trace = RayTrace { states: vec![state], blowup: None };
    let outputs = (t_final / dt).ceil() as usize;
    for k in 1..=outputs {
        let target = (k as f64 * dt).min(t_final);
        while state.t < target {
            let (vx, vxi) = field(density, state.x, state.xi);
            let gap = (state.x - lo).min(hi - state.x);
            let mut h = target - state.t;
            if vx != 0.0 && gap.is_finite() {
                h = h.min(RELATIVE_STEP * gap / vx.abs());
            }
            if vxi != 0.0 && state.xi != 0.0 {
                h = h.min(RELATIVE_STEP * state.xi.abs() / vxi.abs());
            }
            let (x, xi) = rk4(density, state.x, state.xi, h);
            state = RayState { t: if h == target - state.t { target } else { state.t + h }, x, xi };
            if !(xi.abs() <= BLOWUP_FREQUENCY) || !(x > lo && x < hi) {
                trace.blowup = Some(state.t);
                trace.states.push(state);
                return Ok(trace);
            }
        }
        trace.states.push(state);
    }
    Ok(trace)
}

/// Closed-form ray for `ρ = x^k`: `x(t) = x0 (1 - (3-k) x0^{k-1} ξ0² t)^{3/(3-k)}`
/// (exponential for `k = 3`) and `ρ ξ³` constant.
pub fn power_law_ray(k: f64, x0: f64, xi0: f64, t: f64) -> RayState {
    let x = if (k - 3.0).abs() < 1e-14 {
        x0 * (-3.0 * x0 * x0 * xi0 * xi0 * t).exp()
    } else {
        x0 * (1.0 - (3.0 - k) * x0.powf(k - 1.0) * xi0 * xi0 * t).powf(3.0 / (3.0 - k))
    };
    RayState { t, x, xi: xi0 * (x0 / x).powf(k / 3.0) }
}

/// Blowup time `1 / ((3-k) x0^{k-1} ξ0²)` for `k < 3`.
pub fn power_law_blowup_time(k: f64, x0: f64, xi0: f64) -> Option<f64> {
    (k < 3.0).then(|| 1.0 / ((3.0 - k) * x0.powf(k - 1.0) * xi0 * xi0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::PowerLaw;

    struct Flat(f64);

    impl Density for Flat {
        fn rho(&self, _: f64) -> f64 {
            self.0
        }
        fn rho_x(&self, _: f64) -> f64 {
            0.0
        }
        fn support(&self) -> (f64, f64) {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    #[test]
    fn constant_density_is_a_straight_line() {
        let tr = trace_ray(&Flat(2.0), 1.0, 0.5, 3.0, 0.25).unwrap();
        assert_eq!(tr.states.len(), 13);
        for s in &tr.states {
            assert_eq!(s.xi, 0.5);
            assert!((s.x - (1.0 - 1.5 * s.t)).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_start_outside_support() {
        assert!(trace_ray(&PowerLaw { exponent: 3.0 }, -1.0, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn cubic_density_decays_exponentially() {
        let tr = trace_ray(&PowerLaw { exponent: 3.0 }, 0.8, 1.2, 5.0, 0.05).unwrap();
        assert!(tr.blowup.is_none());
        for s in &tr.states {
            let e = power_law_ray(3.0, 0.8, 1.2, s.t);
            assert!((s.x - e.x).abs() <= 1e-8 * e.x.abs());
            assert!((s.xi - e.xi).abs() <= 1e-8 * e.xi.abs());
        }
    }

    #[test]
    fn linear_density_blows_up_on_time() {
        let tstar = power_law_blowup_time(1.0, 1.0, 1.0).unwrap();
        assert_eq!(tstar, 0.5);
        let tr = trace_ray(&PowerLaw { exponent: 1.0 }, 1.0, 1.0, 1.0, 0.01).unwrap();
        let hit = tr.blowup.expect("blowup");
        assert!((hit - tstar).abs() < 0.05 * tstar);
        for s in tr.states.iter().filter(|s| s.t <= 0.9 * tstar) {
            let e = power_law_ray(1.0, 1.0, 1.0, s.t);
            assert!((s.xi - e.xi).abs() <= 1e-8 * e.xi.abs(), "{} {} {}", s.t, s.xi, e.xi);
        }
    }

    #[test]
    fn symbol_is_conserved() {
        let d = PowerLaw { exponent: 4.0 };
        let tr = trace_ray(&d, 0.5, -2.0, 5.0, 0.1).unwrap();
        let a0 = d.rho(0.5) * (-2.0f64).powi(3);
        for s in &tr.states {
            assert!((d.rho(s.x) * s.xi.powi(3) - a0).abs() < 1e-9 * a0.abs());
        }
    }
}
