//! Integrating-factor (Lawson) RK4 for `u_t = L u + R(t, u)` with `L` a
//! Fourier multiplier, plus a few scalar side variables advanced by plain
//! RK4 alongside.

use rustfft::num_complex::Complex64;

use super::spectral::Spectral;
use crate::error::Result;

pub(crate) struct IntegratingFactor {
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    keep: Option<Vec<bool>>,
    pub dt: f64,
}

impl IntegratingFactor {
    /// `symbol[j]` is the multiplier of `L` on mode `j`; `keep` masks the
    /// explicit increments.
    pub fn new(symbol: &[Complex64], dt: f64, keep: Option<Vec<bool>>) -> Self {
        Self {
            half: symbol.iter().map(|s| (s * (0.5 * dt)).exp()).collect(),
            full: symbol.iter().map(|s| (s * dt).exp()).collect(),
            keep,
            dt,
        }
    }

    fn masked(&self, sp: &mut Spectral, r: &[f64]) -> Vec<Complex64> {
        let mut k = vec![Complex64::default(); sp.n()];
        sp.forward(r, &mut k);
        if let Some(keep) = &self.keep {
            for (v, &on) in k.iter_mut().zip(keep) {
                if !on {
                    *v = Complex64::default();
                }
            }
        }
        k
    }

    /// One step from `(t, u, side)`. `rate` returns the explicit part of
    /// `u_t` in physical space and the rates of the side variables.
    pub fn step<F>(&self, sp: &mut Spectral, t: f64, u: &[f64], side: &[f64], mut rate: F) -> Result<(Vec<f64>, Vec<f64>)>
    where
        F: FnMut(&mut Spectral, f64, &[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
    {
        let n = sp.n();
        let dt = self.dt;
        let (eh, ef) = (&self.half, &self.full);
        let mut u_hat = vec![Complex64::default(); n];
        sp.forward(u, &mut u_hat);
        let shift = |s: &[f64], e: &[f64], c: f64| -> Vec<f64> { s.iter().zip(e).map(|(a, b)| a + c * b).collect() };
        let mut phys = vec![0.0; n];

        let (r1, e1) = rate(sp, t, u, side)?;
        let k1 = self.masked(sp, &r1);
        let a: Vec<Complex64> = (0..n).map(|j| eh[j] * (u_hat[j] + 0.5 * dt * k1[j])).collect();
        sp.inverse(&a, &mut phys);
        let (r2, e2) = rate(sp, t + 0.5 * dt, &phys, &shift(side, &e1, 0.5 * dt))?;
        let k2 = self.masked(sp, &r2);
        let b: Vec<Complex64> = (0..n).map(|j| eh[j] * u_hat[j] + 0.5 * dt * k2[j]).collect();
        sp.inverse(&b, &mut phys);
        let (r3, e3) = rate(sp, t + 0.5 * dt, &phys, &shift(side, &e2, 0.5 * dt))?;
        let k3 = self.masked(sp, &r3);
        let c: Vec<Complex64> = (0..n).map(|j| ef[j] * u_hat[j] + dt * eh[j] * k3[j]).collect();
        sp.inverse(&c, &mut phys);
        let (r4, e4) = rate(sp, t + dt, &phys, &shift(side, &e3, dt))?;
        let k4 = self.masked(sp, &r4);
        let next: Vec<Complex64> = (0..n)
            .map(|j| ef[j] * u_hat[j] + dt / 6.0 * (ef[j] * k1[j] + 2.0 * eh[j] * (k2[j] + k3[j]) + k4[j]))
            .collect();
        sp.inverse(&next, &mut phys);
        let side_next = (0..side.len())
            .map(|i| side[i] + dt / 6.0 * (e1[i] + 2.0 * e2[i] + 2.0 * e3[i] + e4[i]))
            .collect();
        Ok((phys, side_next))
    }
}
