//! Constant-coefficient semigroups, the model linear equation
//! `w_t + (1+g) w_yyy + β g_y w_yy + a w_y + f = -ν w_yyyy` with its energy
//! ledger, and the Mizohata functional.

use std::io::Write;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::norms::bracket;
use crate::error::{Error, Result};
use crate::evolution::lawson::IntegratingFactor;
use crate::evolution::spectral::Spectral;
use crate::grid::{apply_multiplier, derivative_multiplier, Field, Grid};

/// `∂^n e^{t(-∂³ - ν∂⁴)} f` (Airy part optional), as the Fourier multiplier
/// `(iξ)^n exp(t(iξ³ - νξ⁴))`.
pub fn apply_semigroup(f: &Field, t: f64, nu: f64, n: u32, airy: bool) -> Result<Field> {
    if !(t >= 0.0) || n > 3 || !(nu >= 0.0) {
        return Err(Error::Parameter(format!("semigroup needs t >= 0, nu >= 0, n <= 3 (t = {t}, n = {n})")));
    }
    let mult = semigroup_multiplier(f.grid(), t, nu, n, airy);
    apply_multiplier(f, &mult)
}

fn semigroup_multiplier(grid: &Grid, t: f64, nu: f64, n: u32, airy: bool) -> Vec<Complex64> {
    let d3 = derivative_multiplier(grid, 3);
    let dn = derivative_multiplier(grid, n);
    grid.wavenumbers()
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let mut z = Complex64::new(-nu * k.powi(4), 0.0);
            if airy {
                z -= d3[j];
            }
            dn[j] * (z * t).exp()
        })
        .collect()
}

/// `L¹` norm of the kernel of `∂^n e^{-s ∂⁴}` at `s = ν t`, synthesized on
/// the periodic grid.
pub fn kernel_l1_norm(grid: &Grid, s: f64, n: u32) -> Result<f64> {
    let mut delta = vec![0.0; grid.n()];
    delta[0] = 1.0 / grid.spacing();
    let k = apply_multiplier(&Field::new(*grid, delta)?, &semigroup_multiplier(grid, 1.0, s, n, false))?;
    Ok(k.values().iter().map(|v| v.abs()).sum::<f64>() * grid.spacing())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Coefficients of the model equation sampled every half step.
#[derive(Debug, Clone)]
pub struct ModelCoefficients {
    pub grid: Grid,
    pub beta: f64,
    pub nu: f64,
    /// Spacing of the samples below; twice this is the solver step.
    pub sample_dt: f64,
    pub g: Vec<Field>,
    pub a: Vec<Field>,
    pub f: Vec<Field>,
}

impl ModelCoefficients {
    /// Samples `g(t, y)`, `a(t, y)`, `f(t, y)` at `t = j dt / 2` up to
    /// `t_final`. Rejects `sup |g| > ½`.
    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        grid: Grid,
        beta: f64,
        nu: f64,
        t_final: f64,
        dt: f64,
        g: impl Fn(f64, f64) -> f64,
        a: impl Fn(f64, f64) -> f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if !(dt > 0.0) || !(t_final > 0.0) {
            return Err(Error::Parameter("model run needs dt > 0 and T > 0".into()));
        }
        let steps = (t_final / dt).round() as usize;
        if steps == 0 || ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::Parameter(format!("T = {t_final} is not a multiple of dt = {dt}")));
        }
        let half = 0.5 * dt;
        let at = |h: &dyn Fn(f64, f64) -> f64, t: f64| Field::from_fn(grid, |y| h(t, y));
        let mut c = Self { grid, beta, nu, sample_dt: half, g: vec![], a: vec![], f: vec![] };
        for j in 0..=2 * steps {
            let t = j as f64 * half;
            c.g.push(at(&g, t)?);
            c.a.push(at(&a, t)?);
            c.f.push(at(&f, t)?);
        }
        c.validate()?;
        Ok(c)
    }

    /// Random draw from the manufactured family
    /// `g = A sin(y) cos(ωt)`, `a = b sech²(y)`, `f` a pulsing Gaussian, with
    /// `β = 7/5`, `ν = 10⁻³` on a `2π`-periodic multiple, `T = 2`.
    pub fn manufactured(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = rng.random_range(0.1..0.3);
        let omega = rng.random_range(0.5..2.0);
        let drift = rng.random_range(0.2..0.8);
        let center = rng.random_range(-5.0..5.0);
        let width = rng.random_range(1.0..3.0);
        let grid = Grid::centered(256, 13.0 * PI)?;
        Self::sample(
            grid,
            1.4,
            1e-3,
            2.0,
            2e-3,
            move |t, y| amp * y.sin() * (omega * t).cos(),
            move |_, y| drift / y.cosh().powi(2),
            move |t, y| (-((y - center) / width).powi(2)).exp() * (1.0 + 0.5 * (omega * t).sin()),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let worst = self.g.iter().map(Field::max_abs).fold(0.0, f64::max);
        if worst > 0.5 {
            return Err(Error::Parameter(format!("coefficient g reaches {worst:.3}, above the allowed 1/2")));
        }
        if self.g.len() != self.a.len() || self.g.len() != self.f.len() || self.g.len() < 3 {
            return Err(Error::Parameter("coefficient samples differ in length".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.g.len() - 1) / 2
    }

    /// `sup_y |g_t|` at sample `j` by centered differences.
    fn g_rate(&self, j: usize) -> f64 {
        let last = self.g.len() - 1;
        let (lo, hi) = (j.saturating_sub(1), (j + 1).min(last));
        let span = (hi - lo) as f64 * self.sample_dt;
        self.g[hi]
            .values()
            .iter()
            .zip(self.g[lo].values())
            .map(|(a, b)| ((a - b) / span).abs())
            .fold(0.0, f64::max)
    }
}

/// One row of the energy ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    /// `||(1+g)^(β/3 - 1/2) w||²`.
    pub energy: f64,
    /// `sup_{s<=t} ||f(s)||²`.
    pub forcing_sup: f64,
    /// `∫_0^t (1 + ||g_t||_∞)`, exponent of the first envelope form.
    pub exponent: f64,
    /// `(1 + sup ||g_t||_∞) t + sqrt(ν t)`, exponent of the second form.
    pub exponent_alt: f64,
    /// `||<y> w||²` and `sup ||<y> f||² + Σ_{n<=2} sup ||∂^n w||²` for the
    /// first weighted estimate.
    pub weighted_energy: f64,
    pub weighted_data: f64,
}

/// Energy history of a model run and the Gronwall envelope `σ(t) sup||f||²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

/// `ln(1 + lhs/data) / exponent`, the smallest constant that puts `lhs`
/// under `(e^{C exponent} - 1) data`.
fn required_constant(lhs: f64, data: f64, exponent: f64) -> Option<f64> {
    (data > 0.0 && exponent > 0.0 && lhs > 0.0).then(|| (lhs / data).ln_1p() / exponent)
}

impl EnergyLedger {
    /// Smallest `C` for which every row sits under the first envelope.
    pub fn fit_constant(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| required_constant(r.energy, r.forcing_sup, r.exponent))
            .fold(0.0, f64::max)
    }

    /// Same for the second envelope form.
    pub fn fit_constant_alt(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| required_constant(r.energy, r.forcing_sup, r.exponent_alt))
            .fold(0.0, f64::max)
    }

    /// Same for the weighted estimate with `k = 1`.
    pub fn fit_weighted_constant(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| required_constant(r.weighted_energy, r.weighted_data, r.exponent))
            .fold(0.0, f64::max)
    }

    /// `σ(t) sup ||f||²` with `σ(t) = e^{C ∫(1 + ||g_t||)} - 1`.
    pub fn envelope(&self, c: f64) -> Vec<f64> {
        self.rows.iter().map(|r| (c * r.exponent).exp_m1() * r.forcing_sup).collect()
    }

    /// Times at which the energy exceeds the envelope with constant `c`.
    pub fn violations(&self, c: f64) -> Vec<f64> {
        self.rows
            .iter()
            .zip(self.envelope(c))
            .filter(|(r, env)| r.energy > *env * (1.0 + 1e-12))
            .map(|(r, _)| r.t)
            .collect()
    }

    /// Writes `t, E, envelope, C_fit`.
    pub fn write_csv<W: Write>(&self, out: W, c: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "E", "envelope", "C_fit"])?;
        for (r, env) in self.rows.iter().zip(self.envelope(c)) {
            w.write_record([r.t, r.energy, env, c].iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn l2_sq(grid: &Grid, v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() * grid.spacing()
}

/// Integrating-factor RK4 solution of the model equation from `w(0) = 0`
/// with step `2 · sample_dt`.
pub fn solve_model_linear(coeffs: &ModelCoefficients) -> Result<(Vec<Field>, EnergyLedger)> {
    coeffs.validate()?;
    let grid = coeffs.grid;
    let n = grid.n();
    let dt = 2.0 * coeffs.sample_dt;
    let steps = coeffs.steps();
    let symbol: Vec<Complex64> = derivative_multiplier(&grid, 3)
        .iter()
        .zip(derivative_multiplier(&grid, 4))
        .map(|(a, b)| -a - coeffs.nu * b)
        .collect();
    let factor = IntegratingFactor::new(&symbol, dt, None);
    let mut sp = Spectral::new(grid, 3);
    let gy: Vec<Vec<f64>> = coeffs.g.iter().map(|g| sp.derivatives(g.values(), 1).remove(1)).collect();
    let beta = coeffs.beta;
    let y = grid.nodes();

    let mut w = vec![0.0; n];
    let mut traj = vec![Field::zeros(grid).with_label("w")];
    let mut rows = Vec::with_capacity(steps + 1);
    let mut exponent = 0.0;
    let mut forcing_sup: f64 = 0.0;
    let mut weighted_f_sup: f64 = 0.0;
    let mut deriv_sups = [0.0f64; 3];
    let rate_sup = (0..coeffs.g.len()).map(|j| coeffs.g_rate(j)).fold(0.0, f64::max);
    let mut record = |j: usize, w: &[f64], sp: &mut Spectral, exponent: f64| {
        let t = j as f64 * coeffs.sample_dt;
        let g = coeffs.g[j].values();
        let f = coeffs.f[j].values();
        let weight = beta / 3.0 - 0.5;
        let weighted: Vec<f64> = (0..n).map(|i| (1.0 + g[i]).powf(weight) * w[i]).collect();
        forcing_sup = forcing_sup.max(l2_sq(&grid, f));
        let yf: Vec<f64> = (0..n).map(|i| bracket(y[i]) * f[i]).collect();
        weighted_f_sup = weighted_f_sup.max(l2_sq(&grid, &yf));
        let d = sp.derivatives(w, 2);
        for (s, dn) in deriv_sups.iter_mut().zip(&d) {
            *s = s.max(l2_sq(&grid, dn));
        }
        let yw: Vec<f64> = (0..n).map(|i| bracket(y[i]) * w[i]).collect();
        LedgerRow {
            t,
            energy: l2_sq(&grid, &weighted),
            forcing_sup,
            exponent,
            exponent_alt: (1.0 + rate_sup) * t + (coeffs.nu * t).sqrt(),
            weighted_energy: l2_sq(&grid, &yw),
            weighted_data: weighted_f_sup + deriv_sups.iter().sum::<f64>(),
        }
    };
    rows.push(record(0, &w, &mut sp, 0.0));
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let rate = |sp: &mut Spectral, t: f64, w: &[f64], _: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let j = ((t / coeffs.sample_dt).round() as usize).min(coeffs.g.len() - 1);
            let d = sp.derivatives(w, 3);
            let (g, a, f) = (coeffs.g[j].values(), coeffs.a[j].values(), coeffs.f[j].values());
            let r = (0..n)
                .map(|i| -(g[i] * d[3][i] + beta * gy[j][i] * d[2][i] + a[i] * d[1][i] + f[i]))
                .collect();
            Ok((r, Vec::new()))
        };
        let (next, _) = factor.step(&mut sp, t0, &w, &[], rate)?;
        w = next;
        // Trapezoid rule for ∫(1 + ||g_t||) over the step.
        let (j0, j1) = (2 * k, 2 * k + 2);
        exponent += dt * (1.0 + 0.25 * (coeffs.g_rate(j0) + 2.0 * coeffs.g_rate(j0 + 1) + coeffs.g_rate(j1)));
        rows.push(record(j1, &w, &mut sp, exponent));
        traj.push(Field::new(grid, w.clone())?.with_label("w"));
    }
    Ok((traj, EnergyLedger { rows }))
}

/// `sup_{y1 <= y2} ∫_{y1}^{y2} a`: the largest rise of the cumulative
/// trapezoid sum over any earlier minimum.
pub fn mizohata_functional(a: &Field) -> f64 {
    let h = a.grid().spacing();
    let v = a.values();
    let mut cum = 0.0;
    let mut low: f64 = 0.0;
    let mut best: f64 = 0.0;
    for i in 1..v.len() {
        cum += 0.5 * h * (v[i - 1] + v[i]);
        low = low.min(cum);
        best = best.max(cum - low);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semigroup_identity_and_unitarity() {
        let g = Grid::centered(256, 20.0).unwrap();
        let f = Field::from_fn(g, |y| (-(y * y)).exp() * (3.0 * y).cos()).unwrap();
        let same = apply_semigroup(&f, 0.0, 0.3, 0, true).unwrap();
        for (a, b) in same.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let moved = apply_semigroup(&f, 2.5, 0.0, 0, true).unwrap();
        assert!((moved.l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn semigroup_composes() {
        let g = Grid::centered(128, 15.0).unwrap();
        let f = Field::from_fn(g, |y| 1.0 / (1.0 + y * y)).unwrap();
        let ab = apply_semigroup(&apply_semigroup(&f, 0.3, 0.01, 0, true).unwrap(), 0.7, 0.01, 0, true).unwrap();
        let direct = apply_semigroup(&f, 1.0, 0.01, 0, true).unwrap();
        for (a, b) in ab.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_forcing_gives_zero_energy() {
        let g = Grid::centered(64, 10.0).unwrap();
        let c = ModelCoefficients::sample(g, 1.4, 0.0, 1.0, 0.01, |t, y| 0.2 * y.sin() * t.cos(), |_, _| 0.1, |_, _| 0.0)
            .unwrap();
        let (traj, ledger) = solve_model_linear(&c).unwrap();
        assert!(traj.iter().all(|w| w.max_abs() == 0.0));
        assert!(ledger.rows.iter().all(|r| r.energy == 0.0));
    }

    #[test]
    fn large_metric_is_rejected() {
        let g = Grid::centered(64, 10.0).unwrap();
        assert!(ModelCoefficients::sample(g, 1.4, 0.0, 1.0, 0.1, |_, _| 0.6, |_, _| 0.0, |_, _| 1.0).is_err());
    }

    #[test]
    fn unitary_flow_obeys_duhamel_bound() {
        let g = Grid::centered(256, 30.0).unwrap();
        let c = ModelCoefficients::sample(
            g,
            1.4,
            0.0,
            2.0,
            0.01,
            |_, _| 0.0,
            |_, _| 0.0,
            |t, y| (1.0 + t) * (-(y - 2.0) * (y - 2.0)).exp(),
        )
        .unwrap();
        let (traj, _) = solve_model_linear(&c).unwrap();
        let mut integral = 0.0;
        for (k, w) in traj.iter().enumerate().skip(1) {
            let t = k as f64 * 0.01;
            let norm = |s: f64| (1.0 + s) * (PI / 2.0).powf(0.25);
            integral += 0.005 * (norm(t - 0.01) + norm(t));
            assert!(w.l2_norm() <= integral * (1.0 + 1e-9));
        }
    }

    #[test]
    fn mizohata_examples() {
        let g = Grid::new(4096, 2.0 * PI, 0.0).unwrap();
        let s = Field::from_fn(g, f64::sin).unwrap();
        assert!((mizohata_functional(&s) - 2.0).abs() < 1e-6);
        let pos = Field::from_fn(g, |y| 1.0 + y.cos()).unwrap();
        let total: f64 = {
            let v = pos.values();
            (1..v.len()).map(|i| 0.5 * g.spacing() * (v[i - 1] + v[i])).sum()
        };
        assert!((mizohata_functional(&pos) - total).abs() < 1e-12);
        let neg = Field::from_fn(g, |y| -1.0 - y.cos()).unwrap();
        assert_eq!(mizohata_functional(&neg), 0.0);
    }

    #[test]
    fn kernel_norm_slope() {
        let g = Grid::new(4096, 2.0 * PI, 0.0).unwrap();
        let s: Vec<f64> = (0..9).map(|i| 10f64.powf(-6.0 + 0.5 * i as f64)).collect();
        for n in 1..=3 {
            let norms: Vec<f64> = s.iter().map(|&v| kernel_l1_norm(&g, v, n).unwrap()).collect();
            let slope = loglog_slope(&s, &norms);
            assert!((slope + n as f64 / 4.0).abs() < 0.02, "n={n}: {slope}");
        }
    }
}
