//! Uniform periodic grids, Fourier differentiation, quadrature and
//! frequency projections.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order accepted by [`derivative`].
///
/// Weighted norms of order `2K + N` need more than the seven derivatives of
/// the evolution equations, so the cap is generous.
pub const MAX_DERIVATIVE_ORDER: u32 = 32;

/// A uniform periodic grid with nodes `origin + i * h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
    origin: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64, origin: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "node count {n} must be a power of two and at least 16"
            )));
        }
        if !(length.is_finite() && length > 0.0) || !origin.is_finite() {
            return Err(Error::Parameter(format!(
                "grid length {length} and origin {origin} must be finite with positive length"
            )));
        }
        Ok(Self { n, length, origin })
    }

    /// Grid covering `[-half_width, half_width)`.
    pub fn centered(n: usize, half_width: f64) -> Result<Self> {
        Self::new(n, 2.0 * half_width, -half_width)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Largest resolved angular wavenumber, `π / h`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// Signed mode index of FFT slot `j`; the Nyquist slot maps to `n/2`.
    pub fn mode(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let base = 2.0 * PI / self.length;
        (0..self.n).map(|j| base * self.mode(j) as f64).collect()
    }

    /// Keeps modes with `|m| <= fraction * n / 2`; `fraction = 2/3` is the
    /// classical rule for quadratic products.
    pub fn dealias_mask(&self, fraction: f64) -> Vec<bool> {
        let cutoff = (fraction * self.n as f64 / 2.0).floor() as i64;
        (0..self.n).map(|j| self.mode(j).abs() <= cutoff).collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Real samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    label: Option<String>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Data(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.n()
            )));
        }
        check_finite(&values)?;
        Ok(Self {
            grid,
            values,
            label: None,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n()],
            label: None,
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n()])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Nodewise combination with a field on the same grid.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Parameter("fields live on different grids".into()));
        }
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        self.map(|v| factor * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm `sqrt(h Σ v²)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Data(format!(
            "non-finite value {} at node {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

type Plan = Arc<dyn Fft<f64>>;

thread_local! {
    static PLANS: RefCell<HashMap<usize, (Plan, Plan)>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> (Plan, Plan) {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

/// Reusable forward/inverse transforms of one size with scratch space.
pub struct Transform {
    n: usize,
    forward: Plan,
    inverse: Plan,
    scratch: Vec<Complex64>,
}

impl Transform {
    pub fn new(n: usize) -> Self {
        let (forward, inverse) = plans(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform of real samples.
    pub fn forward(&mut self, values: &[f64], out: &mut [Complex64]) {
        for (o, &v) in out.iter_mut().zip(values) {
            *o = Complex64::new(v, 0.0);
        }
        self.forward.process_with_scratch(out, &mut self.scratch);
    }

    /// Inverse transform (scaled by `1/n`) keeping the real part.
    pub fn inverse_real(&mut self, spectrum: &mut [Complex64], out: &mut [f64]) {
        self.inverse.process_with_scratch(spectrum, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for (o, c) in out.iter_mut().zip(spectrum.iter()) {
            *o = c.re * scale;
        }
    }

    /// Two real inverse transforms for the price of one: `a` and `b` must be
    /// spectra of real signals.
    pub fn inverse_pair(
        &mut self,
        a: &[Complex64],
        b: &[Complex64],
        buf: &mut [Complex64],
        out_a: &mut [f64],
        out_b: &mut [f64],
    ) {
        let i = Complex64::new(0.0, 1.0);
        for ((o, &x), &y) in buf.iter_mut().zip(a).zip(b) {
            *o = x + i * y;
        }
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for ((c, ra), rb) in buf.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
            *ra = c.re * scale;
            *rb = c.im * scale;
        }
    }
}

/// Fourier multiplier `(iξ)^order`, with the Nyquist slot zeroed for odd
/// orders so that real data stay real.
pub fn derivative_multiplier(grid: &Grid, order: u32) -> Vec<Complex64> {
    let half = grid.n() / 2;
    grid.wavenumbers()
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            if order % 2 == 1 && j == half {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order)
            }
        })
        .collect()
}

/// Applies a Fourier multiplier to real data.
pub fn apply_multiplier(f: &Field, multiplier: &[Complex64]) -> Result<Field> {
    let n = f.grid().n();
    let mut t = Transform::new(n);
    let mut spec = vec![Complex64::default(); n];
    t.forward(f.values(), &mut spec);
    for (s, m) in spec.iter_mut().zip(multiplier) {
        *s *= m;
    }
    let mut out = vec![0.0; n];
    t.inverse_real(&mut spec, &mut out);
    Field::new(*f.grid(), out)
}

/// Spectral derivative of order `order`.
pub fn derivative(f: &Field, order: u32) -> Result<Field> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::Parameter(format!(
            "derivative order {order} exceeds {MAX_DERIVATIVE_ORDER}"
        )));
    }
    check_finite(f.values())?;
    if order == 0 {
        return Ok(f.clone());
    }
    apply_multiplier(f, &derivative_multiplier(f.grid(), order))
}

/// All derivatives of orders `0..=max_order`, sharing one forward transform.
pub fn derivatives(f: &Field, max_order: u32) -> Result<Vec<Field>> {
    if max_order > MAX_DERIVATIVE_ORDER {
        return Err(Error::Parameter(format!(
            "derivative order {max_order} exceeds {MAX_DERIVATIVE_ORDER}"
        )));
    }
    check_finite(f.values())?;
    let grid = *f.grid();
    let n = grid.n();
    let mut t = Transform::new(n);
    let mut base = vec![Complex64::default(); n];
    t.forward(f.values(), &mut base);
    let mut out = vec![f.clone()];
    let mut spec = vec![Complex64::default(); n];
    let mut values = vec![0.0; n];
    for order in 1..=max_order {
        let m = derivative_multiplier(&grid, order);
        for ((s, b), mm) in spec.iter_mut().zip(&base).zip(&m) {
            *s = b * mm;
        }
        t.inverse_real(&mut spec, &mut values);
        out.push(Field::new(grid, values.clone())?);
    }
    Ok(out)
}

/// Periodic trapezoid rule `h Σ f_i`.
pub fn integrate(f: &Field) -> f64 {
    f.grid().spacing() * f.values().iter().sum::<f64>()
}

/// Cumulative integral `x ↦ ∫_anchor^x f` over the non-periodic span
/// `[origin, origin + (n-1)h]`, by piecewise cubic interpolation.
///
/// Fourth-order accurate for smooth data that need not be periodic. A panel
/// whose cubic increment has the opposite sign to both of its end samples
/// falls back to the trapezoid, so the result is monotone wherever `f`
/// keeps one sign.
pub fn cumulative_integral(f: &Field, anchor: f64) -> Result<Field> {
    let grid = *f.grid();
    let n = grid.n();
    let h = grid.spacing();
    let last = grid.node(n - 1);
    if !(anchor >= grid.origin() && anchor <= last) {
        return Err(Error::Parameter(format!(
            "anchor {anchor} outside the grid span [{}, {last}]",
            grid.origin()
        )));
    }
    let v = f.values();
    let mut acc = vec![0.0; n];
    for i in 0..n - 1 {
        let mut inc = cubic_partial(v, i, 1.0);
        if (v[i] >= 0.0 && v[i + 1] >= 0.0 && inc < 0.0) || (v[i] <= 0.0 && v[i + 1] <= 0.0 && inc > 0.0) {
            inc = 0.5 * (v[i] + v[i + 1]);
        }
        acc[i + 1] = acc[i] + inc * h;
    }
    let pos = (anchor - grid.origin()) / h;
    let nearest = pos.round();
    let at_anchor = if (pos - nearest).abs() <= 1e-9 {
        acc[nearest as usize]
    } else {
        let i = (pos.floor() as usize).min(n - 2);
        acc[i] + cubic_partial(v, i, pos - i as f64) * h
    };
    Field::new(grid, acc.iter().map(|a| a - at_anchor).collect())
}

/// `∫_0^θ p(s) ds` for the cubic through the four samples around interval
/// `[i, i+1]`, in units of the spacing.
fn cubic_partial(v: &[f64], i: usize, theta: f64) -> f64 {
    let n = v.len();
    let start = i.saturating_sub(1).min(n - 4);
    let s0 = start as f64 - i as f64;
    let nodes = [s0, s0 + 1.0, s0 + 2.0, s0 + 3.0];
    // Lagrange basis integrated exactly over [0, θ] via its monomial form.
    let mut total = 0.0;
    for a in 0..4 {
        let others: Vec<f64> = (0..4).filter(|&b| b != a).map(|b| nodes[b]).collect();
        let denom: f64 = others.iter().map(|o| nodes[a] - o).product();
        let (p, q, r) = (others[0], others[1], others[2]);
        let c2 = -(p + q + r);
        let c1 = p * q + p * r + q * r;
        let c0 = -p * q * r;
        let integral = theta.powi(4) / 4.0 + c2 * theta.powi(3) / 3.0 + c1 * theta * theta / 2.0
            + c0 * theta;
        total += v[start + a] * integral / denom;
    }
    total
}

/// Spectrally exact cumulative integral for smooth periodic integrands:
/// `mean * (x - anchor)` plus the periodic antiderivative of the rest.
pub fn cumulative_integral_periodic(f: &Field, anchor: f64) -> Result<Field> {
    let grid = *f.grid();
    let n = grid.n();
    let mut t = Transform::new(n);
    let mut spec = vec![Complex64::default(); n];
    t.forward(f.values(), &mut spec);
    let mean = spec[0].re / n as f64;
    let k = grid.wavenumbers();
    spec[0] = Complex64::default();
    spec[n / 2] = Complex64::default();
    for (s, &kk) in spec.iter_mut().zip(&k).skip(1) {
        if kk != 0.0 {
            *s /= Complex64::new(0.0, kk);
        }
    }
    let at_anchor = evaluate_spectrum(&grid, &spec, anchor);
    let mut prim = vec![0.0; n];
    t.inverse_real(&mut spec, &mut prim);
    let x = grid.nodes();
    Field::new(
        grid,
        prim.iter()
            .zip(&x)
            .map(|(p, xi)| p - at_anchor + mean * (xi - anchor))
            .collect(),
    )
}

/// Trigonometric interpolant of an (unnormalized) spectrum evaluated at `x`.
pub fn evaluate_spectrum(grid: &Grid, spec: &[Complex64], x: f64) -> f64 {
    let n = grid.n();
    let base = 2.0 * PI / grid.length();
    let s = x - grid.origin();
    let mut total = spec[0].re;
    for (j, c) in spec.iter().enumerate().take(n / 2).skip(1) {
        let phase = Complex64::from_polar(1.0, base * j as f64 * s);
        total += 2.0 * (c * phase).re;
    }
    let nyq = spec[n / 2];
    total += (nyq * Complex64::from_polar(1.0, base * (n / 2) as f64 * s)).re;
    total / n as f64
}

/// Which side of a Littlewood–Paley cutoff to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Low,
    High,
}

/// Sharp frequency projection onto `|ξ| <= 2^j` or its complement.
pub fn lp_project(f: &Field, j: i32, band: Band) -> Result<Field> {
    let grid = *f.grid();
    let cutoff = 2f64.powi(j);
    if cutoff >= grid.nyquist() {
        return Err(Error::Parameter(format!(
            "cutoff 2^{j} = {cutoff} is not below the Nyquist frequency {}",
            grid.nyquist()
        )));
    }
    let mult: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|k| {
            let low = k.abs() <= cutoff;
            let keep = match band {
                Band::Low => low,
                Band::High => !low,
            };
            Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
        })
        .collect();
    apply_multiplier(f, &mult)
}
