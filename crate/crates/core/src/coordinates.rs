//! The flattening change of variables `y = ∫ rho^(-1/3) dx`, frame fields
//! in `y`, the `Z ↔ W` rescaling and Eulerian reconstruction.
//!
//! Every field on the `y`-grid is a composition with `x(y)`: `rho(y)` means
//! `rho(x(y))`, and likewise for `Z`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::norms::{bracket, weighted_norm, NormRequest};
use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, cumulative_integral_periodic, derivatives, Field, Grid};
use crate::interp::{gauss_legendre, MonotoneCubic};
use crate::jet::Jet;
use crate::profiles::{Mu, ProfileSpec, Shape};

const PANEL_POINTS: usize = 12;

/// Tabulated, invertible map `x ↦ y(x) = ∫_anchor^x rho^(-1/3)`.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    spec: ProfileSpec,
    anchor: f64,
    forward: MonotoneCubic,
    inverse: MonotoneCubic,
    closed_form: bool,
    gl: (Vec<f64>, Vec<f64>),
}

/// Anchor of the map: `x = 0` when it lies in the support, otherwise the
/// midpoint of the support.
fn anchor_of(spec: &ProfileSpec) -> f64 {
    let (lo, hi) = spec.support();
    if lo < 0.0 && hi > 0.0 {
        0.0
    } else {
        0.5 * (lo + hi)
    }
}

/// Closed-form `y(x)` relative to the anchor, when one is known.
fn closed_form_y(spec: &ProfileSpec, x: f64) -> Option<f64> {
    match &spec.shape {
        Shape::Compacton { b, c } if 4.0 * b + c * c == 0.0 => Some((x - anchor_of(spec)) / c.cbrt()),
        Shape::PowerLeftRight {
            alpha_left,
            alpha_right,
            amplitude,
            halfwidth,
            center,
        } => {
            let s = (x - center) / halfwidth;
            let scale = halfwidth / amplitude.cbrt();
            let (al, ar) = (*alpha_left, *alpha_right);
            let one_sided = |p: f64, t: f64| -> f64 {
                // ∫_0^t (1 - σ)^(-p) dσ
                if p == 1.0 {
                    -(1.0 - t).ln()
                } else {
                    ((1.0 - t).powf(1.0 - p) - 1.0) / (p - 1.0)
                }
            };
            if al == 0.0 {
                Some(scale * one_sided(ar / 3.0, s))
            } else if ar == 0.0 {
                Some(-scale * one_sided(al / 3.0, -s))
            } else if al == ar && al == 3.0 {
                Some(scale * s.atanh())
            } else if al == ar && al == 6.0 {
                Some(scale * (s / (2.0 * (1.0 - s * s)) + 0.5 * s.atanh()))
            } else {
                None
            }
        }
        _ => None,
    }
}

impl CoordinateMap {
    /// Tabulates the map on `x_range` (strictly inside the support).
    ///
    /// Steps shrink geometrically toward finite support endpoints so that
    /// every Gauss–Legendre panel stays well inside the analyticity region.
    pub fn build(spec: &ProfileSpec, x_range: (f64, f64), resolution: usize) -> Result<Self> {
        Self::build_inner(spec, x_range, resolution, true)
    }

    /// Same as [`CoordinateMap::build`] but always integrating numerically.
    pub fn build_by_quadrature(spec: &ProfileSpec, x_range: (f64, f64), resolution: usize) -> Result<Self> {
        Self::build_inner(spec, x_range, resolution, false)
    }

    fn build_inner(spec: &ProfileSpec, x_range: (f64, f64), resolution: usize, allow_closed: bool) -> Result<Self> {
        let (a, b) = x_range;
        let (lo, hi) = spec.support();
        if !(a < b) || resolution < 4 {
            return Err(Error::Parameter(format!("invalid x range ({a}, {b})")));
        }
        if a <= lo || b >= hi {
            return Err(Error::Domain(format!(
                "x range ({a}, {b}) is not strictly inside the support ({lo}, {hi})"
            )));
        }
        let anchor = anchor_of(spec);
        let closed_form = allow_closed && closed_form_y(spec, anchor).is_some();
        let gl = gauss_legendre(PANEL_POINTS);
        let max_step = (b - a) / resolution as f64;
        let dist = |x: f64| (x - lo).min(hi - x);

        let mut probe = Self {
            spec: spec.clone(),
            anchor,
            forward: MonotoneCubic::new(vec![0.0, 1.0], vec![0.0, 1.0])?,
            inverse: MonotoneCubic::new(vec![0.0, 1.0], vec![0.0, 1.0])?,
            closed_form,
            gl,
        };

        // March outward from the anchor in both directions.
        let mut right = vec![(anchor, 0.0)];
        let mut left = Vec::new();
        for (target, sink, sign) in [(b, &mut right, 1.0), (a, &mut left, -1.0)] {
            let mut x = anchor;
            let mut y = 0.0;
            loop {
                let remaining = (target - x) * sign;
                if remaining <= 0.0 {
                    break;
                }
                let step = remaining.min(max_step).min(0.1 * dist(x));
                let mut next = x + sign * step;
                if step == remaining || next == x {
                    next = target;
                }
                y += probe.panel(x, next)?;
                x = next;
                sink.push((x, y));
            }
        }
        left.reverse();
        left.extend(right);
        let pts: Vec<(f64, f64)> = left;
        if let Some(w) = pts.windows(2).find(|w| w[1].1 <= w[0].1) {
            return Err(Error::Consistency(format!(
                "numerical y-map is not increasing near x = {}",
                w[0].0
            )));
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if closed_form {
            for (x, y) in xs.iter().zip(ys.iter_mut()) {
                *y = closed_form_y(spec, *x).expect("closed form");
            }
        }
        probe.forward = MonotoneCubic::new(xs.clone(), ys.clone())?;
        probe.inverse = MonotoneCubic::new(ys, xs)?;
        Ok(probe)
    }

    /// Map whose table reaches `|y| = half_span` on both sides.
    pub fn for_y_span(spec: &ProfileSpec, half_span: f64, resolution: usize) -> Result<Self> {
        let anchor = anchor_of(spec);
        let seed = Self {
            spec: spec.clone(),
            anchor,
            forward: MonotoneCubic::new(vec![0.0, 1.0], vec![0.0, 1.0])?,
            inverse: MonotoneCubic::new(vec![0.0, 1.0], vec![0.0, 1.0])?,
            closed_form: false,
            gl: gauss_legendre(PANEL_POINTS),
        };
        let (lo, hi) = spec.support();
        let mut ends = [0.0; 2];
        for (slot, (edge, sign)) in ends.iter_mut().zip([(hi, 1.0), (lo, -1.0)]) {
            // Bracket the point with |y| slightly beyond the span, then bisect.
            let target = 1.02 * half_span;
            let mut near = anchor;
            let mut y_near = 0.0;
            let mut far = if edge.is_finite() {
                edge
            } else {
                anchor + sign * 1.0
            };
            if !edge.is_finite() {
                loop {
                    let y = seed.panel_sum(anchor, far)?.abs();
                    if y >= target {
                        break;
                    }
                    near = far;
                    y_near = y;
                    far = anchor + 2.0 * (far - anchor);
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (near + far);
                let y = y_near + seed.panel_sum(near, mid)?.abs();
                if y < target {
                    near = mid;
                    y_near = y;
                } else {
                    far = mid;
                }
                if (far - near).abs() < 1e-15 * (1.0 + far.abs()) {
                    break;
                }
            }
            *slot = near;
        }
        Self::build(spec, (ends[1], ends[0]), resolution)
    }

    /// `∫_x0^x1 rho^(-1/3)` on one Gauss–Legendre panel.
    fn panel(&self, x0: f64, x1: f64) -> Result<f64> {
        let (nodes, weights) = &self.gl;
        let half = 0.5 * (x1 - x0);
        let mid = 0.5 * (x1 + x0);
        let mut total = 0.0;
        for (t, w) in nodes.iter().zip(weights) {
            let x = mid + half * t;
            let rho = self.spec.rho_eval(x, 0);
            if rho <= 0.0 {
                return Err(Error::Domain(format!("rho <= 0 at x = {x} inside the map range")));
            }
            total += w * rho.powf(-1.0 / 3.0);
        }
        Ok(half * total)
    }

    /// `∫_x0^x1 rho^(-1/3)` over geometrically graded panels.
    fn panel_sum(&self, x0: f64, x1: f64) -> Result<f64> {
        let (lo, hi) = self.spec.support();
        let dist = |x: f64| (x - lo).min(hi - x);
        let sign = if x1 >= x0 { 1.0 } else { -1.0 };
        let mut x = x0;
        let mut total = 0.0;
        let cap = ((x1 - x0).abs() / 64.0).max(1e-300);
        while (x1 - x) * sign > 0.0 {
            let step = ((x1 - x) * sign).min(cap).min(0.1 * dist(x).max(1e-300));
            let mut next = x + sign * step;
            if step == (x1 - x) * sign || next == x {
                next = x1;
            }
            total += self.panel(x, next)?;
            x = next;
        }
        Ok(total)
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn x_nodes(&self) -> &[f64] {
        self.forward.nodes().0
    }

    pub fn y_values(&self) -> &[f64] {
        self.forward.nodes().1
    }

    pub fn x_range(&self) -> (f64, f64) {
        let x = self.x_nodes();
        (x[0], x[x.len() - 1])
    }

    pub fn y_range(&self) -> (f64, f64) {
        let y = self.y_values();
        (y[0], y[y.len() - 1])
    }

    /// Interpolated `y(x)`.
    pub fn forward(&self, x: f64) -> f64 {
        self.forward.eval(x)
    }

    /// Interpolated `x(y)`.
    pub fn inverse(&self, y: f64) -> f64 {
        self.inverse.eval(y)
    }

    /// `y(x)` to quadrature accuracy.
    pub fn y_exact(&self, x: f64) -> Result<f64> {
        if self.closed_form {
            return Ok(closed_form_y(&self.spec, x).expect("closed form"));
        }
        let i = self.forward.bracket(x);
        let (xs, ys) = self.forward.nodes();
        let j = if (x - xs[i]).abs() <= (x - xs[i + 1]).abs() { i } else { i + 1 };
        Ok(ys[j] + self.panel_sum(xs[j], x)?)
    }

    /// `x(y)` by safeguarded Newton iteration on the exact forward map.
    pub fn x_of_y(&self, y: f64) -> Result<f64> {
        let (y_lo, y_hi) = self.y_range();
        if y < y_lo || y > y_hi {
            return Err(Error::Domain(format!(
                "y = {y} outside the tabulated range [{y_lo}, {y_hi}]"
            )));
        }
        let (xs, ys) = self.inverse.nodes();
        let i = self.inverse.bracket(y);
        let (mut lo, mut hi) = (ys[i], ys[i + 1]);
        let mut x = self.inverse.eval(y).clamp(lo, hi);
        for _ in 0..100 {
            let r = self.y_exact(x)? - y;
            if r.abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs()) {
                return Ok(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let rho = self.spec.rho_eval(x, 0);
            let mut next = x - r * rho.cbrt();
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= f64::EPSILON * (1.0 + x.abs()) {
                return Ok(next);
            }
            x = next;
        }
        let _ = xs;
        Ok(x)
    }
}

/// Options for [`frame_fields_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameOptions {
    /// Smallest admissible `inf rho^(5/6) <y>^K0`, relative to
    /// `max rho^(5/6)` over the grid.
    pub delta_floor: f64,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self { delta_floor: 1e-6 }
    }
}

/// Density-dependent coefficients on the `y`-grid.
#[derive(Debug, Clone)]
pub struct FrameFields {
    pub grid: Grid,
    pub mu: Mu,
    /// `x(y)`.
    pub x: Field,
    pub rho: Field,
    /// `log_rho_derivs[n - 1] = ∂_y^n rho / rho`.
    pub log_rho_derivs: Vec<Field>,
    /// `rho^(5/6)` and `rho^(-5/6)`.
    pub rho56: Field,
    pub rho_m56: Field,
    pub rho13: Field,
    pub rho23: Field,
    /// `weight_derivs[m - 1] = rho^(-5/6) ∂_y^m rho^(5/6)`, `m = 1..=4`.
    pub weight_derivs: Vec<Field>,
    /// Inhomogeneous term `F` and the forcing `rho^(5/6) F`.
    pub inhomogeneity: Field,
    pub forcing: Field,
    pub k0: u32,
    pub delta: f64,
    pub delta_y: f64,
    pub mcal: f64,
}

/// Frame built from the profile through the map.
pub fn frame_fields(spec: &ProfileSpec, map: &CoordinateMap, grid: Grid, k0: u32) -> Result<FrameFields> {
    frame_fields_with(spec, map, grid, k0, FrameOptions::default())
}

pub fn frame_fields_with(
    spec: &ProfileSpec,
    map: &CoordinateMap,
    grid: Grid,
    k0: u32,
    opts: FrameOptions,
) -> Result<FrameFields> {
    let order = jet_order(k0);
    let third = 1.0 / 3.0;
    let mut xs = Vec::with_capacity(grid.n());
    let mut jets = Vec::with_capacity(grid.n());
    for y in grid.nodes() {
        let x0 = map.x_of_y(y)?;
        // Taylor series of x(y) from dx/dy = rho(x)^(1/3).
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        for k in 0..order {
            let partial = Jet::from_coefficients(c[..=k].to_vec());
            let rate = spec.rho_jet(&partial).powf(third);
            c[k + 1] = rate.coefficients()[k] / (k + 1) as f64;
        }
        let xjet = Jet::from_coefficients(c);
        jets.push(spec.rho_jet(&xjet));
        xs.push(x0);
    }
    FrameFields::from_rho_jets(grid, xs, jets, spec.mu, k0, opts)
}

fn jet_order(k0: u32) -> usize {
    (2 * k0 as usize + 7).max(4)
}

impl FrameFields {
    /// Frame from a density given directly as a function of `y`; `rho` maps
    /// a `y`-jet to the `rho`-jet. The stored `x(y)` is `∫_0^y rho^(1/3)`.
    pub fn from_y_density(
        grid: Grid,
        mu: Mu,
        k0: u32,
        opts: FrameOptions,
        rho: impl Fn(&Jet) -> Jet,
    ) -> Result<Self> {
        let order = jet_order(k0);
        let jets: Vec<Jet> = grid
            .nodes()
            .iter()
            .map(|&y| rho(&Jet::variable(y, order)))
            .collect();
        let r13 = Field::new(grid, jets.iter().map(|j| j.value().cbrt()).collect())?;
        let last = grid.node(grid.n() - 1);
        let anchor = if grid.origin() <= 0.0 && last >= 0.0 { 0.0 } else { grid.origin() };
        let xs = cumulative_integral(&r13, anchor)?.into_values();
        Self::from_rho_jets(grid, xs, jets, mu, k0, opts)
    }

    /// Constant density: zero forcing.
    pub fn flat(grid: Grid, rho0: f64, mu: Mu, k0: u32) -> Result<Self> {
        if rho0 <= 0.0 {
            return Err(Error::Parameter("flat frame needs a positive density".into()));
        }
        let opts = FrameOptions { delta_floor: 0.0 };
        Self::from_y_density(grid, mu, k0, opts, |y| Jet::constant(rho0, y.order()))
    }

    fn from_rho_jets(
        grid: Grid,
        xs: Vec<f64>,
        jets: Vec<Jet>,
        mu: Mu,
        k0: u32,
        opts: FrameOptions,
    ) -> Result<Self> {
        let n = grid.n();
        let order = jets[0].order();
        let y = grid.nodes();
        if let Some(i) = jets.iter().position(|j| !(j.value() > 0.0)) {
            return Err(Error::Domain(format!(
                "rho = {} is not positive at y = {}",
                jets[i].value(),
                y[i]
            )));
        }
        let mut logs = vec![vec![0.0; n]; order];
        let mut weights = vec![vec![0.0; n]; 4];
        for (i, jet) in jets.iter().enumerate() {
            let r0 = jet.value();
            let normalized = jet.scale(1.0 / r0);
            for (k, slot) in logs.iter_mut().enumerate() {
                slot[i] = normalized.derivative(k + 1);
            }
            let w = normalized.powf(5.0 / 6.0);
            for (m, slot) in weights.iter_mut().enumerate() {
                slot[i] = w.derivative(m + 1);
            }
        }
        let rho: Vec<f64> = jets.iter().map(|j| j.value()).collect();
        let mu_v = mu.value();
        let inhom: Vec<f64> = (0..n)
            .map(|i| {
                let (l1, l2, l3) = (logs[0][i], logs[1][i], logs[2][i]);
                0.5 * (l3 - 4.0 / 3.0 * l2 * l1 + 5.0 / 9.0 * l1.powi(3))
                    + mu_v * rho[i].powf(2.0 / 3.0) * l1
            })
            .collect();
        let rho56: Vec<f64> = rho.iter().map(|r| r.powf(5.0 / 6.0)).collect();
        let forcing: Vec<f64> = rho56.iter().zip(&inhom).map(|(a, b)| a * b).collect();

        let profile: Vec<f64> = rho56
            .iter()
            .zip(&y)
            .map(|(r, yy)| r * bracket(*yy).powi(k0 as i32))
            .collect();
        let (imin, &delta) = profile
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty grid");
        let peak = rho56.iter().fold(0.0f64, |m, v| m.max(*v));
        if delta < opts.delta_floor * peak {
            return Err(Error::Admissibility(format!(
                "weighted decay rho^(5/6) <y>^{k0} = {delta:.3e} at y = {:.4} is below {:.1e} of max rho^(5/6); K0 = {k0} is too small for this data",
                y[imin], opts.delta_floor
            )));
        }

        let forcing = Field::new(grid, forcing)?.with_label("forcing");
        let mcal = weighted_norm(&forcing, NormRequest::new(4, k0))?;
        let field = |v: Vec<f64>| Field::new(grid, v);
        Ok(Self {
            grid,
            mu,
            x: field(xs)?.with_label("x"),
            rho13: field(rho.iter().map(|r| r.cbrt()).collect())?,
            rho23: field(rho.iter().map(|r| r.powf(2.0 / 3.0)).collect())?,
            rho_m56: field(rho.iter().map(|r| r.powf(-5.0 / 6.0)).collect())?,
            rho56: field(rho56)?,
            rho: field(rho)?.with_label("rho"),
            log_rho_derivs: logs.into_iter().map(field).collect::<Result<_>>()?,
            weight_derivs: weights.into_iter().map(field).collect::<Result<_>>()?,
            inhomogeneity: field(inhom)?.with_label("F"),
            forcing,
            k0,
            delta,
            delta_y: y[imin],
            mcal,
        })
    }

    /// `∂_y^n rho / rho`.
    pub fn log_deriv(&self, n: usize) -> &[f64] {
        self.log_rho_derivs[n - 1].values()
    }

    /// Copy of the frame with the forcing switched off.
    pub fn without_forcing(&self) -> Self {
        let mut f = self.clone();
        f.forcing = Field::zeros(self.grid).with_label("forcing");
        f.inhomogeneity = Field::zeros(self.grid).with_label("F");
        f.mcal = 0.0;
        f
    }

    /// Copy of the frame with a different flow parameter.
    pub fn with_mu(&self, mu: Mu) -> Result<Self> {
        let mut f = self.clone();
        let dm = mu.value() - self.mu.value();
        let l1 = self.log_deriv(1);
        let inhom: Vec<f64> = (0..self.grid.n())
            .map(|i| self.inhomogeneity.values()[i] + dm * self.rho23.values()[i] * l1[i])
            .collect();
        f.forcing = Field::new(
            self.grid,
            inhom.iter().zip(self.rho56.values()).map(|(a, b)| a * b).collect(),
        )?
        .with_label("forcing");
        f.inhomogeneity = Field::new(self.grid, inhom)?.with_label("F");
        f.mcal = weighted_norm(&f.forcing, NormRequest::new(4, self.k0))?;
        f.mu = mu;
        Ok(f)
    }

    /// Writes `x, y, rho, ∂^n rho / rho (n = 1..3), rho56, rho_m56, F, forcing`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "x",
            "y",
            "rho",
            "rho_y_over_rho",
            "rho_yy_over_rho",
            "rho_yyy_over_rho",
            "rho56",
            "rho_m56",
            "F",
            "forcing",
        ])?;
        let y = self.grid.nodes();
        for i in 0..self.grid.n() {
            let row = [
                self.x.values()[i],
                y[i],
                self.rho.values()[i],
                self.log_deriv(1)[i],
                self.log_deriv(2)[i],
                self.log_deriv(3)[i],
                self.rho56.values()[i],
                self.rho_m56.values()[i],
                self.inhomogeneity.values()[i],
                self.forcing.values()[i],
            ];
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `∂_x^n f` from `y`-derivatives `d = [f_y, f_yy, f_yyy]`, nodewise.
pub fn chain_from_y_derivs(d: [&[f64]; 3], frame: &FrameFields, order: u32) -> Result<Vec<f64>> {
    let n = frame.grid.n();
    let rho = frame.rho.values();
    let r13 = frame.rho13.values();
    let r23 = frame.rho23.values();
    let l1 = frame.log_deriv(1);
    let l2 = frame.log_deriv(2);
    let [fy, fyy, fyyy] = d;
    let out = match order {
        1 => (0..n).map(|i| fy[i] / r13[i]).collect(),
        2 => (0..n)
            .map(|i| (fyy[i] - l1[i] * fy[i] / 3.0) / r23[i])
            .collect(),
        3 => (0..n)
            .map(|i| {
                (fyyy[i] - l1[i] * fyy[i] + 5.0 / 9.0 * l1[i] * l1[i] * fy[i] - l2[i] * fy[i] / 3.0)
                    / rho[i]
            })
            .collect(),
        other => {
            return Err(Error::Parameter(format!(
                "chain-rule derivative of order {other} is not available (1..=3)"
            )))
        }
    };
    Ok(out)
}

/// `∂_x^n f` expressed on the `y`-grid.
pub fn chain_derivative(f: &Field, order: u32, frame: &FrameFields) -> Result<Field> {
    if !(1..=3).contains(&order) {
        return Err(Error::Parameter(format!(
            "chain-rule derivative of order {order} is not available (1..=3)"
        )));
    }
    let d = derivatives(f, 3)?;
    let v = chain_from_y_derivs([d[1].values(), d[2].values(), d[3].values()], frame, order)?;
    Field::new(frame.grid, v)
}

pub fn w_from_z(z: &Field, frame: &FrameFields) -> Result<Field> {
    z.zip_with(&frame.rho56, |a, b| a * b).map(|f| f.with_label("W"))
}

pub fn z_from_w(w: &Field, frame: &FrameFields) -> Result<Field> {
    w.zip_with(&frame.rho_m56, |a, b| a * b).map(|f| f.with_label("Z"))
}

/// `g = (1 + rho^(-5/6) W)^5 - 1`.
pub fn g_field(w: &Field, frame: &FrameFields) -> Result<Field> {
    let y = frame.grid.nodes();
    let mut out = Vec::with_capacity(frame.grid.n());
    for (i, (wv, r)) in w.values().iter().zip(frame.rho_m56.values()).enumerate() {
        let q = 1.0 + r * wv;
        if q <= 0.0 {
            return Err(Error::Degeneracy {
                node: i,
                coordinate: y[i],
                reason: format!("1 + rho^(-5/6) W = {q:.3e} is not positive"),
            });
        }
        out.push(q.powi(5) - 1.0);
    }
    Field::new(frame.grid, out).map(|f| f.with_label("g"))
}

/// Drift at one label from `q = 1 + Z`, `Z_y`, `Z_yy` and the frame data
/// `rho_y/rho`, `rho_yy/rho`, `rho^(1/3)`, `rho`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drift_point(q: f64, zy: f64, zyy: f64, l1: f64, l2: f64, r13: f64, rho: f64, mu: f64) -> f64 {
    let a = 2.0 * q * zy + q * q * l1;
    let ay = 2.0 * zy * zy + 2.0 * q * zyy + 2.0 * q * zy * l1 + q * q * (l2 - l1 * l1);
    0.5 * q * r13 * (zy * a + 2.0 / 3.0 * q * l1 * a + q * ay) + mu * q * q * rho
}

/// Eulerian drift `b` at each Lagrangian label, expressed through `Z`:
/// `B = ½ (1+Z) ((1+Z) (U²)_x)_x + μ U²` with `U² = (1+Z)² rho`.
pub fn lagrangian_drift(z: &Field, frame: &FrameFields) -> Result<Field> {
    let d = derivatives(z, 2)?;
    let (zy, zyy) = (d[1].values(), d[2].values());
    let mu = frame.mu.value();
    let l1 = frame.log_deriv(1);
    let l2 = frame.log_deriv(2);
    let rho = frame.rho.values();
    let r13 = frame.rho13.values();
    let v = (0..frame.grid.n())
        .map(|i| drift_point(1.0 + z.values()[i], zy[i], zyy[i], l1[i], l2[i], r13[i], rho[i], mu))
        .collect();
    Field::new(frame.grid, v)
}

/// Node index of `y = 0`.
pub fn origin_node(grid: &Grid) -> Result<usize> {
    let pos = -grid.origin() / grid.spacing();
    let i = pos.round();
    if (pos - i).abs() > 1e-9 || i < 0.0 || i as usize >= grid.n() {
        return Err(Error::Parameter("y = 0 is not a node of the grid".into()));
    }
    Ok(i as usize)
}

/// Lagrangian positions `X(t, y) = ξ + ∫_0^y (1+Z)^(-1) rho^(1/3) dy`.
pub fn lagrangian_positions(z: &Field, xi: f64, frame: &FrameFields) -> Result<Vec<f64>> {
    let grid = frame.grid;
    let y = grid.nodes();
    for (i, zv) in z.values().iter().enumerate() {
        if 1.0 + zv <= 0.0 {
            return Err(Error::Degeneracy {
                node: i,
                coordinate: y[i],
                reason: format!("1 + Z = {:.3e} is not positive", 1.0 + zv),
            });
        }
    }
    let defect = z.zip_with(&frame.rho13, |a, r| a * r / (1.0 + a))?;
    let c = cumulative_integral_periodic(&defect, 0.0)?;
    let x0 = frame.x.values()[origin_node(&grid)?];
    Ok((0..grid.n())
        .map(|i| xi + frame.x.values()[i] - x0 - c.values()[i])
        .collect())
}

/// One time slice of a Lagrangian run.
#[derive(Debug, Clone)]
pub struct LagrangianSnapshot {
    pub t: f64,
    pub z: Field,
    /// Position of the characteristic through the origin, when the solver
    /// tracked it.
    pub xi: Option<f64>,
}

/// Eulerian field reconstructed from a Lagrangian snapshot.
#[derive(Debug, Clone)]
pub struct EulerianSnapshot {
    pub t: f64,
    pub xi: f64,
    pub u: Field,
}

/// `ξ(t)` for snapshots lacking it: RK4 on `ξ' = B(t, 0)` with the drift
/// interpolated between snapshots by local cubics.
pub fn integrate_origin_path(traj: &[LagrangianSnapshot], frame: &FrameFields) -> Result<Vec<f64>> {
    let i0 = origin_node(&frame.grid)?;
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let drift: Vec<f64> = traj
        .iter()
        .map(|s| lagrangian_drift(&s.z, frame).map(|b| b.values()[i0]))
        .collect::<Result<_>>()?;
    let at = |t: f64| lagrange_at(&times, &drift, t);
    let mut xi = vec![traj.first().and_then(|s| s.xi).unwrap_or(0.0)];
    for k in 1..traj.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        let h = t1 - t0;
        let b1 = at(t0);
        let b2 = at(t0 + 0.5 * h);
        let b4 = at(t1);
        xi.push(xi[k - 1] + h * (b1 + 4.0 * b2 + b4) / 6.0);
    }
    Ok(xi)
}

/// Local four-point Lagrange interpolation of samples `(t_k, v_k)`.
pub fn lagrange_at(t: &[f64], v: &[f64], s: f64) -> f64 {
    let n = t.len();
    if n == 1 {
        return v[0];
    }
    if n < 4 {
        let i = t.partition_point(|&x| x <= s).clamp(1, n - 1) - 1;
        let w = (s - t[i]) / (t[i + 1] - t[i]);
        return v[i] * (1.0 - w) + v[i + 1] * w;
    }
    let i = t.partition_point(|&x| x <= s).clamp(1, n - 1) - 1;
    let start = i.saturating_sub(1).min(n - 4);
    let mut total = 0.0;
    for a in start..start + 4 {
        let mut w = 1.0;
        for b in start..start + 4 {
            if a != b {
                w *= (s - t[b]) / (t[a] - t[b]);
            }
        }
        total += w * v[a];
    }
    total
}

/// `u(t, x)` on `x_grid` from Lagrangian snapshots: `u(t, X) = (1+Z) u0`.
///
/// Points outside the image of the truncated `y`-grid are set to zero.
pub fn reconstruct_eulerian(
    traj: &[LagrangianSnapshot],
    frame: &FrameFields,
    x_grid: &Grid,
) -> Result<Vec<EulerianSnapshot>> {
    let xi = if traj.iter().all(|s| s.xi.is_some()) {
        traj.iter().map(|s| s.xi.expect("checked")).collect()
    } else {
        integrate_origin_path(traj, frame)?
    };
    let y = frame.grid.nodes();
    let mut out = Vec::with_capacity(traj.len());
    for (snap, &xi_t) in traj.iter().zip(&xi) {
        let pos = lagrangian_positions(&snap.z, xi_t, frame)?;
        if let Some(i) = pos.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Degeneracy {
                node: i,
                coordinate: y[i],
                reason: "Lagrangian map lost monotonicity".into(),
            });
        }
        let u: Vec<f64> = snap
            .z
            .values()
            .iter()
            .zip(frame.rho.values())
            .map(|(z, r)| (1.0 + z) * r.sqrt())
            .collect();
        let values = x_grid
            .nodes()
            .iter()
            .map(|&x| {
                if x < pos[0] || x > pos[pos.len() - 1] {
                    0.0
                } else {
                    lagrange_at(&pos, &u, x)
                }
            })
            .collect();
        out.push(EulerianSnapshot {
            t: snap.t,
            xi: xi_t,
            u: Field::new(*x_grid, values)?.with_label("u"),
        });
    }
    Ok(out)
}
