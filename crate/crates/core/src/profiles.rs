//! Initial-data families for `rho = u0^2`, conserved functionals, endpoint
//! decay classification and the admissible weight window.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, derivative_multiplier, evaluate_spectrum, integrate, Field, Grid, Transform};
use crate::jet::Jet;

/// Floor applied to `rho` by x-frame utilities close to a support endpoint.
pub const RHO_FLOOR: f64 = 1e-14;

/// Sign of the cubic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Mu {
    Defocusing,
    Neutral,
    Focusing,
}

impl Mu {
    pub fn value(self) -> f64 {
        match self {
            Mu::Defocusing => -1.0,
            Mu::Neutral => 0.0,
            Mu::Focusing => 1.0,
        }
    }

    pub const ALL: [Mu; 3] = [Mu::Defocusing, Mu::Neutral, Mu::Focusing];
}

impl TryFrom<i8> for Mu {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Mu::Defocusing),
            0 => Ok(Mu::Neutral),
            1 => Ok(Mu::Focusing),
            other => Err(format!("mu must be -1, 0 or 1, got {other}")),
        }
    }
}

impl From<Mu> for i8 {
    fn from(m: Mu) -> i8 {
        m.value() as i8
    }
}

fn one() -> f64 {
    1.0
}

/// Shape of the density `rho(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `rho = c + sqrt(4B + c^2) cos(sqrt(2) x)`, cut at its first zero.
    Compacton { b: f64, c: f64 },
    /// `rho = a (1 + s)^alpha_left (1 - s)^alpha_right` with
    /// `s = (x - center) / halfwidth`.
    PowerLeftRight {
        alpha_left: f64,
        alpha_right: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        halfwidth: f64,
        #[serde(default)]
        center: f64,
    },
    /// `rho = a (1 + (x / scale)^2)^(-beta / 2)` on the whole line.
    AlgebraicTail {
        beta: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `u0 = a exp(-((x - center) / width)^2 / 2)`.
    SmoothBump { center: f64, width: f64, amplitude: f64 },
    /// Samples of `rho` on a periodic grid.
    Tabulated { grid: Grid, rho: Vec<f64> },
}

/// Initial density together with the flow parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub shape: Shape,
    pub mu: Mu,
}

/// Mass, momentum, positive momentum and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedSet {
    pub mass: f64,
    pub momentum: f64,
    pub positive_momentum: f64,
    pub hamiltonian: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointDecay {
    Subcritical,
    Critical,
    Supercritical,
    InfiniteSupport,
}

impl EndpointDecay {
    /// Infinite endpoints count as subcritical.
    pub fn counts_as_subcritical(self) -> bool {
        matches!(self, EndpointDecay::Subcritical | EndpointDecay::InfiniteSupport)
    }

    fn from_exponent(alpha: f64) -> Self {
        if alpha > 3.0 {
            EndpointDecay::Subcritical
        } else if alpha == 3.0 {
            EndpointDecay::Critical
        } else {
            EndpointDecay::Supercritical
        }
    }

    fn from_fitted_slope(slope: f64) -> Self {
        if slope > 3.05 {
            EndpointDecay::Subcritical
        } else if slope >= 2.95 {
            EndpointDecay::Critical
        } else {
            EndpointDecay::Supercritical
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EndpointDecay::Subcritical => "subcritical",
            EndpointDecay::Critical => "critical",
            EndpointDecay::Supercritical => "supercritical",
            EndpointDecay::InfiniteSupport => "infinite-support",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecayClass {
    pub left: EndpointDecay,
    pub right: EndpointDecay,
}

impl DecayClass {
    /// First endpoint that is not subcritical, as `(side, class)`.
    pub fn first_failure(&self) -> Option<(&'static str, EndpointDecay)> {
        if !self.left.counts_as_subcritical() {
            Some(("left", self.left))
        } else if !self.right.counts_as_subcritical() {
            Some(("right", self.right))
        } else {
            None
        }
    }
}

/// Integer weights `K0` admitted by the decay of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct K0Window {
    /// Open interval `(lower, upper)` of the strict inequalities.
    pub lower: f64,
    pub upper: f64,
    /// Integers strictly inside the interval.
    pub integers: Vec<i64>,
    /// Smallest `K0` for which `inf rho^(5/6) <y>^K0 > 0` holds for the
    /// asymptotic profile, checked directly.
    pub direct_min: i64,
}

impl K0Window {
    fn from_bounds(lower: f64, upper: f64, direct_bound: f64) -> Self {
        let first = lower.floor() as i64 + 1;
        let integers = (first.max(0)..)
            .take_while(|&k| (k as f64) < upper)
            .collect();
        Self {
            lower,
            upper,
            integers,
            direct_min: (direct_bound - 1e-12).ceil().max(0.0) as i64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.integers.is_empty()
    }
}

/// Positional density interface used by ray tracing and coordinate maps.
pub trait Density {
    fn rho(&self, x: f64) -> f64;
    fn rho_x(&self, x: f64) -> f64;
    /// Open interval where `rho > 0`; infinite ends are allowed.
    fn support(&self) -> (f64, f64);
}

/// `rho = x^k` on `(0, ∞)`; the model density near an endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub exponent: f64,
}

impl Density for PowerLaw {
    fn rho(&self, x: f64) -> f64 {
        if self.exponent == 0.0 {
            1.0
        } else if x > 0.0 {
            x.powf(self.exponent)
        } else {
            0.0
        }
    }
    fn rho_x(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.exponent * x.powf(self.exponent - 1.0)
        } else {
            0.0
        }
    }
    fn support(&self) -> (f64, f64) {
        if self.exponent == 0.0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (0.0, f64::INFINITY)
        }
    }
}

/// `x_{B,c}`, the first positive zero of `c + sqrt(4B + c^2) cos(sqrt(2) x)`.
pub fn compacton_halfwidth(b: f64, c: f64) -> Result<f64> {
    if b < 0.0 {
        return Err(Error::Parameter(format!(
            "B = {b} < 0 gives a positive periodic wave without a zero"
        )));
    }
    let disc = 4.0 * b + c * c;
    if disc <= 0.0 {
        return Err(Error::Parameter(format!("4B + c^2 = {disc} must be positive")));
    }
    if b == 0.0 && c <= 0.0 {
        return Err(Error::Parameter("B = 0 requires c > 0".into()));
    }
    Ok((-c / disc.sqrt()).acos() / SQRT_2)
}

impl ProfileSpec {
    pub fn new(shape: Shape, mu: Mu) -> Result<Self> {
        let spec = Self { shape, mu };
        spec.validate()?;
        Ok(spec)
    }

    pub fn compacton(b: f64, c: f64, mu: Mu) -> Result<Self> {
        Self::new(Shape::Compacton { b, c }, mu)
    }

    pub fn power(alpha_left: f64, alpha_right: f64, amplitude: f64, halfwidth: f64, mu: Mu) -> Result<Self> {
        Self::new(
            Shape::PowerLeftRight {
                alpha_left,
                alpha_right,
                amplitude,
                halfwidth,
                center: 0.0,
            },
            mu,
        )
    }

    pub fn validate(&self) -> Result<()> {
        match &self.shape {
            Shape::Compacton { b, c } => {
                if !(b.is_finite() && c.is_finite()) {
                    return Err(Error::Parameter("compacton parameters must be finite".into()));
                }
                if *b < 0.0 {
                    if *c <= 0.0 || *b < -c * c / 4.0 {
                        return Err(Error::Parameter(format!(
                            "periodic compacton needs c > 0 and -c^2/4 <= B < 0 (B = {b}, c = {c})"
                        )));
                    }
                } else {
                    compacton_halfwidth(*b, *c)?;
                }
            }
            Shape::PowerLeftRight {
                alpha_left,
                alpha_right,
                amplitude,
                halfwidth,
                center,
            } => {
                if !(*alpha_left >= 0.0 && *alpha_right >= 0.0) {
                    return Err(Error::Parameter("decay exponents must be nonnegative".into()));
                }
                if !(*amplitude > 0.0 && *halfwidth > 0.0 && center.is_finite()) {
                    return Err(Error::Parameter("amplitude and halfwidth must be positive".into()));
                }
            }
            Shape::AlgebraicTail { beta, amplitude, scale } => {
                if !(*beta >= 0.0 && *amplitude > 0.0 && *scale > 0.0) {
                    return Err(Error::Parameter(
                        "algebraic tail needs beta >= 0 and positive amplitude and scale".into(),
                    ));
                }
            }
            Shape::SmoothBump { center, width, amplitude } => {
                if !(center.is_finite() && *width > 0.0 && *amplitude > 0.0) {
                    return Err(Error::Parameter("bump needs positive width and amplitude".into()));
                }
            }
            Shape::Tabulated { grid, rho } => {
                let f = Field::new(*grid, rho.clone())?;
                if let Some(i) = f.values().iter().position(|&v| v < 0.0) {
                    return Err(Error::Data(format!("tabulated rho is negative at node {i}")));
                }
                tabulated_support(&f)?;
            }
        }
        Ok(())
    }

    pub fn mu(&self) -> Mu {
        self.mu
    }

    /// Positivity interval `(x_-, x_+)`.
    pub fn support(&self) -> (f64, f64) {
        let full = (f64::NEG_INFINITY, f64::INFINITY);
        match &self.shape {
            Shape::Compacton { b, c } => {
                if *b < 0.0 {
                    full
                } else {
                    let x = compacton_halfwidth(*b, *c).unwrap_or(0.0);
                    (-x, x)
                }
            }
            Shape::PowerLeftRight { halfwidth, center, .. } => {
                (center - halfwidth, center + halfwidth)
            }
            Shape::AlgebraicTail { .. } | Shape::SmoothBump { .. } => full,
            Shape::Tabulated { grid, rho } => {
                let f = Field::new(*grid, rho.clone()).expect("validated");
                tabulated_support(&f).expect("validated")
            }
        }
    }

    fn inside(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x > lo && x < hi
    }

    /// Density `rho` and its derivatives as a Taylor jet in `x`.
    ///
    /// The jet's value must lie strictly inside the support.
    pub fn rho_jet(&self, x: &Jet) -> Jet {
        match &self.shape {
            Shape::Compacton { b, c } => {
                let a = (4.0 * b + c * c).sqrt();
                x.scale(SQRT_2).cos().scale(a).offset(*c)
            }
            Shape::PowerLeftRight {
                alpha_left,
                alpha_right,
                amplitude,
                halfwidth,
                center,
            } => {
                let s = x.offset(-center).scale(1.0 / halfwidth);
                let left = s.offset(1.0).powf(*alpha_left);
                let right = s.scale(-1.0).offset(1.0).powf(*alpha_right);
                (left * right).scale(*amplitude)
            }
            Shape::AlgebraicTail { beta, amplitude, scale } => {
                let s = x.scale(1.0 / scale);
                (s.clone() * s).offset(1.0).powf(-beta / 2.0).scale(*amplitude)
            }
            Shape::SmoothBump { center, width, amplitude } => {
                let s = x.offset(-center).scale(1.0 / width);
                (s.clone() * s).scale(-1.0).exp().scale(amplitude * amplitude)
            }
            Shape::Tabulated { grid, rho } => {
                let order = x.order();
                let f = Field::new(*grid, rho.clone()).expect("validated");
                let taylor = tabulated_taylor(&f, x.value(), order);
                x.compose(&taylor)
            }
        }
    }

    /// `d^k rho / dx^k` at `x`; zero outside the support.
    pub fn rho_eval(&self, x: f64, order: usize) -> f64 {
        if !self.inside(x) {
            return 0.0;
        }
        self.rho_jet(&Jet::variable(x, order)).derivative(order)
    }

    /// `u0 = sqrt(rho)`; zero outside the support.
    pub fn profile_eval(&self, x: f64) -> f64 {
        self.rho_eval(x, 0).max(0.0).sqrt()
    }

    /// Samples `u0` on a grid.
    pub fn sample_u(&self, grid: &Grid) -> Result<Field> {
        Field::from_fn(*grid, |x| self.profile_eval(x)).map(|f| f.with_label("u"))
    }

    pub fn classify_endpoints(&self) -> Result<DecayClass> {
        let infinite = DecayClass {
            left: EndpointDecay::InfiniteSupport,
            right: EndpointDecay::InfiniteSupport,
        };
        Ok(match &self.shape {
            Shape::Compacton { b, .. } => {
                if *b < 0.0 {
                    infinite
                } else {
                    // rho vanishes quadratically when B = 0 and linearly when B > 0.
                    let e = if *b == 0.0 { 2.0 } else { 1.0 };
                    DecayClass {
                        left: EndpointDecay::from_exponent(e),
                        right: EndpointDecay::from_exponent(e),
                    }
                }
            }
            Shape::PowerLeftRight {
                alpha_left,
                alpha_right,
                ..
            } => DecayClass {
                left: EndpointDecay::from_exponent(*alpha_left),
                right: EndpointDecay::from_exponent(*alpha_right),
            },
            Shape::AlgebraicTail { .. } | Shape::SmoothBump { .. } => infinite,
            Shape::Tabulated { grid, rho } => {
                let f = Field::new(*grid, rho.clone())?;
                let (lo, hi) = tabulated_support(&f)?;
                let left = if lo.is_finite() {
                    EndpointDecay::from_fitted_slope(fit_endpoint_slope(&f, Side::Left)?)
                } else {
                    EndpointDecay::InfiniteSupport
                };
                let right = if hi.is_finite() {
                    EndpointDecay::from_fitted_slope(fit_endpoint_slope(&f, Side::Right)?)
                } else {
                    EndpointDecay::InfiniteSupport
                };
                DecayClass { left, right }
            }
        })
    }

    /// Weights `K0` compatible with power decay at finite endpoints or
    /// algebraic tails at infinity.
    pub fn admissible_k0(&self) -> Result<K0Window> {
        match &self.shape {
            Shape::PowerLeftRight {
                alpha_left,
                alpha_right,
                ..
            } => {
                let mut window: Option<K0Window> = None;
                for (side, alpha) in [("left", *alpha_left), ("right", *alpha_right)] {
                    if alpha <= 3.0 {
                        let class = EndpointDecay::from_exponent(alpha);
                        return Err(Error::Admissibility(format!(
                            "{} {side} endpoint decay (exponent {alpha}) admits no weight",
                            class.name()
                        )));
                    }
                    let d = alpha - 3.0;
                    let w = K0Window::from_bounds(
                        2.5 * alpha / d,
                        2.5 * (2.0 * alpha - 3.0) / d,
                        2.5 * alpha / d,
                    );
                    window = Some(match window {
                        None => w,
                        Some(prev) => {
                            let lower = prev.lower.max(w.lower);
                            let upper = prev.upper.min(w.upper);
                            let direct = prev.direct_min.max(w.direct_min) as f64;
                            K0Window::from_bounds(lower, upper, direct)
                        }
                    });
                }
                Ok(window.expect("two sides"))
            }
            Shape::AlgebraicTail { beta, .. } => {
                let b = *beta;
                Ok(K0Window::from_bounds(
                    2.5 * b / (b + 3.0),
                    (10.0 * b + 3.0) / (2.0 * b + 6.0),
                    2.5 * b / (b + 3.0),
                ))
            }
            other => Err(Error::Unsupported(format!(
                "admissible K0 is defined for power-law endpoints and algebraic tails, not {}",
                shape_name(other)
            ))),
        }
    }
}

pub fn shape_name(shape: &Shape) -> &'static str {
    match shape {
        Shape::Compacton { .. } => "compacton",
        Shape::PowerLeftRight { .. } => "power_left_right",
        Shape::AlgebraicTail { .. } => "algebraic_tail",
        Shape::SmoothBump { .. } => "smooth_bump",
        Shape::Tabulated { .. } => "tabulated",
    }
}

impl Density for ProfileSpec {
    fn rho(&self, x: f64) -> f64 {
        self.rho_eval(x, 0)
    }
    fn rho_x(&self, x: f64) -> f64 {
        self.rho_eval(x, 1)
    }
    fn support(&self) -> (f64, f64) {
        ProfileSpec::support(self)
    }
}

/// Taylor coefficients of tabulated `rho` at `x0` from spectral derivatives.
fn tabulated_taylor(f: &Field, x0: f64, order: usize) -> Vec<f64> {
    let grid = *f.grid();
    let n = grid.n();
    let mut t = Transform::new(n);
    let mut base = vec![Default::default(); n];
    t.forward(f.values(), &mut base);
    let mut fact = 1.0;
    (0..=order)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            let m = derivative_multiplier(&grid, k as u32);
            let spec: Vec<_> = base.iter().zip(&m).map(|(b, mm)| b * mm).collect();
            evaluate_spectrum(&grid, &spec, x0) / fact
        })
        .collect()
}

/// Positivity interval of sampled data, bounded by the nearest zero nodes.
fn tabulated_support(f: &Field) -> Result<(f64, f64)> {
    let v = f.values();
    let grid = f.grid();
    let positive: Vec<usize> = (0..v.len()).filter(|&i| v[i] > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::Structural("tabulated rho has no positive node".into()));
    }
    if positive.len() == v.len() {
        return Ok((f64::NEG_INFINITY, f64::INFINITY));
    }
    let (first, last) = (positive[0], *positive.last().unwrap());
    if last - first + 1 != positive.len() {
        return Err(Error::Structural(
            "positivity set of tabulated rho is not a single interval".into(),
        ));
    }
    if first == 0 || last == v.len() - 1 {
        return Err(Error::Structural(
            "positivity interval of tabulated rho touches the periodic seam".into(),
        ));
    }
    Ok((grid.node(first - 1), grid.node(last + 1)))
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// Local power `p` in `rho ≈ C dist^p` near an endpoint of sampled data.
///
/// For the right `p`, `rho^(1/p)` is linear in `x`; the exponent is the one
/// that minimizes the relative residual of a straight-line fit.
fn fit_endpoint_slope(f: &Field, side: Side) -> Result<f64> {
    let v = f.values();
    let grid = f.grid();
    let positive: Vec<usize> = (0..v.len()).filter(|&i| v[i] > 0.0).collect();
    let count = positive.len();
    if count < 24 {
        return Err(Error::Data("too few positive samples to fit endpoint decay".into()));
    }
    let window: Vec<usize> = match side {
        Side::Left => positive[1..13].to_vec(),
        Side::Right => positive[count - 13..count - 1].to_vec(),
    };
    let xs: Vec<f64> = window.iter().map(|&i| grid.node(i)).collect();
    let ys: Vec<f64> = window.iter().map(|&i| v[i]).collect();
    let misfit = |p: f64| -> f64 {
        let r: Vec<f64> = ys.iter().map(|y| y.powf(1.0 / p)).collect();
        let (slope, intercept) = linear_fit(&xs, &r);
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        xs.iter()
            .zip(&r)
            .map(|(x, y)| (slope * x + intercept - y).powi(2))
            .sum::<f64>()
            .sqrt()
            / scale
    };
    let trial: Vec<f64> = (1..=400).map(|i| 0.05 * i as f64).collect();
    let best = trial
        .iter()
        .copied()
        .min_by(|a, b| misfit(*a).total_cmp(&misfit(*b)))
        .expect("nonempty scan");
    // Golden-section refinement around the best scan point.
    let (mut a, mut b) = ((best - 0.05).max(1e-3), best + 0.05);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if misfit(c) < misfit(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Quadrature of `M`, `J`, `J+` and `H`.
///
/// `|u u_x|^2` is evaluated as `((u^2)_x)^2 / 4`, which stays smooth where
/// `u` has a square-root profile.
pub fn conserved_quantities(u: &Field, mu: Mu) -> Result<ConservedSet> {
    let u2 = u.map(|v| v * v)?;
    let du2 = derivative(&u2, 1)?;
    let grad = du2.map(|d| 0.25 * d * d)?;
    let quartic = u.map(|v| v.powi(4))?;
    Ok(ConservedSet {
        mass: integrate(&u2),
        momentum: integrate(u),
        positive_momentum: integrate(&u.map(|v| v.max(0.0))?),
        hamiltonian: 0.5 * integrate(&grad) - 0.25 * mu.value() * integrate(&quartic),
    })
}

/// Grid covering exactly one spatial period of the compacton: the support
/// for `B >= 0`, the period `sqrt(2) π` for `B < 0`.
pub fn compacton_grid(b: f64, c: f64, n: usize) -> Result<Grid> {
    if b < 0.0 {
        Grid::centered(n, PI / SQRT_2)
    } else {
        Grid::centered(n, compacton_halfwidth(b, c)?)
    }
}

/// `-c φ' + (φ (φ φ')' + μ φ^3)'` for `φ = Φ_{B,c}`, evaluated with exact
/// derivatives at the grid nodes strictly inside the support.
///
/// Returns the node coordinates together with the residual values.
pub fn traveling_wave_residual(b: f64, c: f64, mu: Mu, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = ProfileSpec::compacton(b, c, mu)?;
    let grid = compacton_grid(b, c, n)?;
    let (lo, hi) = spec.support();
    let mut xs = Vec::new();
    let mut res = Vec::new();
    for x in grid.nodes() {
        if x <= lo || x >= hi {
            continue;
        }
        let phi = spec.rho_jet(&Jet::variable(x, 3)).sqrt();
        let dphi = phi.differentiate();
        let flux = phi.truncate(1) * (phi.truncate(2) * dphi.clone()).differentiate()
            + phi.truncate(1).powi(3).scale(mu.value());
        let r = -c * dphi.value() + flux.differentiate().value();
        xs.push(x);
        res.push(r);
    }
    Ok((xs, res))
}
