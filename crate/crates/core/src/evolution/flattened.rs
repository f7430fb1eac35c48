//! Right-hand sides of the flattened equations for `W` and `Z`, and the
//! `x`-coordinate form of the `Z` equation used as a cross-check.

use super::spectral::Spectral;
use crate::coordinates::{chain_from_y_derivs, FrameFields};
use crate::error::{Error, Result};
use crate::grid::Field;

fn positivity(frame: &FrameFields, i: usize, q: f64) -> Error {
    Error::Degeneracy {
        node: i,
        coordinate: frame.grid.node(i),
        reason: format!("1 + Z = {q:.3e} is not positive"),
    }
}

/// Pieces of the `W` equation shared by the stepper and the mild map.
pub(crate) struct WParts {
    /// `d[m] = ∂_y^m W`.
    pub d: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub gy: Vec<f64>,
    pub lower: Vec<f64>,
}

/// Lower-order polynomial `R(y, Z, Z_y)` at one node.
#[allow(clippy::too_many_arguments)]
fn lower_z(q: f64, zy: f64, l1: f64, l2: f64, l3: f64, mu: f64, r23: f64) -> f64 {
    let q3 = q * q * q;
    let q4 = q3 * q;
    let q5 = q4 * q;
    let q6 = q5 * q;
    -19.0 / 9.0 * l1 * l1 * q5 * zy + 25.0 / 6.0 * l2 * q5 * zy + 43.0 / 6.0 * l1 * q4 * zy * zy
        + 4.0 * q3 * zy * zy * zy
        + 0.5 * (l3 - 4.0 / 3.0 * l1 * l2 + 5.0 / 9.0 * l1 * l1 * l1) * (q6 - 1.0)
        + mu * r23 * (l1 * (q4 - 1.0) + 2.0 * q3 * zy)
}

pub(crate) fn w_parts(sp: &mut Spectral, w: &[f64], frame: &FrameFields, max_order: usize) -> Result<WParts> {
    let n = sp.n();
    let d = sp.derivatives(w, max_order.max(3));
    let (l1, l2, l3) = (frame.log_deriv(1), frame.log_deriv(2), frame.log_deriv(3));
    let rm = frame.rho_m56.values();
    let r56 = frame.rho56.values();
    let r23 = frame.rho23.values();
    let mu = frame.mu.value();
    let mut g = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut lower = vec![0.0; n];
    for i in 0..n {
        let (wv, wy) = (w[i], d[1][i]);
        let z = rm[i] * wv;
        let q = 1.0 + z;
        if q <= 0.0 {
            return Err(positivity(frame, i, q));
        }
        let zy = rm[i] * (wy - 5.0 / 6.0 * l1[i] * wv);
        let q4 = q.powi(4);
        let q5 = q4 * q;
        g[i] = q5 - 1.0;
        gy[i] = 5.0 * q4 * zy;
        let (a1, a2, a3) = (l1[i], l2[i], l3[i]);
        lower[i] = -2.5 * a2 * q5 * wy + 5.0 / 12.0 * a1 * a1 * q5 * wy - 5.0 / 6.0 * a3 * q5 * wv
            - 55.0 / 108.0 * a1 * a1 * a1 * q5 * wv
            + 2.5 * a1 * a2 * q5 * wv
            + 7.0 * q4 * zy * (-5.0 / 3.0 * a1 * wy - 5.0 / 6.0 * a2 * wv + 55.0 / 36.0 * a1 * a1 * wv)
            + r56[i] * lower_z(q, zy, a1, a2, a3, mu, r23[i]);
    }
    Ok(WParts { d, g, gy, lower })
}

/// Explicit part of the `W` equation once `-∂³` is split off:
/// `-[g W_yyy + (7/5) g_y W_yy + N + rho^(5/6) F]`.
pub(crate) fn w_remainder(sp: &mut Spectral, w: &[f64], frame: &FrameFields) -> Result<(Vec<f64>, WParts)> {
    let p = w_parts(sp, w, frame, 3)?;
    let f = frame.forcing.values();
    let out = (0..sp.n())
        .map(|i| -(p.g[i] * p.d[3][i] + 1.4 * p.gy[i] * p.d[2][i] + p.lower[i] + f[i]))
        .collect();
    Ok((out, p))
}

/// `W_t` of the regularized flattened equation:
/// `-[(1+g) W_yyy + (7/5) g_y W_yy + N(y, W, W_y) + rho^(5/6) F] - ν ∂⁴ W`.
pub fn rhs_w(w: &Field, frame: &FrameFields, nu: f64) -> Result<Field> {
    let mut sp = Spectral::new(frame.grid, 4);
    let p = w_parts(&mut sp, w.values(), frame, 4)?;
    let f = frame.forcing.values();
    let v = (0..frame.grid.n())
        .map(|i| {
            -((1.0 + p.g[i]) * p.d[3][i] + 1.4 * p.gy[i] * p.d[2][i] + p.lower[i] + f[i]) - nu * p.d[4][i]
        })
        .collect();
    Field::new(frame.grid, v).map(|f| f.with_label("W_t"))
}

/// `Z_t` of the flattened equation without regularization, term by term.
pub(crate) fn z_rate(d: &[Vec<f64>], frame: &FrameFields) -> Result<Vec<f64>> {
    let n = frame.grid.n();
    let (l1, l2, l3) = (frame.log_deriv(1), frame.log_deriv(2), frame.log_deriv(3));
    let r23 = frame.rho23.values();
    let mu = frame.mu.value();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let q = 1.0 + d[0][i];
        if q <= 0.0 {
            return Err(positivity(frame, i, q));
        }
        let (zy, zyy, zyyy) = (d[1][i], d[2][i], d[3][i]);
        let (a1, a2, a3) = (l1[i], l2[i], l3[i]);
        let q3 = q * q * q;
        let q4 = q3 * q;
        let q5 = q4 * q;
        let q6 = q5 * q;
        let total = q5 * zyyy + 2.5 * a1 * q5 * zyy + 7.0 * q4 * zy * zyy - 19.0 / 9.0 * a1 * a1 * q5 * zy
            + 25.0 / 6.0 * a2 * q5 * zy
            + 43.0 / 6.0 * a1 * q4 * zy * zy
            + 4.0 * q3 * zy * zy * zy
            + 0.5 * (a3 - 4.0 / 3.0 * a1 * a2 + 5.0 / 9.0 * a1 * a1 * a1) * q6
            + mu * r23[i] * (a1 * q4 + 2.0 * q3 * zy);
        out[i] = -total;
    }
    Ok(out)
}

/// `Z_t` of the flattened equation, every term written out.
pub fn rhs_z(z: &Field, frame: &FrameFields) -> Result<Field> {
    let mut sp = Spectral::new(frame.grid, 3);
    let d = sp.derivatives(z.values(), 3);
    Field::new(frame.grid, z_rate(&d, frame)?).map(|f| f.with_label("Z_t"))
}

/// `Z_t` from the `x`-coordinate form of the equation, with every `∂_x`
/// realized through the chain rule on the `y`-grid.
pub fn rhs_z_x_form(z: &Field, frame: &FrameFields) -> Result<Field> {
    let n = frame.grid.n();
    let mut sp = Spectral::new(frame.grid, 3);
    let d = sp.derivatives(z.values(), 3);
    let dz = [d[1].as_slice(), d[2].as_slice(), d[3].as_slice()];
    let zx = chain_from_y_derivs(dz, frame, 1)?;
    let zxx = chain_from_y_derivs(dz, frame, 2)?;
    let zxxx = chain_from_y_derivs(dz, frame, 3)?;
    let rho = frame.rho.values();
    let ry: Vec<f64> = (0..n).map(|i| rho[i] * frame.log_deriv(1)[i]).collect();
    let ryy: Vec<f64> = (0..n).map(|i| rho[i] * frame.log_deriv(2)[i]).collect();
    let ryyy: Vec<f64> = (0..n).map(|i| rho[i] * frame.log_deriv(3)[i]).collect();
    let dr = [ry.as_slice(), ryy.as_slice(), ryyy.as_slice()];
    let rx = chain_from_y_derivs(dr, frame, 1)?;
    let rxx = chain_from_y_derivs(dr, frame, 2)?;
    let rxxx = chain_from_y_derivs(dr, frame, 3)?;
    let mu = frame.mu.value();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let q = 1.0 + z.values()[i];
        if q <= 0.0 {
            return Err(positivity(frame, i, q));
        }
        let q3 = q * q * q;
        let q4 = q3 * q;
        let q5 = q4 * q;
        let total = rho[i] * q5 * zxxx[i] + 3.5 * rx[i] * q5 * zxx[i] + 7.0 * rho[i] * q4 * zx[i] * zxx[i]
            + 4.5 * rxx[i] * q5 * zx[i]
            + 9.5 * rx[i] * q4 * zx[i] * zx[i]
            + 4.0 * rho[i] * q3 * zx[i].powi(3)
            + 0.5 * rxxx[i] * q5 * q
            + mu * rx[i] * q4
            + 2.0 * mu * rho[i] * q3 * zx[i];
        out[i] = -total;
    }
    Field::new(frame.grid, out).map(|f| f.with_label("Z_t"))
}

/// `-ν rho^(-5/6) ∂⁴ (rho^(5/6) Z)`, the regularization seen from `Z`.
pub(crate) fn z_regularization(d: &[Vec<f64>], frame: &FrameFields, nu: f64) -> Vec<f64> {
    const BINOM: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    (0..frame.grid.n())
        .map(|i| {
            let mut s = d[4][i];
            for (j, c) in BINOM.iter().enumerate().take(4) {
                s += c * frame.weight_derivs[3 - j].values()[i] * d[j][i];
            }
            -nu * s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinates::{w_from_z, FrameOptions};
    use crate::grid::Grid;
    use crate::profiles::Mu;

    fn model_frame(n: usize, mu: Mu) -> FrameFields {
        let g = Grid::new(n, 400.0, -200.0).unwrap();
        FrameFields::from_y_density(g, mu, 6, FrameOptions { delta_floor: 0.0 }, |y| {
            (y.clone() * y.clone()).scale(1.0 / 400.0).offset(1.0).powf(-3.0)
        })
        .unwrap()
    }

    fn bump(g: Grid, amp: f64) -> Field {
        Field::from_fn(g, |y| amp * (-(y - 3.0) * (y - 3.0) / 50.0).exp() * (1.0 + 0.3 * (y / 7.0).sin())).unwrap()
    }

    #[test]
    fn zero_state_feels_only_the_forcing() {
        let frame = model_frame(256, Mu::Focusing);
        let r = rhs_w(&Field::zeros(frame.grid), &frame, 1e-3).unwrap();
        for (a, b) in r.values().iter().zip(frame.forcing.values()) {
            assert_eq!(*a, -b);
        }
        let rz = rhs_z(&Field::zeros(frame.grid), &frame).unwrap();
        for (a, b) in rz.values().iter().zip(frame.inhomogeneity.values()) {
            assert!((a + b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn flat_density_reduces_to_the_quasilinear_core() {
        let g = Grid::centered(256, 40.0).unwrap();
        let frame = FrameFields::flat(g, 1.0, Mu::Neutral, 0).unwrap();
        let w = bump(g, 0.2);
        let r = rhs_w(&w, &frame, 0.0).unwrap();
        let d = crate::grid::derivatives(&w, 3).unwrap();
        for i in 0..g.n() {
            let q = 1.0 + w.values()[i];
            let (wy, wyy, wyyy) = (d[1].values()[i], d[2].values()[i], d[3].values()[i]);
            let expect = -(q.powi(5) * wyyy + 7.0 * q.powi(4) * wy * wyy + 4.0 * q.powi(3) * wy.powi(3));
            assert!((r.values()[i] - expect).abs() < 1e-10 * r.max_abs(), "{} vs {expect}", r.values()[i]);
        }
        let focusing = FrameFields::flat(g, 1.0, Mu::Focusing, 0).unwrap();
        let rz = rhs_z(&w, &focusing).unwrap();
        for i in 0..g.n() {
            let q = 1.0 + w.values()[i];
            let (zy, zyy, zyyy) = (d[1].values()[i], d[2].values()[i], d[3].values()[i]);
            let expect = -(q.powi(5) * zyyy + 7.0 * q.powi(4) * zy * zyy + 4.0 * q.powi(3) * zy.powi(3)
                + 2.0 * q.powi(3) * zy);
            assert!((rz.values()[i] - expect).abs() < 1e-10 * rz.max_abs());
        }
    }

    #[test]
    fn w_equation_is_the_rescaled_z_equation() {
        for mu in Mu::ALL {
            let frame = model_frame(1024, mu);
            let z = bump(frame.grid, 0.05);
            let w = w_from_z(&z, &frame).unwrap();
            let a = rhs_w(&w, &frame, 0.0).unwrap();
            let b = rhs_z(&z, &frame).unwrap();
            let scale = a.max_abs();
            for i in 0..frame.grid.n() {
                let expect = frame.rho56.values()[i] * b.values()[i];
                assert!((a.values()[i] - expect).abs() < 1e-10 * scale, "mu={mu:?} i={i}");
            }
        }
    }

    #[test]
    fn x_form_agrees_with_y_form() {
        let frame = model_frame(1024, Mu::Focusing);
        let z = bump(frame.grid, 0.05);
        let a = rhs_z(&z, &frame).unwrap();
        let b = rhs_z_x_form(&z, &frame).unwrap();
        let scale = a.max_abs();
        for (u, v) in a.values().iter().zip(b.values()) {
            assert!((u - v).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn regularization_matches_rescaled_fourth_derivative() {
        let frame = model_frame(512, Mu::Neutral);
        let z = bump(frame.grid, 0.1);
        let mut sp = Spectral::new(frame.grid, 4);
        let d = sp.derivatives(z.values(), 4);
        let reg = z_regularization(&d, &frame, 1.0);
        let w = w_from_z(&z, &frame).unwrap();
        let w4 = crate::grid::derivative(&w, 4).unwrap();
        for i in 0..frame.grid.n() {
            let expect = -frame.rho_m56.values()[i] * w4.values()[i];
            assert!((reg[i] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn nonpositive_metric_is_degenerate() {
        let frame = model_frame(64, Mu::Neutral);
        let z = Field::constant(frame.grid, -1.5).unwrap();
        assert!(matches!(rhs_z(&z, &frame), Err(Error::Degeneracy { .. })));
    }
}
