//! Weighted Sobolev norms `H^{N,K}` and their parabolic-time variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivatives, Field, MAX_DERIVATIVE_ORDER};

/// Norm index: `N` derivatives on top of `2(K - k)` traded for each weight
/// power `<y>^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormRequest {
    pub n: u32,
    pub k: u32,
}

impl NormRequest {
    pub fn new(n: u32, k: u32) -> Self {
        Self { n, k }
    }

    /// Highest derivative the norm needs.
    pub fn max_order(&self) -> u32 {
        2 * self.k + self.n
    }

    /// Checks `2K + N <= 7 + 2 K0`.
    pub fn check_budget(&self, k0: u32) -> Result<()> {
        if self.max_order() > 7 + 2 * k0 {
            return Err(Error::Parameter(format!(
                "norm H^{{{},{}}} needs {} derivatives, budget is {}",
                self.n,
                self.k,
                self.max_order(),
                7 + 2 * k0
            )));
        }
        Ok(())
    }
}

/// Japanese bracket `sqrt(1 + y^2)`.
pub fn bracket(y: f64) -> f64 {
    (1.0 + y * y).sqrt()
}

/// `Σ_{k<=K} Σ_{m <= 2(K-k)+N} ||<y>^k ∂^m f||_{L²}`.
pub fn weighted_norm(f: &Field, req: NormRequest) -> Result<f64> {
    if req.max_order() > MAX_DERIVATIVE_ORDER {
        return Err(Error::Parameter(format!(
            "norm needs {} derivatives, at most {MAX_DERIVATIVE_ORDER} are available",
            req.max_order()
        )));
    }
    let d = derivatives(f, req.max_order())?;
    Ok(weighted_norm_from(&d, req))
}

/// Same as [`weighted_norm`] from precomputed derivatives `d[m] = ∂^m f`.
pub fn weighted_norm_from(d: &[Field], req: NormRequest) -> f64 {
    let grid = *d[0].grid();
    let h = grid.spacing();
    let y = grid.nodes();
    let mut total = 0.0;
    for k in 0..=req.k {
        let w: Vec<f64> = y.iter().map(|&v| bracket(v).powi(k as i32)).collect();
        for dm in &d[..=(2 * (req.k - k) + req.n) as usize] {
            let s: f64 = dm
                .values()
                .iter()
                .zip(&w)
                .map(|(v, ww)| (v * ww).powi(2))
                .sum();
            total += (h * s).sqrt();
        }
    }
    total
}

/// `Σ_{n=0}^{3} sup_t (ν t)^{n/4} ||f(t)||_{H^{N+n,K}}` over a sampled
/// trajectory.
pub fn z_norm(times: &[f64], traj: &[Field], nu: f64, req: NormRequest) -> Result<f64> {
    if times.len() != traj.len() {
        return Err(Error::Parameter("times and snapshots differ in length".into()));
    }
    if times.first().copied() != Some(0.0) {
        return Err(Error::Parameter("trajectory must start at t = 0".into()));
    }
    let top = NormRequest::new(req.n + 3, req.k);
    let mut sups = [0.0f64; 4];
    for (t, f) in times.iter().zip(traj) {
        let d = derivatives(f, top.max_order())?;
        for (j, sup) in sups.iter_mut().enumerate() {
            let weight = if j == 0 { 1.0 } else { (nu * t).powf(j as f64 / 4.0) };
            if weight == 0.0 {
                continue;
            }
            let value = weight * weighted_norm_from(&d, NormRequest::new(req.n + j as u32, req.k));
            *sup = sup.max(value);
        }
    }
    Ok(sups.iter().sum())
}

/// `||f||²_{H^{4,K}} / (||f||_{H^{1,K}} ||f||_{H^{7,K}})`; zero for `f = 0`.
pub fn interpolation_gap(f: &Field, k: u32) -> Result<f64> {
    let d = derivatives(f, 2 * k + 7)?;
    let n1 = weighted_norm_from(&d, NormRequest::new(1, k));
    let n4 = weighted_norm_from(&d, NormRequest::new(4, k));
    let n7 = weighted_norm_from(&d, NormRequest::new(7, k));
    if n1 == 0.0 || n7 == 0.0 {
        return Ok(0.0);
    }
    Ok(n4 * n4 / (n1 * n7))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{derivative, Grid};

    #[test]
    fn unweighted_norm_is_sobolev_sum() {
        let g = Grid::centered(128, 10.0).unwrap();
        let f = Field::from_fn(g, |y| (-y * y).exp()).unwrap();
        let direct: f64 = (0..=3).map(|m| derivative(&f, m).unwrap().l2_norm()).sum();
        let v = weighted_norm(&f, NormRequest::new(3, 0)).unwrap();
        assert!((v - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn gaussian_norm_is_resolved() {
        let value = |n| {
            let g = Grid::centered(n, 16.0).unwrap();
            let f = Field::from_fn(g, |y| (-y * y / 2.0).exp()).unwrap();
            weighted_norm(&f, NormRequest::new(4, 2)).unwrap()
        };
        let (a, b) = (value(256), value(512));
        assert!((a - b).abs() < 1e-8 * b);
    }

    #[test]
    fn zero_trajectory_has_zero_norm() {
        let g = Grid::centered(64, 5.0).unwrap();
        let z = Field::zeros(g);
        let v = z_norm(&[0.0, 0.1], &[z.clone(), z], 1e-3, NormRequest::new(4, 1)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn inviscid_z_norm_is_plain_sup() {
        let g = Grid::centered(64, 8.0).unwrap();
        let f1 = Field::from_fn(g, |y| (-y * y).exp()).unwrap();
        let f2 = f1.scale(2.0).unwrap();
        let req = NormRequest::new(2, 1);
        let v = z_norm(&[0.0, 0.5], &[f1, f2.clone()], 0.0, req).unwrap();
        assert!((v - weighted_norm(&f2, req).unwrap()).abs() < 1e-12 * v);
    }

    #[test]
    fn budget() {
        assert!(NormRequest::new(7, 6).check_budget(6).is_ok());
        assert!(NormRequest::new(8, 6).check_budget(6).is_err());
    }
}
