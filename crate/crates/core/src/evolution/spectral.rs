//! Scratch-reusing spectral kernels shared by the solvers.

use rustfft::num_complex::Complex64;

use crate::grid::{derivative_multiplier, Grid, Transform};

pub(crate) struct Spectral {
    pub grid: Grid,
    transform: Transform,
    ik: Vec<Vec<Complex64>>,
    spec: Vec<Complex64>,
    work: Vec<Complex64>,
    pair: Vec<Complex64>,
}

impl Spectral {
    pub fn new(grid: Grid, max_order: u32) -> Self {
        let n = grid.n();
        Self {
            grid,
            transform: Transform::new(n),
            ik: (0..=max_order).map(|k| derivative_multiplier(&grid, k)).collect(),
            spec: vec![Complex64::default(); n],
            work: vec![Complex64::default(); n],
            pair: vec![Complex64::default(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn forward(&mut self, values: &[f64], out: &mut [Complex64]) {
        self.transform.forward(values, out);
    }

    pub fn inverse(&mut self, spectrum: &[Complex64], out: &mut [f64]) {
        self.work.copy_from_slice(spectrum);
        self.transform.inverse_real(&mut self.work, out);
    }

    /// `d[m] = ∂^m f` for `m = 0..=max_order`.
    pub fn derivatives(&mut self, values: &[f64], max_order: usize) -> Vec<Vec<f64>> {
        let n = self.n();
        self.transform.forward(values, &mut self.spec);
        let mut out = vec![values.to_vec()];
        let mut m = 1;
        while m <= max_order {
            let mut a = vec![0.0; n];
            if m < max_order {
                let mut b = vec![0.0; n];
                let (ka, kb) = (&self.ik[m], &self.ik[m + 1]);
                let sa: Vec<Complex64> = self.spec.iter().zip(ka).map(|(s, k)| s * k).collect();
                let sb: Vec<Complex64> = self.spec.iter().zip(kb).map(|(s, k)| s * k).collect();
                self.transform.inverse_pair(&sa, &sb, &mut self.pair, &mut a, &mut b);
                out.push(a);
                out.push(b);
                m += 2;
            } else {
                for ((w, s), k) in self.work.iter_mut().zip(&self.spec).zip(&self.ik[m]) {
                    *w = s * k;
                }
                self.transform.inverse_real(&mut self.work, &mut a);
                out.push(a);
                m += 1;
            }
        }
        out
    }
}

/// `(e^z - 1)/z` and `(e^z - 1 - z)/z²`, with series near the origin.
pub(crate) fn phi12(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.5 {
        let mut p1 = Complex64::new(0.0, 0.0);
        let mut p2 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        // term = z^k / (k+1)!, so term / (k+2) = z^k / (k+2)!
        for k in 0..30 {
            p1 += term;
            p2 += term / (k as f64 + 2.0);
            term = term * z / (k as f64 + 2.0);
        }
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}
