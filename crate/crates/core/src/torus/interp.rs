//! Off-grid evaluation of band-limited fields.
//!
//! Only modes with non-negligible coefficients are stored, so low-mode data
//! (a sine, Taylor–Green) evaluates in a handful of operations per point.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::field::{ScalarField, VectorField};
use super::grid::TorusGrid;
use super::ops::derivative_wavevector;

const RELATIVE_CUTOFF: f64 = 1e-15;

#[derive(Clone, Debug)]
struct Mode {
    k: [f64; 2],
    kd: [f64; 2],
    coeffs: Vec<Complex64>,
}

/// Trigonometric interpolant of a (possibly multi-component) field.
#[derive(Clone, Debug)]
pub struct Interpolant {
    grid: TorusGrid,
    ncomp: usize,
    modes: Vec<Mode>,
}

impl Interpolant {
    pub fn from_components(grid: TorusGrid, comps: &[&ScalarField]) -> Self {
        let spectra: Vec<_> = comps.iter().map(|c| c.spectrum().into_coeffs()).collect();
        let peak = spectra
            .iter()
            .flat_map(|s| s.iter().map(|c| c.norm()))
            .fold(0.0, f64::max);
        let cutoff = peak * RELATIVE_CUTOFF;
        let mut modes = Vec::new();
        for idx in 0..grid.len() {
            let coeffs: Vec<Complex64> = spectra.iter().map(|s| s[idx]).collect();
            if coeffs.iter().all(|c| c.norm() <= cutoff) {
                continue;
            }
            let k = grid.wavevector(idx);
            modes.push(Mode {
                k: [k[0] as f64, k[1] as f64],
                kd: derivative_wavevector(&grid, idx),
                coeffs,
            });
        }
        Self {
            grid,
            ncomp: comps.len(),
            modes,
        }
    }

    pub fn scalar(f: &ScalarField) -> Self {
        Self::from_components(f.grid(), &[f])
    }

    pub fn vector(v: &VectorField) -> Self {
        let comps: Vec<&ScalarField> = v.components().iter().collect();
        Self::from_components(v.grid(), &comps)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.ncomp
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    fn phase(&self, m: &Mode, x: &[f64]) -> Complex64 {
        let x1 = if self.grid.dim() == 2 { x[1] } else { 0.0 };
        let theta = 2.0 * PI * (m.k[0] * x[0] + m.k[1] * x1);
        Complex64::new(theta.cos(), theta.sin())
    }

    /// Component values at `x`.
    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncomp];
        for m in &self.modes {
            let e = self.phase(m, x);
            for (o, c) in out.iter_mut().zip(&m.coeffs) {
                *o += (c * e).re;
            }
        }
        out
    }

    /// Values and Jacobian `J[c][a] = ∂_a comp_c` at `x`.
    pub fn value_and_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let mut val = vec![0.0; self.ncomp];
        let mut jac = vec![[0.0; 2]; self.ncomp];
        for m in &self.modes {
            let e = self.phase(m, x);
            for c in 0..self.ncomp {
                let ce = m.coeffs[c] * e;
                val[c] += ce.re;
                // Re(ce · i2πk) = −2πk · Im(ce)
                jac[c][0] -= 2.0 * PI * m.kd[0] * ce.im;
                jac[c][1] -= 2.0 * PI * m.kd[1] * ce.im;
            }
        }
        (val, jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_sine_and_derivative() {
        let g = TorusGrid::line(256).unwrap();
        let f = ScalarField::from_fn(g, |p| 0.5 * (2.0 * PI * p[0]).sin());
        let it = Interpolant::scalar(&f);
        assert_eq!(it.mode_count(), 2);
        let x = 0.3217;
        let (v, j) = it.value_and_jacobian(&[x]);
        assert!((v[0] - 0.5 * (2.0 * PI * x).sin()).abs() < 1e-15);
        assert!((j[0][0] - PI * (2.0 * PI * x).cos()).abs() < 1e-13);
    }

    #[test]
    fn matches_grid_samples() {
        let g = TorusGrid::square(16).unwrap();
        let f = ScalarField::from_fn(g, |p| (p[0] * 7.0 + p[1] * 3.0).sin().exp());
        let it = Interpolant::scalar(&f);
        for idx in [0, 5, 77, 255] {
            let p = g.point(idx);
            assert!((it.value(&p)[0] - f.values()[idx]).abs() < 1e-12);
        }
    }
}
