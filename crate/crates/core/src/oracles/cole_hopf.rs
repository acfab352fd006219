use rustfft::num_complex::Complex64;

use super::Wavenumbers;
use crate::error::{Error, Result};
use crate::torus::{fft, Field, VectorField};

/// Largest exponent magnitude accepted in `exp(−Φ/2ν)`.
const MAX_EXPONENT: f64 = 600.0;

/// Viscous Burgers `v_t + v v_x = ν v_xx` in 1D by the Cole–Hopf transform.
///
/// The mean `c` of `v0` is removed, the zero-mean part is mapped through
/// `φ = exp(−Φ/2ν)` with `Φ′ = v0 − c`, `φ` is heat-evolved, and
/// `v = −2ν φ_x/φ` is translated back by `c t` and offset by `c`.
pub fn cole_hopf_burgers(v0: &VectorField, nu: f64, t: f64) -> Result<VectorField> {
    let grid = v0.grid();
    if grid.dim() != 1 {
        return Err(Error::config("Cole–Hopf oracle is one-dimensional"));
    }
    if !(nu > 0.0) {
        return Err(Error::config(format!("Cole–Hopf needs ν > 0, got {nu}")));
    }
    if t < 0.0 {
        return Err(Error::domain(format!("negative time {t}")));
    }
    let w = Wavenumbers::new(&grid);
    let vals = v0.slices()[0];
    let mut spec = fft::forward_real(&grid, vals);
    let c = spec[0].re;
    spec[0] = Complex64::new(0.0, 0.0);

    // zero-mean antiderivative
    let phi_hat: Vec<Complex64> = spec
        .iter()
        .zip(&w.deriv)
        .map(|(v, k)| {
            if k[0] == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                v / Complex64::new(0.0, k[0])
            }
        })
        .collect();
    let potential = fft::inverse_real(&grid, &phi_hat);
    let exps: Vec<f64> = potential.iter().map(|p| -p / (2.0 * nu)).collect();
    let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bottom = exps.iter().cloned().fold(f64::INFINITY, f64::min);
    if top - bottom > MAX_EXPONENT {
        return Err(Error::numerical(format!(
            "Cole–Hopf exponent range {:.1} underflows at ν = {nu}; use a larger ν or smaller data",
            top - bottom
        )));
    }
    let heat0: Vec<f64> = exps.iter().map(|e| (e - top).exp()).collect();

    let mut h = fft::forward_real(&grid, &heat0);
    for ((v, k2), k) in h.iter_mut().zip(&w.k2).zip(&w.deriv) {
        // heat step, then translation m ↦ m − c t
        let theta = -k[0] * c * t;
        *v *= (-nu * k2 * t).exp() * Complex64::new(theta.cos(), theta.sin());
    }
    let heat_t = fft::inverse_real(&grid, &h);
    let dh: Vec<Complex64> = h
        .iter()
        .zip(&w.deriv)
        .map(|(v, k)| v * Complex64::new(0.0, k[0]))
        .collect();
    let dheat = fft::inverse_real(&grid, &dh);
    let out: Vec<f64> = heat_t
        .iter()
        .zip(&dheat)
        .map(|(p, dp)| c - 2.0 * nu * dp / p)
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("Cole–Hopf produced non-finite values"));
    }
    Ok(<VectorField as Field>::assemble(grid, vec![out]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusGrid;

    #[test]
    fn trivial_data() {
        let g = TorusGrid::line(64).unwrap();
        let z = cole_hopf_burgers(&VectorField::zeros(g), 0.05, 0.3).unwrap();
        assert!(z.max_component_abs() < 1e-15);
        let c = cole_hopf_burgers(&VectorField::constant(g, &[0.7]), 0.05, 0.3).unwrap();
        assert!(c.sub(&VectorField::constant(g, &[0.7])).unwrap().max_component_abs() < 1e-13);
    }

    #[test]
    fn tiny_viscosity_is_reported() {
        let g = TorusGrid::line(64).unwrap();
        let v = VectorField::from_fn(g, |p| [(2.0 * std::f64::consts::PI * p[0]).sin(), 0.0]);
        assert!(matches!(cole_hopf_burgers(&v, 1e-5, 0.1), Err(Error::Numerical(_))));
    }
}
