//! Normalized complex FFTs over a [`TorusGrid`].
//!
//! Forward coefficients are `c_k = N^{-dim} Σ_m f(m) e^{-2πi k·m}` so a
//! unit sine has coefficients of magnitude 1/2 at `k = ±1`.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::grid::TorusGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn run(grid: &TorusGrid, data: &mut [Complex64], inverse: bool) {
    debug_assert_eq!(data.len(), grid.len());
    let n = grid.n();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // rows (axis 1 in 2D, the only axis in 1D)
    fft.process_with_scratch(data, &mut scratch);
    if grid.dim() == 2 {
        transpose_square(data, n);
        fft.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
    }
}

/// In-place forward transform with `1/N^dim` normalization.
pub fn forward_in_place(grid: &TorusGrid, data: &mut [Complex64]) {
    run(grid, data, false);
    let scale = 1.0 / grid.len() as f64;
    for c in data.iter_mut() {
        *c *= scale;
    }
}

/// In-place inverse transform (no normalization; inverse of [`forward_in_place`]).
pub fn inverse_in_place(grid: &TorusGrid, data: &mut [Complex64]) {
    run(grid, data, true);
}

pub fn forward_real(grid: &TorusGrid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_in_place(grid, &mut data);
    data
}

/// Inverse transform keeping the real part. Self-conjugate (Nyquist) modes
/// that picked up a phase are thereby reduced to their symmetric real
/// representative.
pub fn inverse_real(grid: &TorusGrid, coeffs: &[Complex64]) -> Vec<f64> {
    let mut data = coeffs.to_vec();
    inverse_in_place(grid, &mut data);
    data.into_iter().map(|c| c.re).collect()
}

/// Two real fields from their spectra with one complex transform. Both
/// spectra must vanish on Nyquist indices.
pub fn inverse_real_pair(grid: &TorusGrid, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let i = Complex64::new(0.0, 1.0);
    let mut data: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
    inverse_in_place(grid, &mut data);
    data.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Spectra of two real fields with one complex transform.
pub fn forward_real_pair(grid: &TorusGrid, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut data: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    forward_in_place(grid, &mut data);
    let n = grid.n();
    let neg: Vec<usize> = (0..n).map(|j| (n - j) % n).collect();
    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    let mut fa = vec![Complex64::new(0.0, 0.0); data.len()];
    let mut fb = vec![Complex64::new(0.0, 0.0); data.len()];
    let rows = if grid.dim() == 1 { 1 } else { n };
    for a in 0..rows {
        for b in 0..n {
            let idx = a * n + b;
            let mirror = if grid.dim() == 1 { neg[b] } else { neg[a] * n + neg[b] };
            let (f, g) = (data[idx], data[mirror].conj());
            fa[idx] = (f + g) * half;
            fb[idx] = (f - g) * minus_half_i;
        }
    }
    (fa, fb)
}
