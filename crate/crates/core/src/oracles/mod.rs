//! Independent viscous reference solutions: the heat semigroup, Cole–Hopf
//! viscous Burgers in 1D and a pseudospectral Navier–Stokes solver in 2D.
//!
//! Only the raw FFT is shared with the rest of the crate; wavenumbers,
//! derivatives, dealiasing and time stepping are implemented here afresh.

mod cole_hopf;
mod heat;
mod ns;

pub use cole_hopf::cole_hopf_burgers;
pub use heat::heat_solve;
pub use ns::{spectral_ns_2d, NsRun};

use std::f64::consts::PI;

use crate::torus::TorusGrid;

/// Signed wavenumbers of one axis, `[0, 1, …, n/2 − 1, −n/2, …, −1]`.
fn axis_modes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| if j < n / 2 { j as f64 } else { j as f64 - n as f64 })
        .collect()
}

/// Per-index `(2πk_0, 2πk_1)` and `|2πk|²`; the derivative wavenumber is
/// zero on Nyquist indices.
struct Wavenumbers {
    deriv: Vec<[f64; 2]>,
    k2: Vec<f64>,
    keep: Vec<bool>,
}

impl Wavenumbers {
    fn new(grid: &TorusGrid) -> Self {
        let n = grid.n();
        let m = axis_modes(n);
        let cutoff = (n / 3) as f64;
        let nyq = -(n as f64) / 2.0;
        let d = |k: f64| if k == nyq { 0.0 } else { 2.0 * PI * k };
        let mut deriv = Vec::with_capacity(grid.len());
        let mut k2 = Vec::with_capacity(grid.len());
        let mut keep = Vec::with_capacity(grid.len());
        if grid.dim() == 1 {
            for &k in &m {
                deriv.push([d(k), 0.0]);
                k2.push((2.0 * PI * k).powi(2));
                keep.push(k.abs() <= cutoff);
            }
        } else {
            for &a in &m {
                for &b in &m {
                    deriv.push([d(a), d(b)]);
                    k2.push(4.0 * PI * PI * (a * a + b * b));
                    keep.push(a.abs() <= cutoff && b.abs() <= cutoff);
                }
            }
        }
        Self { deriv, k2, keep }
    }
}
