use super::Wavenumbers;
use crate::error::{Error, Result};
use crate::torus::{fft, Field};

/// Exact heat semigroup `exp(tν∇²)` on a band-limited field.
pub fn heat_solve<F: Field>(x: &F, nu: f64, t: f64) -> Result<F> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::domain(format!("heat_solve needs t >= 0, got {t}")));
    }
    let grid = x.grid();
    let w = Wavenumbers::new(&grid);
    let comps = x
        .slices()
        .iter()
        .map(|s| {
            let mut c = fft::forward_real(&grid, s);
            for (v, k2) in c.iter_mut().zip(&w.k2) {
                *v *= (-nu * k2 * t).exp();
            }
            fft::inverse_real(&grid, &c)
        })
        .collect();
    Ok(F::assemble(grid, comps))
}
