//! Differential operators, the Leray projector, translations and quadratic
//! advection on the flat torus, all realized as Fourier multipliers.
//!
//! Derivatives use `i·2πk` per axis. On a Nyquist index the odd multiplier
//! is set to zero, which keeps outputs real and makes `divergence`,
//! `gradient` and [`leray_project`] mutually consistent on every mode.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fft;
use super::field::{ScalarField, SpectralField, VectorField, VectorSpectrum};
use super::grid::TorusGrid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Common surface of scalar and vector fields for component-wise operators.
pub trait Field: Clone {
    fn grid(&self) -> TorusGrid;
    fn slices(&self) -> Vec<&[f64]>;
    fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self;
    /// Builds a field from raw component samples (vector fields carry no divergence-free flag).
    fn assemble(grid: TorusGrid, comps: Vec<Vec<f64>>) -> Self;
}

impl Field for ScalarField {
    fn grid(&self) -> TorusGrid {
        ScalarField::grid(self)
    }

    fn slices(&self) -> Vec<&[f64]> {
        vec![self.values()]
    }

    fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        f(self)
    }

    fn assemble(grid: TorusGrid, mut comps: Vec<Vec<f64>>) -> Self {
        assert_eq!(comps.len(), 1, "scalar field has one component");
        ScalarField::from_raw(grid, comps.remove(0))
    }
}

impl Field for VectorField {
    fn grid(&self) -> TorusGrid {
        VectorField::grid(self)
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.components().iter().map(|c| c.values()).collect()
    }

    fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        VectorField::from_parts(
            self.grid(),
            self.components().iter().map(f).collect(),
            self.is_divfree(),
        )
    }

    fn assemble(grid: TorusGrid, comps: Vec<Vec<f64>>) -> Self {
        assert_eq!(comps.len(), grid.dim(), "one component per axis");
        VectorField::from_parts(
            grid,
            comps.into_iter().map(|c| ScalarField::from_raw(grid, c)).collect(),
            false,
        )
    }
}

/// Wavevector used for odd-order derivatives: Nyquist axes are zeroed.
#[inline]
pub fn derivative_wavevector(grid: &TorusGrid, idx: usize) -> [f64; 2] {
    let k = grid.wavevector(idx);
    let [i, j] = grid.axis_indices(idx);
    let half = grid.n() / 2;
    let k0 = if i == half { 0.0 } else { k[0] as f64 };
    let k1 = if grid.dim() == 2 && j != half { k[1] as f64 } else { 0.0 };
    [k0, k1]
}

/// `∂/∂x_axis` of a spectrum.
pub fn partial_spectrum(grid: &TorusGrid, coeffs: &[Complex64], axis: usize) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let k = derivative_wavevector(grid, idx)[axis];
            c * Complex64::new(0.0, 2.0 * PI * k)
        })
        .collect()
}

fn laplacian_symbol(k: [i64; 2]) -> f64 {
    let (a, b) = (k[0] as f64, k[1] as f64);
    -4.0 * PI * PI * (a * a + b * b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffKind {
    Gradient,
    Divergence,
    Laplacian,
}

pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let s = f.spectrum();
    SpectralField::new(g, partial_spectrum(&g, s.coeffs(), axis))
        .expect("shape preserved")
        .to_real()
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid();
    let s = f.spectrum();
    let comps = (0..g.dim())
        .map(|a| {
            ScalarField::from_raw(g, fft::inverse_real(&g, &partial_spectrum(&g, s.coeffs(), a)))
        })
        .collect();
    VectorField::from_parts(g, comps, false)
}

pub fn divergence(x: &VectorField) -> ScalarField {
    let g = x.grid();
    let mut acc = vec![ZERO; g.len()];
    for (a, c) in x.components().iter().enumerate() {
        let s = fft::forward_real(&g, c.values());
        for (o, d) in acc.iter_mut().zip(partial_spectrum(&g, &s, a)) {
            *o += d;
        }
    }
    ScalarField::from_raw(g, fft::inverse_real(&g, &acc))
}

pub fn laplacian<F: Field>(f: &F) -> F {
    f.map_components(|c| c.apply_multiplier(|k| Complex64::new(laplacian_symbol(k), 0.0)))
}

/// 2D vorticity `∂_x u_y − ∂_y u_x`.
pub fn curl(u: &VectorField) -> Result<ScalarField> {
    let g = u.grid();
    if g.dim() != 2 {
        return Err(Error::config("curl is defined for 2D fields only"));
    }
    let ux = u.component(0).spectrum();
    let uy = u.component(1).spectrum();
    let a = partial_spectrum(&g, uy.coeffs(), 0);
    let b = partial_spectrum(&g, ux.coeffs(), 1);
    let w: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
    Ok(ScalarField::from_raw(g, fft::inverse_real(&g, &w)))
}

/// Output of [`leray_project`]: `Y = projected + grad pressure`.
#[derive(Clone, Debug)]
pub struct LerayDecomposition {
    pub projected: VectorField,
    pub pressure: ScalarField,
}

/// Projects a spectrum onto divergence-free fields in place and returns the
/// zero-mean pressure spectrum `p̂` with `Ŷ = X̂ + i2πk p̂`.
pub fn leray_spectral(y: &mut VectorSpectrum) -> Vec<Complex64> {
    let grid = y.grid();
    let dim = grid.dim();
    if dim == 2 {
        return leray_spectral_2d(&grid, y.comps_mut());
    }
    let mut p = vec![ZERO; grid.len()];
    for (idx, p_out) in p.iter_mut().enumerate() {
        let k = derivative_wavevector(&grid, idx);
        let k2: f64 = k[..dim].iter().map(|v| v * v).sum();
        if k2 == 0.0 {
            continue;
        }
        let mut kdoty = ZERO;
        for (a, ka) in k.iter().enumerate().take(dim) {
            kdoty += y.comps()[a][idx] * *ka;
        }
        let comps = y.comps_mut();
        for (a, ka) in k.iter().enumerate().take(dim) {
            comps[a][idx] -= kdoty * (*ka / k2);
        }
        *p_out = kdoty * Complex64::new(0.0, -1.0 / (2.0 * PI * k2));
    }
    p
}

fn leray_spectral_2d(grid: &TorusGrid, comps: &mut [Vec<Complex64>]) -> Vec<Complex64> {
    let n = grid.n();
    let k: Vec<f64> = (0..n)
        .map(|j| if j == n / 2 { 0.0 } else { grid.signed_mode(j) as f64 })
        .collect();
    let mut p = vec![ZERO; grid.len()];
    let (c0, c1) = comps.split_at_mut(1);
    let (y0, y1) = (&mut c0[0], &mut c1[0]);
    for a in 0..n {
        for b in 0..n {
            let idx = a * n + b;
            let k2 = k[a] * k[a] + k[b] * k[b];
            if k2 == 0.0 {
                continue;
            }
            let kdoty = y0[idx] * k[a] + y1[idx] * k[b];
            y0[idx] -= kdoty * (k[a] / k2);
            y1[idx] -= kdoty * (k[b] / k2);
            p[idx] = kdoty * Complex64::new(0.0, -1.0 / (2.0 * PI * k2));
        }
    }
    p
}

/// Helmholtz–Hodge split `Y = X + grad p`, `div X = 0`, `mean p = 0`. The mean mode passes through.
pub fn leray_project(y: &VectorField) -> LerayDecomposition {
    let g = y.grid();
    let mut s = y.spectrum();
    let p = leray_spectral(&mut s);
    LerayDecomposition {
        projected: s.to_field().with_flag(true),
        pressure: ScalarField::from_raw(g, fft::inverse_real(&g, &p)),
    }
}

/// Per-axis translation factors `e^{2πi k x_a}` (cosine on the Nyquist index).
fn axis_phases(grid: &TorusGrid, x: f64) -> Vec<Complex64> {
    let n = grid.n();
    (0..n)
        .map(|j| {
            let theta = 2.0 * PI * grid.signed_mode(j) as f64 * x;
            if j == n / 2 {
                Complex64::new(theta.cos(), 0.0)
            } else {
                Complex64::new(theta.cos(), theta.sin())
            }
        })
        .collect()
}

/// Multiplier table realizing `m ↦ f(m + x)` on band-limited data.
pub fn shift_table(grid: &TorusGrid, x: &[f64]) -> Vec<Complex64> {
    let n = grid.n();
    let p0 = axis_phases(grid, x[0]);
    if grid.dim() == 1 {
        return p0;
    }
    let p1 = axis_phases(grid, x[1]);
    let mut out = Vec::with_capacity(grid.len());
    for a in &p0 {
        for b in &p1 {
            out.push(a * b);
        }
    }
    debug_assert_eq!(out.len(), n * n);
    out
}

/// Translates a spectrum in place: afterwards it represents `m ↦ f(m + x)`.
pub fn shift_spectral(grid: &TorusGrid, coeffs: &mut [Complex64], x: &[f64]) {
    let t = shift_table(grid, x);
    for (c, p) in coeffs.iter_mut().zip(&t) {
        *c *= p;
    }
}

/// `m ↦ f(m + x)` modulo the integer lattice, exact on the band-limited representative.
pub fn shift_by<F: Field>(f: &F, x: &[f64]) -> F {
    let grid = f.grid();
    if x[..grid.dim()].iter().all(|v| v.fract() == 0.0) {
        return f.clone();
    }
    let table = shift_table(&grid, x);
    f.map_components(|c| {
        let mut s = fft::forward_real(&grid, c.values());
        for (v, p) in s.iter_mut().zip(&table) {
            *v *= p;
        }
        ScalarField::from_raw(grid, fft::inverse_real(&grid, &s))
    })
}

fn dealiased(grid: &TorusGrid, coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| if grid.retained(i) { *c } else { ZERO })
        .collect()
}

/// Pseudospectral `(u·∇)z` for spectral inputs, 2/3-dealiased on inputs and output.
/// `z` may have any number of components.
pub fn advect_spectral(u: &VectorSpectrum, z: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let grid = u.grid();
    if grid.dim() == 2 {
        return advect_spectral_2d(&grid, u.comps(), z);
    }
    let u_phys = fft::inverse_real(&grid, &dealiased(&grid, &u.comps()[0]));
    z.iter()
        .map(|zc| {
            let zc = dealiased(&grid, zc);
            let d = fft::inverse_real(&grid, &partial_spectrum(&grid, &zc, 0));
            let prod: Vec<f64> = u_phys.iter().zip(&d).map(|(a, b)| a * b).collect();
            dealiased(&grid, &fft::forward_real(&grid, &prod))
        })
        .collect()
}

/// Per-axis `2πk` (zero on Nyquist) and the 2/3 mask.
fn axis_tables(grid: &TorusGrid) -> (Vec<f64>, Vec<bool>) {
    let n = grid.n();
    let c = grid.dealias_cutoff();
    let deriv = (0..n)
        .map(|j| if j == n / 2 { 0.0 } else { 2.0 * PI * grid.signed_mode(j) as f64 })
        .collect();
    let keep = (0..n).map(|j| grid.signed_mode(j).abs() <= c).collect();
    (deriv, keep)
}

fn advect_spectral_2d(grid: &TorusGrid, u: &[Vec<Complex64>], z: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = grid.n();
    let (kd, keep) = axis_tables(grid);
    let i1 = Complex64::new(0.0, 1.0);
    let mut packed = vec![ZERO; grid.len()];
    for a in 0..n {
        for b in 0..n {
            let idx = a * n + b;
            if keep[a] && keep[b] {
                packed[idx] = u[0][idx] + i1 * u[1][idx];
            }
        }
    }
    fft::inverse_in_place(grid, &mut packed);
    let products: Vec<Vec<f64>> = z
        .iter()
        .map(|zc| {
            // ∂_x z + i ∂_y z, both real fields
            let mut d = vec![ZERO; grid.len()];
            for a in 0..n {
                for b in 0..n {
                    let idx = a * n + b;
                    if keep[a] && keep[b] {
                        let v = zc[idx] * i1;
                        d[idx] = v * kd[a] + i1 * v * kd[b];
                    }
                }
            }
            fft::inverse_in_place(grid, &mut d);
            packed.iter().zip(&d).map(|(u, g)| u.re * g.re + u.im * g.im).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(products.len());
    for pair in products.chunks(2) {
        if let [p, q] = pair {
            let (a, b) = fft::forward_real_pair(grid, p, q);
            out.push(a);
            out.push(b);
        } else {
            out.push(fft::forward_real(grid, &pair[0]));
        }
    }
    for c in out.iter_mut() {
        for a in 0..n {
            for b in 0..n {
                if !(keep[a] && keep[b]) {
                    c[a * n + b] = ZERO;
                }
            }
        }
    }
    out
}

/// `(u·∇)Z` for a vector field `Z`.
pub fn advect(u: &VectorField, z: &VectorField) -> Result<VectorField> {
    u.grid().ensure_same(&z.grid())?;
    let grid = u.grid();
    let zs = z.spectrum();
    let out = advect_spectral(&u.spectrum(), zs.comps());
    Ok(VectorSpectrum::new(grid, out)?.to_field())
}

/// `(u·∇)Z` for a scalar field `Z`.
pub fn advect_scalar(u: &VectorField, z: &ScalarField) -> Result<ScalarField> {
    u.grid().ensure_same(&z.grid())?;
    let grid = u.grid();
    let zs = vec![z.spectrum().into_coeffs()];
    let out = advect_spectral(&u.spectrum(), &zs);
    Ok(ScalarField::from_raw(grid, fft::inverse_real(&grid, &out[0])))
}

/// `∫ ⟨X, Y⟩ dμ` on the unit-volume torus (grid mean of the pointwise inner product).
pub fn l2_inner<F: Field>(a: &F, b: &F) -> Result<f64> {
    a.grid().ensure_same(&b.grid())?;
    let n = a.grid().len() as f64;
    let s: f64 = a
        .slices()
        .iter()
        .zip(b.slices())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum();
    Ok(s / n)
}

/// Fourier multiplier of a centered Gaussian with per-axis variance `variance`:
/// `exp(−(variance/2)|2πk|²)`.
pub fn gaussian_multiplier(variance: f64) -> impl Fn([i64; 2]) -> Complex64 {
    move |k| {
        let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
        Complex64::new((-0.5 * variance * 4.0 * PI * PI * k2).exp(), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> TorusGrid {
        TorusGrid::line(n).unwrap()
    }

    fn square(n: usize) -> TorusGrid {
        TorusGrid::square(n).unwrap()
    }

    #[test]
    fn gradient_of_sine() {
        let g = line(64);
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
        let d = gradient(&f);
        let expect = ScalarField::from_fn(g, |p| 2.0 * PI * (2.0 * PI * p[0]).cos());
        assert!(d.component(0).sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_eigenfunction() {
        let g = line(64);
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
        let l = laplacian(&f);
        assert!(l.sub(&f.scale(-4.0 * PI * PI)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn divergence_of_constant_is_zero() {
        let g = square(16);
        let c = VectorField::constant(g, &[0.3, -1.2]);
        assert!(divergence(&c).max_abs() < 1e-14);
    }

    #[test]
    fn leray_removes_pure_gradient() {
        let g = square(64);
        let phi = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin());
        let y = gradient(&phi);
        let d = leray_project(&y);
        assert!(d.projected.max_component_abs() < 1e-10);
        assert!(d.pressure.sub(&phi).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn leray_keeps_curl_fields() {
        let g = square(64);
        let psi = ScalarField::from_fn(g, |p| {
            (2.0 * PI * p[0]).cos() * (4.0 * PI * p[1]).sin() + 0.3 * (6.0 * PI * p[1]).cos()
        });
        let y = VectorField::from_stream_function(&psi).unwrap();
        let d = leray_project(&y);
        assert!(d.projected.sub(&y).unwrap().max_component_abs() < 1e-10);
        assert!(d.pressure.max_abs() < 1e-10);
    }

    #[test]
    fn leray_cross_field_is_identity() {
        let g = square(64);
        let y = VectorField::from_fn(g, |p| [(2.0 * PI * p[1]).sin(), (2.0 * PI * p[0]).sin()]);
        assert!(divergence(&y).max_abs() < 1e-10);
        let d = leray_project(&y);
        assert!(d.projected.sub(&y).unwrap().max_component_abs() < 1e-10);
        assert!(d.pressure.max_abs() < 1e-10);
    }

    #[test]
    fn shift_quarter_period() {
        let g = line(64);
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
        let s = shift_by(&f, &[0.25]);
        let c = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).cos());
        assert!(s.sub(&c).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn shift_by_third_matches_direct_evaluation() {
        let g = line(64);
        let f = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
        let s = shift_by(&f, &[1.0 / 3.0]);
        let direct = ScalarField::from_fn(g, |p| (2.0 * PI * (p[0] + 1.0 / 3.0)).sin());
        assert!(s.sub(&direct).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn integer_shift_is_identity() {
        let g = square(32);
        let f = ScalarField::from_fn(g, |p| {
            (2.0 * PI * p[0]).sin() * (6.0 * PI * p[1]).cos() + (4.0 * PI * p[1]).sin()
        });
        let s = shift_by(&f, &[3.0, -2.0]);
        assert!(s.sub(&f).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn advect_constant_velocity() {
        let g = square(32);
        let c = [0.7, -0.4];
        let u = VectorField::constant(g, &c);
        let z = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * (4.0 * PI * p[1]).cos());
        let a = advect_scalar(&u, &z).unwrap();
        let gz = gradient(&z);
        let expect = gz
            .component(0)
            .scale(c[0])
            .add(&gz.component(1).scale(c[1]))
            .unwrap();
        assert!(a.sub(&expect).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn advect_sine_product_identity() {
        let g = line(64);
        let u = VectorField::from_fn(g, |p| [(2.0 * PI * p[0]).sin(), 0.0]);
        let a = advect(&u, &u).unwrap();
        let expect = ScalarField::from_fn(g, |p| PI * (4.0 * PI * p[0]).sin());
        assert!(a.component(0).sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn advect_output_is_dealiased() {
        let g = line(16);
        let u = VectorField::from_fn(g, |p| [(2.0 * PI * 5.0 * p[0]).sin(), 0.0]);
        let a = advect(&u, &u).unwrap();
        let s = a.component(0).spectrum();
        for (i, c) in s.coeffs().iter().enumerate() {
            if !g.retained(i) {
                assert!(c.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn inner_products() {
        let g = line(64);
        let s = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
        let c = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).cos());
        assert!((l2_inner(&s, &s).unwrap() - 0.5).abs() < 1e-14);
        assert!(l2_inner(&s, &c).unwrap().abs() < 1e-14);
        let other = ScalarField::zeros(line(32));
        assert!(matches!(l2_inner(&s, &other), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn curl_of_stream_velocity_is_minus_laplacian() {
        let g = square(32);
        let psi = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin());
        let u = VectorField::from_stream_function(&psi).unwrap();
        let w = curl(&u).unwrap();
        assert!(w.sub(&psi.scale(8.0 * PI * PI)).unwrap().max_abs() < 1e-10);
    }
}
