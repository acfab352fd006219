use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fft;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

/// Spectral-accuracy tolerance (max norm) quoted by the invariant tests.
pub const EPS_SPEC: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Real sample per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

/// Complex Fourier coefficients of a real field, indexed like the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

/// `dim` scalar components on a shared grid, with an optional divergence-free assertion.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    comps: Vec<ScalarField>,
    divfree: bool,
}

/// Spectra of the components of a vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSpectrum {
    grid: TorusGrid,
    comps: Vec<Vec<Complex64>>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!(
                "expected {} samples for grid {grid}, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("non-finite sample at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every grid point; coordinates are `[x, y]` (`y = 0` in 1D).
    pub fn from_fn(grid: TorusGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: fft::forward_real(&self.grid, &self.values),
        }
    }

    /// Applies a Fourier multiplier `k ↦ m(k)`.
    pub fn apply_multiplier(&self, m: impl Fn([i64; 2]) -> Complex64) -> Self {
        self.spectrum().map_modes(|k, c| c * m(k)).to_real()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Root-mean-square over the unit-volume torus.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Band-limited (trigonometric) interpolant evaluated at an arbitrary point.
    pub fn eval_at(&self, x: &[f64]) -> f64 {
        self.spectrum().eval_at(x)
    }
}

impl SpectralField {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::config("coefficient count does not match grid"));
        }
        Ok(Self { grid, coeffs })
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of an integer wavevector (`None` when not representable).
    pub fn coeff(&self, k: [i64; 2]) -> Option<Complex64> {
        let n = self.grid.n() as i64;
        let idx_of = |kk: i64| -> Option<usize> {
            if kk >= n / 2 || kk < -n / 2 {
                None
            } else {
                Some(kk.rem_euclid(n) as usize)
            }
        };
        let i = idx_of(k[0])?;
        if self.grid.dim() == 1 {
            if k[1] != 0 {
                return None;
            }
            return Some(self.coeffs[i]);
        }
        let j = idx_of(k[1])?;
        Some(self.coeffs[i * self.grid.n() + j])
    }

    pub fn to_real(&self) -> ScalarField {
        ScalarField::from_raw(self.grid, fft::inverse_real(&self.grid, &self.coeffs))
    }

    pub fn map_modes(mut self, f: impl Fn([i64; 2], Complex64) -> Complex64) -> Self {
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            *c = f(self.grid.wavevector(idx), *c);
        }
        self
    }

    /// Zeroes every mode outside the 2/3 truncation box.
    pub fn dealias(mut self) -> Self {
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if !self.grid.retained(idx) {
                *c = ZERO;
            }
        }
        self
    }

    /// `Σ |c_k|²`, which equals the grid mean of `f²` (Parseval).
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `Re Σ c_k e^{2πi k·x}`; self-conjugate modes reduce to their cosine part.
    pub fn eval_at(&self, x: &[f64]) -> f64 {
        let x0 = x[0];
        let x1 = if self.grid.dim() == 2 { x[1] } else { 0.0 };
        let mut acc = 0.0;
        for (idx, c) in self.coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let k = self.grid.wavevector(idx);
            let theta = 2.0 * PI * (k[0] as f64 * x0 + k[1] as f64 * x1);
            acc += c.re * theta.cos() - c.im * theta.sin();
        }
        acc
    }
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> Result<Self> {
        let grid = comps
            .first()
            .map(|c| c.grid())
            .ok_or_else(|| Error::config("vector field needs at least one component"))?;
        if comps.len() != grid.dim() {
            return Err(Error::config(format!(
                "{}-dimensional grid needs {} components, got {}",
                grid.dim(),
                grid.dim(),
                comps.len()
            )));
        }
        for c in &comps {
            grid.ensure_same(&c.grid())?;
        }
        Ok(Self {
            grid,
            comps,
            divfree: false,
        })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            comps: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
            divfree: true,
        }
    }

    pub fn constant(grid: TorusGrid, c: &[f64]) -> Self {
        Self {
            grid,
            comps: (0..grid.dim())
                .map(|a| ScalarField::constant(grid, c[a]))
                .collect(),
            divfree: true,
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let samples: Vec<[f64; 2]> = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        let comps = (0..grid.dim())
            .map(|a| ScalarField::from_raw(grid, samples.iter().map(|s| s[a]).collect()))
            .collect();
        Self {
            grid,
            comps,
            divfree: false,
        }
    }

    /// Velocity `(∂_y ψ, −∂_x ψ)` of a 2D stream function; divergence-free by construction.
    pub fn from_stream_function(psi: &ScalarField) -> Result<Self> {
        let grid = psi.grid();
        if grid.dim() != 2 {
            return Err(Error::config("stream functions are only defined in 2D"));
        }
        let s = psi.spectrum();
        let ux = s.clone().map_modes(|k, c| c * Complex64::new(0.0, 2.0 * PI * k[1] as f64));
        let uy = s.map_modes(|k, c| c * Complex64::new(0.0, -2.0 * PI * k[0] as f64));
        Ok(Self {
            grid,
            comps: vec![ux.to_real(), uy.to_real()],
            divfree: true,
        })
    }

    pub(crate) fn from_parts(grid: TorusGrid, comps: Vec<ScalarField>, divfree: bool) -> Self {
        Self {
            grid,
            comps,
            divfree,
        }
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    #[inline]
    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.comps[axis]
    }

    #[inline]
    pub fn is_divfree(&self) -> bool {
        self.divfree
    }

    /// Sets the divergence-free flag after checking `max|div| ≤ EPS_SPEC · max(1, max|X|)`.
    pub fn assert_divfree(mut self) -> Result<Self> {
        let div = super::ops::divergence(&self).max_abs();
        let scale = self.max_abs().max(1.0);
        if div > EPS_SPEC * scale {
            return Err(Error::precondition(format!(
                "field is not divergence-free: max|div| = {div:e}"
            )));
        }
        self.divfree = true;
        Ok(self)
    }

    pub(crate) fn with_flag(mut self, divfree: bool) -> Self {
        self.divfree = divfree;
        self
    }

    pub fn spectrum(&self) -> VectorSpectrum {
        VectorSpectrum {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .map(|c| fft::forward_real(&self.grid, c.values()))
                .collect(),
        }
    }

    pub fn apply_multiplier(&self, m: impl Fn([i64; 2]) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            comps: self.comps.iter().map(|c| c.apply_multiplier(&m)).collect(),
            divfree: self.divfree,
        }
    }

    /// Pointwise Euclidean-norm maximum.
    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                self.comps
                    .iter()
                    .map(|c| c.values()[i] * c.values()[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Largest absolute component value.
    pub fn max_component_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// `sqrt(mean_m |X(m)|²)`.
    pub fn l2_norm(&self) -> f64 {
        let n = self.grid.len() as f64;
        (self
            .comps
            .iter()
            .map(|c| c.values().iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / n)
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    pub fn zip_with(&self, other: &VectorField, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.zip_with(b, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: self.grid,
            comps,
            divfree: self.divfree && other.divfree,
        })
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            comps: self.comps.iter().map(|c| c.scale(s)).collect(),
            divfree: self.divfree,
        }
    }

    /// Band-limited interpolant of every component at `x`.
    pub fn eval_at(&self, x: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.eval_at(x)).collect()
    }
}

impl VectorSpectrum {
    pub fn new(grid: TorusGrid, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        if comps.len() != grid.dim() || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::config("vector spectrum shape does not match grid"));
        }
        Ok(Self { grid, comps })
    }

    pub fn into_comps(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            comps: vec![vec![ZERO; grid.len()]; grid.dim()],
        }
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn comps(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    #[inline]
    pub fn comps_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.comps
    }

    pub fn to_field(&self) -> VectorField {
        VectorField {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .map(|c| ScalarField::from_raw(self.grid, fft::inverse_real(&self.grid, c)))
                .collect(),
            divfree: false,
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &VectorSpectrum) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * s;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            for x in c.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    pub fn map_modes(&mut self, f: impl Fn([i64; 2], Complex64) -> Complex64) {
        let grid = self.grid;
        for c in self.comps.iter_mut() {
            for (idx, x) in c.iter_mut().enumerate() {
                *x = f(grid.wavevector(idx), *x);
            }
        }
    }

    pub fn dealias(&mut self) {
        let grid = self.grid;
        for c in self.comps.iter_mut() {
            for (idx, x) in c.iter_mut().enumerate() {
                if !grid.retained(idx) {
                    *x = ZERO;
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.iter().all(|x| x.re.is_finite() && x.im.is_finite()))
    }

    /// `Σ_k |X̂(k)|²` summed over components (mean of `|X|²` on the grid).
    pub fn energy(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.iter().map(|x| x.norm_sqr()).sum::<f64>())
            .sum()
    }
}
