use serde::Serialize;

use super::mc::{mc_moments, shifted_samples, spectra, McField};
use crate::error::{Error, Result};
use crate::stochastic::WienerEnsemble;
use crate::torus::ops::{gaussian_multiplier, shift_by, Field};
use crate::torus::{ScalarField, VectorField};

/// How `E[X(m − σ w(t))]` is evaluated.
#[derive(Clone, Copy, Debug)]
pub enum Smoothing<'a> {
    /// Exact Gaussian multiplier `exp(−(σ²t/2)|2πk|²)`.
    HeatKernel,
    /// Mean over the ensemble's paths at time `t`.
    MonteCarlo(&'a WienerEnsemble),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    HeatKernel,
    MonteCarlo { paths: usize },
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::domain(format!("smoothing time must be >= 0, got {t}")));
    }
    Ok(())
}

fn check_sigma(ensemble: &WienerEnsemble, sigma: f64) -> Result<()> {
    if (ensemble.sigma() - sigma).abs() > 1e-15 * sigma.abs().max(1.0) {
        return Err(Error::config(format!(
            "ensemble carries σ = {}, requested σ = {sigma}",
            ensemble.sigma()
        )));
    }
    Ok(())
}

/// Exact expectation of `X(m − σ w(t))` for band-limited `X`.
pub fn heat_smooth<F: Field>(x: &F, sigma: f64, t: f64) -> Result<F> {
    check_time(t)?;
    if sigma * sigma * t == 0.0 {
        return Ok(x.clone());
    }
    let m = gaussian_multiplier(sigma * sigma * t);
    Ok(x.map_components(|c| c.apply_multiplier(&m)))
}

/// Ensemble mean of `X(m − σ w_ω(t))`, `σ` taken from the ensemble.
pub fn mc_smooth<F: Field>(x: &F, ensemble: &WienerEnsemble, t: f64) -> Result<McField<F>> {
    check_time(t)?;
    let j = ensemble.step_index(t)?;
    let grid = x.grid();
    let spec = spectra(x);
    let raw: Vec<Vec<f64>> = x.slices().iter().map(|c| c.to_vec()).collect();
    let moments = mc_moments(ensemble.paths(), spec.len(), grid.len(), |p| {
        let s = ensemble.shift(p, j);
        if s.iter().all(|v| *v == 0.0) {
            return raw.clone();
        }
        shifted_samples(&grid, &spec, &[-s[0], -s[1]])
    });
    Ok(moments.into_field(grid))
}

/// `E[X(m − σ w(t))]` by either method. Divergence-free input stays flagged.
pub fn smooth_by_expectation(x: &VectorField, sigma: f64, t: f64, method: Smoothing<'_>) -> Result<VectorField> {
    let out = match method {
        Smoothing::HeatKernel => heat_smooth(x, sigma, t)?,
        Smoothing::MonteCarlo(e) => {
            check_sigma(e, sigma)?;
            mc_smooth(x, e, t)?.mean
        }
    };
    Ok(if x.is_divfree() {
        out.with_flag(true)
    } else {
        out
    })
}

/// Scalar counterpart of [`smooth_by_expectation`].
pub fn smooth_scalar(x: &ScalarField, sigma: f64, t: f64, method: Smoothing<'_>) -> Result<ScalarField> {
    match method {
        Smoothing::HeatKernel => heat_smooth(x, sigma, t),
        Smoothing::MonteCarlo(e) => {
            check_sigma(e, sigma)?;
            Ok(mc_smooth(x, e, t)?.mean)
        }
    }
}

/// `Ŭ_ω = X(m − σ w_ω(t)) − mean`, `σ` taken from the ensemble.
pub fn fluctuation_field(
    x: &VectorField,
    ensemble: &WienerEnsemble,
    path: usize,
    t: f64,
    mean: &VectorField,
) -> Result<VectorField> {
    let j = ensemble.step_index(t)?;
    let s = ensemble.shift(path, j);
    let out = shift_by(x, &[-s[0], -s[1]]).sub(mean)?;
    Ok(if x.is_divfree() && mean.is_divfree() {
        out.with_flag(true)
    } else {
        out
    })
}

/// Expectation fields `t ↦ E[X(t, m − σ w(t))]` on a time grid.
#[derive(Clone, Debug)]
pub struct MeanFieldSeries {
    pub times: Vec<f64>,
    pub fields: Vec<VectorField>,
    pub construction: Construction,
    pub sigma: f64,
}

impl MeanFieldSeries {
    /// Smooths each `(t, X(t))` at variance `σ²t`.
    pub fn build(times: &[f64], source: &[VectorField], sigma: f64, method: Smoothing<'_>) -> Result<Self> {
        if times.len() != source.len() {
            return Err(Error::config("times and fields differ in length"));
        }
        let fields = times
            .iter()
            .zip(source)
            .map(|(&t, x)| smooth_by_expectation(x, sigma, t, method))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: times.to_vec(),
            fields,
            construction: match method {
                Smoothing::HeatKernel => Construction::HeatKernel,
                Smoothing::MonteCarlo(e) => Construction::MonteCarlo { paths: e.paths() },
            },
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
