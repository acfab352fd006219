//! Residual evaluators for the transport, Burgers, Reynolds and Navier–Stokes
//! relations. Time derivatives are second-order central differences; the
//! differencing error is estimated by comparing steps `h` and `2h`.

use super::mc::{mc_moments, shifted_spectra, spectra};
use super::report::{Orientation, ResidualRecord, ResidualReport};
use super::smoothing::heat_smooth;
use crate::error::{Error, Result};
use crate::stochastic::WienerEnsemble;
use crate::torus::ops::{advect_spectral, Field};
use crate::torus::{
    advect, fft, laplacian, leray_project, ScalarField, VectorField, VectorSpectrum,
};

/// Uniform spacing of `times`, or a configuration error.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::config(format!(
            "residuals need at least 3 time samples, got {}",
            times.len()
        )));
    }
    let h = times[1] - times[0];
    if !(h > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::config("time samples must be uniformly spaced and increasing"));
    }
    Ok(h)
}

fn index_of(times: &[f64], t: f64, h: f64) -> Result<usize> {
    times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * h.max(1.0))
        .ok_or_else(|| Error::config(format!("time {t} is not a sample time")))
}

/// `(f[i+k] − f[i−k]) / (2kh)`.
fn central<F: Field>(series: &[F], i: usize, k: usize, h: f64) -> F {
    let (a, b) = (series[i + k].slices(), series[i - k].slices());
    let inv = 1.0 / (2.0 * k as f64 * h);
    F::assemble(
        series[i].grid(),
        a.iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * inv).collect())
            .collect(),
    )
}

/// Central difference at `i` and, when `i ± 2` exist, the Richardson error estimate `‖D_2h − D_h‖_∞ / 3`.
fn time_derivative(series: &[VectorField], i: usize, h: f64) -> Result<(VectorField, Option<f64>)> {
    let d = central(series, i, 1, h);
    let err = if i >= 2 && i + 2 < series.len() {
        Some(central(series, i, 2, h).sub(&d)?.max_component_abs() / 3.0)
    } else {
        None
    };
    Ok((d, err))
}

fn record(time: f64, r: &VectorField) -> ResidualRecord {
    ResidualRecord::new(time, r.l2_norm(), r.max_component_abs())
}

/// Itô transport identity for `S_t = E[· (m − σw(t))]` applied to a solved series:
/// `∂_t[S_t v(t)] − S_t ∂_t v(t) − (σ²/2)∇² S_t v(t)`, at interior samples.
/// `tendency[i]` is the exact `∂_t v(t_i)`.
pub fn ito_transport_check(
    times: &[f64],
    v: &[VectorField],
    tendency: &[VectorField],
    sigma: f64,
) -> Result<ResidualReport> {
    let h = uniform_step(times)?;
    if v.len() != times.len() || tendency.len() != times.len() {
        return Err(Error::config("series lengths differ"));
    }
    let nu = 0.5 * sigma * sigma;
    let smoothed = times
        .iter()
        .zip(v)
        .map(|(&t, x)| heat_smooth(x, sigma, t))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ResidualReport::new("ito-transport", Orientation::None, v[0].grid(), h);
    for i in 1..times.len() - 1 {
        let (d, fd) = time_derivative(&smoothed, i, h)?;
        let r = d
            .sub(&heat_smooth(&tendency[i], sigma, times[i])?)?
            .sub(&laplacian(&smoothed[i]).scale(nu))?;
        let mut rec = record(times[i], &r);
        rec.fd_error = fd;
        report.records.push(rec);
    }
    Ok(report)
}

/// Burgers residual of a series `V(τ)` on `τ ∈ [0, T]` with `T = τ_last`.
///
/// `Reversed` evaluates `∂_τV + (V·∇)V − ν∇²V` at `τ`. `Forward` evaluates the
/// equation literally in `t = T − τ`, `d/dt V(T − t) + (V·∇)V − ν∇²V`, and
/// records it at `t`.
pub fn burgers_residual(
    times: &[f64],
    series: &[VectorField],
    nu: f64,
    orientation: Orientation,
) -> Result<ResidualReport> {
    let h = uniform_step(times)?;
    if series.len() != times.len() {
        return Err(Error::config("series length differs from time samples"));
    }
    let sign = match orientation {
        Orientation::Reversed => 1.0,
        Orientation::Forward => -1.0,
        Orientation::None => return Err(Error::config("Burgers residual needs an orientation")),
    };
    let horizon = *times.last().unwrap();
    let mut report = ResidualReport::new("burgers", orientation, series[0].grid(), h);
    for i in 1..times.len() - 1 {
        let (d, fd) = time_derivative(series, i, h)?;
        let v = &series[i];
        let r = d
            .scale(sign)
            .add(&advect(v, v)?)?
            .sub(&laplacian(v).scale(nu))?;
        let time = match orientation {
            Orientation::Forward => horizon - times[i],
            _ => times[i],
        };
        let mut rec = record(time, &r);
        rec.fd_error = fd;
        report.records.push(rec);
    }
    if orientation == Orientation::Forward {
        report.records.reverse();
    }
    Ok(report)
}

/// Which form of the Reynolds relation to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReynoldsForm {
    /// `∂_tU + E[(u·∇)u](m − σw) − ν∇²U − grad p`.
    Raw,
    /// `∂_tU + (U·∇)U − ν∇²U − grad p + E[(Ŭ·∇)Ŭ]`.
    Standard,
}

/// Residual fields at one report time.
#[derive(Clone, Debug)]
pub struct ReynoldsSample {
    pub time: f64,
    pub residual: VectorField,
    pub se: VectorField,
    pub pressure: ScalarField,
    pub fd_error: Option<f64>,
}

/// Reynolds residual of `U = E[u(t, m − σw(t))]` (exact heat kernel) for an
/// Euler series `u` on uniform `times`; the expected advection and the
/// stress are Monte Carlo means over the ensemble (which sets `σ`). The
/// pressure is the one produced by Leray-projecting the expected advection.
pub fn reynolds_residual_fields(
    times: &[f64],
    u: &[VectorField],
    ensemble: &WienerEnsemble,
    report_times: &[f64],
    form: ReynoldsForm,
) -> Result<Vec<ReynoldsSample>> {
    let h = uniform_step(times)?;
    if u.len() != times.len() {
        return Err(Error::config("series length differs from time samples"));
    }
    let sigma = ensemble.sigma();
    let nu = 0.5 * sigma * sigma;
    let grid = u[0].grid();
    let dim = grid.dim();
    let mut out = Vec::new();
    for &t in report_times {
        let i = index_of(times, t, h)?;
        if i == 0 || i + 1 >= times.len() {
            return Err(Error::config(format!("report time {t} needs neighbours on both sides")));
        }
        let j = ensemble.step_index(t)?;
        let lo = i.saturating_sub(2);
        let hi = (i + 2).min(times.len() - 1);
        let local: Vec<VectorField> = (lo..=hi)
            .map(|k| heat_smooth(&u[k], sigma, times[k]))
            .collect::<Result<_>>()?;
        let (dudt, fd) = time_derivative(&local, i - lo, h)?;
        let big_u = &local[i - lo];

        let adv = advect(&u[i], &u[i])?;
        let split = leray_project(&adv);
        let b_spec = spectra(&split.projected);
        let p_spec = spectra(&split.pressure);
        let a_spec = spectra(&adv);
        let u_spec = spectra(&u[i]);
        let m_spec = spectra(big_u);
        let mean_adv = advect(big_u, big_u)?;
        let mean_adv_vals: Vec<Vec<f64>> = mean_adv.slices().iter().map(|s| s.to_vec()).collect();

        let moments = mc_moments(ensemble.paths(), dim + 1, grid.len(), |p| {
            let s = ensemble.shift(p, j);
            let x = [-s[0], -s[1]];
            let to_phys = |spec: Vec<Vec<rustfft::num_complex::Complex64>>| -> Vec<Vec<f64>> {
                spec.iter().map(|c| fft::inverse_real(&grid, c)).collect()
            };
            let mut sample = to_phys(shifted_spectra(&grid, &b_spec, &x));
            if form == ReynoldsForm::Standard {
                let a = to_phys(shifted_spectra(&grid, &a_spec, &x));
                let fluct: Vec<Vec<_>> = shifted_spectra(&grid, &u_spec, &x)
                    .into_iter()
                    .zip(&m_spec)
                    .map(|(c, m)| c.into_iter().zip(m).map(|(p, q)| p - q).collect())
                    .collect();
                let fs = VectorSpectrum::new(grid, fluct).expect("shape");
                let st = to_phys(advect_spectral(&fs, fs.comps()));
                for c in 0..dim {
                    for k in 0..grid.len() {
                        sample[c][k] += mean_adv_vals[c][k] + st[c][k] - a[c][k];
                    }
                }
            }
            sample.extend(to_phys(shifted_spectra(&grid, &p_spec, &x)));
            sample
        });
        let se = moments.se();
        let mean = moments.mean();
        let random_part = <VectorField as Field>::assemble(grid, mean[..dim].to_vec());
        let residual = dudt.add(&random_part)?.sub(&laplacian(big_u).scale(nu))?;
        out.push(ReynoldsSample {
            time: t,
            residual,
            se: <VectorField as Field>::assemble(grid, se[..dim].to_vec()),
            pressure: ScalarField::new(grid, mean[dim].clone())?,
            fd_error: fd,
        });
    }
    Ok(out)
}

/// [`reynolds_residual_fields`] summarized as a report.
pub fn reynolds_residual(
    times: &[f64],
    u: &[VectorField],
    ensemble: &WienerEnsemble,
    report_times: &[f64],
    form: ReynoldsForm,
) -> Result<ResidualReport> {
    let samples = reynolds_residual_fields(times, u, ensemble, report_times, form)?;
    let name = match form {
        ReynoldsForm::Raw => "reynolds-raw",
        ReynoldsForm::Standard => "reynolds-standard",
    };
    let mut report = ResidualReport::new(name, Orientation::None, u[0].grid(), uniform_step(times)?);
    report.paths = ensemble.paths();
    for s in samples {
        let mut rec = record(s.time, &s.residual);
        rec.se = Some(s.se.max_component_abs());
        rec.fd_error = s.fd_error;
        rec.pressure_l2 = Some(s.pressure.l2_norm());
        report.records.push(rec);
    }
    Ok(report)
}

/// `∂_t𝕌 + P[(𝕌·∇)𝕌] − ν∇²𝕌` at `now`, from samples `h` before and after.
pub fn ns_residual_field(
    before: &VectorField,
    now: &VectorField,
    after: &VectorField,
    nu: f64,
    h: f64,
) -> Result<VectorField> {
    let d = after.sub(before)?.scale(0.5 / h);
    let adv = leray_project(&advect(now, now)?).projected;
    d.add(&adv)?.sub(&laplacian(now).scale(nu))
}

/// Linearization of [`ns_residual_field`] about `mean` applied to one path's
/// shifted field `(y₋, y₀, y₊)`. Its spread over paths gives the delta-method
/// standard error of the residual.
pub fn ns_linearized(
    mean: &VectorField,
    y: [&VectorField; 3],
    nu: f64,
    h: f64,
) -> Result<VectorField> {
    let d = y[2].sub(y[0])?.scale(0.5 / h);
    let lin = advect(mean, y[1])?.add(&advect(y[1], mean)?)?;
    d.add(&leray_project(&lin).projected)?
        .sub(&laplacian(y[1]).scale(nu))
}

/// Navier–Stokes residual of a divergence-free series at interior samples
/// `lag` steps from either end; pressure from projecting `(𝕌·∇)𝕌`.
pub fn ns_residual(times: &[f64], series: &[VectorField], nu: f64, lag: usize) -> Result<ResidualReport> {
    let h = uniform_step(times)?;
    if series.len() != times.len() {
        return Err(Error::config("series length differs from time samples"));
    }
    let series = series
        .iter()
        .map(|u| u.clone().assert_divfree())
        .collect::<Result<Vec<_>>>()?;
    let lag = lag.max(1);
    let mut report = ResidualReport::new("navier-stokes", Orientation::None, series[0].grid(), h * lag as f64);
    for i in lag..times.len().saturating_sub(lag) {
        let r = ns_residual_field(&series[i - lag], &series[i], &series[i + lag], nu, lag as f64 * h)?;
        let mut rec = record(times[i], &r);
        if i >= 2 * lag && i + 2 * lag < times.len() {
            let r2 = ns_residual_field(&series[i - 2 * lag], &series[i], &series[i + 2 * lag], nu, 2.0 * lag as f64 * h)?;
            rec.fd_error = Some(r2.sub(&r)?.max_component_abs() / 3.0);
        }
        rec.pressure_l2 = Some(leray_project(&advect(&series[i], &series[i])?).pressure.l2_norm());
        report.records.push(rec);
    }
    Ok(report)
}
