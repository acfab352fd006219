use rustfft::num_complex::Complex64;

use super::mc::{mc_moments, shifted_spectra, spectra, McField};
use super::smoothing::heat_smooth;
use crate::error::{Error, Result};
use crate::stochastic::WienerEnsemble;
use crate::torus::ops::{advect_spectral, leray_spectral};
use crate::torus::{advect, fft, TorusGrid, VectorField, VectorSpectrum};

fn check_paths(ensemble: &WienerEnsemble) -> Result<()> {
    if ensemble.paths() < 2 {
        return Err(Error::estimation(format!(
            "the stress estimator needs at least 2 paths, got {}",
            ensemble.paths()
        )));
    }
    Ok(())
}

fn self_advection(grid: &TorusGrid, spec: Vec<Vec<Complex64>>, project: bool) -> Vec<Vec<f64>> {
    let u = VectorSpectrum::new(*grid, spec).expect("shape");
    let out = advect_spectral(&u, u.comps());
    let mut s = VectorSpectrum::new(*grid, out).expect("shape");
    if project {
        leray_spectral(&mut s);
    }
    s.comps().iter().map(|c| fft::inverse_real(grid, c)).collect()
}

fn sub_spectra(a: Vec<Vec<Complex64>>, b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| x.into_iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

/// `E[(Ŭ·∇)Ŭ]` with `Ŭ_ω = X(m − σ w_ω(t)) − mean`; Leray-projected when `project`.
pub fn reynolds_stress(
    x: &VectorField,
    mean: &VectorField,
    ensemble: &WienerEnsemble,
    t: f64,
    project: bool,
) -> Result<McField<VectorField>> {
    check_paths(ensemble)?;
    x.grid().ensure_same(&mean.grid())?;
    let j = ensemble.step_index(t)?;
    let grid = x.grid();
    let xs = spectra(x);
    let ms = spectra(mean);
    Ok(mc_moments(ensemble.paths(), grid.dim(), grid.len(), |p| {
        let s = ensemble.shift(p, j);
        let fluct = sub_spectra(shifted_spectra(&grid, &xs, &[-s[0], -s[1]]), &ms);
        self_advection(&grid, fluct, project)
    })
    .into_field(grid))
}

/// Ensemble form: path `ω` carries its own field `X_ω`, shifted by `−σ w_ω(t)`.
pub fn reynolds_stress_ensemble(
    xs: &[VectorField],
    mean: &VectorField,
    ensemble: &WienerEnsemble,
    t: f64,
    project: bool,
) -> Result<McField<VectorField>> {
    check_paths(ensemble)?;
    if xs.len() != ensemble.paths() {
        return Err(Error::config("one field per path required"));
    }
    let j = ensemble.step_index(t)?;
    let grid = mean.grid();
    let ms = spectra(mean);
    Ok(mc_moments(ensemble.paths(), grid.dim(), grid.len(), |p| {
        let s = ensemble.shift(p, j);
        let fluct = sub_spectra(shifted_spectra(&grid, &spectra(&xs[p]), &[-s[0], -s[1]]), &ms);
        self_advection(&grid, fluct, project)
    })
    .into_field(grid))
}

/// `E[((v·∇)v)(m − σw)] = (V·∇)V + E[(Ŭ·∇)Ŭ]` with every piece evaluated separately.
#[derive(Clone, Debug)]
pub struct AdvectionDecomposition {
    /// `V`, the exact (heat-kernel) expectation of the shifted field.
    pub mean: VectorField,
    /// Monte Carlo `E[((v·∇)v)(m − σw)]`.
    pub expected_advection: McField<VectorField>,
    /// `(V·∇)V`.
    pub mean_advection: VectorField,
    /// Monte Carlo `E[(Ŭ·∇)Ŭ]`, `Ŭ` centred on `V`.
    pub stress: McField<VectorField>,
    /// `expected − mean_advection − stress`, with the standard error of its per-path form.
    pub gap: McField<VectorField>,
}

impl AdvectionDecomposition {
    /// `‖gap‖_∞ / max SE(gap)`, the identity's z-score.
    pub fn gap_ratio(&self) -> f64 {
        let g = self.gap.mean.max_component_abs();
        if g == 0.0 {
            0.0
        } else {
            g / self.gap.max_se()
        }
    }
}

pub fn decompose_expected_advection(v: &VectorField, ensemble: &WienerEnsemble, t: f64) -> Result<AdvectionDecomposition> {
    check_paths(ensemble)?;
    let j = ensemble.step_index(t)?;
    let grid = v.grid();
    let dim = grid.dim();
    let sigma = ensemble.sigma();
    let mean = heat_smooth(v, sigma, t)?;
    let mean_advection = advect(&mean, &mean)?;
    let a_spec = spectra(&advect(v, v)?);
    let v_spec = spectra(v);
    let m_spec = spectra(&mean);
    let moments = mc_moments(ensemble.paths(), 3 * dim, grid.len(), |p| {
        let s = ensemble.shift(p, j);
        let x = [-s[0], -s[1]];
        let a: Vec<Vec<f64>> = shifted_spectra(&grid, &a_spec, &x)
            .iter()
            .map(|c| fft::inverse_real(&grid, c))
            .collect();
        let fluct = sub_spectra(shifted_spectra(&grid, &v_spec, &x), &m_spec);
        let st = self_advection(&grid, fluct, false);
        let d: Vec<Vec<f64>> = a
            .iter()
            .zip(&st)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
            .collect();
        a.into_iter().chain(st).chain(d).collect()
    });
    let se = moments.se();
    let means = moments.mean();
    let n = moments.count();
    let pick = |block: usize, src: &[Vec<f64>]| -> VectorField {
        <VectorField as crate::torus::Field>::assemble(grid, src[block * dim..(block + 1) * dim].to_vec())
    };
    let gap_mean = pick(2, means).sub(&mean_advection)?;
    Ok(AdvectionDecomposition {
        mean,
        expected_advection: McField {
            mean: pick(0, means),
            se: pick(0, &se),
            samples: n,
        },
        mean_advection,
        stress: McField {
            mean: pick(1, means),
            se: pick(1, &se),
            samples: n,
        },
        gap: McField {
            mean: gap_mean,
            se: pick(2, &se),
            samples: n,
        },
    })
}
