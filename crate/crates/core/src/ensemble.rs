//! Mean-field interacting ensemble: `M` velocity realizations, each driven
//! by Euler dynamics plus a force built from the ensemble's own projected
//! Reynolds stress, translated into the realization's frame.
//!
//! Realizations are stored as spectra. The Wiener shift of each path is
//! frozen at its left-endpoint value within a step while the stress is
//! recomputed at every RK4 stage.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inviscid::check_cfl;
use crate::mean_fields::{
    mc_moments, mean_spectra, ns_linearized, ns_residual, ns_residual_field, Moments, ResidualReport,
};
use crate::oracles::spectral_ns_2d;
use crate::stochastic::WienerEnsemble;
use crate::torus::ops::{advect_spectral, leray_spectral, shift_table};
use crate::torus::{advect, leray_project, shift_by, Field, TorusGrid, VectorField, VectorSpectrum};

/// Energy growth factor that aborts a run.
pub const ENERGY_BOUND: f64 = 10.0;
/// Largest admissible energy fraction in the top third of the retained spectrum.
pub const RESOLUTION_LIMIT: f64 = 1e-6;

type Spec = Vec<Vec<Complex64>>;

fn apply_table(spec: &[Vec<Complex64>], table: &[Complex64]) -> Spec {
    spec.iter()
        .map(|c| c.iter().zip(table).map(|(a, b)| a * b).collect())
        .collect()
}

fn axpy(a: &[Vec<Complex64>], s: f64, b: &[Vec<Complex64>]) -> Spec {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q * s).collect())
        .collect()
}

fn dealias(grid: &TorusGrid, spec: &mut Spec) {
    for c in spec.iter_mut() {
        for (i, v) in c.iter_mut().enumerate() {
            if !grid.retained(i) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
}

fn project(grid: &TorusGrid, spec: Spec) -> Spec {
    let mut s = VectorSpectrum::new(*grid, spec).expect("shape");
    leray_spectral(&mut s);
    s.into_comps()
}

fn to_field(grid: &TorusGrid, spec: &[Vec<Complex64>]) -> VectorField {
    VectorSpectrum::new(*grid, spec.to_vec()).expect("shape").to_field()
}

fn energy(spec: &[Vec<Complex64>]) -> f64 {
    0.5 * spec.iter().flat_map(|c| c.iter().map(|v| v.norm_sqr())).sum::<f64>()
}

/// Energy share of modes with `max_a |k_a| > 2/3` of the dealiasing cutoff.
fn top_third_fraction(grid: &TorusGrid, spec: &[Vec<Complex64>]) -> f64 {
    let cut = grid.dealias_cutoff() as f64 * 2.0 / 3.0;
    let (mut top, mut all) = (0.0, 0.0);
    for c in spec {
        for (i, v) in c.iter().enumerate() {
            let k = grid.wavevector(i);
            let e = v.norm_sqr();
            if k == [0, 0] {
                continue;
            }
            all += e;
            if (k[0].abs().max(k[1].abs()) as f64) > cut {
                top += e;
            }
        }
    }
    if all == 0.0 {
        0.0
    } else {
        top / all
    }
}

/// `M` realizations `u_ω` at a point of the ensemble's time grid.
#[derive(Clone, Debug)]
pub struct EnsembleState {
    grid: TorusGrid,
    step: usize,
    realizations: Vec<Spec>,
    ensemble: Arc<WienerEnsemble>,
}

impl EnsembleState {
    /// All realizations start from `u0` (dealiased) at `t = 0`.
    pub fn new(u0: &VectorField, ensemble: Arc<WienerEnsemble>) -> Result<Self> {
        let grid = u0.grid();
        if grid.dim() != 2 || ensemble.dim() != 2 {
            return Err(Error::config("the mean-field system is two-dimensional"));
        }
        let u0 = u0.clone().assert_divfree()?;
        let mut s = u0.spectrum().comps().to_vec();
        dealias(&grid, &mut s);
        Ok(Self {
            grid,
            step: 0,
            realizations: vec![s; ensemble.paths()],
            ensemble,
        })
    }

    /// Explicit realizations (one per path) at grid step `step`.
    pub fn from_realizations(us: &[VectorField], ensemble: Arc<WienerEnsemble>, step: usize) -> Result<Self> {
        if us.len() != ensemble.paths() {
            return Err(Error::config("one realization per path required"));
        }
        if step > ensemble.steps() {
            return Err(Error::config("step beyond the ensemble horizon"));
        }
        let grid = us[0].grid();
        let realizations = us
            .iter()
            .map(|u| {
                grid.ensure_same(&u.grid())?;
                let u = u.clone().assert_divfree()?;
                Ok(u.spectrum().comps().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            step,
            realizations,
            ensemble,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn t(&self) -> f64 {
        self.step as f64 * self.ensemble.dt()
    }

    pub fn ensemble(&self) -> &WienerEnsemble {
        &self.ensemble
    }

    pub fn paths(&self) -> usize {
        self.realizations.len()
    }

    pub fn realization(&self, path: usize) -> VectorField {
        to_field(&self.grid, &self.realizations[path]).with_flag(true)
    }

    pub fn realizations(&self) -> Vec<VectorField> {
        (0..self.paths()).map(|p| self.realization(p)).collect()
    }

    fn shift(&self, path: usize) -> [f64; 2] {
        self.ensemble.shift(path, self.step)
    }

    /// Spectral tables realizing `m ↦ f(m − σw_ω)` at the current step.
    fn back_tables(&self) -> Vec<Vec<Complex64>> {
        (0..self.paths())
            .into_par_iter()
            .map(|p| {
                let s = self.shift(p);
                shift_table(&self.grid, &[-s[0], -s[1]])
            })
            .collect()
    }

    fn mean_spec(&self, tables: &[Vec<Complex64>], fields: &[Spec]) -> Spec {
        mean_spectra(fields.len(), self.grid.dim(), self.grid.len(), |p| {
            apply_table(&fields[p], &tables[p])
        })
    }

    /// Largest `|div u_ω|` over realizations.
    pub fn max_divergence(&self) -> f64 {
        (0..self.paths())
            .map(|p| crate::torus::divergence(&to_field(&self.grid, &self.realizations[p])).max_abs())
            .fold(0.0, f64::max)
    }
}

/// `𝕌(t, m) = E[u_ω(t, m − σ w_ω(t))]` as a fixed-order ensemble mean.
pub fn ensemble_mean_shifted(state: &EnsembleState) -> VectorField {
    let tables = state.back_tables();
    to_field(&state.grid, &state.mean_spec(&tables, &state.realizations)).with_flag(true)
}

/// The projected stress `G` and the per-path forces `f_ω(m) = G(m + σ w_ω(t))`.
#[derive(Clone, Debug)]
pub struct EnsembleForce {
    pub stress: VectorField,
    pub forces: Vec<VectorField>,
}

/// `G = P E[(Ŭ_ω·∇)Ŭ_ω]` with `Ŭ_ω = u_ω(m − σw_ω) − 𝕌`, evaluated directly.
pub fn ensemble_force(state: &EnsembleState) -> Result<EnsembleForce> {
    if state.paths() < 2 {
        return Err(Error::estimation("the ensemble force needs at least 2 realizations"));
    }
    let grid = state.grid;
    let tables = state.back_tables();
    let mean = state.mean_spec(&tables, &state.realizations);
    let raw = mean_spectra(state.paths(), grid.dim(), grid.len(), |p| {
        let shifted = apply_table(&state.realizations[p], &tables[p]);
        let fluct = axpy(&shifted, -1.0, &mean);
        let f = VectorSpectrum::new(grid, fluct).expect("shape");
        advect_spectral(&f, f.comps())
    });
    let g = project(&grid, raw);
    let stress = to_field(&grid, &g).with_flag(true);
    let forces = (0..state.paths())
        .map(|p| {
            let s = state.shift(p);
            shift_by(&stress, &s)
        })
        .collect();
    Ok(EnsembleForce { stress, forces })
}

/// Right-hand sides `−P[(u_ω·∇)u_ω] + G(m + σw_ω)` for stage fields `us`.
/// `G` uses `E[(Ŭ·∇)Ŭ] = E[((u·∇)u)(m − σw)] − (𝕌·∇)𝕌`, exact for the
/// sample mean because advection commutes with translations on dealiased data.
fn forced_rhs(grid: &TorusGrid, us: &[Spec], tables: &[Vec<Complex64>]) -> Vec<Spec> {
    let m = us.len();
    let adv: Vec<Spec> = us
        .par_iter()
        .map(|u| {
            let s = VectorSpectrum::new(*grid, u.clone()).expect("shape");
            advect_spectral(&s, s.comps())
        })
        .collect();
    let g = if m >= 2 {
        let mean_u = mean_spectra(m, grid.dim(), grid.len(), |p| apply_table(&us[p], &tables[p]));
        let mean_a = mean_spectra(m, grid.dim(), grid.len(), |p| apply_table(&adv[p], &tables[p]));
        let mu = VectorSpectrum::new(*grid, mean_u).expect("shape");
        let self_adv = advect_spectral(&mu, mu.comps());
        Some(project(grid, axpy(&mean_a, -1.0, &self_adv)))
    } else {
        None
    };
    adv.into_par_iter()
        .enumerate()
        .map(|(p, a)| {
            let mut r = project(grid, a);
            for c in r.iter_mut() {
                for v in c.iter_mut() {
                    *v = -*v;
                }
            }
            if let Some(g) = &g {
                // f_ω = G(m + σw_ω): conjugate of the backward table
                for (rc, gc) in r.iter_mut().zip(g) {
                    for ((v, gv), t) in rc.iter_mut().zip(gc).zip(&tables[p]) {
                        *v += gv * t.conj();
                    }
                }
            }
            r
        })
        .collect()
}

/// One RK4 step of the forced system; `dt` must equal the ensemble step.
pub fn step_forced_system(state: &EnsembleState, dt: f64) -> Result<EnsembleState> {
    let ens = &state.ensemble;
    if (dt - ens.dt()).abs() > 1e-12 * dt {
        return Err(Error::config(format!("step {dt} differs from the ensemble step {}", ens.dt())));
    }
    if state.step >= ens.steps() {
        return Err(Error::config("ensemble horizon reached"));
    }
    let grid = state.grid;
    let speed = state
        .realizations
        .par_iter()
        .map(|u| {
            let (a, b) = crate::torus::fft::inverse_real_pair(&grid, &u[0], &u[1]);
            a.iter().zip(&b).map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    check_cfl(&grid, speed, dt)?;
    let tables = state.back_tables();
    let u = &state.realizations;
    let stage = |k: &[Spec], c: f64| -> Vec<Spec> { u.iter().zip(k).map(|(a, b)| axpy(a, c * dt, b)).collect() };
    let k1 = forced_rhs(&grid, u, &tables);
    let k2 = forced_rhs(&grid, &stage(&k1, 0.5), &tables);
    let k3 = forced_rhs(&grid, &stage(&k2, 0.5), &tables);
    let k4 = forced_rhs(&grid, &stage(&k3, 1.0), &tables);
    let next: Vec<Spec> = (0..u.len())
        .into_par_iter()
        .map(|p| {
            let mut s = u[p].clone();
            for c in 0..s.len() {
                for i in 0..s[c].len() {
                    s[c][i] += (k1[p][c][i] + k2[p][c][i] * 2.0 + k3[p][c][i] * 2.0 + k4[p][c][i]) * (dt / 6.0);
                }
            }
            project(&grid, s)
        })
        .collect();
    if next.iter().any(|s| s.iter().any(|c| c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()))) {
        return Err(Error::numerical(format!("NaN in realizations at step {}", state.step + 1)));
    }
    Ok(EnsembleState {
        grid,
        step: state.step + 1,
        realizations: next,
        ensemble: state.ensemble.clone(),
    })
}

/// Parameters of a mean-field experiment beyond the initial data.
#[derive(Clone, Debug, Serialize)]
pub struct MeanFieldSettings {
    pub sigma: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Times at which the Navier–Stokes residual is reported.
    pub report_times: Vec<f64>,
    /// Half-width of the residual's time difference, in steps.
    pub residual_lag: usize,
}

/// Relative `L²` distance of `𝕌` to the Navier–Stokes oracle.
#[derive(Clone, Debug, Serialize)]
pub struct OracleComparison {
    pub times: Vec<f64>,
    pub relative_l2: Vec<f64>,
    /// `sqrt(Σ_t ‖𝕌 − u_NS‖² / Σ_t ‖u_NS‖²)` over snapshots with `t > 0`.
    pub space_time_relative_l2: f64,
}

#[derive(Clone, Debug)]
pub struct MeanFieldOutcome {
    pub times: Vec<f64>,
    /// `𝕌` at every step.
    pub mean: Vec<VectorField>,
    /// Residual of `𝕌`; `se` is the delta-method standard error and
    /// `fd_error` the residual of the oracle under the same stencil.
    pub ns_report: ResidualReport,
    pub comparison: OracleComparison,
    pub max_divergence: f64,
    pub max_centering_defect: f64,
    pub max_top_third_fraction: f64,
    pub under_resolved: bool,
}

fn index_of(times: &[f64], t: f64, dt: f64) -> Result<usize> {
    times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * dt.max(1.0))
        .ok_or_else(|| Error::config(format!("report time {t} is not on the step grid")))
}

/// Evolves the forced ensemble from `u0` on `[0, T]` and compares `𝕌` with
/// Navier–Stokes at `ν = σ²/2`.
pub fn run_meanfield_experiment(u0: &VectorField, settings: &MeanFieldSettings) -> Result<MeanFieldOutcome> {
    let s = settings;
    if s.paths < 2 {
        return Err(Error::config("the mean-field system needs M >= 2 (stress estimator undefined)"));
    }
    let ensemble = Arc::new(
        crate::stochastic::sample_wiener(s.paths, 2, s.dt, s.horizon, s.seed)?.with_sigma(s.sigma),
    );
    let grid = u0.grid();
    let nu = 0.5 * s.sigma * s.sigma;
    let steps = ensemble.steps();
    let times = ensemble.times();
    let lag = s.residual_lag.max(1);
    let mut report_idx = Vec::new();
    for &t in &s.report_times {
        let i = index_of(&times, t, s.dt)?;
        if i < lag || i + lag > steps {
            return Err(Error::config(format!("report time {t} is too close to the ends for lag {lag}")));
        }
        report_idx.push(i);
    }
    let keep: std::collections::BTreeSet<usize> = report_idx
        .iter()
        .flat_map(|&i| [i - lag, i, i + lag])
        .collect();

    let mut state = EnsembleState::new(u0, ensemble.clone())?;
    let e0 = state.realizations.iter().map(|u| energy(u)).sum::<f64>();
    let mut mean = Vec::with_capacity(steps + 1);
    let mut kept: std::collections::BTreeMap<usize, Vec<Spec>> = Default::default();
    let mut max_div: f64 = 0.0;
    let mut max_center: f64 = 0.0;
    let mut max_top: f64 = 0.0;
    loop {
        let tables = state.back_tables();
        let shifted: Vec<Spec> = (0..state.paths())
            .into_par_iter()
            .map(|p| apply_table(&state.realizations[p], &tables[p]))
            .collect();
        let m = mean_spectra(shifted.len(), 2, grid.len(), |p| shifted[p].clone());
        mean.push(to_field(&grid, &m).with_flag(true));
        if keep.contains(&state.step) {
            kept.insert(state.step, shifted);
        }
        if state.step % 25 == 0 || state.step == steps {
            max_top = max_top.max(
                state
                    .realizations
                    .iter()
                    .map(|u| top_third_fraction(&grid, u))
                    .fold(0.0, f64::max),
            );
        }
        if state.step == steps {
            break;
        }
        if state.step % 25 == 0 {
            max_div = max_div.max(state.max_divergence());
            let f = ensemble_force(&state)?;
            let back: Vec<Spec> = f
                .forces
                .iter()
                .zip(&tables)
                .map(|(fw, t)| apply_table(fw.spectrum().comps(), t))
                .collect();
            let centred = mean_spectra(back.len(), 2, grid.len(), |p| back[p].clone());
            let defect = to_field(&grid, &centred).sub(&f.stress)?.max_component_abs();
            max_center = max_center.max(defect);
        }
        state = step_forced_system(&state, s.dt)?;
        let e = state.realizations.iter().map(|u| energy(u)).sum::<f64>();
        if e > ENERGY_BOUND * e0.max(f64::MIN_POSITIVE) {
            return Err(Error::numerical(format!(
                "ensemble energy grew from {e0:.3e} to {e:.3e} by step {}",
                state.step
            )));
        }
    }
    max_div = max_div.max(state.max_divergence());

    let oracle = spectral_ns_2d(u0, nu, s.horizon, s.dt, 1)?;
    let oracle_u = oracle.velocities();
    let mut rel = Vec::with_capacity(mean.len());
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (a, b)) in mean.iter().zip(&oracle_u).enumerate() {
        let d = a.sub(b)?.l2_norm();
        let n = b.l2_norm();
        rel.push(if n > 0.0 { d / n } else { d });
        if i > 0 {
            num += d * d;
            den += n * n;
        }
    }
    let comparison = OracleComparison {
        times: times.clone(),
        relative_l2: rel,
        space_time_relative_l2: if den > 0.0 { (num / den).sqrt() } else { num.sqrt() },
    };

    let h = lag as f64 * s.dt;
    let oracle_report = ns_residual(&times, &oracle_u, nu, lag)?;
    let mut report = ResidualReport::new("navier-stokes", crate::mean_fields::Orientation::None, grid, h);
    report.paths = s.paths;
    for &i in &report_idx {
        let r = ns_residual_field(&mean[i - lag], &mean[i], &mean[i + lag], nu, h)?;
        let ys = [&kept[&(i - lag)], &kept[&i], &kept[&(i + lag)]];
        let moments: Moments = mc_moments(s.paths, 2, grid.len(), |p| {
            let y = [to_field(&grid, &ys[0][p]), to_field(&grid, &ys[1][p]), to_field(&grid, &ys[2][p])];
            let l = ns_linearized(&mean[i], [&y[0], &y[1], &y[2]], nu, h).expect("same grid");
            l.slices().iter().map(|c| c.to_vec()).collect()
        });
        let se = moments.se().iter().flatten().fold(0.0, |a: f64, b| a.max(*b));
        let mut rec = crate::mean_fields::ResidualRecord::new(times[i], r.l2_norm(), r.max_component_abs());
        rec.se = Some(se);
        rec.fd_error = oracle_report
            .records
            .iter()
            .find(|x| (x.time - times[i]).abs() < 1e-9)
            .map(|x| x.linf);
        rec.pressure_l2 = Some(leray_project(&advect(&mean[i], &mean[i])?).pressure.l2_norm());
        report.records.push(rec);
    }

    Ok(MeanFieldOutcome {
        times,
        mean,
        ns_report: report,
        comparison,
        max_divergence: max_div,
        max_centering_defect: max_center,
        max_top_third_fraction: max_top,
        under_resolved: max_top >= RESOLUTION_LIMIT,
    })
}
