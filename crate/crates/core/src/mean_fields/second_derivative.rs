//! Projected backward derivative of `U(T − s, ξ_t(s))` at `s = t`.

use super::mc::{mc_moments, McField};
use super::smoothing::heat_smooth;
use crate::error::{Error, Result};
use crate::stochastic::PerturbedFlow;
use crate::torus::ops::Field;
use crate::torus::{leray_project, Interpolant, VectorField};

/// Estimates `P D_* [U(T − s, ξ_t(s))]_{s=t}` on the grid, where
/// `U(τ) = E[u(τ, m − σw(τ))]` and `u` is the base velocity sampled on
/// `times` (step equal to the ensemble step). Each path contributes the
/// projected quotient `(U(τ, m) − U(τ + Δ, ξ_t(t − Δ, m))) / Δ`, `τ = T − t`,
/// `Δ = lag · dt`.
pub fn projected_backward_second_derivative(
    flow: &PerturbedFlow,
    times: &[f64],
    u: &[VectorField],
    t: f64,
    lag: usize,
) -> Result<McField<VectorField>> {
    let ens = flow.ensemble();
    let dt = ens.dt();
    let delta = lag.max(1) as f64 * dt;
    let tau = flow.horizon() - t;
    let find = |s: f64| {
        times
            .iter()
            .position(|&x| (x - s).abs() <= 1e-9 * dt.max(1.0))
            .ok_or_else(|| Error::config(format!("no velocity sample at {s}")))
    };
    let (i0, i1) = (find(tau)?, find(tau + delta)?);
    let sigma = ens.sigma();
    let now = heat_smooth(&u[i0], sigma, tau)?;
    let later = Interpolant::vector(&heat_smooth(&u[i1], sigma, tau + delta)?);
    let grid = now.grid();
    let now_vals: Vec<Vec<f64>> = now.slices().iter().map(|s| s.to_vec()).collect();
    let points: Vec<Vec<f64>> = (0..grid.len())
        .map(|k| grid.point(k)[..grid.dim()].to_vec())
        .collect();
    let moments = mc_moments(ens.paths(), grid.dim(), grid.len(), |p| {
        let mut q = vec![vec![0.0; grid.len()]; grid.dim()];
        for (k, m) in points.iter().enumerate() {
            let x = flow.xi_t(p, t, t - delta, m).expect("pre-validated flow");
            let v = later.value(&x);
            for c in 0..grid.dim() {
                q[c][k] = (now_vals[c][k] - v[c]) / delta;
            }
        }
        let f = <VectorField as Field>::assemble(grid, q);
        let pr = leray_project(&f).projected;
        pr.slices().iter().map(|s| s.to_vec()).collect()
    });
    let mut out: McField<VectorField> = moments.into_field(grid);
    out.mean = out.mean.with_flag(true);
    Ok(out)
}
