//! The time-reversed, Wiener-shifted flow `ξ(t, m) = g(T − t, m) + σ w(T − t)`.

use super::mean_derivative::Estimate;
use super::wiener::WienerEnsemble;
use crate::error::{Error, Result};
use crate::inviscid::{track_flow_maps, EulerRun, HopfSolution};
use crate::torus::{Interpolant, TorusGrid};

const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-13;

/// Lagrangian maps of an Euler run, interpolated off-grid.
#[derive(Clone, Debug)]
pub struct EulerFlowMaps {
    grid: TorusGrid,
    dt: f64,
    displacements: Vec<Interpolant>,
}

impl EulerFlowMaps {
    /// Tracks the maps of a run saved at every step.
    pub fn from_run(run: &EulerRun) -> Result<Self> {
        let maps = track_flow_maps(run)?;
        Ok(Self {
            grid: maps[0].grid(),
            dt: run.dt,
            displacements: maps.iter().map(Interpolant::vector).collect(),
        })
    }

    fn index(&self, t: f64) -> Result<usize> {
        let j = (t / self.dt).round();
        if j < 0.0 || j as usize >= self.displacements.len() || (j * self.dt - t).abs() > 1e-9 * self.dt.max(t) {
            return Err(Error::config(format!("no flow-map snapshot at t = {t}")));
        }
        Ok(j as usize)
    }

    pub fn horizon(&self) -> f64 {
        (self.displacements.len() - 1) as f64 * self.dt
    }

    pub fn forward(&self, t: f64, xi: &[f64]) -> Result<Vec<f64>> {
        let d = self.displacements[self.index(t)?].value(xi);
        Ok(xi.iter().zip(&d).map(|(x, v)| x + v).collect())
    }

    /// Solves `ξ + D(ξ) = y` by Newton from `ξ = y`.
    pub fn inverse(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let it = &self.displacements[self.index(t)?];
        let mut xi = [y[0], y[1]];
        for _ in 0..NEWTON_MAX_ITERS {
            let (d, j) = it.value_and_jacobian(&xi);
            let r = [xi[0] + d[0] - y[0], xi[1] + d[1] - y[1]];
            if r[0].abs().max(r[1].abs()) <= NEWTON_TOL {
                return Ok(xi.to_vec());
            }
            let (a, b, c, e) = (1.0 + j[0][0], j[0][1], j[1][0], 1.0 + j[1][1]);
            let det = a * e - b * c;
            xi[0] -= (e * r[0] - b * r[1]) / det;
            xi[1] -= (a * r[1] - c * r[0]) / det;
        }
        Err(Error::numerical(format!("flow-map inversion did not converge at y = {y:?}, t = {t}")))
    }
}

/// Inviscid base flow underlying a perturbed flow.
#[derive(Clone, Debug)]
pub enum BaseFlow {
    Hopf(HopfSolution),
    Euler(EulerFlowMaps),
}

impl BaseFlow {
    pub fn grid(&self) -> TorusGrid {
        match self {
            Self::Hopf(h) => h.grid(),
            Self::Euler(e) => e.grid,
        }
    }

    /// `g(t, ξ)`, unwrapped.
    pub fn forward(&self, t: f64, xi: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Hopf(h) => {
                h.check_time(t)?;
                Ok(h.forward_map(t, xi))
            }
            Self::Euler(e) => e.forward(t, xi),
        }
    }

    /// `g^{-1}(t, y)`, unwrapped.
    pub fn inverse(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Hopf(h) => h.inverse_map(t, y),
            Self::Euler(e) => e.inverse(t, y),
        }
    }
}

/// Per-path evaluation of `ξ`, `ξ^{-1}` and `ξ_t(s) = ξ(s) ∘ ξ^{-1}(t)`.
#[derive(Clone, Debug)]
pub struct PerturbedFlow {
    base: BaseFlow,
    ensemble: WienerEnsemble,
    horizon: f64,
}

/// Wraps a base flow and a Wiener ensemble (whose `σ` is used) on `[0, T]`.
pub fn build_perturbed_flow(base: BaseFlow, ensemble: WienerEnsemble, horizon: f64) -> Result<PerturbedFlow> {
    if ensemble.dim() != base.grid().dim() {
        return Err(Error::config("ensemble and base flow dimensions differ"));
    }
    ensemble.step_index(horizon)?;
    match &base {
        BaseFlow::Hopf(h) => h.check_time(horizon)?,
        BaseFlow::Euler(e) => {
            if (e.dt - ensemble.dt()).abs() > 1e-12 * e.dt {
                return Err(Error::config(format!(
                    "flow-map step {} differs from ensemble step {}",
                    e.dt,
                    ensemble.dt()
                )));
            }
            if e.horizon() + 1e-12 < horizon {
                return Err(Error::config("base flow does not cover the horizon"));
            }
        }
    }
    Ok(PerturbedFlow {
        base,
        ensemble,
        horizon,
    })
}

impl PerturbedFlow {
    pub fn base(&self) -> &BaseFlow {
        &self.base
    }

    pub fn ensemble(&self) -> &WienerEnsemble {
        &self.ensemble
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn noise(&self, path: usize, t: f64) -> Result<[f64; 2]> {
        if !(0.0..=self.horizon + 1e-12).contains(&t) {
            return Err(Error::domain(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        let j = self.ensemble.step_index((self.horizon - t).max(0.0))?;
        Ok(self.ensemble.shift(path, j))
    }

    /// `ξ(t, m) = g(T − t, m) + σ w(T − t)`.
    pub fn xi(&self, path: usize, t: f64, m: &[f64]) -> Result<Vec<f64>> {
        let s = self.noise(path, t)?;
        let g = self.base.forward(self.horizon - t, m)?;
        Ok(g.iter().enumerate().map(|(a, x)| x + s[a]).collect())
    }

    /// `ξ^{-1}(t, y) = g^{-1}(T − t, y − σ w(T − t))`.
    pub fn xi_inverse(&self, path: usize, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let s = self.noise(path, t)?;
        let y: Vec<f64> = y.iter().enumerate().map(|(a, x)| x - s[a]).collect();
        self.base.inverse(self.horizon - t, &y)
    }

    /// `ξ_t(s, m) = g(T − s, g^{-1}(T − t, m − σ w(T − t))) + σ w(T − s)`.
    pub fn xi_t(&self, path: usize, t: f64, s: f64, m: &[f64]) -> Result<Vec<f64>> {
        let foot = self.xi_inverse(path, t, m)?;
        self.xi(path, s, &foot)
    }

    /// Largest `|ξ_t(t, m) − m|` over paths and points.
    pub fn identity_defect(&self, t: f64, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in 0..self.ensemble.paths() {
            for m in points {
                let x = self.xi_t(p, t, t, m)?;
                for (a, b) in x.iter().zip(m) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Backward quotient `(ξ_t(t, m) − ξ_t(t − Δt, m)) / Δt` averaged over
    /// paths; the present σ-algebra of `ξ_t` is trivial so this is a plain mean.
    pub fn backward_derivative_xi_t(&self, t: f64, lag: usize, m: &[f64]) -> Result<Estimate> {
        let h = lag.max(1) as f64 * self.ensemble.dt();
        let rows = (0..self.ensemble.paths())
            .map(|p| {
                let now = self.xi_t(p, t, t, m)?;
                let before = self.xi_t(p, t, t - h, m)?;
                Ok(now.iter().zip(&before).map(|(a, b)| (a - b) / h).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Estimate::from_samples(rows.iter().map(Vec::as_slice)))
    }

    /// Backward quotient of `ξ(·, m)` itself at `t`, plain mean over paths.
    pub fn backward_derivative_xi(&self, t: f64, lag: usize, m: &[f64]) -> Result<Estimate> {
        let h = lag.max(1) as f64 * self.ensemble.dt();
        let rows = (0..self.ensemble.paths())
            .map(|p| {
                let now = self.xi(p, t, m)?;
                let before = self.xi(p, t - h, m)?;
                Ok(now.iter().zip(&before).map(|(a, b)| (a - b) / h).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Estimate::from_samples(rows.iter().map(Vec::as_slice)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::sample_wiener;
    use crate::torus::VectorField;
    use std::f64::consts::PI;

    fn hopf() -> HopfSolution {
        let g = TorusGrid::line(64).unwrap();
        HopfSolution::new(VectorField::from_fn(g, |p| [0.5 * (2.0 * PI * p[0]).sin(), 0.0]))
    }

    #[test]
    fn zero_noise_reduces_to_base_map() {
        let w = sample_wiener(4, 1, 0.01, 0.1, 1).unwrap().with_sigma(0.0);
        let h = hopf();
        let f = build_perturbed_flow(BaseFlow::Hopf(h.clone()), w, 0.1).unwrap();
        let x = f.xi(2, 0.03, &[0.4]).unwrap();
        assert!((x[0] - h.forward_map(0.07, &[0.4])[0]).abs() < 1e-15);
    }

    #[test]
    fn xi_t_is_identity_at_present() {
        let w = sample_wiener(16, 1, 0.01, 0.1, 1).unwrap().with_sigma(0.2);
        let f = build_perturbed_flow(BaseFlow::Hopf(hopf()), w, 0.1).unwrap();
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 7.0]).collect();
        for t in [0.0, 0.03, 0.1] {
            assert!(f.identity_defect(t, &pts).unwrap() < 1e-8);
        }
    }

    #[test]
    fn horizon_past_shock_rejected() {
        let w = sample_wiener(2, 1, 0.01, 1.0, 1).unwrap();
        assert!(matches!(
            build_perturbed_flow(BaseFlow::Hopf(hopf()), w, 1.0),
            Err(Error::Domain(_))
        ));
    }
}
