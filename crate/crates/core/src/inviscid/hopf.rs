//! Hopf equation `∂_t v + (v·∇)v = 0` by straight characteristics.
//!
//! Each fluid point moves at constant velocity, `g(t, ξ) = ξ + t v0(ξ)`, so
//! `v(t, ξ + t v0(ξ)) = v0(ξ)`. Evaluating `v` at a point `y` means solving
//! the implicit foot-point equation `ξ + t v0(ξ) = y` for `ξ`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::torus::{gradient, Interpolant, ScalarField, TorusGrid, VectorField};

/// Fraction of the shock time the solver accepts.
pub const SHOCK_SAFETY: f64 = 0.9;

const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-13;

/// Time at which characteristics of `v0` first cross: the smallest `t > 0`
/// with `det(I + t ∇v0) = 0` over the grid. In 1D this is `1/max(−v0′)`,
/// infinite when `v0′ ≥ 0` everywhere.
pub fn shock_time(v0: &VectorField) -> f64 {
    let grid = v0.grid();
    let grads: Vec<VectorField> = v0.components().iter().map(gradient).collect();
    let mut best = f64::INFINITY;
    for idx in 0..grid.len() {
        let t = if grid.dim() == 1 {
            let d = grads[0].component(0).values()[idx];
            if d < 0.0 {
                -1.0 / d
            } else {
                f64::INFINITY
            }
        } else {
            let j = |c: usize, a: usize| grads[c].component(a).values()[idx];
            let tr = j(0, 0) + j(1, 1);
            let det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
            smallest_positive_root(det, tr, 1.0)
        };
        best = best.min(t);
    }
    best
}

/// Smallest positive root of `a t² + b t + c` (infinite when none).
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if a.abs() <= 1e-14 * scale {
        if b < 0.0 {
            return -c / b;
        }
        return f64::INFINITY;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = [q / a, if q != 0.0 { c / q } else { f64::INFINITY }];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots
        .into_iter()
        .find(|r| *r > 0.0)
        .unwrap_or(f64::INFINITY)
}

/// Pre-shock Hopf flow started from a band-limited `v0`.
#[derive(Clone, Debug)]
pub struct HopfSolution {
    v0: VectorField,
    interp: Interpolant,
    shock_time: f64,
    speed_bound: f64,
}

impl HopfSolution {
    pub fn new(v0: VectorField) -> Self {
        let shock = shock_time(&v0);
        let interp = Interpolant::vector(&v0);
        let speed_bound = v0.max_component_abs();
        Self {
            v0,
            interp,
            shock_time: shock,
            speed_bound,
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.v0.grid()
    }

    pub fn initial(&self) -> &VectorField {
        &self.v0
    }

    pub fn shock_time(&self) -> f64 {
        self.shock_time
    }

    /// Largest admissible time, `SHOCK_SAFETY · shock_time`.
    pub fn horizon(&self) -> f64 {
        SHOCK_SAFETY * self.shock_time
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..).contains(&t) {
            return Err(Error::domain(format!("negative time {t}")));
        }
        if t >= self.horizon() {
            return Err(Error::domain(format!(
                "t = {t} is beyond the pre-shock bound {:.6} (shock time {:.6} x safety {SHOCK_SAFETY})",
                self.horizon(),
                self.shock_time
            )));
        }
        Ok(())
    }

    /// Foot point `ξ` (unwrapped) with `ξ + t v0(ξ) = y`.
    pub fn foot_point(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let dim = self.grid().dim();
        if t == 0.0 {
            return Ok(y[..dim].to_vec());
        }
        let residual = |xi: &[f64]| -> (Vec<f64>, Vec<[f64; 2]>) {
            let (v, jac) = self.interp.value_and_jacobian(xi);
            let r = (0..dim).map(|a| xi[a] + t * v[a] - y[a]).collect();
            (r, jac)
        };
        let norm = |r: &[f64]| r.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let mut xi = y[..dim].to_vec();
        let (mut r, mut jac) = residual(&xi);
        let mut rn = norm(&r);
        for _ in 0..NEWTON_MAX_ITERS {
            if rn <= NEWTON_TOL {
                return Ok(xi);
            }
            let step = if dim == 1 {
                vec![r[0] / (1.0 + t * jac[0][0])]
            } else {
                let a = 1.0 + t * jac[0][0];
                let b = t * jac[0][1];
                let c = t * jac[1][0];
                let d = 1.0 + t * jac[1][1];
                let det = a * d - b * c;
                vec![(d * r[0] - b * r[1]) / det, (a * r[1] - c * r[0]) / det]
            };
            // damped update: halve while the residual grows
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = xi.iter().zip(&step).map(|(x, s)| x - lambda * s).collect();
                let (rt, jt) = residual(&trial);
                let rtn = norm(&rt);
                if rtn < rn || lambda < 1e-6 {
                    xi = trial;
                    r = rt;
                    jac = jt;
                    rn = rtn;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if rn <= NEWTON_TOL * 10.0 {
            return Ok(xi);
        }
        if dim == 1 {
            return self.bisect_foot(t, y[0]).map(|x| vec![x]);
        }
        Err(Error::numerical(format!(
            "foot-point Newton did not converge at y = {y:?}, t = {t}: residual {rn:e}"
        )))
    }

    fn bisect_foot(&self, t: f64, y: f64) -> Result<f64> {
        let f = |xi: f64| xi + t * self.interp.value(&[xi])[0] - y;
        let pad = t * self.speed_bound + 1e-12;
        let (mut lo, mut hi) = (y - pad, y + pad);
        if f(lo) > 0.0 || f(hi) < 0.0 {
            return Err(Error::numerical(format!("cannot bracket foot point for y = {y}, t = {t}")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `v(t, y)` at an arbitrary point.
    pub fn velocity_at(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let xi = self.foot_point(t, y)?;
        Ok(self.interp.value(&xi))
    }

    /// Forward flow map `g(t, ξ) = ξ + t v0(ξ)` (unwrapped).
    pub fn forward_map(&self, t: f64, xi: &[f64]) -> Vec<f64> {
        let v = self.interp.value(xi);
        xi.iter().zip(&v).map(|(x, u)| x + t * u).collect()
    }

    /// `g^{-1}(t, y)`, unwrapped.
    pub fn inverse_map(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.check_time(t)?;
        self.foot_point(t, y)
    }

    fn per_point<T: Send>(
        &self,
        t: f64,
        f: impl Fn(&[f64], &[f64]) -> T + Sync,
    ) -> Result<Vec<T>> {
        self.check_time(t)?;
        let grid = self.grid();
        (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let p = grid.point(idx);
                let xi = self.foot_point(t, &p)?;
                Ok(f(&p, &xi))
            })
            .collect()
    }

    /// Velocity field `v(t)` on the grid.
    pub fn solve(&self, t: f64) -> Result<VectorField> {
        let grid = self.grid();
        let samples = self.per_point(t, |_, xi| self.interp.value(xi))?;
        Ok(assemble(grid, &samples))
    }

    /// Exact tendency `∂_t v = −(v·∇)v` from characteristics:
    /// `∇v(t) = J0 (I + t J0)^{-1}` evaluated at the foot point.
    pub fn tendency(&self, t: f64) -> Result<VectorField> {
        let grid = self.grid();
        let dim = grid.dim();
        let samples = self.per_point(t, |_, xi| {
            let (v, j0) = self.interp.value_and_jacobian(xi);
            if dim == 1 {
                let dv = j0[0][0] / (1.0 + t * j0[0][0]);
                vec![-v[0] * dv]
            } else {
                let a = 1.0 + t * j0[0][0];
                let b = t * j0[0][1];
                let c = t * j0[1][0];
                let d = 1.0 + t * j0[1][1];
                let det = a * d - b * c;
                let inv = [[d / det, -b / det], [-c / det, a / det]];
                // grad v = J0 · inv
                let gv = |r: usize, s: usize| j0[r][0] * inv[0][s] + j0[r][1] * inv[1][s];
                (0..2)
                    .map(|r| -(v[0] * gv(r, 0) + v[1] * gv(r, 1)))
                    .collect()
            }
        })?;
        Ok(assemble(grid, &samples))
    }

    /// Periodic displacement `g(t, m) − m = t v0(m)` on the grid.
    pub fn flow_map(&self, t: f64) -> Result<VectorField> {
        self.check_time(t)?;
        Ok(self.v0.scale(t).with_flag(false))
    }
}

fn assemble(grid: TorusGrid, samples: &[Vec<f64>]) -> VectorField {
    let comps = (0..grid.dim())
        .map(|a| ScalarField::new(grid, samples.iter().map(|s| s[a]).collect()).expect("finite"))
        .collect();
    VectorField::new(comps).expect("consistent shape")
}

/// `v(t)` on the grid for initial data `v0` (convenience over [`HopfSolution`]).
pub fn hopf_solve(v0: &VectorField, t: f64) -> Result<VectorField> {
    HopfSolution::new(v0.clone()).solve(t)
}

/// Displacement `t v0` of the characteristic flow map.
pub fn flow_map(v0: &VectorField, t: f64) -> Result<VectorField> {
    HopfSolution::new(v0.clone()).flow_map(t)
}
