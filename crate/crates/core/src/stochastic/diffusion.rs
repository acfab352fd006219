use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::wiener::{path_rng, WienerEnsemble};
use crate::error::{Error, Result};
use crate::torus::{Interpolant, VectorField};

type DriftFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;

/// Drift `a(t, x)` of an additive-noise diffusion.
#[derive(Clone)]
pub struct Drift {
    label: String,
    f: Arc<DriftFn>,
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Drift({})", self.label)
    }
}

impl Drift {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new("zero", move |_, _| vec![0.0; dim])
    }

    pub fn constant(c: Vec<f64>) -> Self {
        Self::new(format!("constant {c:?}"), move |_, _| c.clone())
    }

    /// `a(x) = −rate · x` (Ornstein–Uhlenbeck).
    pub fn linear_restoring(rate: f64) -> Self {
        Self::new(format!("linear −{rate}x"), move |_, x| x.iter().map(|v| -rate * v).collect())
    }

    /// Time-independent drift given by a periodic field.
    pub fn field(v: &VectorField) -> Self {
        let it = Interpolant::vector(v);
        Self::new("field", move |_, x| it.value(x))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (self.f)(t, x)
    }
}

/// Euler–Maruyama paths `ξ(t_{j+1}) = ξ(t_j) + a(t_j, ξ(t_j)) dt + σ Δw_j`.
#[derive(Clone, Debug)]
pub struct DiffusionPathSet {
    drift: Drift,
    sigma: f64,
    dim: usize,
    dt: f64,
    steps: usize,
    /// `[path][step][axis]`, unwrapped coordinates.
    states: Vec<f64>,
    paths: usize,
}

impl DiffusionPathSet {
    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let off = (path * (self.steps + 1) + step) * self.dim;
        &self.states[off..off + self.dim]
    }

    pub fn step_index(&self, t: f64) -> Result<usize> {
        let j = (t / self.dt).round();
        if j < 0.0 || j as usize > self.steps || (j * self.dt - t).abs() > 1e-9 * self.dt.max(t) {
            return Err(Error::config(format!("time {t} is not on the path grid")));
        }
        Ok(j as usize)
    }
}

/// Initial points: one shared point or one per path.
pub fn sample_diffusion(
    drift: &Drift,
    sigma: f64,
    x0: &[Vec<f64>],
    ensemble: &WienerEnsemble,
) -> Result<DiffusionPathSet> {
    let m = ensemble.paths();
    let dim = ensemble.dim();
    if x0.len() != 1 && x0.len() != m {
        return Err(Error::config(format!(
            "need 1 or {m} initial points, got {}",
            x0.len()
        )));
    }
    if x0.iter().any(|x| x.len() != dim) {
        return Err(Error::config("initial point dimension mismatch"));
    }
    let steps = ensemble.steps();
    let dt = ensemble.dt();
    let per_path: Vec<Result<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::with_capacity((steps + 1) * dim);
            let start = &x0[if x0.len() == 1 { 0 } else { p }];
            let mut x = start.clone();
            // x0 + Σ a dt kept apart from σ w(t), so pure noise is reproduced exactly
            let mut drifted = start.clone();
            out.extend_from_slice(&x);
            for j in 0..steps {
                let a = drift.eval(j as f64 * dt, &x);
                if a.len() != dim || a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::numerical(format!(
                        "drift {} returned {a:?} at path {p}, step {j}",
                        drift.label()
                    )));
                }
                let w = ensemble.value(p, j + 1);
                for k in 0..dim {
                    drifted[k] += a[k] * dt;
                    x[k] = drifted[k] + sigma * w[k];
                }
                out.extend_from_slice(&x);
            }
            Ok(out)
        })
        .collect();
    let mut states = Vec::with_capacity(m * (steps + 1) * dim);
    for p in per_path {
        states.extend(p?);
    }
    Ok(DiffusionPathSet {
        drift: drift.clone(),
        sigma,
        dim,
        dt,
        steps,
        states,
        paths: m,
    })
}

/// `m` independent uniform points on the unit torus, one stream per point.
pub fn uniform_torus_points(m: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|p| {
            let mut rng = path_rng(seed ^ 0x9e37_79b9_7f4a_7c15, p);
            (0..dim).map(|_| rng.gen::<f64>()).collect()
        })
        .collect()
}
