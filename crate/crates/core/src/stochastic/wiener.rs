use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Sample moments of `w(T)` with their standard errors.
#[derive(Clone, Debug, Serialize)]
pub struct WienerDiagnostics {
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub variance: Vec<f64>,
    pub variance_se: Vec<f64>,
}

/// Reproducibility metadata written into reports.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleMeta {
    pub paths: usize,
    pub dim: usize,
    pub dt: f64,
    pub horizon: f64,
    pub sigma: f64,
    pub master_seed: u64,
}

/// `M` independent Brownian paths on a shared uniform time grid.
///
/// Path `ω` draws its Gaussian increments from a ChaCha8 stream selected by
/// `(master_seed, ω)`, step by step, so any path can be regenerated alone and
/// the ensemble does not depend on how paths are scheduled across threads.
#[derive(Clone, Debug)]
pub struct WienerEnsemble {
    dim: usize,
    dt: f64,
    steps: usize,
    sigma: f64,
    master_seed: u64,
    /// `[path][step 0..=steps][axis]`
    values: Vec<f64>,
    paths: usize,
}

pub(crate) fn path_rng(master_seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path as u64);
    rng
}

/// Draws `m` paths of dimension `dim` on `[0, t_end]` with step `dt`.
pub fn sample_wiener(m: usize, dim: usize, dt: f64, t_end: f64, master_seed: u64) -> Result<WienerEnsemble> {
    if m == 0 {
        return Err(Error::config("ensemble needs at least one path"));
    }
    if !(1..=2).contains(&dim) {
        return Err(Error::config(format!("unsupported dimension {dim}")));
    }
    let steps = crate::inviscid::step_count(t_end, dt)?;
    let stride = (steps + 1) * dim;
    let sd = dt.sqrt();
    let per_path: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(master_seed, p);
            let mut v = vec![0.0; stride];
            for j in 0..steps {
                for a in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v[(j + 1) * dim + a] = v[j * dim + a] + sd * z;
                }
            }
            v
        })
        .collect();
    Ok(WienerEnsemble {
        dim,
        dt,
        steps,
        sigma: 1.0,
        master_seed,
        values: per_path.concat(),
        paths: m,
    })
}

impl WienerEnsemble {
    /// Builds an ensemble from explicit path values `[path][step][axis]`.
    pub fn from_values(dim: usize, dt: f64, paths: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let m = paths.len();
        if m == 0 || paths[0].is_empty() {
            return Err(Error::config("empty ensemble"));
        }
        let steps = paths[0].len() - 1;
        let mut values = Vec::with_capacity(m * (steps + 1) * dim);
        for p in &paths {
            if p.len() != steps + 1 || p.iter().any(|x| x.len() != dim) {
                return Err(Error::config("ragged path values"));
            }
            if p[0].iter().any(|&x| x != 0.0) {
                return Err(Error::config("paths must start at 0"));
            }
            for x in p {
                values.extend_from_slice(x);
            }
        }
        Ok(Self {
            dim,
            dt,
            steps,
            sigma: 1.0,
            master_seed: 0,
            values,
            paths: m,
        })
    }

    /// Attaches the noise amplitude used by the shift `W^(σ)`.
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn paths(&self) -> usize {
        self.paths
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

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| j as f64 * self.dt).collect()
    }

    pub fn meta(&self) -> EnsembleMeta {
        EnsembleMeta {
            paths: self.paths,
            dim: self.dim,
            dt: self.dt,
            horizon: self.horizon(),
            sigma: self.sigma,
            master_seed: self.master_seed,
        }
    }

    /// Index of time `t` on the grid.
    pub fn step_index(&self, t: f64) -> Result<usize> {
        let j = (t / self.dt).round();
        if j < 0.0 || j as usize > self.steps || (j * self.dt - t).abs() > 1e-9 * self.dt.max(t) {
            return Err(Error::config(format!(
                "time {t} is not on the ensemble grid (dt = {}, T = {})",
                self.dt,
                self.horizon()
            )));
        }
        Ok(j as usize)
    }

    /// `w_ω(t_j)`.
    pub fn value(&self, path: usize, step: usize) -> &[f64] {
        let off = (path * (self.steps + 1) + step) * self.dim;
        &self.values[off..off + self.dim]
    }

    /// `σ w_ω(t_j)`, padded to two axes.
    pub fn shift(&self, path: usize, step: usize) -> [f64; 2] {
        let w = self.value(path, step);
        let mut s = [0.0; 2];
        for (a, x) in w.iter().enumerate() {
            s[a] = self.sigma * x;
        }
        s
    }

    /// `w_ω(t_{j+1}) − w_ω(t_j)`.
    pub fn increment(&self, path: usize, step: usize) -> Vec<f64> {
        let a = self.value(path, step);
        let b = self.value(path, step + 1);
        b.iter().zip(a).map(|(x, y)| x - y).collect()
    }

    /// Keeps the first `m` paths.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.paths {
            return Err(Error::config(format!("cannot keep {m} of {} paths", self.paths)));
        }
        let stride = (self.steps + 1) * self.dim;
        let mut out = self.clone();
        out.values.truncate(m * stride);
        out.paths = m;
        Ok(out)
    }

    /// Reorders paths: new path `i` is old path `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.paths];
        if perm.len() != self.paths || perm.iter().any(|&p| p >= self.paths || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::config("not a permutation of the path indices"));
        }
        let stride = (self.steps + 1) * self.dim;
        let mut out = self.clone();
        for (i, &p) in perm.iter().enumerate() {
            out.values[i * stride..(i + 1) * stride].copy_from_slice(&self.values[p * stride..(p + 1) * stride]);
        }
        Ok(out)
    }

    /// Mean and variance of `w(t_j)` per axis, with standard errors.
    pub fn diagnostics_at(&self, step: usize) -> WienerDiagnostics {
        let m = self.paths as f64;
        let mut d = WienerDiagnostics {
            mean: vec![0.0; self.dim],
            mean_se: vec![0.0; self.dim],
            variance: vec![0.0; self.dim],
            variance_se: vec![0.0; self.dim],
        };
        for a in 0..self.dim {
            let xs: Vec<f64> = (0..self.paths).map(|p| self.value(p, step)[a]).collect();
            let mean = xs.iter().sum::<f64>() / m;
            let c2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
            let c4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / m;
            let var = c2 * m / (m - 1.0).max(1.0);
            d.mean[a] = mean;
            d.mean_se[a] = (var / m).sqrt();
            d.variance[a] = var;
            d.variance_se[a] = ((c4 - c2 * c2).max(0.0) / m).sqrt();
        }
        d
    }

    pub fn diagnostics(&self) -> WienerDiagnostics {
        self.diagnostics_at(self.steps)
    }
}
