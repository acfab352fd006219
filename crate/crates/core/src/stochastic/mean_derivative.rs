//! Forward and backward mean derivatives estimated from sampled paths.
//!
//! The conditional expectation given the present is realized either as a
//! plain ensemble mean (trivial conditioning) or by uniform spatial binning
//! of the present state.

use serde::Serialize;

use super::diffusion::DiffusionPathSet;
use crate::error::{Error, Result};
use crate::torus::{advect_scalar, laplacian, Interpolant, ScalarField, VectorField};

/// Minimum number of samples a regression bin must hold.
pub const MIN_BIN_SAMPLES: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Bin extent for regression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BinRange {
    /// Per-axis sample minimum to maximum.
    Sample,
    /// Coordinates reduced modulo 1 onto `[0, 1)`.
    Torus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Conditioning {
    Trivial,
    Binned { bins: usize, range: BinRange },
}

/// Sample mean with standard error per component.
#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub samples: usize,
}

impl Estimate {
    /// Mean and standard error of the rows, summed in index order.
    pub fn from_samples<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut mean = vec![0.0; width];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0; width];
        for r in &rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let se = var
            .iter()
            .map(|v| {
                if n < 2 {
                    f64::INFINITY
                } else {
                    (v / (n as f64 - 1.0) / n as f64).sqrt()
                }
            })
            .collect();
        Self { mean, se, samples: n }
    }

    /// Largest `|mean − reference| / se` over components.
    pub fn z_score(&self, reference: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.se)
            .zip(reference)
            .map(|((m, s), r)| {
                let d = (m - r).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d / s
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegressionBin {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub estimate: Estimate,
}

/// Binned conditional expectation of per-sample values given positions.
#[derive(Clone, Debug)]
pub struct Regression {
    pub bins: Vec<RegressionBin>,
    assignment: Vec<usize>,
    positions: Vec<Vec<f64>>,
}

impl Regression {
    /// Bin-wise mean of `f` over the member positions, the reference a
    /// regression is compared against (removes bin-width bias).
    pub fn reference(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
        let mut sums: Vec<Vec<f64>> = Vec::new();
        let mut counts = vec![0usize; self.bins.len()];
        for (pos, &b) in self.positions.iter().zip(&self.assignment) {
            let v = f(pos);
            if sums.is_empty() {
                sums = vec![vec![0.0; v.len()]; self.bins.len()];
            }
            for (s, x) in sums[b].iter_mut().zip(&v) {
                *s += x;
            }
            counts[b] += 1;
        }
        sums.into_iter()
            .zip(counts)
            .map(|(s, c)| s.into_iter().map(|x| x / c as f64).collect())
            .collect()
    }

    /// Largest z-score over all bins against a pointwise reference.
    pub fn max_z_score(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
        self.reference(f)
            .iter()
            .zip(&self.bins)
            .map(|(r, b)| b.estimate.z_score(r))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub enum MeanDerivative {
    Mean(Estimate),
    Regression(Regression),
}

impl MeanDerivative {
    pub fn as_mean(&self) -> Option<&Estimate> {
        match self {
            Self::Mean(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_regression(&self) -> Option<&Regression> {
        match self {
            Self::Regression(r) => Some(r),
            _ => None,
        }
    }
}

/// Conditional mean of `values` given `positions` under `conditioning`.
pub fn regress(positions: Vec<Vec<f64>>, values: Vec<Vec<f64>>, conditioning: Conditioning) -> Result<MeanDerivative> {
    if positions.len() != values.len() || values.is_empty() {
        return Err(Error::estimation("positions and values must be non-empty and aligned"));
    }
    let (bins, range) = match conditioning {
        Conditioning::Trivial => {
            return Ok(MeanDerivative::Mean(Estimate::from_samples(
                values.iter().map(Vec::as_slice),
            )))
        }
        Conditioning::Binned { bins, range } => (bins, range),
    };
    if bins == 0 {
        return Err(Error::config("need at least one bin"));
    }
    let dim = positions[0].len();
    let (origin, width): (Vec<f64>, Vec<f64>) = match range {
        BinRange::Torus => (vec![0.0; dim], vec![1.0 / bins as f64; dim]),
        BinRange::Sample => (0..dim)
            .map(|a| {
                let lo = positions.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
                let hi = positions.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
                (lo, ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE))
            })
            .unzip(),
    };
    let cell = |p: &[f64]| -> usize {
        let mut idx = 0;
        for a in 0..dim {
            let x = match range {
                BinRange::Torus => p[a].rem_euclid(1.0),
                BinRange::Sample => p[a],
            };
            let j = (((x - origin[a]) / width[a]).floor().max(0.0) as usize).min(bins - 1);
            idx = idx * bins + j;
        }
        idx
    };
    let ncells = bins.pow(dim as u32);
    let assignment: Vec<usize> = positions.iter().map(|p| cell(p)).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncells];
    for (i, &c) in assignment.iter().enumerate() {
        members[c].push(i);
    }
    let sparse: Vec<String> = members
        .iter()
        .enumerate()
        .filter(|(_, m)| m.len() < MIN_BIN_SAMPLES)
        .map(|(c, m)| format!("{c} ({} samples)", m.len()))
        .collect();
    if !sparse.is_empty() {
        return Err(Error::estimation(format!(
            "regression bins below {MIN_BIN_SAMPLES} samples: {}",
            sparse.join(", ")
        )));
    }
    let bins_out = members
        .iter()
        .enumerate()
        .map(|(c, m)| {
            let mut lo = vec![0.0; dim];
            let mut rest = c;
            for a in (0..dim).rev() {
                lo[a] = origin[a] + (rest % bins) as f64 * width[a];
                rest /= bins;
            }
            let hi = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
            RegressionBin {
                lo,
                hi,
                estimate: Estimate::from_samples(m.iter().map(|&i| values[i].as_slice())),
            }
        })
        .collect();
    Ok(MeanDerivative::Regression(Regression {
        bins: bins_out,
        assignment,
        positions,
    }))
}

fn lag_indices(paths: &DiffusionPathSet, t: f64, direction: Direction, lag: usize) -> Result<(usize, usize)> {
    let j = paths.step_index(t)?;
    let lag = lag.max(1);
    match direction {
        Direction::Forward if j + lag <= paths.steps() => Ok((j, j + lag)),
        Direction::Backward if j >= lag => Ok((j - lag, j)),
        _ => Err(Error::config(format!(
            "t = {t} with lag {lag} leaves the path grid for {direction:?} differences"
        ))),
    }
}

/// Mean derivative of the process itself at `t`, with `Δt = lag · dt`.
pub fn estimate_mean_derivative(
    paths: &DiffusionPathSet,
    t: f64,
    direction: Direction,
    lag: usize,
    conditioning: Conditioning,
) -> Result<MeanDerivative> {
    let (a, b) = lag_indices(paths, t, direction, lag)?;
    let present = paths.step_index(t)?;
    let h = (b - a) as f64 * paths.dt();
    let positions = (0..paths.paths()).map(|p| paths.state(p, present).to_vec()).collect();
    let values = (0..paths.paths())
        .map(|p| {
            let (x0, x1) = (paths.state(p, a), paths.state(p, b));
            x1.iter().zip(x0).map(|(u, v)| (u - v) / h).collect()
        })
        .collect();
    regress(positions, values, conditioning)
}

/// Mean derivative of `Z(t, ξ(t))` along the paths.
pub fn mean_derivative_of_field(
    z: impl Fn(f64, &[f64]) -> f64,
    paths: &DiffusionPathSet,
    t: f64,
    direction: Direction,
    lag: usize,
    conditioning: Conditioning,
) -> Result<MeanDerivative> {
    let (a, b) = lag_indices(paths, t, direction, lag)?;
    let present = paths.step_index(t)?;
    let dt = paths.dt();
    let h = (b - a) as f64 * dt;
    let positions = (0..paths.paths()).map(|p| paths.state(p, present).to_vec()).collect();
    let values = (0..paths.paths())
        .map(|p| {
            let z1 = z(b as f64 * dt, paths.state(p, b));
            let z0 = z(a as f64 * dt, paths.state(p, a));
            vec![(z1 - z0) / h]
        })
        .collect();
    regress(positions, values, conditioning)
}

/// Time-independent band-limited `Z` as an evaluator for [`mean_derivative_of_field`].
pub fn field_evaluator(z: &ScalarField) -> impl Fn(f64, &[f64]) -> f64 {
    let it = Interpolant::scalar(z);
    move |_, x| it.value(x)[0]
}

/// `∂_t Z + (Y·∇)Z ± (σ²/2)∇²Z` on the grid, the sign `+` for the forward
/// derivative with forward regression `Y` and `−` for the backward one.
pub fn ito_prediction(
    z: &ScalarField,
    z_t: Option<&ScalarField>,
    regression: &VectorField,
    sigma: f64,
    direction: Direction,
) -> Result<ScalarField> {
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let mut out = advect_scalar(regression, z)?.add(&laplacian(z).scale(sign * 0.5 * sigma * sigma))?;
    if let Some(zt) = z_t {
        out = out.add(zt)?;
    }
    Ok(out)
}
