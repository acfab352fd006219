//! Deterministic Monte Carlo reductions of per-path fields.
//!
//! Paths are split into fixed chunks; each chunk is reduced with Welford's
//! update in path order and the chunks are merged in index order, so the
//! result does not depend on the number of threads.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::torus::ops::{shift_table, Field};
use crate::torus::{fft, TorusGrid};

const CHUNK: usize = 16;

/// Ensemble mean of a random field together with its pointwise standard error.
#[derive(Clone, Debug)]
pub struct McField<F> {
    pub mean: F,
    pub se: F,
    pub samples: usize,
}

impl<F: Field> McField<F> {
    /// Largest pointwise standard error.
    pub fn max_se(&self) -> f64 {
        self.se
            .slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |a: f64, b| a.max(*b))
    }
}

/// Running per-point mean and second central moment.
#[derive(Clone, Debug)]
pub(crate) struct Moments {
    n: usize,
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
}

impl Moments {
    pub(crate) fn new(ncomp: usize, len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![vec![0.0; len]; ncomp],
            m2: vec![vec![0.0; len]; ncomp],
        }
    }

    pub(crate) fn push(&mut self, sample: &[Vec<f64>]) {
        self.n += 1;
        let n = self.n as f64;
        for ((mu, m2), x) in self.mean.iter_mut().zip(&mut self.m2).zip(sample) {
            for i in 0..x.len() {
                let d = x[i] - mu[i];
                mu[i] += d / n;
                m2[i] += d * (x[i] - mu[i]);
            }
        }
    }

    pub(crate) fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for c in 0..self.mean.len() {
            for i in 0..self.mean[c].len() {
                let d = other.mean[c][i] - self.mean[c][i];
                self.mean[c][i] += d * nb / n;
                self.m2[c][i] += other.m2[c][i] + d * d * na * nb / n;
            }
        }
        self.n += other.n;
    }

    pub(crate) fn count(&self) -> usize {
        self.n
    }

    pub(crate) fn mean(&self) -> &[Vec<f64>] {
        &self.mean
    }

    pub(crate) fn se(&self) -> Vec<Vec<f64>> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|c| {
                c.iter()
                    .map(|v| {
                        if self.n < 2 {
                            f64::INFINITY
                        } else {
                            (v.max(0.0) / (n - 1.0) / n).sqrt()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub(crate) fn into_field<F: Field>(self, grid: TorusGrid) -> McField<F> {
        let se = self.se();
        McField {
            samples: self.n,
            mean: F::assemble(grid, self.mean),
            se: F::assemble(grid, se),
        }
    }
}

/// Reduces `sample(p)` over `p in 0..m`.
pub(crate) fn mc_moments(
    m: usize,
    ncomp: usize,
    len: usize,
    sample: impl Fn(usize) -> Vec<Vec<f64>> + Sync,
) -> Moments {
    let chunks: Vec<Moments> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(ncomp, len);
            for p in c * CHUNK..((c + 1) * CHUNK).min(m) {
                acc.push(&sample(p));
            }
            acc
        })
        .collect();
    let mut total = Moments::new(ncomp, len);
    for c in &chunks {
        total.merge(c);
    }
    total
}

/// Fixed-order mean of per-path spectra, chunked like [`mc_moments`].
pub(crate) fn mean_spectra(
    m: usize,
    ncomp: usize,
    len: usize,
    sample: impl Fn(usize) -> Vec<Vec<Complex64>> + Sync,
) -> Vec<Vec<Complex64>> {
    let chunks: Vec<Vec<Vec<Complex64>>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![vec![Complex64::new(0.0, 0.0); len]; ncomp];
            for p in c * CHUNK..((c + 1) * CHUNK).min(m) {
                for (a, s) in acc.iter_mut().zip(sample(p)) {
                    for (x, y) in a.iter_mut().zip(s) {
                        *x += y;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![vec![Complex64::new(0.0, 0.0); len]; ncomp];
    for c in chunks {
        for (a, s) in total.iter_mut().zip(c) {
            for (x, y) in a.iter_mut().zip(s) {
                *x += y;
            }
        }
    }
    let inv = 1.0 / m as f64;
    for a in total.iter_mut() {
        for x in a.iter_mut() {
            *x *= inv;
        }
    }
    total
}

/// Component spectra of a field.
pub(crate) fn spectra<F: Field>(f: &F) -> Vec<Vec<Complex64>> {
    let grid = f.grid();
    f.slices().iter().map(|s| fft::forward_real(&grid, s)).collect()
}

/// Samples of `m ↦ f(m + x)` from precomputed spectra.
pub(crate) fn shifted_samples(grid: &TorusGrid, spec: &[Vec<Complex64>], x: &[f64]) -> Vec<Vec<f64>> {
    let table = shift_table(grid, x);
    spec.iter()
        .map(|c| {
            let s: Vec<Complex64> = c.iter().zip(&table).map(|(a, b)| a * b).collect();
            fft::inverse_real(grid, &s)
        })
        .collect()
}

/// Spectra of `m ↦ f(m + x)`.
pub(crate) fn shifted_spectra(grid: &TorusGrid, spec: &[Vec<Complex64>], x: &[f64]) -> Vec<Vec<Complex64>> {
    let table = shift_table(grid, x);
    spec.iter()
        .map(|c| c.iter().zip(&table).map(|(a, b)| a * b).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_moments_match_direct() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let m = mc_moments(xs.len(), 1, 1, |p| vec![vec![xs[p]]]);
        let mean = xs.iter().sum::<f64>() / 50.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 49.0;
        assert!((m.mean()[0][0] - mean).abs() < 1e-14);
        assert!((m.se()[0][0] - (var / 50.0).sqrt()).abs() < 1e-14);
        assert_eq!(m.count(), 50);
    }
}
