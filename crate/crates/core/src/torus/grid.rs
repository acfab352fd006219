use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on the unit flat torus `R^dim / Z^dim`.
///
/// Every axis carries the same number of points `n`; grid points are
/// `m_j = j / n` for `j = 0..n`, so the endpoint `1 ≡ 0` is not duplicated.
/// Two-dimensional data is stored with axis 0 (`x`) slowest:
/// `index = i_x * n + i_y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

pub const MIN_POINTS: usize = 8;

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::config(format!("torus dimension must be 1 or 2, got {dim}")));
        }
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size must be a power of two >= {MIN_POINTS}, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, n)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sizes(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    /// Total number of grid points.
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Per-axis integer indices of a flat index; the unused axis is 0 in 1D.
    #[inline]
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    /// Coordinates of grid point `idx` in `[0, 1)^dim` (unused axis is 0).
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.axis_indices(idx);
        let h = self.spacing();
        [i as f64 * h, j as f64 * h]
    }

    /// Signed wavenumber of a per-axis FFT index. The Nyquist index maps to `-n/2`.
    #[inline]
    pub fn signed_mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Integer wavevector of spectral index `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        let [i, j] = self.axis_indices(idx);
        if self.dim == 1 {
            [self.signed_mode(i), 0]
        } else {
            [self.signed_mode(i), self.signed_mode(j)]
        }
    }

    /// True when any axis component of the wavevector sits on the Nyquist index.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = self.n / 2;
        let [i, j] = self.axis_indices(idx);
        i == half || (self.dim == 2 && j == half)
    }

    /// Largest retained per-axis wavenumber under the 2/3 rule.
    #[inline]
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    /// Whether spectral index `idx` survives 2/3 truncation.
    #[inline]
    pub fn retained(&self, idx: usize) -> bool {
        let c = self.dealias_cutoff();
        let k = self.wavevector(idx);
        k[0].abs() <= c && k[1].abs() <= c
    }

    pub fn ensure_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            write!(f, "{}", self.n)
        } else {
            write!(f, "{}x{}", self.n, self.n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::line(12).is_err());
        assert!(TorusGrid::line(4).is_err());
        assert!(TorusGrid::new(3, 16).is_err());
        assert!(TorusGrid::square(16).is_ok());
    }

    #[test]
    fn points_exclude_endpoint() {
        let g = TorusGrid::line(8).unwrap();
        assert_eq!(g.point(0)[0], 0.0);
        assert_eq!(g.point(7)[0], 7.0 / 8.0);
        let g2 = TorusGrid::square(8).unwrap();
        assert_eq!(g2.point(9), [1.0 / 8.0, 1.0 / 8.0]);
    }

    #[test]
    fn wavevectors_are_signed() {
        let g = TorusGrid::line(8).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.wavevector(i)[0]).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!(g.is_nyquist(4));
        assert_eq!(g.dealias_cutoff(), 2);
    }
}
