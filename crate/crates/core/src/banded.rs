//! Symmetric positive definite banded matrices and their Cholesky factors.

use crate::error::{Error, Result};

/// Lower band storage: `band[i][k]` holds `A[i][i − k]`, `k = 0..=bw`.
#[derive(Debug, Clone)]
pub(crate) struct SymBanded {
    bw: usize,
    band: Vec<Vec<f64>>,
}

impl SymBanded {
    pub(crate) fn zeros(n: usize, bw: usize) -> Self {
        Self {
            bw,
            band: vec![vec![0.0; bw + 1]; n],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.band.len()
    }

    /// Adds `v` to `A[i][j]` (and its mirror); requires `|i − j| <= bw`.
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bw);
        self.band[hi][hi - lo] += v;
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.band.iter_mut().flatten().for_each(|v| *v *= factor);
    }

    #[cfg(test)]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            0.0
        } else {
            self.band[hi][hi - lo]
        }
    }

    #[cfg(test)]
    pub(crate) fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] += self.band[i][0] * x[i];
            for k in 1..=self.bw.min(i) {
                let a = self.band[i][k];
                y[i] += a * x[i - k];
                y[i - k] += a * x[i];
            }
        }
        y
    }

    /// In-place `A = L Lᵀ`; fails if a pivot is not positive.
    pub(crate) fn cholesky(mut self) -> Result<BandedCholesky> {
        let n = self.len();
        let bw = self.bw;
        for i in 0..n {
            for k in (1..=bw.min(i)).rev() {
                // L[i][j], j = i − k
                let j = i - k;
                let mut s = self.band[i][k];
                for m in 1..=bw.min(j) {
                    // L[i][j−m] L[j][j−m]
                    if k + m <= bw {
                        s -= self.band[i][k + m] * self.band[j][m];
                    }
                }
                self.band[i][k] = s / self.band[j][0];
            }
            let mut d = self.band[i][0];
            for k in 1..=bw.min(i) {
                d -= self.band[i][k] * self.band[i][k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "banded matrix is not positive definite (pivot {d:e} at row {i})"
                )));
            }
            self.band[i][0] = d.sqrt();
        }
        Ok(BandedCholesky { factor: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    factor: SymBanded,
}

impl BandedCholesky {
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.factor.band;
        let bw = self.factor.bw;
        let n = l.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 1..=bw.min(i) {
                s -= l[i][k] * y[i - k];
            }
            y[i] = s / l[i][0];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in 1..=bw.min(n - 1 - i) {
                s -= l[i + k][k] * y[i + k];
            }
            y[i] = s / l[i][0];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pentadiagonal_system() {
        let n = 40;
        let mut a = SymBanded::zeros(n, 4);
        for i in 0..n {
            a.add(i, i, 10.0 + i as f64 * 0.1);
            for k in 1..=4 {
                if i >= k {
                    a.add(i, i - k, 1.0 / (k as f64 + 1.0) + 0.01 * i as f64);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul(&x);
        let sol = a.clone().cholesky().unwrap().solve(&b);
        for (p, q) in sol.iter().zip(&x) {
            assert!((p - q).abs() < 1e-12);
        }
        assert_eq!(a.get(0, 30), 0.0);
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = SymBanded::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(2, 2, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_err());
    }
}
