//! Symmetric positive definite band matrices and their Cholesky factor.
//!
//! With the natural row-by-row ordering of interior grid nodes the 9-point
//! stencil of a bilinear element has half-bandwidth `m + 1`, `m` being the
//! number of interior nodes per side, so a band factorization is a direct
//! sparse solve with `O(m⁴)` work.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// Lower band of a symmetric matrix. Row `i` stores columns `i - bw ..= i`.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` at `(i, j)`; entries above the diagonal are ignored so that a
    /// full symmetric scatter can be passed through unchanged.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j <= i {
            let s = self.slot(i, j);
            self.data[s] += v;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.slot(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place `L Lᵀ` factorization. Returns the index of the first
    /// non-positive pivot on failure.
    pub fn cholesky(mut self) -> Result<BandCholesky, usize> {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = self.data[self.slot(i, j)];
                let ri = self.slot(i, klo);
                let rj = self.slot(j, klo);
                for t in 0..(j - klo) {
                    s -= self.data[ri + t] * self.data[rj + t];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(i);
                    }
                    let d = self.slot(i, i);
                    self.data[d] = sqrt(s);
                } else {
                    let d = self.data[self.slot(j, j)];
                    let sl = self.slot(i, j);
                    self.data[sl] = s / d;
                }
            }
        }
        Ok(BandCholesky { factor: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    factor: BandMatrix,
}

impl BandCholesky {
    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let l = &self.factor;
        let n = l.n;
        for i in 0..n {
            let lo = i.saturating_sub(l.bw);
            let mut s = b[i];
            for j in lo..i {
                s -= l.data[l.slot(i, j)] * b[j];
            }
            b[i] = s / l.data[l.slot(i, i)];
        }
        for i in (0..n).rev() {
            b[i] /= l.data[l.slot(i, i)];
            let lo = i.saturating_sub(l.bw);
            let bi = b[i];
            for j in lo..i {
                b[j] -= l.data[l.slot(i, j)] * bi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_laplacian() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| libm::sin(i as f64)).collect();
        let mut b = a.mul_vec(&x);
        let chol = a.cholesky().unwrap();
        chol.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-11);
        }
    }

    #[test]
    fn matches_dense_solve_for_wide_band() {
        let n = 40;
        let bw = 7;
        let mut a = BandMatrix::zeros(n, bw);
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let v = if i == j {
                    20.0 + i as f64 * 0.1
                } else {
                    libm::cos((i * 7 + j * 3) as f64)
                };
                a.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let oracle = dense
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_vec(b.clone()))
            .unwrap();
        let mut x = b;
        a.cholesky().unwrap().solve(&mut x);
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_indefinite() {
        let mut a = BandMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        a.add(2, 2, 1.0);
        assert_eq!(a.cholesky().unwrap_err(), 1);
    }
}
