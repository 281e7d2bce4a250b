//! Symmetric banded matrices with Cholesky factorization.
//!
//! The joint precision couples the three parameters inside a bin and
//! same-type parameters of adjacent bins, so in bin-major order it has
//! half-bandwidth 3. Storage holds the lower band by diagonal: entry
//! (i, i − d) lives at `data[d * n + i]` for 0 ≤ d ≤ hw.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    hw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, hw: usize) -> Self {
        SymBanded {
            n,
            hw,
            data: vec![0.0; (hw + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.hw
    }

    #[inline]
    fn idx(&self, d: usize, i: usize) -> usize {
        d * self.n + i
    }

    /// Entry (i, j); zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.hw {
            0.0
        } else {
            self.data[self.idx(d, hi)]
        }
    }

    /// Set entry (i, j) (and its mirror). Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.hw, "({i},{j}) outside half-bandwidth {}", self.hw);
        let idx = self.idx(d, hi);
        self.data[idx] = v;
    }

    /// Add to entry (i, j) (and its mirror). Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.hw, "({i},{j}) outside half-bandwidth {}", self.hw);
        let idx = self.idx(d, hi);
        self.data[idx] += v;
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Banded Cholesky A = L Lᵀ. Fails if A is not positive definite.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let hw = self.hw;
        let mut l = SymBanded::zeros(n, hw);
        for j in 0..n {
            let lo = j.saturating_sub(hw);
            let mut diag = self.get(j, j);
            for k in lo..j {
                let v = l.get(j, k);
                diag -= v * v;
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::numerical(format!(
                    "Cholesky breakdown at pivot {j}: {diag}"
                )));
            }
            let dsqrt = diag.sqrt();
            l.set(j, j, dsqrt);
            let hi = (j + hw + 1).min(n);
            for i in (j + 1)..hi {
                let mut sum = self.get(i, j);
                let klo = lo.max(i.saturating_sub(hw));
                for k in klo..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, sum / dsqrt);
            }
        }
        Ok(BandedCholesky { l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: SymBanded,
}

impl BandedCholesky {
    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let hw = self.l.hw;
        assert_eq!(b.len(), n);
        // Forward: L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(hw);
            let mut v = y[i];
            for k in lo..i {
                v -= self.l.get(i, k) * y[k];
            }
            y[i] = v / self.l.get(i, i);
        }
        // Backward: Lᵀ x = y
        let mut x = y;
        for i in (0..n).rev() {
            let hi = (i + hw + 1).min(n);
            let mut v = x[i];
            for k in (i + 1)..hi {
                v -= self.l.get(k, i) * x[k];
            }
            x[i] = v / self.l.get(i, i);
        }
        x
    }

    /// Column j of A⁻¹.
    pub fn inverse_column(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.l.n];
        e[j] = 1.0;
        self.solve(&e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// Build a random SPD banded matrix as L Lᵀ + small diagonal.
    fn random_spd(n: usize, hw: usize, rng: &mut impl Rng) -> SymBanded {
        let mut l = SymBanded::zeros(n, hw);
        for i in 0..n {
            for j in i.saturating_sub(hw)..=i {
                if i == j {
                    l.set(i, j, 0.5 + rng.random::<f64>());
                } else {
                    l.set(i, j, rng.random::<f64>() - 0.5);
                }
            }
        }
        let mut a = SymBanded::zeros(n, hw);
        for i in 0..n {
            for j in i.saturating_sub(hw)..=i {
                let mut v = 0.0;
                for k in 0..=j.min(i) {
                    v += l.get(i, k) * l.get(j, k);
                }
                a.set(i, j, v);
            }
        }
        a
    }

    fn dense_matvec(a: &SymBanded, x: &[f64]) -> Vec<f64> {
        let n = a.n();
        (0..n)
            .map(|i| (0..n).map(|j| a.get(i, j) * x[j]).sum())
            .collect()
    }

    #[test]
    fn factor_and_solve_round_trip() {
        let mut rng = crate::rng::stream_rng(31, 0);
        for &(n, hw) in &[(1usize, 0usize), (4, 1), (15, 3), (60, 3), (33, 5)] {
            let a = random_spd(n, hw, &mut rng);
            let chol = a.cholesky().unwrap();
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = dense_matvec(&a, &x_true);
            let x = chol.solve(&b);
            for (got, want) in x.iter().zip(&x_true) {
                assert_relative_eq!(got, want, max_relative = 1e-9, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn inverse_columns_give_identity() {
        let mut rng = crate::rng::stream_rng(32, 0);
        let a = random_spd(12, 3, &mut rng);
        let chol = a.cholesky().unwrap();
        for j in 0..12 {
            let col = chol.inverse_column(j);
            let ej = dense_matvec(&a, &col);
            for (i, v) in ej.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(*v, want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn indefinite_matrix_fails() {
        let mut a = SymBanded::zeros(3, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, -2.0);
        a.set(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn out_of_band_get_is_zero() {
        let a = SymBanded::zeros(5, 2);
        assert_eq!(a.get(0, 4), 0.0);
        assert_eq!(a.get(4, 0), 0.0);
    }
}
