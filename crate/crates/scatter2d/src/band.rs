//! Banded complex-symmetric direct solver.
//!
//! The P1 Helmholtz-PML system is complex symmetric (not Hermitian); with
//! vertices ordered lexicographically the matrix is banded, so an LDL^T
//! factorization without pivoting (transpose, no conjugation) is factored
//! once per refraction index and reused across all incidence directions.

use crate::error::{Error, Result};
use crate::scalar::{s, Scalar, C};

/// Lower band of a complex symmetric matrix, column major: entry `(j+d, j)`
/// for `0 <= d <= bw` lives at `data[j*(bw+1)+d]`.
#[derive(Clone)]
pub struct BandMatrix<T: Scalar> {
    n: usize,
    bw: usize,
    data: Vec<C<T>>,
}

/// Factored form: unit lower band L and diagonal D, stored in place.
pub struct BandFactor<T: Scalar> {
    n: usize,
    bw: usize,
    data: Vec<C<T>>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![C::new(T::zero(), T::zero()); n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Accumulates into entry (i, j); only the lower triangle is stored, so
    /// callers add each off-diagonal pair once.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: C<T>) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bw, "entry outside band");
        self.data[lo * (self.bw + 1) + (hi - lo)] += v;
    }

    #[inline]
    pub fn set_diag(&mut self, i: usize, v: C<T>) {
        self.data[i * (self.bw + 1)] = v;
    }

    /// Zeroes row/column `i` and puts 1 on the diagonal (Dirichlet).
    pub fn dirichlet(&mut self, i: usize) {
        let ld = self.bw + 1;
        for d in 0..ld.min(self.n - i) {
            self.data[i * ld + d] = C::new(T::zero(), T::zero());
        }
        for j in i.saturating_sub(self.bw)..i {
            self.data[j * ld + (i - j)] = C::new(T::zero(), T::zero());
        }
        self.data[i * ld] = C::new(T::one(), T::zero());
    }

    /// y = A x using the symmetric band storage.
    pub fn matvec(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.n);
        let ld = self.bw + 1;
        let mut y = vec![C::new(T::zero(), T::zero()); self.n];
        for j in 0..self.n {
            let m = self.bw.min(self.n - 1 - j);
            let xj = x[j];
            y[j] += self.data[j * ld] * xj;
            for d in 1..=m {
                let v = self.data[j * ld + d];
                y[j + d] += v * xj;
                y[j] += v * x[j + d];
            }
        }
        y
    }

    pub fn factorize(mut self) -> Result<BandFactor<T>> {
        let ld = self.bw + 1;
        let n = self.n;
        // Pivot threshold relative to the largest diagonal magnitude.
        let scale = (0..n)
            .map(|i| self.data[i * ld].norm_sqr())
            .fold(T::zero(), |a, b| a.max(b))
            .sqrt();
        let tiny = scale * s::<T>(1e-14) + s::<T>(1e-300);
        for k in 0..n {
            let d = self.data[k * ld];
            if d.norm_sqr().sqrt() <= tiny {
                return Err(Error::SingularSystem(format!(
                    "near-zero pivot at column {k} (|d| <= {:e} of matrix scale)",
                    1e-14
                )));
            }
            let m = self.bw.min(n - 1 - k);
            for r in 1..=m {
                self.data[k * ld + r] /= d;
            }
            for c in 1..=m {
                let ljk = self.data[k * ld + c];
                if ljk.norm_sqr() == T::zero() {
                    continue;
                }
                let f = ljk * d;
                let j = k + c;
                let (head, tail) = self.data.split_at_mut(j * ld);
                let src = &head[k * ld + c..k * ld + m + 1];
                let dst = &mut tail[..m + 1 - c];
                for (t, &u) in dst.iter_mut().zip(src.iter()) {
                    *t -= f * u;
                }
            }
        }
        Ok(BandFactor {
            n,
            bw: self.bw,
            data: self.data,
        })
    }
}

impl<T: Scalar> BandFactor<T> {
    /// Solves A x = b in place (L D L^T with plain transpose).
    pub fn solve_in_place(&self, b: &mut [C<T>]) {
        assert_eq!(b.len(), self.n);
        let ld = self.bw + 1;
        for k in 0..self.n {
            let xk = b[k];
            let m = self.bw.min(self.n - 1 - k);
            for r in 1..=m {
                let l = self.data[k * ld + r];
                b[k + r] -= l * xk;
            }
        }
        for k in 0..self.n {
            b[k] /= self.data[k * ld];
        }
        for k in (0..self.n).rev() {
            let m = self.bw.min(self.n - 1 - k);
            let mut acc = b[k];
            for r in 1..=m {
                acc -= self.data[k * ld + r] * b[k + r];
            }
            b[k] = acc;
        }
    }

    pub fn solve(&self, b: &[C<T>]) -> Vec<C<T>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
