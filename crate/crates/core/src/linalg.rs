//! Dense linear algebra kernel: LU with partial pivoting and a 1-norm
//! condition estimator.
//!
//! The collocation systems are dense, square and of moderate size
//! (N+1 <= ~600), so a plain in-place factorization is both the simplest
//! and an exactly reproducible choice. The factorization also provides the
//! transposed solve needed by the Hager-Higham estimator for
//! ||A^{-1}||_1, so conditioning can be monitored every step without a
//! second factorization.

#![allow(clippy::needless_range_loop)]

use crate::error::Error;
use crate::Result;

/// Dense square matrix in row-major storage.
#[derive(Debug, Clone)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = SquareMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row length must equal matrix order");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0_f64;
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += self.data[i * n + j].abs();
            }
            best = best.max(s);
        }
        best
    }

    /// Factor the matrix in place (the original is consumed).
    pub fn lu(self) -> Result<LuFactors> {
        LuFactors::factor(self)
    }
}

/// LU factorization with partial pivoting: PA = LU.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// Packed L (unit lower, below diagonal) and U (upper incl. diagonal).
    lu: Vec<f64>,
    /// Row permutation: pivot row chosen at elimination step k.
    piv: Vec<usize>,
    /// 1-norm of the matrix before factorization.
    a_norm: f64,
}

impl LuFactors {
    fn factor(a: SquareMatrix) -> Result<Self> {
        let n = a.n;
        let a_norm = a.one_norm();
        let mut lu = a.data;
        let mut piv = vec![0usize; n];

        for k in 0..n {
            // pivot search in column k
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularSystem(format!("zero pivot at column {k}")));
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= factor * lu[k * n + j];
                    }
                }
            }
        }
        Ok(LuFactors { n, lu, piv, a_norm })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        // forward: L y = Pb
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solve A^T x = b using the same factors: A^T = U^T L^T P.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        // forward: U^T y = b
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        // backward: L^T z = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[j * n + i] * x[j];
            }
            x[i] = s;
        }
        // x = P^T z: undo the row swaps in reverse order
        for k in (0..n).rev() {
            x.swap(k, self.piv[k]);
        }
        x
    }

    /// Hager-Higham estimate of the 1-norm condition number
    /// cond_1(A) = ||A||_1 ||A^{-1}||_1.
    ///
    /// The estimate is a lower bound on the true condition number, in
    /// practice within a small factor of it.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0_f64;
        let mut visited = vec![false; n];
        for _ in 0..5 {
            let y = self.solve(&x);
            let y_norm: f64 = y.iter().map(|v| v.abs()).sum();
            est = est.max(y_norm);
            let xi: Vec<f64> = y
                .iter()
                .map(|v| if *v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            let z = self.solve_transpose(&xi);
            let (mut j_best, mut z_best) = (0usize, f64::NEG_INFINITY);
            for (j, zj) in z.iter().enumerate() {
                if zj.abs() > z_best {
                    z_best = zj.abs();
                    j_best = j;
                }
            }
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if z_best <= zx || visited[j_best] {
                break;
            }
            visited[j_best] = true;
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j_best] = 1.0;
        }
        self.a_norm * est
    }
}
