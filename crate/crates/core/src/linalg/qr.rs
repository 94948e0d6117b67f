//! Householder QR and the orthonormalization map built on it.

use super::matrix::{dot, Matrix};

/// Compact Householder factorization `A = Q R` of an `m x n` matrix, `m >= n`,
/// normalized so that `diag(R) >= 0`.
#[derive(Clone, Debug)]
pub struct HouseholderQr {
    rows: usize,
    cols: usize,
    /// One reflector per column; `None` when the column needed no reflection.
    /// Entry `k` holds the nonzero tail `v[k..m]`.
    reflectors: Vec<Option<Vec<f64>>>,
    /// Column sign flips applied after the reflections (`±1`).
    signs: Vec<f64>,
    r: Matrix,
}

/// Sign convention shared with the taped construction: `+1` for zero.
#[inline]
pub(crate) fn sign_of(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

impl HouseholderQr {
    pub fn new(a: &Matrix) -> Self {
        let (m, n) = a.shape();
        assert!(m >= n, "Householder QR needs rows >= cols, got {m}x{n}");
        let mut r = a.clone();
        let mut reflectors = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for k in 0..n {
            let x: Vec<f64> = (k..m).map(|i| r.get(i, k)).collect();
            let norm = dot(&x, &x).sqrt();
            // A length-1 tail only needs a sign; a zero tail needs nothing.
            if m - k == 1 || norm == 0.0 {
                reflectors.push(None);
                signs.push(sign_of(x[0]));
                continue;
            }
            let s = sign_of(x[0]);
            let mut v = x;
            v[0] += s * norm;
            let vv = dot(&v, &v);
            for j in k..n {
                let proj: f64 = (k..m).map(|i| v[i - k] * r.get(i, j)).sum::<f64>() * 2.0 / vv;
                for i in k..m {
                    r[(i, j)] -= proj * v[i - k];
                }
            }
            for i in k + 1..m {
                r[(i, k)] = 0.0;
            }
            reflectors.push(Some(v));
            // The reflection leaves -s*norm on the diagonal.
            signs.push(-s);
        }
        for (k, s) in signs.iter().enumerate() {
            for j in 0..n {
                r[(k, j)] *= s;
            }
        }
        let r = r.row_range(0, n);
        HouseholderQr {
            rows: m,
            cols: n,
            reflectors,
            signs,
            r,
        }
    }

    /// Applies `H_0 H_1 ... H_{n-1}` to `x` (an `m x p` matrix) in place.
    fn apply_reflections(&self, x: &mut Matrix) {
        let m = self.rows;
        for (k, refl) in self.reflectors.iter().enumerate().rev() {
            let Some(v) = refl else { continue };
            let vv = dot(v, v);
            for j in 0..x.cols() {
                let proj: f64 = (k..m).map(|i| v[i - k] * x.get(i, j)).sum::<f64>() * 2.0 / vv;
                for i in k..m {
                    x[(i, j)] -= proj * v[i - k];
                }
            }
        }
    }

    /// Thin orthonormal factor (`m x n`).
    pub fn q(&self) -> Matrix {
        let mut q = Matrix::eye(self.rows, self.cols);
        self.apply_reflections(&mut q);
        for i in 0..self.rows {
            for (j, s) in self.signs.iter().enumerate() {
                q[(i, j)] *= s;
            }
        }
        q
    }

    /// Upper-triangular factor with nonnegative diagonal (`n x n`).
    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// Columns `n..n+extra` of the full orthogonal factor: an orthonormal
    /// basis of (part of) the orthogonal complement of `span(Q)`.
    pub fn complement(&self, extra: usize) -> Matrix {
        assert!(
            self.cols + extra <= self.rows,
            "complement of {} columns in R^{} cannot have {extra} more",
            self.cols,
            self.rows
        );
        let mut e = Matrix::zeros(self.rows, extra);
        for c in 0..extra {
            e[(self.cols + c, c)] = 1.0;
        }
        self.apply_reflections(&mut e);
        e
    }
}

/// Orthonormalization map: the Q factor of the thin Householder QR of `a`
/// with nonnegative `R` diagonal.
///
/// The output has orthonormal columns and its span contains `span(a)`, with
/// equality when `a` has full column rank. Panics when `a` has more columns
/// than rows.
pub fn pi_orth(a: &Matrix) -> Matrix {
    HouseholderQr::new(a).q()
}

/// Extends an orthonormal `m x r` basis by `extra` orthonormal columns spanning
/// directions orthogonal to it.
pub fn orthonormal_completion(basis: &Matrix, extra: usize) -> Matrix {
    if basis.cols() == 0 {
        return Matrix::eye(basis.rows(), extra);
    }
    HouseholderQr::new(basis).complement(extra)
}
