//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use super::matrix::{dot, Matrix};
use super::qr::orthonormal_completion;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;
/// Pairs whose cosine exceeds this are rotated.
const ROTATION_THRESHOLD: f64 = 1e-15;
/// Convergence requirement checked when the sweep cap is hit.
const CONVERGENCE_TOL: f64 = 1e-12;

/// `A = U diag(s) Vᵀ` with `k = min(m, n)` columns in `U` and `V`.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl ThinSvd {
    /// `U diag(s) Vᵀ` truncated to the leading `rank` triplets.
    pub fn truncated(&self, rank: usize) -> Matrix {
        let rank = rank.min(self.s.len());
        let mut us = self.u.columns(0, rank);
        for i in 0..us.rows() {
            for (j, s) in self.s.iter().take(rank).enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul_tr(&self.v.columns(0, rank))
    }

    pub fn reconstruct(&self) -> Matrix {
        self.truncated(self.s.len())
    }

    /// Number of singular values above `rel_tol * s[0]`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&s| s > rel_tol * top).count()
    }
}

/// Thin singular value decomposition.
///
/// Singular values come out nonincreasing; each singular-vector pair is
/// signed so that the largest-magnitude entry of the left vector is positive.
/// Left vectors belonging to exactly-zero singular values are filled in with
/// an orthonormal completion so that `U` always has orthonormal columns.
pub fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    a.ensure_finite()?;
    if a.rows() >= a.cols() {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose())?;
        let mut svd = ThinSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
        fix_signs(&mut svd);
        Ok(svd)
    }
}

fn jacobi_tall(a: &Matrix) -> Result<ThinSvd> {
    let (m, n) = a.shape();
    // Work on columns stored contiguously.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    // Columns below roundoff of the whole matrix carry no direction; they are
    // flushed to zero instead of being rotated forever. Rotations preserve the
    // Frobenius norm, so the threshold stays fixed.
    let negligible = f64::EPSILON * f64::EPSILON * norms.iter().sum::<f64>();

    let mut converged = false;
    let mut worst = 0.0;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        worst = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                for k in [p, q] {
                    if norms[k] != 0.0 && norms[k] <= negligible {
                        cols[k].fill(0.0);
                        norms[k] = 0.0;
                    }
                }
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                let cosine = gamma.abs() / (alpha * beta).sqrt();
                worst = worst.max(cosine);
                if cosine <= ROTATION_THRESHOLD {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
                norms[p] = dot(&cols[p], &cols[p]);
                norms[q] = dot(&cols[q], &cols[q]);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && worst > CONVERGENCE_TOL {
        return Err(Error::SvdNoConvergence {
            rows: m,
            cols: n,
            sweeps: MAX_SWEEPS,
            residual: worst,
        });
    }

    let sigma: Vec<f64> = norms.iter().map(|v| v.sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: ties keep sweep order.
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let s: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    let nonzero = s.iter().take_while(|&&x| x > 0.0).count();
    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        if dst < nonzero {
            let inv = 1.0 / sigma[src];
            let uc: Vec<f64> = cols[src].iter().map(|x| x * inv).collect();
            u.set_col(dst, &uc);
        }
        v.set_col(dst, &vcols[src]);
    }
    if nonzero < n {
        let head = u.columns(0, nonzero);
        let tail = orthonormal_completion(&head, n - nonzero);
        for j in 0..n - nonzero {
            u.set_col(nonzero + j, &tail.col(j));
        }
    }
    let mut svd = ThinSvd { u, s, v };
    fix_signs(&mut svd);
    Ok(svd)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Index of the first entry of largest magnitude.
pub(crate) fn argmax_abs(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.abs() > values[best].abs() {
            best = i;
        }
    }
    best
}

fn fix_signs(svd: &mut ThinSvd) {
    for j in 0..svd.s.len() {
        let col = svd.u.col(j);
        if col[argmax_abs(&col)] < 0.0 {
            for i in 0..svd.u.rows() {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
            for i in 0..svd.v.rows() {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_support::gaussian_matrix;

    fn check_invariants(a: &Matrix, svd: &ThinSvd) {
        let k = a.rows().min(a.cols());
        assert_eq!(svd.s.len(), k);
        assert_eq!(svd.u.shape(), (a.rows(), k));
        assert_eq!(svd.v.shape(), (a.cols(), k));
        for w in svd.s.windows(2) {
            assert!(w[0] >= w[1] && w[1] >= 0.0);
        }
        assert!(svd.u.orthonormality_defect() <= 1e-10);
        assert!(svd.v.orthonormality_defect() <= 1e-10);
        let resid = a.sub(&svd.reconstruct()).frobenius_norm();
        assert!(resid <= 1e-10 * a.frobenius_norm().max(1.0), "residual {resid}");
    }

    #[test]
    fn diagonal_matrix() {
        let a = Matrix::diag(&[3.0, 2.0]);
        let svd = thin_svd(&a).unwrap();
        assert_eq!(svd.s, vec![3.0, 2.0]);
        assert!(svd.u.sub(&Matrix::identity(2)).max_abs() < 1e-15);
        assert!(svd.v.sub(&Matrix::identity(2)).max_abs() < 1e-15);
        check_invariants(&a, &svd);
    }

    #[test]
    fn zero_matrix() {
        let a = Matrix::zeros(4, 3);
        let svd = thin_svd(&a).unwrap();
        assert_eq!(svd.s, vec![0.0; 3]);
        check_invariants(&a, &svd);
    }

    #[test]
    fn random_tall_and_wide() {
        let a = gaussian_matrix(7, 4, 42);
        check_invariants(&a, &thin_svd(&a).unwrap());
        let b = gaussian_matrix(3, 8, 43);
        check_invariants(&b, &thin_svd(&b).unwrap());
    }

    #[test]
    fn rank_one_and_repeated_columns() {
        let v = [1.0, -2.0, 0.5, 3.0];
        let a = Matrix::from_fn(4, 5, |i, j| v[i] * (j as f64 - 1.5));
        let svd = thin_svd(&a).unwrap();
        check_invariants(&a, &svd);
        assert_eq!(svd.numerical_rank(1e-12), 1);
    }

    #[test]
    fn roundoff_level_columns_converge() {
        // Rank-deficient products leave columns that are pure rounding noise
        // after orthogonalization.
        for seed in 0..40 {
            let (m, n, r) = (17, 12, 3 + (seed as usize % 9));
            let a = gaussian_matrix(m, r, 2 * seed).matmul(&gaussian_matrix(r, n, 2 * seed + 1)).map(|x| x.tanh());
            let a = a.sub_column(&a.row_means());
            let a = Matrix::hstack(&[&a, &a.columns(0, 2).scale(1e-9)]).columns(0, n);
            let svd = thin_svd(&a).unwrap();
            check_invariants(&a, &svd);
            let b = gaussian_matrix(m, r, seed).matmul(&gaussian_matrix(r, n, seed + 100));
            check_invariants(&b, &thin_svd(&b).unwrap());
        }
    }

    #[test]
    fn underflowing_column_norms_converge() {
        // Hidden layer from an initialization on rank-deficient data; one
        // column's squared norm ends up subnormal during the sweeps.
        let cols: Vec<Vec<f64>> = include_str!("../../testdata/svd_underflow_columns.csv")
            .lines()
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        let a = Matrix::from_columns(&cols).unwrap();
        assert_eq!(a.shape(), (17, 12));
        let svd = thin_svd(&a).unwrap();
        check_invariants(&a, &svd);
    }

    #[test]
    fn deterministic() {
        let a = gaussian_matrix(12, 6, 9);
        let s1 = thin_svd(&a).unwrap();
        let s2 = thin_svd(&a).unwrap();
        assert_eq!(s1.u, s2.u);
        assert_eq!(s1.s, s2.s);
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = Matrix::zeros(2, 2);
        a[(1, 0)] = f64::INFINITY;
        assert!(thin_svd(&a).is_err());
    }
}
