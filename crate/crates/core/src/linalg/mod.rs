//! Dense linear algebra: the matrix type, thin SVD, Householder QR,
//! orthonormalization and empirical covariance spectra.

mod matrix;
mod qr;
mod svd;

pub use matrix::{dot, norm, Matrix};
pub use qr::{orthonormal_completion, pi_orth, HouseholderQr};
pub use svd::{thin_svd, ThinSvd};

pub(crate) use qr::sign_of;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Spectral decomposition of the empirical covariance of a snapshot matrix
/// (one sample per column, normalization `1/S`).
#[derive(Clone, Debug)]
pub struct CovarianceSpectrum {
    pub mean: Vec<f64>,
    /// Eigenvectors as columns, ordered like `eigvals`.
    pub eigvecs: Matrix,
    /// Nonincreasing; `min(n0, S)` entries, the remaining eigenvalues are zero.
    pub eigvals: Vec<f64>,
}

impl CovarianceSpectrum {
    /// `Σ_{i >= n} λ_i` (zero-based `n`, i.e. everything past the first `n`).
    pub fn tail_sum(&self, n: usize) -> f64 {
        self.eigvals.iter().skip(n).sum()
    }

    pub fn total_variance(&self) -> f64 {
        self.eigvals.iter().sum()
    }
}

/// Mean, eigenvectors and eigenvalues of the empirical covariance of the
/// columns of `u`, computed from the thin SVD of the centered snapshots.
pub fn covariance_spectrum(u: &Matrix) -> Result<CovarianceSpectrum> {
    if u.cols() == 0 {
        return Err(Error::Invalid(
            "covariance of an empty snapshot set".to_string(),
        ));
    }
    let mean = u.row_means();
    let centered = u.sub_column(&mean);
    let svd = thin_svd(&centered)?;
    let samples = u.cols() as f64;
    let eigvals = svd.s.iter().map(|s| s * s / samples).collect();
    Ok(CovarianceSpectrum {
        mean,
        eigvecs: svd.u,
        eigvals,
    })
}

/// Matrix with i.i.d. standard normal entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}
