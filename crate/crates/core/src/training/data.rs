use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Global min-max scaling `x ↦ (x − lo)/(hi − lo)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lo: f64,
    pub hi: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { lo: 0.0, hi: 1.0 };

    /// Scans every entry of `u`. Constant data yields the identity scaling.
    pub fn fit(u: &Matrix) -> Self {
        let (lo, hi) = u
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if !(hi > lo) {
            warn!("min-max normalization of constant data; leaving values unchanged");
            return Normalization::IDENTITY;
        }
        Normalization { lo, hi }
    }

    pub fn scale(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn apply(&self, u: &Matrix) -> Matrix {
        let w = self.scale();
        u.map(|x| (x - self.lo) / w)
    }

    pub fn invert(&self, u: &Matrix) -> Matrix {
        let w = self.scale();
        u.map(|x| x * w + self.lo)
    }
}

/// Normalizes `u` by its own global range.
pub fn minmax_normalize(u: &Matrix) -> (Matrix, Normalization) {
    let norm = Normalization::fit(u);
    (norm.apply(u), norm)
}

/// Column indices of a train/validation/test partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..samples` cut into `⌊S/2⌋`, `⌊S/4⌋` and the remainder.
pub fn split(samples: usize, seed: u64) -> Result<Split> {
    if samples < 4 {
        return Err(Error::Invalid(format!("need at least 4 samples to split, got {samples}")));
    }
    let mut idx: Vec<usize> = (0..samples).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = samples / 2;
    let n_val = samples / 4;
    Ok(Split {
        train: idx[..n_train].to_vec(),
        val: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..].to_vec(),
    })
}

/// Split snapshot matrices, normalized with the training-set range.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Matrix,
    pub val: Matrix,
    pub test: Matrix,
    pub normalization: Normalization,
    pub split: Split,
}

pub fn prepare(u: &Matrix, seed: u64) -> Result<PreparedData> {
    let split = split(u.cols(), seed)?;
    let raw_train = u.select_columns(&split.train);
    let normalization = Normalization::fit(&raw_train);
    Ok(PreparedData {
        train: normalization.apply(&raw_train),
        val: normalization.apply(&u.select_columns(&split.val)),
        test: normalization.apply(&u.select_columns(&split.test)),
        normalization,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_range_scales_by_ten() {
        let u = Matrix::from_fn(2, 6, |i, j| ((i * 6 + j) % 11) as f64);
        let (n, norm) = minmax_normalize(&u);
        assert_eq!(norm, Normalization { lo: 0.0, hi: 10.0 });
        for (a, b) in n.as_slice().iter().zip(u.as_slice()) {
            assert!((a - b / 10.0).abs() < 1e-16);
        }
    }

    #[test]
    fn roundtrip_and_constant_data() {
        let u = Matrix::from_fn(3, 4, |i, j| (i as f64 - 1.3) * (j as f64 + 0.7));
        let (n, norm) = minmax_normalize(&u);
        assert!(norm.invert(&n).sub(&u).max_abs() <= 1e-12);
        assert!(n.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
        let c = Matrix::from_fn(2, 3, |_, _| 4.0);
        let (nc, normc) = minmax_normalize(&c);
        assert_eq!(nc, c);
        assert_eq!(normc, Normalization::IDENTITY);
    }

    #[test]
    fn test_data_can_leave_unit_interval() {
        let train = Matrix::from_rows(&[vec![0.0, 1.0, 2.0]]).unwrap();
        let norm = Normalization::fit(&train);
        let test = Matrix::from_rows(&[vec![3.0]]).unwrap();
        assert_eq!(norm.apply(&test).get(0, 0), 1.5);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split(400, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (200, 100, 100));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..400).collect::<Vec<_>>());
        assert_eq!(split(400, 0).unwrap(), s);
        assert_ne!(split(400, 1).unwrap(), s);
        let odd = split(7, 3).unwrap();
        assert_eq!((odd.train.len(), odd.val.len(), odd.test.len()), (3, 1, 3));
        assert!(split(3, 0).is_err());
    }
}
