//! Before-training comparison of the EYS start against random starts.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::activations::Activation;
use crate::architecture::{ClassTag, Skeleton};
use crate::bounds::empirical_mse;
use crate::error::{Error, Result};
use crate::init::{derive_seed, eys_init, he_init, orthogonal_random_init};
use crate::linalg::Matrix;

/// Random scheme the EYS start is compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BaselineInit {
    #[default]
    Orth,
    He,
}

impl fmt::Display for BaselineInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineInit::Orth => "orth",
            BaselineInit::He => "he",
        })
    }
}

impl FromStr for BaselineInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "orth" => Ok(BaselineInit::Orth),
            "he" => Ok(BaselineInit::He),
            _ => Err(Error::Invalid(format!("unknown baseline {s:?} (expected orth or he)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub act: Activation,
    pub class: ClassTag,
    pub baseline: BaselineInit,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub skeleton: Skeleton,
    pub eys_mse: f64,
    pub baseline_best_mse: f64,
}

/// For each skeleton: test MSE of the EYS network fitted on `train`, and the
/// best test MSE over `trials` random initializations. Trial `t` draws from
/// a stream seeded with `derive_seed(seed, t)`, shared by all skeletons.
pub fn init_study(train: &Matrix, test: &Matrix, skeletons: &[Skeleton], cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    if cfg.trials == 0 {
        return Err(Error::Invalid("init study needs at least one trial".to_string()));
    }
    if cfg.baseline == BaselineInit::He && cfg.class.is_constrained() {
        return Err(Error::Invalid(format!(
            "He baseline cannot produce {} networks",
            cfg.class
        )));
    }
    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = skeletons
            .iter()
            .map(|skel| scope.spawn(move || init_study_row(train, test, skel, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("init study worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(rows)
}

pub fn init_study_row(train: &Matrix, test: &Matrix, skel: &Skeleton, cfg: &StudyConfig) -> Result<StudyRow> {
    let eys = eys_init(train, skel, cfg.act)?.model.with_class(cfg.class);
    let eys_mse = empirical_mse(&eys, test)?;
    let mut best = f64::INFINITY;
    for t in 0..cfg.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, t as u64));
        let model = match cfg.baseline {
            BaselineInit::Orth => orthogonal_random_init(skel, cfg.act, &mut rng, cfg.class)?,
            BaselineInit::He => he_init(skel, cfg.act, cfg.class, &mut rng)?,
        };
        best = best.min(empirical_mse(&model, test)?);
    }
    Ok(StudyRow {
        skeleton: skel.clone(),
        eys_mse,
        baseline_best_mse: best,
    })
}

/// `{n0, 65, 3}, {n0, 65, 5, 3}, …, {n0, 65, 33, 17, 9, 5, 3}`.
pub fn depth_pattern(n0: usize) -> Result<Vec<Skeleton>> {
    let inner = [33, 17, 9, 5];
    (0..=inner.len())
        .map(|k| {
            let mut dims = vec![n0, 65];
            dims.extend_from_slice(&inner[inner.len() - k..]);
            dims.push(3);
            Skeleton::new(dims)
        })
        .collect()
}

/// `{n0, n1, n2}` for `n2 = 1..=n1`.
pub fn width_sweep(n0: usize, n1: usize) -> Result<Vec<Skeleton>> {
    (1..=n1).map(|n2| Skeleton::new(vec![n0, n1, n2])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_support::gaussian_matrix as seeded;

    #[test]
    fn patterns() {
        let d = depth_pattern(514).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d[0].dims(), &[514, 65, 3]);
        assert_eq!(d[1].dims(), &[514, 65, 5, 3]);
        assert_eq!(d[4].dims(), &[514, 65, 33, 17, 9, 5, 3]);
        let w = width_sweep(514, 20).unwrap();
        assert_eq!(w.len(), 20);
        assert_eq!(w[19].dims(), &[514, 20, 20]);
    }

    #[test]
    fn more_trials_never_hurt() {
        let train = seeded(10, 30, 1);
        let test = seeded(10, 10, 2);
        let skels = width_sweep(10, 3).unwrap();
        let mut cfg = StudyConfig {
            act: Activation::hyp_act_with_sharpness(0.5).unwrap(),
            class: ClassTag::Sae,
            baseline: BaselineInit::Orth,
            trials: 1,
            seed: 3,
        };
        let one = init_study(&train, &test, &skels, &cfg).unwrap();
        cfg.trials = 20;
        let many = init_study(&train, &test, &skels, &cfg).unwrap();
        for (a, b) in one.iter().zip(&many) {
            assert!(b.baseline_best_mse <= a.baseline_best_mse);
            assert_eq!(a.eys_mse, b.eys_mse);
        }
        cfg.baseline = BaselineInit::He;
        cfg.class = ClassTag::Soae;
        assert!(init_study(&train, &test, &skels, &cfg).is_err());
    }
}
