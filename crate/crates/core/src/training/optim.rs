use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Adam => "adam",
            Optimizer::Sgd => "sgd",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adam" => Ok(Optimizer::Adam),
            "sgd" => Ok(Optimizer::Sgd),
            _ => Err(Error::Invalid(format!("unknown optimizer {s:?} (expected adam or sgd)"))),
        }
    }
}

/// First and second moment estimates, one pair per parameter block.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: i32,
}

impl AdamState {
    pub fn new(params: &[Matrix]) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }
}

fn check_shapes(op: &'static str, params: &[Matrix], grads: &[Matrix]) -> Result<()> {
    if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.shape() != g.shape()) {
        return Err(Error::shape(op, "gradient blocks do not match the parameters"));
    }
    Ok(())
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [Matrix], grads: &[Matrix], state: &mut AdamState, lr: f64) -> Result<()> {
    check_shapes("adam_step", params, grads)?;
    if state.m.len() != params.len() || state.m.iter().zip(params.iter()).any(|(m, p)| m.shape() != p.shape()) {
        return Err(Error::shape("adam_step", "optimizer state does not match the parameters"));
    }
    state.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.t);
    let c2 = 1.0 - ADAM_BETA2.powi(state.t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let (p, g, m, v) = (p.as_mut_slice(), g.as_slice(), m.as_mut_slice(), v.as_mut_slice());
        for k in 0..p.len() {
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Plain gradient descent step in place.
pub fn sgd_step(params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<()> {
    check_shapes("sgd_step", params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (x, d) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *x -= lr * d;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![Matrix::from_fn(2, 2, |i, j| (i + 2 * j) as f64)];
        let before = p.clone();
        let mut st = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &[Matrix::zeros(2, 2)], &mut st, 0.1).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_sign_times_lr() {
        let g = Matrix::from_rows(&[vec![0.3, -2.0, 1e-3]]).unwrap();
        let mut p = vec![Matrix::zeros(1, 3)];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[g.clone()], &mut st, 0.01).unwrap();
        for k in 0..3 {
            let gk = g.as_slice()[k];
            let expected = -0.01 * gk / (gk.abs() + ADAM_EPS);
            assert!((p[0].as_slice()[k] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let g = Matrix::from_rows(&[vec![5.0, -0.2]]).unwrap();
        let mut p = vec![Matrix::zeros(1, 2)];
        let mut st = AdamState::new(&p);
        let lr = 1e-3;
        for _ in 0..2000 {
            let before = p[0].clone();
            adam_step(&mut p, &[g.clone()], &mut st, lr).unwrap();
            let step = p[0].sub(&before);
            for s in step.as_slice() {
                assert!((s.abs() - lr).abs() < 1e-9);
            }
        }
        assert_eq!(st.steps(), 2000);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = vec![Matrix::zeros(2, 1)];
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &[Matrix::zeros(1, 2)], &mut st, 0.1).is_err());
        assert!(sgd_step(&mut p, &[], 0.1).is_err());
    }
}
