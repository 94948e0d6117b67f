//! Linear-reduction reference (POD) and reconstruction-error bounds, all
//! evaluated under the empirical law of a snapshot matrix.

use crate::activations::Activation;
use crate::architecture::{ClassTag, Skeleton, SymmetricAutoencoder};
use crate::error::{Error, Result};
use crate::init::eys_init;
use crate::linalg::{covariance_spectrum, Matrix};

/// Optimal affine rank-`n` reduction of a snapshot set.
#[derive(Clone, Debug)]
pub struct Pod {
    /// `V*`, `n0 x n` with orthonormal columns.
    pub basis: Matrix,
    /// `q*`, the sample mean.
    pub mean: Vec<f64>,
    /// Mean squared projection error over the snapshots.
    pub error: f64,
}

/// `(1/S) Σ_i ‖u_i − [V Vᵀ(u_i − q) + q]‖²`.
pub fn projection_error(u: &Matrix, basis: &Matrix, shift: &[f64]) -> f64 {
    let centered = u.sub_column(shift);
    let proj = basis.matmul(&basis.tr_matmul(&centered));
    centered.sub(&proj).sum_squares() / u.cols() as f64
}

pub fn pod(u: &Matrix, n: usize) -> Result<Pod> {
    if n == 0 || n >= u.rows() {
        return Err(Error::Invalid(format!(
            "reduced dimension must lie in 1..{}, got {n}",
            u.rows()
        )));
    }
    let spec = covariance_spectrum(u)?;
    let mut basis = spec.eigvecs.columns(0, n.min(spec.eigvecs.cols()));
    if basis.cols() < n {
        let extra = crate::linalg::orthonormal_completion(&basis, n - basis.cols());
        basis = Matrix::hstack(&[&basis, &extra]);
    }
    let error = projection_error(u, &basis, &spec.mean);
    Ok(Pod {
        basis,
        mean: spec.mean,
        error,
    })
}

/// Tail sum `Σ_{i>n1} λ_i` of the empirical covariance: no symmetric
/// autoencoder with first hidden width `n1` reconstructs `u` better.
pub fn linear_lower_bound(u: &Matrix, n1: usize) -> Result<f64> {
    if n1 >= u.rows() {
        return Err(Error::Invalid(format!(
            "first hidden width {n1} must be below the input width {}",
            u.rows()
        )));
    }
    Ok(covariance_spectrum(u)?.tail_sum(n1))
}

/// `(1/S) Σ_i ‖u_i − R(u_i)‖²`.
pub fn empirical_mse(model: &SymmetricAutoencoder, u: &Matrix) -> Result<f64> {
    if u.cols() == 0 {
        return Err(Error::Invalid("empty snapshot set".to_string()));
    }
    Ok(model.reconstruct(u)?.sub(u).sum_squares() / u.cols() as f64)
}

/// Per-level terms and totals of the orthogonal-network sandwich.
#[derive(Clone, Debug)]
pub struct LayerwiseBounds {
    /// Mean projection error at level `k` (before weighting), `k = 0..l`.
    pub projection_errors: Vec<f64>,
    /// `Lip(ρ)^{-2k}` times the projection error.
    pub lower_terms: Vec<f64>,
    /// `Lip(ρ⁻¹)^{2k}` times the projection error.
    pub upper_terms: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub mse: f64,
}

/// Lower and upper bounds on the empirical MSE of an SOAE, one term per layer.
pub fn layerwise_bounds(model: &SymmetricAutoencoder, u: &Matrix) -> Result<LayerwiseBounds> {
    if model.class() != ClassTag::Soae {
        return Err(Error::Invalid(format!(
            "layerwise bounds apply to SOAE models only, got {}",
            model.class()
        )));
    }
    let trajectory = model.hidden_trajectory(u)?;
    let (lip, lip_inv) = model.activation().lipschitz_pair();
    let pairs = model.orthogonal_pairs()?;
    let mut projection_errors = Vec::with_capacity(pairs.len());
    let mut lower_terms = Vec::with_capacity(pairs.len());
    let mut upper_terms = Vec::with_capacity(pairs.len());
    for (k, (v, b)) in pairs.iter().enumerate() {
        let err = projection_error(&trajectory[k], v, b);
        projection_errors.push(err);
        lower_terms.push(lip.powi(-2 * k as i32) * err);
        upper_terms.push(lip_inv.powi(2 * k as i32) * err);
    }
    Ok(LayerwiseBounds {
        lower: lower_terms.iter().sum(),
        upper: upper_terms.iter().sum(),
        projection_errors,
        lower_terms,
        upper_terms,
        mse: empirical_mse(model, u)?,
    })
}

/// Greedy bound `Σ_k Lip(ρ⁻¹)^{2k} Σ_{i>n_{k+1}} λ_i(Σ[E*_k(u)])` from the
/// layerwise POD construction on `u`.
pub fn greedy_upper_bound(u: &Matrix, skeleton: &Skeleton, act: Activation) -> Result<f64> {
    let init = eys_init(u, skeleton, act)?;
    let trajectory = init.model.hidden_trajectory(u)?;
    let (_, lip_inv) = act.lipschitz_pair();
    let mut total = 0.0;
    for k in 0..skeleton.depth() {
        let tail = covariance_spectrum(&trajectory[k])?.tail_sum(skeleton.dims()[k + 1]);
        total += lip_inv.powi(2 * k as i32) * tail;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architecture::ParamVector;
    use crate::linalg::{pi_orth, test_support::gaussian_matrix as seeded, thin_svd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pod_error_is_tail_sum() {
        let u = seeded(30, 100, 1);
        let spec = covariance_spectrum(&u).unwrap();
        for n in [1, 5, 10] {
            let p = pod(&u, n).unwrap();
            let tail = spec.tail_sum(n);
            assert!((p.error - tail).abs() <= 1e-9 * tail);
            assert!(p.basis.orthonormality_defect() <= 1e-10);
            assert_eq!(linear_lower_bound(&u, n).unwrap(), tail);
        }
    }

    #[test]
    fn rank_one_pod_is_exact() {
        let v = [1.0, 2.0, -1.0, 0.5];
        let u = Matrix::from_fn(4, 7, |i, j| 3.0 + (j as f64).sin() * v[i]);
        assert!(pod(&u, 1).unwrap().error <= 1e-28);
        assert!(pod(&u, 4).is_err());
        assert!(linear_lower_bound(&u, 2).unwrap() <= 1e-28);
    }

    #[test]
    fn pod_beats_random_subspaces() {
        let u = seeded(6, 40, 2);
        let p = pod(&u, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let v = pi_orth(&crate::linalg::gaussian_matrix(6, 2, &mut rng));
            let q = crate::linalg::gaussian_matrix(6, 1, &mut rng).into_vec();
            assert!(p.error <= projection_error(&u, &v, &q) + 1e-12);
            assert!(p.error <= projection_error(&u, &v, &p.mean) + 1e-12);
        }
    }

    #[test]
    fn hand_computed_mse() {
        // One-layer identity SOAE projecting onto the first axis of R².
        let skel = Skeleton::new(vec![2, 1]).unwrap();
        let model = SymmetricAutoencoder::orthogonal(skel, Activation::Identity, vec![(Matrix::eye(2, 1), vec![0.0; 2])])
            .unwrap();
        let u = Matrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![1.0, 3.0, -2.0]]).unwrap();
        // dropped coordinates: 1, 3, -2 -> (1 + 9 + 4) / 3
        assert!((empirical_mse(&model, &u).unwrap() - 14.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_bounds_collapse() {
        let u = seeded(9, 30, 4);
        let skel = Skeleton::new(vec![9, 5, 2]).unwrap();
        let model = ParamVector::random(ClassTag::Soae, &skel, &mut ChaCha8Rng::seed_from_u64(5))
            .assemble(Activation::Identity)
            .unwrap();
        let b = layerwise_bounds(&model, &u).unwrap();
        assert!((b.lower - b.mse).abs() <= 1e-10 * b.mse);
        assert!((b.upper - b.mse).abs() <= 1e-10 * b.mse);
    }

    #[test]
    fn sandwich_with_nonlinear_activation() {
        let u = seeded(12, 50, 6);
        let skel = Skeleton::new(vec![12, 6, 4, 2]).unwrap();
        for (seed, act) in [
            (7, Activation::hyp_act_with_sharpness(3.0).unwrap()),
            (8, Activation::leaky_relu(5.0 / 16.0, 1.25).unwrap()),
        ] {
            let model = ParamVector::random(ClassTag::Soae, &skel, &mut ChaCha8Rng::seed_from_u64(seed))
                .assemble(act)
                .unwrap();
            let b = layerwise_bounds(&model, &u).unwrap();
            assert!(b.lower <= b.mse + 1e-9 && b.mse <= b.upper + 1e-9, "{b:?}");
            assert!(b.lower_terms[0] == b.upper_terms[0]);
        }
    }

    #[test]
    fn lemma_chains_hold_per_sample() {
        // For a single v: ‖E_{k-1} − D_k(E_l)‖² is sandwiched by the projection
        // residual plus the weighted next-level error.
        let skel = Skeleton::new(vec![10, 6, 3, 2]).unwrap();
        let act = Activation::hyp_act_with_sharpness(3.0).unwrap();
        let model = ParamVector::random(ClassTag::Soae, &skel, &mut ChaCha8Rng::seed_from_u64(9))
            .assemble(act)
            .unwrap();
        let (lip, lip_inv) = act.lipschitz_pair();
        let l = skel.depth();
        for s in 0..20 {
            let v = seeded(10, 1, 100 + s);
            let traj = model.hidden_trajectory(&v).unwrap();
            // decoded[k] = D_{k+1}(E_l(v)) for k = 0..=l (decoded[l] = E_l(v))
            let mut decoded = vec![traj[l].clone()];
            for j in (0..l).rev() {
                let layer = &model.layers()[j];
                let a = decoded[0].map(|y| act.apply_inverse(y));
                decoded.insert(0, layer.decoder.matmul(&a).add_column(&layer.decoder_bias));
            }
            for k in 1..=l {
                let (vk, bk) = model.orthogonal_pairs().unwrap()[k - 1];
                let lhs = traj[k - 1].sub(&decoded[k - 1]).sum_squares();
                let proj = projection_error(&traj[k - 1], vk, bk);
                let next = traj[k].sub(&decoded[k]).sum_squares();
                assert!(lhs >= proj + next / (lip * lip) - 1e-10);
                assert!(lhs <= proj + next * lip_inv * lip_inv + 1e-10);
            }
        }
    }

    #[test]
    fn hilbert_schmidt_isometry() {
        let u = seeded(7, 25, 10);
        let mean_sq: f64 = u.column_sq_norms().iter().sum::<f64>() / 25.0;
        let hs: f64 = thin_svd(&u.scale(1.0 / 25f64.sqrt())).unwrap().s.iter().map(|s| s * s).sum();
        assert!((mean_sq - hs).abs() <= 1e-10 * mean_sq);
    }

    #[test]
    fn greedy_bound_identity_and_monotonicity() {
        let u = seeded(10, 40, 11);
        let skel1 = Skeleton::new(vec![10, 3]).unwrap();
        let g = greedy_upper_bound(&u, &skel1, Activation::Identity).unwrap();
        assert!((g - linear_lower_bound(&u, 3).unwrap()).abs() <= 1e-10 * g);

        let skel = Skeleton::new(vec![10, 5, 2]).unwrap();
        let soft = Activation::hyp_act_with_sharpness(0.5).unwrap();
        let sharp = Activation::hyp_act_with_sharpness(3.0).unwrap();
        let init = eys_init(&u, &skel, soft).unwrap();
        let bound = greedy_upper_bound(&u, &skel, soft).unwrap();
        assert!(empirical_mse(&init.model, &u).unwrap() <= bound + 1e-9);
        assert!(greedy_upper_bound(&u, &skel, sharp).unwrap() >= bound);
    }

    #[test]
    fn non_soae_rejected() {
        let skel = Skeleton::new(vec![5, 2]).unwrap();
        let model = ParamVector::random(ClassTag::Sae, &skel, &mut ChaCha8Rng::seed_from_u64(1))
            .assemble(Activation::Identity)
            .unwrap();
        assert!(layerwise_bounds(&model, &Matrix::zeros(5, 3)).is_err());
    }
}
