//! Initialization strategies: the iterated truncated-SVD construction (EYS),
//! an extended He scheme for bilipschitz activations, random orthogonal
//! weights, and lifting of an orthogonal start into each class's coordinates.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;

use crate::activations::Activation;
use crate::architecture::{ClassTag, Layer, LayerParams, ParamVector, Skeleton, SymmetricAutoencoder};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, orthonormal_completion, pi_orth, thin_svd, Matrix};

/// Initialization scheme selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitKind {
    Eys,
    He,
    Orth,
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Eys => "eys",
            InitKind::He => "he",
            InitKind::Orth => "orth",
        })
    }
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eys" => Ok(InitKind::Eys),
            "he" => Ok(InitKind::He),
            "orth" => Ok(InitKind::Orth),
            _ => Err(Error::Invalid(format!("unknown init {s:?} (expected eys, he or orth)"))),
        }
    }
}

/// Result of [`eys_init`].
#[derive(Clone, Debug)]
pub struct EysInit {
    /// The SOAE `{(V_j, b_j, ρ)}`.
    pub model: SymmetricAutoencoder,
    /// `M_j`: the next `d_j` left singular vectors after `V_j`, used to seed
    /// the biorthogonal coordinates.
    pub complements: Vec<Matrix>,
    /// Layers whose width exceeded the rank of the centered data.
    pub warnings: Vec<String>,
}

impl EysInit {
    pub fn lift(&self, class: ClassTag) -> Result<ParamVector> {
        lift(&self.model, &self.complements, class)
    }
}

/// Numerical rank threshold relative to the top singular value.
const RANK_TOL: f64 = 1e-12;

/// Layer-by-layer centering and truncated SVD of the propagated data.
///
/// `u` holds one sample per column. The output is deterministic in `u`.
pub fn eys_init(u: &Matrix, skeleton: &Skeleton, act: Activation) -> Result<EysInit> {
    if u.rows() != skeleton.input_dim() {
        return Err(Error::shape(
            "eys_init",
            format!("data has {} rows, skeleton input is {}", u.rows(), skeleton.input_dim()),
        ));
    }
    if u.cols() < 2 {
        return Err(Error::Invalid(format!("eys_init needs at least 2 samples, got {}", u.cols())));
    }
    let mut z = u.clone();
    let mut pairs = Vec::with_capacity(skeleton.depth());
    let mut complements = Vec::with_capacity(skeleton.depth());
    let mut warnings = Vec::new();
    for j in 0..skeleton.depth() {
        let (_, n) = skeleton.layer_dims(j);
        let extra = skeleton.extra_dim(j);
        let b = z.row_means();
        let centered = z.sub_column(&b);
        let svd = thin_svd(&centered)?;
        let rank = svd.numerical_rank(RANK_TOL);
        if rank < n {
            let msg = format!(
                "layer {}: width {n} exceeds the rank {rank} of the centered data; padded with an orthonormal completion",
                j + 1
            );
            warn!("{msg}");
            warnings.push(msg);
        }
        let need = n + extra;
        let have = svd.u.cols();
        let w = if have >= need {
            svd.u.columns(0, need)
        } else {
            let tail = orthonormal_completion(&svd.u, need - have);
            Matrix::hstack(&[&svd.u, &tail])
        };
        let v = w.columns(0, n);
        complements.push(w.columns(n, need));
        z = v.tr_matmul(&centered).map(|x| act.apply(x));
        pairs.push((v, b));
    }
    let model = SymmetricAutoencoder::orthogonal(skeleton.clone(), act, pairs)?;
    Ok(EysInit {
        model,
        complements,
        warnings,
    })
}

/// Weight variance `4 / [n (2 + Lip(ρ⁻¹)⁻² + Lip(ρ)²)]` for fan-in `n`.
pub fn he_variance(act: Activation, fan_in: usize) -> f64 {
    let (l, l_inv) = act.lipschitz_pair();
    4.0 / (fan_in as f64 * (2.0 + 1.0 / (l_inv * l_inv) + l * l))
}

/// Gaussian weights with [`he_variance`] for each map's input width, zero
/// biases. Only the unconstrained classes can be initialized this way.
pub fn he_init<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    act: Activation,
    class: ClassTag,
    rng: &mut R,
) -> Result<SymmetricAutoencoder> {
    if class.is_constrained() {
        return Err(Error::Invalid(format!(
            "He initialization produces unconstrained weights and cannot start a {class} model"
        )));
    }
    let layers = (0..skeleton.depth())
        .map(|j| {
            let (q, r) = skeleton.layer_dims(j);
            let se = he_variance(act, q).sqrt();
            let sd = he_variance(act, r).sqrt();
            Layer {
                encoder: gaussian_matrix(r, q, rng).scale(se),
                decoder: gaussian_matrix(q, r, rng).scale(sd),
                encoder_bias: vec![0.0; r],
                decoder_bias: vec![0.0; q],
            }
        })
        .collect();
    SymmetricAutoencoder::new(skeleton.clone(), act, class, layers)
}

/// `V_j = π(G_j)` for Gaussian `G_j`, zero biases, arranged as an SOAE
/// (`E_j = V_jᵀ`, `D_j = V_j`) and tagged with `class`.
pub fn orthogonal_random_init<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    act: Activation,
    rng: &mut R,
    class: ClassTag,
) -> Result<SymmetricAutoencoder> {
    let pairs = (0..skeleton.depth())
        .map(|j| {
            let (q, r) = skeleton.layer_dims(j);
            (pi_orth(&gaussian_matrix(q, r, rng)), vec![0.0; q])
        })
        .collect();
    Ok(SymmetricAutoencoder::orthogonal(skeleton.clone(), act, pairs)?.with_class(class))
}

/// Coordinates in `class` whose assembly reproduces the orthogonal network
/// `start` (`E_j = V_jᵀ`, `D_j = V_j`, `d_j = b_j`).
///
/// `complements` supplies `M_j` for the biorthogonal lift; when empty, an
/// orthonormal completion of each `V_j` is used instead.
pub fn lift(start: &SymmetricAutoencoder, complements: &[Matrix], class: ClassTag) -> Result<ParamVector> {
    let skeleton = start.skeleton().clone();
    let mut layers = Vec::with_capacity(skeleton.depth());
    for (j, layer) in start.layers().iter().enumerate() {
        let v = &layer.decoder;
        let b = layer.decoder_bias.clone();
        let orth = layer.encoder.sub(&v.transpose()).max_abs() <= 1e-12 && v.orthonormality_defect() <= 1e-10;
        if !orth {
            return Err(Error::Params(format!(
                "layer {} is not orthogonal; only orthogonal starts can be lifted",
                j + 1
            )));
        }
        let r = v.cols();
        let lp = match class {
            ClassTag::Sae | ClassTag::PlainAe => LayerParams::Raw {
                e: layer.encoder.clone(),
                d: v.clone(),
                e_bias: layer.encoder_bias.clone(),
                d_bias: b,
            },
            ClassTag::Soae => LayerParams::Orthogonal { a: v.clone(), b },
            ClassTag::Sbae => {
                let d = skeleton.extra_dim(j);
                let m = match complements.get(j) {
                    Some(m) if m.shape() == (v.rows(), d) => m.clone(),
                    Some(m) => {
                        return Err(Error::Params(format!(
                            "layer {}: complement is {:?}, expected {:?}",
                            j + 1,
                            m.shape(),
                            (v.rows(), d)
                        )))
                    }
                    None => orthonormal_completion(v, d),
                };
                LayerParams::Biorthogonal {
                    x: Matrix::hstack(&[v, &m]),
                    y: Matrix::identity(r),
                    z: Matrix::identity(r),
                    q: Matrix::zeros(d, r),
                    s: vec![1.0; r],
                    b,
                }
            }
        };
        layers.push(lp);
    }
    ParamVector::new(class, skeleton, layers)
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for trial `index` under a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{covariance_spectrum, test_support::gaussian_matrix as seeded};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mse(model: &SymmetricAutoencoder, u: &Matrix) -> f64 {
        model.reconstruct(u).unwrap().sub(u).sum_squares() / u.cols() as f64
    }

    #[test]
    fn identity_single_layer_is_pod() {
        let u = seeded(12, 40, 1);
        let skel = Skeleton::new(vec![12, 4]).unwrap();
        let init = eys_init(&u, &skel, Activation::Identity).unwrap();
        let tail = covariance_spectrum(&u).unwrap().tail_sum(4);
        assert!((mse(&init.model, &u) - tail).abs() <= 1e-8 * tail.max(1.0));
        assert!(init.warnings.is_empty());
    }

    #[test]
    fn constant_data_reconstructs_exactly() {
        let col = vec![0.5, -1.0, 2.0, 3.0, 0.0];
        let u = Matrix::from_columns(&vec![col.clone(); 6]).unwrap();
        let skel = Skeleton::new(vec![5, 2, 1]).unwrap();
        let init = eys_init(&u, &skel, Activation::hyp_act(0.3).unwrap()).unwrap();
        assert_eq!(init.model.layers()[0].decoder_bias, col);
        assert!(mse(&init.model, &u) <= 1e-28);
        assert_eq!(init.warnings.len(), 2);
        for layer in init.model.layers() {
            assert!(layer.decoder.orthonormality_defect() <= 1e-10);
        }
    }

    #[test]
    fn rank_deficient_layers_are_padded() {
        // 3 samples => centered rank <= 2, but the layer asks for 4 columns.
        let u = seeded(10, 3, 2);
        let skel = Skeleton::new(vec![10, 4, 3]).unwrap();
        let init = eys_init(&u, &skel, Activation::Identity).unwrap();
        assert!(!init.warnings.is_empty());
        for (layer, m) in init.model.layers().iter().zip(&init.complements) {
            let w = Matrix::hstack(&[&layer.decoder, m]);
            assert!(w.orthonormality_defect() <= 1e-10);
        }
        init.model.check_invariants(1e-10).unwrap();
    }

    #[test]
    fn eys_is_deterministic() {
        let u = seeded(15, 30, 3);
        let skel = Skeleton::new(vec![15, 6, 3]).unwrap();
        let act = Activation::leaky_relu(0.5, 1.25).unwrap();
        assert_eq!(eys_init(&u, &skel, act).unwrap().model, eys_init(&u, &skel, act).unwrap().model);
    }

    #[test]
    fn lifts_reproduce_the_eys_network() {
        let u = seeded(14, 40, 4);
        let skel = Skeleton::new(vec![14, 6, 3]).unwrap();
        let act = Activation::hyp_act_with_sharpness(0.5).unwrap();
        let init = eys_init(&u, &skel, act).unwrap();
        let probe = seeded(14, 100, 5);
        let reference = init.model.reconstruct(&probe).unwrap();
        for class in [ClassTag::Sae, ClassTag::Sbae, ClassTag::Soae] {
            let model = init.lift(class).unwrap().assemble(act).unwrap();
            let diff = model.reconstruct(&probe).unwrap().sub(&reference).max_abs();
            assert!(diff <= 1e-10, "{class}: {diff}");
            model.check_invariants(1e-10).unwrap();
            for (a, b) in model.layers().iter().zip(init.model.layers()) {
                assert!(a.encoder.sub(&b.encoder).max_abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn he_variance_values() {
        assert!((he_variance(Activation::Identity, 64) - 1.0 / 64.0).abs() < 1e-18);
        let lr = Activation::leaky_relu(5.0 / 6.0, 5.0 / 4.0).unwrap();
        // 4 / (64 (2 + 25/36 + 25/16)), evaluated exactly.
        assert!((he_variance(lr, 64) - 0.014_681_892_332_789_559_54).abs() < 1e-17);
    }

    #[test]
    fn he_init_rejects_constrained_classes() {
        let skel = Skeleton::new(vec![6, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(he_init(&skel, Activation::Identity, ClassTag::Soae, &mut rng).is_err());
        let model = he_init(&skel, Activation::Identity, ClassTag::Sae, &mut rng).unwrap();
        assert!(model.layers()[0].encoder_bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn orthogonal_random_seeds_differ() {
        let skel = Skeleton::new(vec![8, 4, 2]).unwrap();
        let act = Activation::Identity;
        let a = orthogonal_random_init(&skel, act, &mut ChaCha8Rng::seed_from_u64(1), ClassTag::Soae).unwrap();
        let b = orthogonal_random_init(&skel, act, &mut ChaCha8Rng::seed_from_u64(2), ClassTag::Sbae).unwrap();
        a.check_invariants(1e-10).unwrap();
        b.check_invariants(1e-10).unwrap();
        assert!(a.layers()[0].decoder.sub(&b.layers()[0].decoder).frobenius_norm() > 0.0);
    }

    #[test]
    fn seed_derivation() {
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_eq!(derive_seed(7, 3), splitmix64(10));
    }

    #[test]
    fn init_kind_parsing() {
        assert_eq!("EYS".parse::<InitKind>().unwrap(), InitKind::Eys);
        assert_eq!(InitKind::Orth.to_string(), "orth");
        assert!("xavier".parse::<InitKind>().is_err());
    }
}
