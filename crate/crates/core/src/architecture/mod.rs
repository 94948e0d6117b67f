//! Symmetric autoencoders: skeletons, the assembled network and its batched
//! execution, plus the unconstrained parametrizations of each class.

mod checkpoint;
mod params;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use params::{assemble, LayerParams, ParamVector, ReconstructionLoss};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Hypothesis class of a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassTag {
    #[serde(rename = "SAE")]
    Sae,
    #[serde(rename = "SBAE")]
    Sbae,
    #[serde(rename = "SOAE")]
    Soae,
    /// Plain autoencoder baseline: `ρ⁻¹` as the forward activation everywhere.
    #[serde(rename = "AE")]
    PlainAe,
}

impl ClassTag {
    pub const ALL: [ClassTag; 4] = [ClassTag::Sae, ClassTag::Sbae, ClassTag::Soae, ClassTag::PlainAe];

    pub fn name(self) -> &'static str {
        match self {
            ClassTag::Sae => "SAE",
            ClassTag::Sbae => "SBAE",
            ClassTag::Soae => "SOAE",
            ClassTag::PlainAe => "AE",
        }
    }

    /// Whether the class enforces `E_j D_j = I`.
    pub fn is_constrained(self) -> bool {
        matches!(self, ClassTag::Sbae | ClassTag::Soae)
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sae" => Ok(ClassTag::Sae),
            "sbae" => Ok(ClassTag::Sbae),
            "soae" => Ok(ClassTag::Soae),
            "ae" | "plainae" => Ok(ClassTag::PlainAe),
            _ => Err(Error::Invalid(format!(
                "unknown class {s:?} (expected sae, sbae, soae or ae)"
            ))),
        }
    }
}

/// Layer widths `[n0, n1, ..., nl]` with `n0 > n1 >= ... >= nl > 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Skeleton {
    dims: Vec<usize>,
}

impl Skeleton {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        let fail = |reason: &str| Error::Skeleton {
            dims: dims.clone(),
            reason: reason.to_string(),
        };
        if dims.len() < 2 {
            return Err(fail("need at least an input and one hidden width"));
        }
        if dims.contains(&0) {
            return Err(fail("widths must be positive"));
        }
        if dims[0] <= dims[1] {
            return Err(fail("first hidden width must be smaller than the input width"));
        }
        if let Some(w) = dims[1..].windows(2).find(|w| w[1] > w[0]) {
            return Err(fail(&format!("widths must not increase ({} -> {})", w[0], w[1])));
        }
        Ok(Skeleton { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of layers `l`.
    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn latent_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// `(n_{j-1}, n_j)` for the zero-based layer index `j`.
    pub fn layer_dims(&self, j: usize) -> (usize, usize) {
        (self.dims[j], self.dims[j + 1])
    }

    /// Width of the extra block in the biorthogonal parametrization of layer `j`.
    pub fn extra_dim(&self, j: usize) -> usize {
        let (q, r) = self.layer_dims(j);
        r.min(q - r)
    }
}

impl TryFrom<Vec<usize>> for Skeleton {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Skeleton::new(dims)
    }
}

impl From<Skeleton> for Vec<usize> {
    fn from(s: Skeleton) -> Self {
        s.dims
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Skeleton {
    type Err = Error;

    /// Comma-separated widths, e.g. `514,64,15,3`.
    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(',')
            .map(|t| {
                t.trim().parse::<usize>().map_err(|e| Error::Skeleton {
                    dims: Vec::new(),
                    reason: format!("bad width {t:?} in {s:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Skeleton::new(dims)
    }
}

/// Weights and biases of one encoder/decoder layer pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `E_j`, `n_j x n_{j-1}`.
    pub encoder: Matrix,
    /// `D_j`, `n_{j-1} x n_j`.
    pub decoder: Matrix,
    /// `e_j`, length `n_j`.
    pub encoder_bias: Vec<f64>,
    /// `d_j`, length `n_{j-1}`.
    pub decoder_bias: Vec<f64>,
}

impl Layer {
    /// SOAE layer `(V, b)`: `E = Vᵀ`, `D = V`, `e = −Vᵀb`, `d = b`.
    pub fn orthogonal(v: Matrix, b: Vec<f64>) -> Self {
        let encoder = v.transpose();
        let encoder_bias = encoder.mat_vec(&b).into_iter().map(|x| -x).collect();
        Layer {
            encoder,
            decoder: v,
            encoder_bias,
            decoder_bias: b,
        }
    }
}

/// An assembled symmetric autoencoder.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricAutoencoder {
    skeleton: Skeleton,
    act: Activation,
    class: ClassTag,
    layers: Vec<Layer>,
}

impl SymmetricAutoencoder {
    /// Checks layer shapes against the skeleton. Class constraints are not
    /// checked here; see [`Self::check_invariants`].
    pub fn new(skeleton: Skeleton, act: Activation, class: ClassTag, layers: Vec<Layer>) -> Result<Self> {
        if layers.len() != skeleton.depth() {
            return Err(Error::Params(format!(
                "{} layers for skeleton {skeleton}",
                layers.len()
            )));
        }
        for (j, layer) in layers.iter().enumerate() {
            let (q, r) = skeleton.layer_dims(j);
            let ok = layer.encoder.shape() == (r, q)
                && layer.decoder.shape() == (q, r)
                && layer.encoder_bias.len() == r
                && layer.decoder_bias.len() == q;
            if !ok {
                return Err(Error::Params(format!(
                    "layer {}: expected E {r}x{q}, D {q}x{r}, e {r}, d {q}; got E {:?}, D {:?}, e {}, d {}",
                    j + 1,
                    layer.encoder.shape(),
                    layer.decoder.shape(),
                    layer.encoder_bias.len(),
                    layer.decoder_bias.len()
                )));
            }
            layer.encoder.ensure_finite()?;
            layer.decoder.ensure_finite()?;
            if layer.encoder_bias.iter().chain(&layer.decoder_bias).any(|v| !v.is_finite()) {
                return Err(Error::Params(format!("layer {}: non-finite bias", j + 1)));
            }
        }
        Ok(SymmetricAutoencoder {
            skeleton,
            act,
            class,
            layers,
        })
    }

    /// SOAE from `(V_j, b_j)` pairs.
    pub fn orthogonal(skeleton: Skeleton, act: Activation, pairs: Vec<(Matrix, Vec<f64>)>) -> Result<Self> {
        let layers = pairs.into_iter().map(|(v, b)| Layer::orthogonal(v, b)).collect();
        SymmetricAutoencoder::new(skeleton, act, ClassTag::Soae, layers)
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn activation(&self) -> Activation {
        self.act
    }

    pub fn class(&self) -> ClassTag {
        self.class
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Same weights, different class tag (e.g. an SOAE viewed as an SAE).
    pub fn with_class(mut self, class: ClassTag) -> Self {
        self.class = class;
        self
    }

    fn check_batch(&self, op: &'static str, batch: &Matrix, rows: usize) -> Result<()> {
        if batch.rows() != rows {
            return Err(Error::shape(op, format!("expected {rows} rows, got {}", batch.rows())));
        }
        Ok(())
    }

    fn encoder_step(&self, j: usize, h: &Matrix) -> Matrix {
        let layer = &self.layers[j];
        let pre = layer.encoder.matmul(h).add_column(&layer.encoder_bias);
        match self.class {
            ClassTag::PlainAe => pre.map(|x| self.act.apply_inverse(x)),
            _ => pre.map(|x| self.act.apply(x)),
        }
    }

    fn decoder_step(&self, j: usize, h: &Matrix) -> Matrix {
        let layer = &self.layers[j];
        let a = h.map(|y| self.act.apply_inverse(y));
        layer.decoder.matmul(&a).add_column(&layer.decoder_bias)
    }

    /// Encodes column-stacked samples (`n0 x B`) to latents (`nl x B`).
    pub fn encode(&self, u: &Matrix) -> Result<Matrix> {
        self.check_batch("encode", u, self.skeleton.input_dim())?;
        let mut h = u.clone();
        for j in 0..self.layers.len() {
            h = self.encoder_step(j, &h);
        }
        Ok(h)
    }

    /// Decodes column-stacked latents (`nl x B`) to `n0 x B`.
    pub fn decode(&self, c: &Matrix) -> Result<Matrix> {
        self.check_batch("decode", c, self.skeleton.latent_dim())?;
        let mut h = c.clone();
        for j in (0..self.layers.len()).rev() {
            h = self.decoder_step(j, &h);
        }
        Ok(h)
    }

    pub fn reconstruct(&self, u: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(u)?)
    }

    /// `[u, E_1(u), ..., E_l(u)]`: partial encodings at every level.
    pub fn hidden_trajectory(&self, u: &Matrix) -> Result<Vec<Matrix>> {
        self.check_batch("hidden_trajectory", u, self.skeleton.input_dim())?;
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        out.push(u.clone());
        for j in 0..self.layers.len() {
            let next = self.encoder_step(j, out.last().unwrap());
            out.push(next);
        }
        Ok(out)
    }

    pub fn encode_vec(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encode(&Matrix::column_vector(u))?.into_vec())
    }

    pub fn decode_vec(&self, c: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decode(&Matrix::column_vector(c))?.into_vec())
    }

    pub fn reconstruct_vec(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.reconstruct(&Matrix::column_vector(u))?.into_vec())
    }

    /// `max_j ‖E_j D_j − I‖_max` for the constrained classes, 0 otherwise.
    pub fn constraint_residual(&self) -> f64 {
        if !self.class.is_constrained() {
            return 0.0;
        }
        self.biorthogonality_defect()
    }

    /// `max_j ‖E_j D_j − I‖_max` regardless of class.
    pub fn biorthogonality_defect(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.encoder.matmul(&l.decoder).identity_defect())
            .fold(0.0, f64::max)
    }

    /// Verifies the defining constraints of the model's class with tolerance `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        if !self.class.is_constrained() {
            return Ok(());
        }
        for (j, layer) in self.layers.iter().enumerate() {
            let ed = layer.encoder.matmul(&layer.decoder).identity_defect();
            if ed > tol {
                return Err(Error::Params(format!("layer {}: ‖ED − I‖ = {ed:e}", j + 1)));
            }
            let ed_bias = layer
                .encoder
                .mat_vec(&layer.decoder_bias)
                .iter()
                .zip(&layer.encoder_bias)
                .fold(0.0_f64, |m, (x, e)| m.max((x + e).abs()));
            if ed_bias > tol {
                return Err(Error::Params(format!("layer {}: ‖Ed + e‖ = {ed_bias:e}", j + 1)));
            }
            if self.class == ClassTag::Soae {
                let sym = layer.encoder.sub(&layer.decoder.transpose()).max_abs();
                if sym > tol {
                    return Err(Error::Params(format!("layer {}: ‖E − Dᵀ‖ = {sym:e}", j + 1)));
                }
            }
        }
        Ok(())
    }

    /// `(V_j, b_j)` of an SOAE.
    pub fn orthogonal_pairs(&self) -> Result<Vec<(&Matrix, &[f64])>> {
        if self.class != ClassTag::Soae {
            return Err(Error::Invalid(format!("{} model has no orthogonal factors", self.class)));
        }
        Ok(self
            .layers
            .iter()
            .map(|l| (&l.decoder, l.decoder_bias.as_slice()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pi_orth, test_support::gaussian_matrix};

    #[test]
    fn skeleton_validation() {
        assert!(Skeleton::new(vec![514, 64, 15, 3]).is_ok());
        assert!(Skeleton::new(vec![514, 64, 65, 3]).is_err());
        assert!(Skeleton::new(vec![5, 5]).is_err());
        assert!(Skeleton::new(vec![5]).is_err());
        assert!(Skeleton::new(vec![5, 3, 0]).is_err());
        assert!(Skeleton::new(vec![6, 3, 3, 1]).is_ok());
        let s: Skeleton = "514,64,15,3".parse().unwrap();
        assert_eq!(s.depth(), 3);
        assert_eq!(s.to_string(), "514,64,15,3");
        assert_eq!(s.extra_dim(0), 64);
        assert_eq!(s.extra_dim(1), 15);
        assert_eq!(s.extra_dim(2), 3);
        assert!(serde_json::from_str::<Skeleton>("[3,4]").is_err());
    }

    #[test]
    fn class_tag_parsing() {
        for tag in ClassTag::ALL {
            assert_eq!(tag.name().parse::<ClassTag>().unwrap(), tag);
        }
        assert_eq!(serde_json::to_string(&ClassTag::Sbae).unwrap(), "\"SBAE\"");
        assert!("vae".parse::<ClassTag>().is_err());
    }

    #[test]
    fn coordinate_projection_encoder() {
        let skel = Skeleton::new(vec![4, 2]).unwrap();
        let model =
            SymmetricAutoencoder::orthogonal(skel, Activation::Identity, vec![(Matrix::eye(4, 2), vec![0.0; 4])])
                .unwrap();
        let u = [1.0, -2.0, 3.0, 4.0];
        assert_eq!(model.encode_vec(&u).unwrap(), vec![1.0, -2.0]);
        assert_eq!(model.reconstruct_vec(&u).unwrap(), vec![1.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn soae_encode_matches_hand_composition() {
        let skel = Skeleton::new(vec![7, 4, 2]).unwrap();
        let act = Activation::hyp_act_with_sharpness(0.5).unwrap();
        let v1 = pi_orth(&gaussian_matrix(7, 4, 1));
        let v2 = pi_orth(&gaussian_matrix(4, 2, 2));
        let b1 = gaussian_matrix(7, 1, 3).into_vec();
        let b2 = gaussian_matrix(4, 1, 4).into_vec();
        let model =
            SymmetricAutoencoder::orthogonal(skel, act, vec![(v1.clone(), b1.clone()), (v2.clone(), b2.clone())])
                .unwrap();
        let u = gaussian_matrix(7, 1, 5).into_vec();
        let shifted: Vec<f64> = u.iter().zip(&b1).map(|(x, b)| x - b).collect();
        let h1: Vec<f64> = v1.tr_mat_vec(&shifted).iter().map(|&x| act.apply(x)).collect();
        let shifted: Vec<f64> = h1.iter().zip(&b2).map(|(x, b)| x - b).collect();
        let h2: Vec<f64> = v2.tr_mat_vec(&shifted).iter().map(|&x| act.apply(x)).collect();
        let got = model.encode_vec(&u).unwrap();
        for (a, b) in got.iter().zip(&h2) {
            assert!((a - b).abs() < 1e-13);
        }
        let traj = model.hidden_trajectory(&Matrix::column_vector(&u)).unwrap();
        assert_eq!(traj[0].as_slice(), u.as_slice());
        assert_eq!(traj[1].rows(), 4);
        assert_eq!(traj[2].as_slice(), got.as_slice());
        model.check_invariants(1e-10).unwrap();
    }

    #[test]
    fn identity_single_layer_soae_is_affine_projection() {
        let skel = Skeleton::new(vec![6, 2]).unwrap();
        let v = pi_orth(&gaussian_matrix(6, 2, 9));
        let b = gaussian_matrix(6, 1, 10).into_vec();
        let model = SymmetricAutoencoder::orthogonal(skel, Activation::Identity, vec![(v.clone(), b.clone())]).unwrap();
        let u = gaussian_matrix(6, 3, 11);
        let expected = v.matmul(&v.tr_matmul(&u.sub_column(&b))).add_column(&b);
        assert!(model.reconstruct(&u).unwrap().sub(&expected).max_abs() < 1e-13);
        let dec = model.decode(&model.encode(&u).unwrap()).unwrap();
        assert_eq!(dec, model.reconstruct(&u).unwrap());
    }

    #[test]
    fn shape_errors() {
        let skel = Skeleton::new(vec![4, 2]).unwrap();
        let bad = Layer {
            encoder: Matrix::zeros(2, 3),
            decoder: Matrix::zeros(4, 2),
            encoder_bias: vec![0.0; 2],
            decoder_bias: vec![0.0; 4],
        };
        assert!(SymmetricAutoencoder::new(skel.clone(), Activation::Identity, ClassTag::Sae, vec![bad]).is_err());
        let model =
            SymmetricAutoencoder::orthogonal(skel, Activation::Identity, vec![(Matrix::eye(4, 2), vec![0.0; 4])])
                .unwrap();
        assert!(model.encode(&Matrix::zeros(3, 1)).is_err());
        assert!(model.decode(&Matrix::zeros(4, 1)).is_err());
    }
}
