//! Unconstrained coordinates for each class and their assembly into networks,
//! both directly and on a differentiation tape.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ClassTag, Layer, Skeleton, SymmetricAutoencoder};
use crate::activations::Activation;
use crate::autodiff::{Program, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, pi_orth, Matrix};

/// Per-layer optimization coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams {
    /// `(E, D, e, d)` used as-is (SAE and the plain AE).
    Raw {
        e: Matrix,
        d: Matrix,
        e_bias: Vec<f64>,
        d_bias: Vec<f64>,
    },
    /// SOAE: `V = π(A)`, shift `b`.
    Orthogonal { a: Matrix, b: Vec<f64> },
    /// SBAE: `X̃` (`q x (r+d)`), `Ỹ`, `Z̃` (`r x r`), `Q` (`d x r`), scales `s`, shift `b`.
    Biorthogonal {
        x: Matrix,
        y: Matrix,
        z: Matrix,
        q: Matrix,
        s: Vec<f64>,
        b: Vec<f64>,
    },
}

impl LayerParams {
    fn blocks(&self) -> Vec<Matrix> {
        match self {
            LayerParams::Raw { e, d, e_bias, d_bias } => vec![
                e.clone(),
                d.clone(),
                Matrix::column_vector(e_bias),
                Matrix::column_vector(d_bias),
            ],
            LayerParams::Orthogonal { a, b } => vec![a.clone(), Matrix::column_vector(b)],
            LayerParams::Biorthogonal { x, y, z, q, s, b } => vec![
                x.clone(),
                y.clone(),
                z.clone(),
                q.clone(),
                Matrix::column_vector(s),
                Matrix::column_vector(b),
            ],
        }
    }
}

fn block_count(class: ClassTag) -> usize {
    match class {
        ClassTag::Sae | ClassTag::PlainAe => 4,
        ClassTag::Soae => 2,
        ClassTag::Sbae => 6,
    }
}

/// Expected block shapes of layer `j` for `class`.
fn block_shapes(class: ClassTag, skeleton: &Skeleton, j: usize) -> Vec<(usize, usize)> {
    let (q, r) = skeleton.layer_dims(j);
    match class {
        ClassTag::Sae | ClassTag::PlainAe => vec![(r, q), (q, r), (r, 1), (q, 1)],
        ClassTag::Soae => vec![(q, r), (q, 1)],
        ClassTag::Sbae => {
            let d = skeleton.extra_dim(j);
            vec![(q, r + d), (r, r), (r, r), (d, r), (r, 1), (q, 1)]
        }
    }
}

/// Optimization-space coordinates of a whole network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    class: ClassTag,
    skeleton: Skeleton,
    layers: Vec<LayerParams>,
}

impl ParamVector {
    pub fn new(class: ClassTag, skeleton: Skeleton, layers: Vec<LayerParams>) -> Result<Self> {
        let blocks: Vec<Matrix> = layers.iter().flat_map(|l| l.blocks()).collect();
        let kinds_ok = layers.iter().all(|l| {
            matches!(
                (class, l),
                (ClassTag::Sae | ClassTag::PlainAe, LayerParams::Raw { .. })
                    | (ClassTag::Soae, LayerParams::Orthogonal { .. })
                    | (ClassTag::Sbae, LayerParams::Biorthogonal { .. })
            )
        });
        if !kinds_ok {
            return Err(Error::Params(format!("layer parametrization does not match class {class}")));
        }
        // Shape validation goes through the same path as from_blocks.
        ParamVector::from_blocks(class, skeleton, &blocks)
    }

    /// Rebuilds from the flat block list produced by [`Self::blocks`].
    pub fn from_blocks(class: ClassTag, skeleton: Skeleton, blocks: &[Matrix]) -> Result<Self> {
        let per = block_count(class);
        if blocks.len() != per * skeleton.depth() {
            return Err(Error::Params(format!(
                "{} blocks given, {class} on {skeleton} needs {}",
                blocks.len(),
                per * skeleton.depth()
            )));
        }
        let mut layers = Vec::with_capacity(skeleton.depth());
        for j in 0..skeleton.depth() {
            let chunk = &blocks[j * per..(j + 1) * per];
            let shapes = block_shapes(class, &skeleton, j);
            for (k, (m, want)) in chunk.iter().zip(&shapes).enumerate() {
                if m.shape() != *want {
                    return Err(Error::Params(format!(
                        "layer {} block {k}: expected {want:?}, got {:?}",
                        j + 1,
                        m.shape()
                    )));
                }
                m.ensure_finite()?;
            }
            let v = |k: usize| chunk[k].as_slice().to_vec();
            layers.push(match class {
                ClassTag::Sae | ClassTag::PlainAe => LayerParams::Raw {
                    e: chunk[0].clone(),
                    d: chunk[1].clone(),
                    e_bias: v(2),
                    d_bias: v(3),
                },
                ClassTag::Soae => LayerParams::Orthogonal {
                    a: chunk[0].clone(),
                    b: v(1),
                },
                ClassTag::Sbae => LayerParams::Biorthogonal {
                    x: chunk[0].clone(),
                    y: chunk[1].clone(),
                    z: chunk[2].clone(),
                    q: chunk[3].clone(),
                    s: v(4),
                    b: v(5),
                },
            });
        }
        Ok(ParamVector {
            class,
            skeleton,
            layers,
        })
    }

    /// Random coordinates: Gaussian matrices (raw weights scaled by
    /// `1/sqrt(fan-in)`), log-normal SBAE scales and small Gaussian biases.
    pub fn random<R: Rng + ?Sized>(class: ClassTag, skeleton: &Skeleton, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(skeleton.depth());
        for j in 0..skeleton.depth() {
            let (q, r) = skeleton.layer_dims(j);
            let bias = |n: usize, rng: &mut R| -> Vec<f64> {
                (0..n).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect()
            };
            layers.push(match class {
                ClassTag::Sae | ClassTag::PlainAe => LayerParams::Raw {
                    e: gaussian_matrix(r, q, rng).scale(1.0 / (q as f64).sqrt()),
                    d: gaussian_matrix(q, r, rng).scale(1.0 / (r as f64).sqrt()),
                    e_bias: bias(r, rng),
                    d_bias: bias(q, rng),
                },
                ClassTag::Soae => LayerParams::Orthogonal {
                    a: gaussian_matrix(q, r, rng),
                    b: bias(q, rng),
                },
                ClassTag::Sbae => {
                    let d = skeleton.extra_dim(j);
                    LayerParams::Biorthogonal {
                        x: gaussian_matrix(q, r + d, rng),
                        y: gaussian_matrix(r, r, rng),
                        z: gaussian_matrix(r, r, rng),
                        q: gaussian_matrix(d, r, rng),
                        s: (0..r)
                            .map(|_| (0.25 * rng.sample::<f64, _>(StandardNormal)).exp())
                            .collect(),
                        b: bias(q, rng),
                    }
                }
            });
        }
        ParamVector {
            class,
            skeleton: skeleton.clone(),
            layers,
        }
    }

    /// Coordinates that reproduce `model` exactly where possible: raw weights
    /// for SAE/AE, `(D_j, d_j)` for SOAE. SBAE networks have no canonical
    /// preimage and are rejected.
    pub fn extract(model: &SymmetricAutoencoder) -> Result<Self> {
        let class = model.class();
        let layers = match class {
            ClassTag::Sae | ClassTag::PlainAe => model
                .layers()
                .iter()
                .map(|l| LayerParams::Raw {
                    e: l.encoder.clone(),
                    d: l.decoder.clone(),
                    e_bias: l.encoder_bias.clone(),
                    d_bias: l.decoder_bias.clone(),
                })
                .collect(),
            ClassTag::Soae => model
                .layers()
                .iter()
                .map(|l| LayerParams::Orthogonal {
                    a: l.decoder.clone(),
                    b: l.decoder_bias.clone(),
                })
                .collect(),
            ClassTag::Sbae => {
                return Err(Error::Params(
                    "SBAE networks have no canonical parameter extraction".to_string(),
                ))
            }
        };
        ParamVector::new(class, model.skeleton().clone(), layers)
    }

    pub fn class(&self) -> ClassTag {
        self.class
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Flat list of parameter blocks (biases as column vectors), layer by layer.
    pub fn blocks(&self) -> Vec<Matrix> {
        self.layers.iter().flat_map(|l| l.blocks()).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.blocks().iter().map(|b| b.rows() * b.cols()).sum()
    }

    pub fn assemble(&self, act: Activation) -> Result<SymmetricAutoencoder> {
        assemble(self, act)
    }
}

fn negate(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

/// Builds the network described by `theta`.
///
/// SBAE scales enter squared, so any zero entry of `s` makes the layer
/// singular and is rejected.
pub fn assemble(theta: &ParamVector, act: Activation) -> Result<SymmetricAutoencoder> {
    let mut layers = Vec::with_capacity(theta.layers.len());
    for (j, lp) in theta.layers.iter().enumerate() {
        let layer = match lp {
            LayerParams::Raw { e, d, e_bias, d_bias } => Layer {
                encoder: e.clone(),
                decoder: d.clone(),
                encoder_bias: e_bias.clone(),
                decoder_bias: d_bias.clone(),
            },
            LayerParams::Orthogonal { a, b } => {
                let v = pi_orth(a);
                let encoder = v.transpose();
                let encoder_bias = negate(encoder.mat_vec(b));
                Layer {
                    encoder,
                    decoder: v,
                    encoder_bias,
                    decoder_bias: b.clone(),
                }
            }
            LayerParams::Biorthogonal { x, y, z, q, s, b } => {
                if let Some(i) = s.iter().position(|&v| v == 0.0) {
                    return Err(Error::Params(format!(
                        "layer {}: scale entry {i} is zero, the diagonal factor must be invertible",
                        j + 1
                    )));
                }
                let (xo, yo, zo) = (pi_orth(x), pi_orth(y), pi_orth(z));
                let s2: Vec<f64> = s.iter().map(|v| v * v).collect();
                let inv: Vec<f64> = s2.iter().map(|v| 1.0 / v).collect();
                let r = s.len();
                let top = yo.matmul(&Matrix::diag(&s2)).matmul_tr(&zo);
                let e_t = xo.matmul(&Matrix::vstack(&[&top, &Matrix::zeros(q.rows(), r)]));
                let bottom = yo.matmul(&Matrix::diag(&inv)).matmul_tr(&zo);
                let decoder = xo.matmul(&Matrix::vstack(&[&bottom, q]));
                let encoder = e_t.transpose();
                let encoder_bias = negate(encoder.mat_vec(b));
                Layer {
                    encoder,
                    decoder,
                    encoder_bias,
                    decoder_bias: b.clone(),
                }
            }
        };
        layers.push(layer);
    }
    SymmetricAutoencoder::new(theta.skeleton.clone(), act, theta.class, layers)
}

struct TapedLayer {
    encoder: Var,
    decoder: Var,
    encoder_bias: Var,
    decoder_bias: Var,
}

/// Records [`assemble`] for the leaves in [`ParamVector::blocks`] order.
fn record_assembly(tape: &mut Tape, class: ClassTag, skeleton: &Skeleton, leaves: &[Var]) -> Result<Vec<TapedLayer>> {
    let per = block_count(class);
    if leaves.len() != per * skeleton.depth() {
        return Err(Error::Params(format!(
            "{} leaves given, {class} on {skeleton} needs {}",
            leaves.len(),
            per * skeleton.depth()
        )));
    }
    let mut out = Vec::with_capacity(skeleton.depth());
    for j in 0..skeleton.depth() {
        let l = &leaves[j * per..(j + 1) * per];
        let layer = match class {
            ClassTag::Sae | ClassTag::PlainAe => TapedLayer {
                encoder: l[0],
                decoder: l[1],
                encoder_bias: l[2],
                decoder_bias: l[3],
            },
            ClassTag::Soae => {
                let v = tape.pi_orth(l[0])?;
                let e = tape.transpose(v);
                let eb = tape.matmul(e, l[1])?;
                let eb = tape.neg(eb);
                TapedLayer {
                    encoder: e,
                    decoder: v,
                    encoder_bias: eb,
                    decoder_bias: l[1],
                }
            }
            ClassTag::Sbae => {
                let (x, y, z, q, s, b) = (l[0], l[1], l[2], l[3], l[4], l[5]);
                let (xo, yo, zo) = (tape.pi_orth(x)?, tape.pi_orth(y)?, tape.pi_orth(z)?);
                let s2 = tape.square(s);
                let inv = tape.recip(s2);
                let sd = tape.diag_from_vec(s2)?;
                let sinv = tape.diag_from_vec(inv)?;
                let zt = tape.transpose(zo);
                let top = tape.matmul(yo, sd)?;
                let top = tape.matmul(top, zt)?;
                let r = skeleton.layer_dims(j).1;
                let d = skeleton.extra_dim(j);
                let zeros = tape.constant(Matrix::zeros(d, r));
                let stacked = tape.concat_rows(&[top, zeros])?;
                let e_t = tape.matmul(xo, stacked)?;
                let bottom = tape.matmul(yo, sinv)?;
                let bottom = tape.matmul(bottom, zt)?;
                let stacked = tape.concat_rows(&[bottom, q])?;
                let dec = tape.matmul(xo, stacked)?;
                let enc = tape.transpose(e_t);
                let eb = tape.matmul(enc, b)?;
                let eb = tape.neg(eb);
                TapedLayer {
                    encoder: enc,
                    decoder: dec,
                    encoder_bias: eb,
                    decoder_bias: b,
                }
            }
        };
        out.push(layer);
    }
    Ok(out)
}

/// Batch-mean squared reconstruction error as a differentiable program over
/// the blocks of a [`ParamVector`].
#[derive(Clone, Debug)]
pub struct ReconstructionLoss {
    pub class: ClassTag,
    pub skeleton: Skeleton,
    pub act: Activation,
}

impl ReconstructionLoss {
    pub fn for_params(theta: &ParamVector, act: Activation) -> Self {
        ReconstructionLoss {
            class: theta.class,
            skeleton: theta.skeleton.clone(),
            act,
        }
    }
}

impl Program for ReconstructionLoss {
    fn record(&self, tape: &mut Tape, leaves: &[Var], batch: &Matrix) -> Result<Var> {
        if batch.rows() != self.skeleton.input_dim() || batch.cols() == 0 {
            return Err(Error::shape(
                "reconstruction loss",
                format!("batch is {:?}, input width {}", batch.shape(), self.skeleton.input_dim()),
            ));
        }
        let layers = record_assembly(tape, self.class, &self.skeleton, leaves)?;
        let input = tape.constant(batch.clone());
        let mut h = input;
        for layer in &layers {
            let pre = tape.matmul(layer.encoder, h)?;
            let pre = tape.add_column(pre, layer.encoder_bias)?;
            h = match self.class {
                ClassTag::PlainAe => tape.activate_inverse(pre, self.act),
                _ => tape.activate(pre, self.act),
            };
        }
        for layer in layers.iter().rev() {
            let a = tape.activate_inverse(h, self.act);
            let lin = tape.matmul(layer.decoder, a)?;
            h = tape.add_column(lin, layer.decoder_bias)?;
        }
        let diff = tape.sub(input, h)?;
        let total = tape.sum_squares(diff);
        Ok(tape.scale(total, 1.0 / batch.cols() as f64))
    }
}
