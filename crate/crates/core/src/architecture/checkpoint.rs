//! JSON model checkpoints.
//!
//! Floats are written in shortest round-trip form, so a save/load cycle
//! reproduces every weight bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassTag, Layer, ParamVector, Skeleton, SymmetricAutoencoder};
use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::training::Normalization;

pub const CHECKPOINT_VERSION: u32 = 1;

type Rows = Vec<Vec<f64>>;

fn to_rows(m: &Matrix) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn from_rows(rows: &Rows, cols: usize) -> Result<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols));
    }
    Matrix::from_rows(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    #[serde(rename = "E")]
    encoder: Rows,
    #[serde(rename = "D")]
    decoder: Rows,
    e: Vec<f64>,
    d: Vec<f64>,
}

/// Optimization coordinates saved next to the weights, for resuming.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ThetaRecord {
    /// Blocks in [`ParamVector::blocks`] order, each with its column count so
    /// empty blocks keep their shape.
    blocks: Vec<BlockRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BlockRecord {
    cols: usize,
    rows: Rows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub class_tag: ClassTag,
    pub skeleton: Skeleton,
    pub activation_spec: Activation,
    layers: Vec<LayerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<ThetaRecord>,
    /// Min-max statistics of the training data the model was fitted on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl Checkpoint {
    pub fn new(model: &SymmetricAutoencoder, theta: Option<&ParamVector>, normalization: Option<Normalization>) -> Self {
        let layers = model
            .layers()
            .iter()
            .map(|l| LayerRecord {
                encoder: to_rows(&l.encoder),
                decoder: to_rows(&l.decoder),
                e: l.encoder_bias.clone(),
                d: l.decoder_bias.clone(),
            })
            .collect();
        let theta = theta.map(|t| ThetaRecord {
            blocks: t
                .blocks()
                .iter()
                .map(|b| BlockRecord {
                    cols: b.cols(),
                    rows: to_rows(b),
                })
                .collect(),
        });
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            class_tag: model.class(),
            skeleton: model.skeleton().clone(),
            activation_spec: model.activation(),
            layers,
            theta,
            normalization,
        }
    }

    pub fn model(&self) -> Result<SymmetricAutoencoder> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let (q, r) = self.skeleton.layer_dims(j.min(self.skeleton.depth() - 1));
                Ok(Layer {
                    encoder: from_rows(&l.encoder, q)?,
                    decoder: from_rows(&l.decoder, r)?,
                    encoder_bias: l.e.clone(),
                    decoder_bias: l.d.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SymmetricAutoencoder::new(self.skeleton.clone(), self.activation_spec, self.class_tag, layers)
    }

    pub fn theta(&self) -> Result<Option<ParamVector>> {
        let Some(rec) = &self.theta else { return Ok(None) };
        let blocks = rec
            .blocks
            .iter()
            .map(|b| from_rows(&b.rows, b.cols))
            .collect::<Result<Vec<_>>>()?;
        ParamVector::from_blocks(self.class_tag, self.skeleton.clone(), &blocks).map(Some)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::from_json(&fs::read_to_string(path)?)
    }
}
