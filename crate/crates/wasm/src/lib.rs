//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function returns a JSON string; the plain-Rust functions
//! behind them are what the native tests exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use symae::bounds::{empirical_mse, layerwise_bounds};
use symae::data_io::generate_pga;
use symae::init::eys_init;
use symae::training::{init_study_row, prepare, BaselineInit, StudyConfig};
use symae::{Activation, ClassTag, Result, Skeleton};

const N0: usize = 514;

/// `family` is `leakyrelu` (positive slope 5/4) or `hypact`.
pub fn activation_from(family: &str, sharpness: f64) -> Result<Activation> {
    match family {
        "leakyrelu" => Activation::leaky_relu_with_sharpness(sharpness, 1.25),
        "hypact" => Activation::hyp_act_with_sharpness(sharpness),
        "identity" => Ok(Activation::Identity),
        other => other.parse(),
    }
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub spec: String,
    pub x: Vec<f64>,
    pub forward: Vec<f64>,
    pub inverse: Vec<f64>,
    pub lip: f64,
    pub lip_inv: f64,
    pub sharpness: f64,
}

pub fn activation_curve(family: &str, sharpness: f64, half_width: f64, points: usize) -> Result<Curve> {
    let act = activation_from(family, sharpness)?;
    let points = points.max(2);
    let x: Vec<f64> = (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect();
    let (lip, lip_inv) = act.lipschitz_pair();
    Ok(Curve {
        spec: act.to_string(),
        forward: x.iter().map(|&v| act.apply(v)).collect(),
        inverse: x.iter().map(|&v| act.apply_inverse(v)).collect(),
        x,
        lip,
        lip_inv,
        sharpness: act.sharpness(),
    })
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub n2: usize,
    pub eys_mse: f64,
    pub baseline_best_mse: f64,
}

/// Before-training test MSE of `{514, n1, n2}` SAEs for `n2 = 1..=n1`,
/// EYS against the best of `trials` orthogonal random starts.
pub fn init_sweep(samples: usize, seed: u64, n1: usize, sharpness: f64, trials: usize) -> Result<Vec<SweepRow>> {
    let data = prepare(&generate_pga(samples, seed)?.u, seed)?;
    let cfg = StudyConfig {
        act: Activation::hyp_act_with_sharpness(sharpness)?,
        class: ClassTag::Sae,
        baseline: BaselineInit::Orth,
        trials: trials.max(1),
        seed,
    };
    // One configuration at a time: the browser has no threads to fan out to.
    (1..=n1)
        .map(|n2| {
            let skel = Skeleton::new(vec![N0, n1, n2])?;
            let row = init_study_row(&data.train, &data.test, &skel, &cfg)?;
            Ok(SweepRow {
                n2,
                eys_mse: row.eys_mse,
                baseline_best_mse: row.baseline_best_mse,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ReconstructionView {
    pub grid: Vec<f64>,
    pub original: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub latent: Vec<f64>,
    pub test_mse: f64,
    pub lower: f64,
    pub train_mse: f64,
    pub upper: f64,
    pub lower_terms: Vec<f64>,
    pub upper_terms: Vec<f64>,
}

/// EYS-initialized SOAE `{514, n1, n2}` on normalized pulses: one test pulse
/// and its reconstruction, plus the layerwise error bounds on the training set.
pub fn reconstruction(
    samples: usize,
    seed: u64,
    family: &str,
    sharpness: f64,
    n1: usize,
    n2: usize,
    index: usize,
) -> Result<ReconstructionView> {
    let act = activation_from(family, sharpness)?;
    let data = prepare(&generate_pga(samples, seed)?.u, seed)?;
    let skel = Skeleton::new(vec![N0, n1, n2])?;
    let model = eys_init(&data.train, &skel, act)?.model;
    let j = index % data.test.cols();
    let original = data.test.col(j);
    let reconstruction = model.reconstruct_vec(&original)?;
    let latent = model.encode_vec(&original)?;
    let b = layerwise_bounds(&model, &data.train)?;
    Ok(ReconstructionView {
        grid: symae::data_io::pga_grid(),
        original,
        reconstruction,
        latent,
        test_mse: empirical_mse(&model, &data.test)?,
        lower: b.lower,
        train_mse: b.mse,
        upper: b.upper,
        lower_terms: b.lower_terms,
        upper_terms: b.upper_terms,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = activationCurve)]
pub fn activation_curve_js(family: &str, sharpness: f64, half_width: f64, points: usize) -> std::result::Result<String, JsError> {
    to_js(activation_curve(family, sharpness, half_width, points))
}

#[wasm_bindgen(js_name = initSweep)]
pub fn init_sweep_js(samples: usize, seed: u64, n1: usize, sharpness: f64, trials: usize) -> std::result::Result<String, JsError> {
    to_js(init_sweep(samples, seed, n1, sharpness, trials))
}

#[wasm_bindgen(js_name = reconstruct)]
#[allow(clippy::too_many_arguments)]
pub fn reconstruction_js(
    samples: usize,
    seed: u64,
    family: &str,
    sharpness: f64,
    n1: usize,
    n2: usize,
    index: usize,
) -> std::result::Result<String, JsError> {
    to_js(reconstruction(samples, seed, family, sharpness, n1, n2, index))
}
