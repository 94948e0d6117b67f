//! Minibatch training with early stopping, data preparation and metrics.

mod data;
mod optim;
mod study;

pub use data::{minmax_normalize, prepare, split, Normalization, PreparedData, Split};
pub use optim::{adam_step, sgd_step, AdamState, Optimizer, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use study::{depth_pattern, init_study, init_study_row, width_sweep, BaselineInit, StudyConfig, StudyRow};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::activations::Activation;
use crate::architecture::{ParamVector, ReconstructionLoss, SymmetricAutoencoder};
use crate::autodiff::forward;
use crate::bounds::empirical_mse;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Every `log_every`-th epoch is written to the history CSV (the first
    /// and last epochs always are).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1500,
            patience: 500,
            learning_rate: 1e-3,
            batch_size: 8,
            seed: 0,
            optimizer: Optimizer::Adam,
            log_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Invalid(format!("training config: {what}")));
        if self.epochs == 0 || self.patience == 0 || self.batch_size == 0 || self.log_every == 0 {
            return bad("epochs, patience, batch size and log interval must be positive");
        }
        if self.patience > self.epochs {
            return bad("patience cannot exceed the number of epochs");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub train_loss: f64,
    /// Full-batch validation loss after the epoch.
    pub val_loss: f64,
    pub wall_time_s: f64,
    pub constraint_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub log_every: usize,
}

impl TrainHistory {
    /// Records that go into the CSV.
    pub fn logged(&self) -> impl Iterator<Item = &EpochRecord> {
        let last = self.records.last().map(|r| r.epoch);
        let every = self.log_every.max(1);
        self.records
            .iter()
            .filter(move |r| r.epoch == 1 || r.epoch % every == 0 || Some(r.epoch) == last)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,wall_time_s,constraint_residual\n");
        for r in self.logged() {
            let _ = writeln!(
                out,
                "{},{:.9e},{:.9e},{:.9e},{:.9e}",
                r.epoch, r.train_loss, r.val_loss, r.wall_time_s, r.constraint_residual
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss.
    pub theta: ParamVector,
    pub model: SymmetricAutoencoder,
    pub history: TrainHistory,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
}

/// Wall-clock seconds since `start`; always zero where no clock is available.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Minimizes the mean squared reconstruction error over `train` starting
/// from `theta0`, with seeded minibatch shuffling and early stopping on
/// `val`. Both matrices hold one sample per column.
pub fn train(
    theta0: &ParamVector,
    act: Activation,
    train: &Matrix,
    val: &Matrix,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let n0 = theta0.skeleton().input_dim();
    for (name, m) in [("train", train), ("validation", val)] {
        if m.rows() != n0 || m.cols() == 0 {
            return Err(Error::shape(
                "train",
                format!("{name} data is {:?}, model input width {n0}", m.shape()),
            ));
        }
    }
    let program = ReconstructionLoss::for_params(theta0, act);
    let class = theta0.class();
    let skeleton = theta0.skeleton().clone();
    let mut blocks = theta0.blocks();
    let mut adam = AdamState::new(&blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.cols()).collect();
    let clock = Stopwatch::start();

    let mut history = TrainHistory {
        records: Vec::new(),
        log_every: config.log_every,
    };
    let mut best: Option<(f64, usize, Vec<Matrix>)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = train.select_columns(chunk);
            let rec = forward(&program, &blocks, &batch)?;
            let loss = rec.loss_value();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            let grads = rec.gradients()?;
            match config.optimizer {
                Optimizer::Adam => adam_step(&mut blocks, &grads, &mut adam, config.learning_rate)?,
                Optimizer::Sgd => sgd_step(&mut blocks, &grads, config.learning_rate)?,
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train.cols() as f64;

        let theta = ParamVector::from_blocks(class, skeleton.clone(), &blocks)?;
        let model = theta.assemble(act)?;
        let val_loss = empirical_mse(&model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            wall_time_s: clock.seconds(),
            constraint_residual: model.constraint_residual(),
        };
        if epoch == 1 || epoch % config.log_every == 0 {
            info!(
                "epoch {epoch}: train {train_loss:.4e} val {val_loss:.4e} residual {:.1e}",
                record.constraint_residual
            );
        }
        history.records.push(record);

        if best.as_ref().is_none_or(|(v, _, _)| val_loss < *v) {
            best = Some((val_loss, epoch, blocks.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                info!("early stop at epoch {epoch}");
                break;
            }
        }
    }

    let (best_val_loss, best_epoch, best_blocks) = best.expect("at least one epoch runs");
    let theta = ParamVector::from_blocks(class, skeleton, &best_blocks)?;
    let model = theta.assemble(act)?;
    let epochs_run = history.records.len();
    Ok(TrainOutcome {
        theta,
        model,
        history,
        best_epoch,
        best_val_loss,
        epochs_run,
    })
}

/// Test-set metrics on normalized data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub mse: f64,
    pub mre: f64,
    /// MSE after mapping both inputs and reconstructions back to physical units.
    pub mse_denormalized: Option<f64>,
    /// Zero-norm samples left out of the MRE average.
    pub skipped: usize,
}

pub fn evaluate(model: &SymmetricAutoencoder, u: &Matrix, normalization: Option<Normalization>) -> Result<Evaluation> {
    if u.cols() == 0 {
        return Err(Error::Invalid("empty test set".to_string()));
    }
    let rec = model.reconstruct(u)?;
    let diff = rec.sub(u);
    let err_sq = diff.column_sq_norms();
    let ref_sq = u.column_sq_norms();
    let mse = err_sq.iter().sum::<f64>() / u.cols() as f64;
    let mut rel_sum = 0.0;
    let mut counted = 0;
    for (e, r) in err_sq.iter().zip(&ref_sq) {
        if *r == 0.0 {
            continue;
        }
        rel_sum += (e / r).sqrt();
        counted += 1;
    }
    let skipped = u.cols() - counted;
    if skipped > 0 {
        warn!("{skipped} zero-norm sample(s) left out of the relative error");
    }
    let mre = if counted > 0 { rel_sum / counted as f64 } else { 0.0 };
    let mse_denormalized = normalization.map(|n| {
        let phys = n.invert(u);
        n.invert(&rec).sub(&phys).sum_squares() / u.cols() as f64
    });
    Ok(Evaluation {
        mse,
        mre,
        mse_denormalized,
        skipped,
    })
}
