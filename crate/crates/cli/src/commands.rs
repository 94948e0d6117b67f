use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use symae::architecture::Checkpoint;
use symae::bounds::{empirical_mse, layerwise_bounds, linear_lower_bound};
use symae::data_io::{generate_pga, load_snapshots, save_snapshots};
use symae::init::{derive_seed, eys_init, he_init, lift, orthogonal_random_init, InitKind};
use symae::training::{self, depth_pattern, evaluate, prepare, width_sweep, StudyConfig, TrainConfig};
use symae::{ClassTag, Error, Matrix, ParamVector};

use crate::{BoundsArgs, GenPgaArgs, InitStudyArgs, TrainArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(Error::Activation(_) | Error::Skeleton { .. } | Error::Invalid(_)) => 2,
            CliError::Core(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn gen_pga(args: &GenPgaArgs) -> Result<()> {
    let set = generate_pga(args.samples, args.seed)?;
    save_snapshots(&set, &args.out)?;
    info!("wrote {} x {} snapshots to {}", set.u.rows(), set.u.cols(), args.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainReport {
    class: ClassTag,
    skeleton: String,
    activation: String,
    init: String,
    seed: u64,
    mse: f64,
    mre: f64,
    epochs_run: usize,
    best_epoch: usize,
    mse_denormalized: Option<f64>,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let config = TrainConfig {
        epochs: args.epochs,
        patience: args.patience,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed: args.seed,
        optimizer: args.optimizer,
        log_every: args.log_every,
    };
    config.validate()?;
    if args.init == InitKind::He && args.class.is_constrained() {
        return Err(CliError::Usage(format!(
            "--init he cannot start a {} model; use eys or orth",
            args.class
        )));
    }

    let set = load_snapshots(&args.data)?;
    let n0 = args.skeleton.input_dim();
    if set.u.rows() != n0 {
        return Err(Error::Shape {
            op: "train",
            detail: format!("data has {} rows but the skeleton starts at {n0}", set.u.rows()),
        }
        .into());
    }
    let data = prepare(&set.u, args.seed)?;
    let act = args.act;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 1));
    let theta0 = match args.init {
        InitKind::Eys => {
            let eys = eys_init(&data.train, &args.skeleton, act)?;
            for w in &eys.warnings {
                warn!("{w}");
            }
            eys.lift(args.class)?
        }
        InitKind::He => ParamVector::extract(&he_init(&args.skeleton, act, args.class, &mut rng)?)?,
        InitKind::Orth => {
            let start = orthogonal_random_init(&args.skeleton, act, &mut rng, ClassTag::Soae)?;
            lift(&start, &[], args.class)?
        }
    };

    let outcome = training::train(&theta0, act, &data.train, &data.val, &config)?;
    let eval = evaluate(&outcome.model, &data.test, Some(data.normalization))?;

    if let Some(path) = &args.out_model {
        Checkpoint::new(&outcome.model, Some(&outcome.theta), Some(data.normalization)).save(path)?;
    }
    if let Some(path) = &args.out_history {
        outcome.history.write_csv(path)?;
    }
    let report = TrainReport {
        class: args.class,
        skeleton: args.skeleton.to_string(),
        activation: act.to_string(),
        init: args.init.to_string(),
        seed: args.seed,
        mse: eval.mse,
        mre: eval.mre,
        epochs_run: outcome.epochs_run,
        best_epoch: outcome.best_epoch,
        mse_denormalized: eval.mse_denormalized,
    };
    println!("{}", serde_json::to_string(&report).map_err(Error::from)?);
    Ok(())
}

pub fn init_study(args: &InitStudyArgs) -> Result<()> {
    let set = load_snapshots(&args.data)?;
    let n0 = set.u.rows();
    let skeletons = match args.widths {
        Some(n1) => {
            if n1 == 0 || n1 >= n0 {
                return Err(CliError::Usage(format!("--widths must lie in 1..{n0}, got {n1}")));
            }
            width_sweep(n0, n1)?
        }
        None => depth_pattern(n0)?,
    };
    let data = prepare(&set.u, args.seed)?;
    let cfg = StudyConfig {
        act: args.act,
        class: args.class,
        baseline: args.baseline,
        trials: args.trials,
        seed: args.seed,
    };
    let rows = training::init_study(&data.train, &data.test, &skeletons, &cfg)?;
    let mut out = String::from("config,eys_mse,baseline_best_mse\n");
    for row in &rows {
        let _ = writeln!(out, "\"{}\",{:e},{:e}", row.skeleton, row.eys_mse, row.baseline_best_mse);
    }
    write(&args.out, &out)
}

pub fn bounds(args: &BoundsArgs) -> Result<()> {
    let checkpoint = Checkpoint::load(&args.model)?;
    let model = checkpoint.model()?;
    let set = load_snapshots(&args.data)?;
    let u: Matrix = match checkpoint.normalization {
        Some(n) => n.apply(&set.u),
        None => set.u,
    };
    let mse = empirical_mse(&model, &u)?;
    let mut out = String::new();
    if model.class() == ClassTag::Soae {
        let b = layerwise_bounds(&model, &u)?;
        out.push_str("k,lower_term,upper_term\n");
        for (k, (lo, hi)) in b.lower_terms.iter().zip(&b.upper_terms).enumerate() {
            let _ = writeln!(out, "{k},{lo:e},{hi:e}");
        }
        let _ = writeln!(out, "lower,{:e},", b.lower);
        let _ = writeln!(out, "mse,{mse:e},{mse:e}");
        let _ = writeln!(out, "upper,,{:e}", b.upper);
    } else {
        let n1 = model.skeleton().dims()[1];
        let floor = linear_lower_bound(&u, n1)?;
        out.push_str("k,lower_term\n");
        let _ = writeln!(out, "linear,{floor:e}");
        let _ = writeln!(out, "mse,{mse:e}");
    }
    write(&args.out, &out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::from(e).into())
}
