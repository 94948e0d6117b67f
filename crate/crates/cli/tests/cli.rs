use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use symae::architecture::Checkpoint;
use symae::bounds::pod;
use symae::data_io::{load_snapshots, save_snapshots, SnapshotSet};
use symae::Matrix;

fn symae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

/// Columns on a 2-dimensional affine subspace of R^6.
fn rank_two_snapshots(dir: &Path) -> std::path::PathBuf {
    let u = Matrix::from_fn(6, 24, |i, j| {
        let a = (j as f64 * 0.37).sin();
        let b = (j as f64 * 0.11).cos();
        0.5 + a * (i as f64 + 1.0) / 6.0 + b * if i % 2 == 0 { 1.0 } else { -0.5 }
    });
    let path = dir.join("toy.csv");
    save_snapshots(&SnapshotSet::new(u, None, "toy").unwrap(), &path).unwrap();
    path
}

#[test]
fn gen_pga_is_deterministic_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = symae(&["gen-pga", "--samples", "40", "--seed", "0", "--out", path_str(p)]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let set = load_snapshots(&a).unwrap();
    assert_eq!(set.u.shape(), (514, 40));
    assert_eq!(set.param_values.unwrap().shape(), (1, 40));

    let one = dir.path().join("one.csv");
    assert!(symae(&["gen-pga", "--samples", "1", "--out", path_str(&one)]).status.success());
    assert_eq!(load_snapshots(&one).unwrap().u.shape(), (514, 1));

    let bad = dir.path().join("missing").join("x.csv");
    let out = symae(&["gen-pga", "--samples", "3", "--out", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn orthogonal_linear_training_reproduces_pod() {
    let dir = tempfile::tempdir().unwrap();
    let data = rank_two_snapshots(dir.path());
    let model = dir.path().join("m.json");
    let history = dir.path().join("h.csv");
    let out = symae(&[
        "train", "--data", path_str(&data), "--class", "soae", "--skeleton", "6,3,2", "--act", "identity",
        "--init", "eys", "--epochs", "3", "--patience", "3", "--lr", "1e-14", "--out-model", path_str(&model),
        "--out-history", path_str(&history),
    ]);
    let report = json(&out);
    for key in ["class", "skeleton", "activation", "init", "seed", "mse", "mre", "epochs_run", "best_epoch"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["class"], "SOAE");
    assert_eq!(report["skeleton"], "6,3,2");
    // The data is exactly rank two, so the optimal affine rank-2 error is zero.
    let u = load_snapshots(&data).unwrap().u;
    assert!(pod(&u, 2).unwrap().error < 1e-24);
    assert!(report["mse"].as_f64().unwrap() < 1e-20, "{report}");

    let ckpt = Checkpoint::load(&model).unwrap();
    ckpt.model().unwrap().check_invariants(1e-12).unwrap();
    let csv = fs::read_to_string(&history).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "epoch,train_loss,val_loss,wall_time_s,constraint_residual");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn train_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = rank_two_snapshots(dir.path());
    let d = path_str(&data);
    let code = |args: &[&str]| symae(args).status.code();
    // Widths must not increase.
    assert_eq!(code(&["train", "--data", d, "--skeleton", "6,3,4", "--act", "identity"]), Some(2));
    assert_eq!(code(&["train", "--data", d, "--skeleton", "6,3", "--act", "bogus"]), Some(2));
    assert_eq!(code(&["train", "--data", d, "--skeleton", "6,3", "--act", "identity", "--class", "soae", "--init", "he"]), Some(2));
    // Skeleton input width disagrees with the data.
    assert_eq!(code(&["train", "--data", d, "--skeleton", "7,3", "--act", "identity"]), Some(3));
    assert_eq!(code(&["train", "--data", "/nonexistent.csv", "--skeleton", "6,3", "--act", "identity"]), Some(3));
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "# n0=2 S=2\n1,2\n3\n").unwrap();
    assert_eq!(code(&["train", "--data", path_str(&ragged), "--skeleton", "2,1", "--act", "identity"]), Some(3));
}

#[test]
fn pga_skeleton_from_the_comparative_study_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pga.csv");
    assert!(symae(&["gen-pga", "--samples", "16", "--seed", "1", "--out", path_str(&data)]).status.success());
    let out = symae(&[
        "train", "--data", path_str(&data), "--skeleton", "514,64,15,3", "--act", "leakyrelu:0.8333333333333334,1.25",
        "--epochs", "2", "--patience", "2",
    ]);
    let report = json(&out);
    assert_eq!(report["epochs_run"], 2);
    assert!(report["mse"].as_f64().unwrap().is_finite());
    assert_eq!(symae(&["train", "--data", path_str(&data), "--skeleton", "514,64,65,3", "--act", "identity"]).status.code(), Some(2));
}

fn study_rows(path: &Path) -> Vec<(String, f64, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("config,eys_mse,baseline_best_mse"));
    lines
        .map(|l| {
            let (cfg, rest) = l.rsplit_once("\",").unwrap();
            let (a, b) = rest.split_once(',').unwrap();
            (cfg.trim_start_matches('"').to_string(), a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn init_study_more_trials_never_hurt() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pga.csv");
    assert!(symae(&["gen-pga", "--samples", "24", "--seed", "2", "--out", path_str(&data)]).status.success());
    let run = |trials: &str, name: &str| {
        let out = dir.path().join(name);
        let status = symae(&[
            "init-study", "--data", path_str(&data), "--act", "hypact:0.1", "--widths", "4", "--trials", trials,
            "--seed", "5", "--out", path_str(&out),
        ])
        .status;
        assert!(status.success());
        study_rows(&out)
    };
    let one = run("1", "one.csv");
    let many = run("30", "many.csv");
    assert_eq!(one.len(), 4);
    assert_eq!(one[0].0, "514,4,1");
    for (a, b) in one.iter().zip(&many) {
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert!(b.2 <= a.2);
    }

    let depth = dir.path().join("depth.csv");
    let status = symae(&[
        "init-study", "--data", path_str(&data), "--act", "hypact:0.1", "--depth-pattern", "--trials", "2",
        "--out", path_str(&depth),
    ])
    .status;
    assert!(status.success());
    let rows = study_rows(&depth);
    assert_eq!(rows.first().unwrap().0, "514,65,3");
    assert_eq!(rows.last().unwrap().0, "514,65,33,17,9,5,3");
    // Neither or both configuration flags is a usage error.
    assert_eq!(symae(&["init-study", "--data", path_str(&data), "--act", "identity", "--out", "x"]).status.code(), Some(2));
}

fn bounds_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn value(rows: &[Vec<String>], key: &str, col: usize) -> f64 {
    rows.iter().find(|r| r[0] == key).unwrap()[col].parse().unwrap()
}

#[test]
fn bounds_for_orthogonal_and_unconstrained_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pga.csv");
    assert!(symae(&["gen-pga", "--samples", "20", "--seed", "3", "--out", path_str(&data)]).status.success());
    let train = |class: &str, act: &str, init: &str, name: &str| {
        let model = dir.path().join(name);
        let out = symae(&[
            "train", "--data", path_str(&data), "--class", class, "--skeleton", "514,6,3", "--act", act, "--init", init,
            "--epochs", "2", "--patience", "2", "--out-model", path_str(&model),
        ]);
        json(&out);
        let csv = dir.path().join(format!("{name}.bounds.csv"));
        let out = symae(&["bounds", "--model", path_str(&model), "--data", path_str(&data), "--out", path_str(&csv)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        bounds_csv(&csv)
    };

    let rows = train("soae", "hypact:0.3", "orth", "soae.json");
    assert_eq!(rows[0], ["k", "lower_term", "upper_term"]);
    let (lo, mse, hi) = (value(&rows, "lower", 1), value(&rows, "mse", 1), value(&rows, "upper", 2));
    assert!(lo <= mse + 1e-12 && mse <= hi + 1e-12, "{lo} {mse} {hi}");
    let terms: f64 = rows[1..3].iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((terms - lo).abs() <= 1e-12 * lo.max(1.0));

    let rows = train("soae", "identity", "eys", "linear.json");
    let (lo, mse, hi) = (value(&rows, "lower", 1), value(&rows, "mse", 1), value(&rows, "upper", 2));
    assert!((lo - mse).abs() <= 1e-9 * mse && (hi - mse).abs() <= 1e-9 * mse, "{lo} {mse} {hi}");

    let rows = train("sae", "hypact:0.3", "eys", "sae.json");
    assert_eq!(rows[0], ["k", "lower_term"]);
    assert!(rows.iter().all(|r| r.len() == 2));
    assert!(value(&rows, "linear", 1) <= value(&rows, "mse", 1));

    let other = dir.path().join("other.csv");
    let small = Matrix::from_fn(5, 8, |i, j| (i * j) as f64);
    save_snapshots(&SnapshotSet::new(small, None, "x").unwrap(), &other).unwrap();
    let out = symae(&[
        "bounds", "--model", path_str(&dir.path().join("sae.json")), "--data", path_str(&other), "--out",
        path_str(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
