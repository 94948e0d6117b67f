//! Snapshot matrices: the analytic Gaussian-pulse family and a plain CSV
//! exchange format for data produced elsewhere.
//!
//! File layout: a header line `# n0=<rows> S=<cols>` followed by `rows`
//! lines of `cols` comma-separated values. Columns are snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Grid nodes of the pulse family.
pub const PGA_NODES: usize = 514;
pub const PGA_WIDTH: f64 = 400.0;
pub const PGA_MU_RANGE: (f64, f64) = (0.3, 0.7);

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    /// `n0 × S`, one snapshot per column.
    pub u: Matrix,
    /// `p × S` generating parameters, when known.
    pub param_values: Option<Matrix>,
    pub source: String,
}

impl SnapshotSet {
    pub fn new(u: Matrix, param_values: Option<Matrix>, source: impl Into<String>) -> Result<Self> {
        u.ensure_finite()?;
        if let Some(p) = &param_values {
            if p.cols() != u.cols() {
                return Err(Error::shape(
                    "snapshot_set",
                    format!("{} snapshots but {} parameter columns", u.cols(), p.cols()),
                ));
            }
        }
        Ok(SnapshotSet {
            u,
            param_values,
            source: source.into(),
        })
    }

    pub fn samples(&self) -> usize {
        self.u.cols()
    }
}

/// Uniform grid `x_i = i/513`, endpoints included.
pub fn pga_grid() -> Vec<f64> {
    let h = (PGA_NODES - 1) as f64;
    (0..PGA_NODES).map(|i| i as f64 / h).collect()
}

/// `S` pulses `exp(−400 (x − μ)²)` with `μ` drawn uniformly from `[0.3, 0.7]`.
pub fn generate_pga(samples: usize, seed: u64) -> Result<SnapshotSet> {
    if samples == 0 {
        return Err(Error::Invalid("need at least one sample".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = PGA_MU_RANGE;
    let mus: Vec<f64> = (0..samples).map(|_| rng.random_range(lo..=hi)).collect();
    let grid = pga_grid();
    let u = Matrix::from_fn(PGA_NODES, samples, |i, j| {
        let z = grid[i] - mus[j];
        (-PGA_WIDTH * z * z).exp()
    });
    SnapshotSet::new(
        u,
        Some(Matrix::from_vec(1, samples, mus)?),
        format!("pga(samples={samples}, seed={seed})"),
    )
}

/// `data.csv` → `data.params.csv`.
pub fn params_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.params.csv"))
}

/// Text form of a matrix. 17 significant digits, so parsing it back is exact.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = format!("# n0={} S={}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        for (j, x) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix_to_csv`]. `origin` only labels error messages.
pub fn matrix_from_csv(text: &str, origin: &str) -> Result<Matrix> {
    let err = |line: usize, detail: String| Error::Parse {
        path: origin.to_string(),
        line,
        detail,
    };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let (rows, cols) = match lines.next() {
        Some((_, header)) => parse_header(header).ok_or_else(|| {
            err(1, format!("expected header `# n0=<int> S=<int>`, found {header:?}"))
        })?,
        None => return Err(err(1, "empty file".to_string())),
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (line, text) in lines {
        if text.is_empty() {
            continue;
        }
        seen += 1;
        if seen > rows {
            return Err(err(line, format!("expected {rows} data rows, found more")));
        }
        let before = data.len();
        for (j, field) in text.split(',').enumerate() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(line, format!("column {}: not a number: {:?}", j + 1, field.trim())))?;
            if !x.is_finite() {
                return Err(err(line, format!("column {}: non-finite value {x}", j + 1)));
            }
            data.push(x);
        }
        let found = data.len() - before;
        if found != cols {
            return Err(err(line, format!("expected {cols} values, found {found}")));
        }
    }
    if seen != rows {
        return Err(err(
            text.lines().count().max(1),
            format!("expected {rows} data rows, found {seen}"),
        ));
    }
    Matrix::from_vec(rows, cols, data)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.strip_prefix('#')?;
    let mut rows = None;
    let mut cols = None;
    for token in rest.split_whitespace() {
        let (key, value) = token.split_once('=')?;
        let value: usize = value.parse().ok()?;
        match key {
            "n0" => rows = Some(value),
            "S" => cols = Some(value),
            _ => return None,
        }
    }
    Some((rows?, cols?))
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    matrix_from_csv(&text, &path.display().to_string())
}

/// Reads the snapshot file and, if present, its `.params.csv` sibling.
pub fn load_snapshots(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    let path = path.as_ref();
    let u = read_matrix(path)?;
    let sibling = params_path(path);
    let params = if sibling.is_file() {
        Some(read_matrix(&sibling)?)
    } else {
        None
    };
    SnapshotSet::new(u, params, path.display().to_string())
}

/// Writes the snapshots, plus the `.params.csv` sibling when parameters are known.
pub fn save_snapshots(set: &SnapshotSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(&set.u))?;
    if let Some(p) = &set.param_values {
        fs::write(params_path(path), matrix_to_csv(p))?;
    }
    Ok(())
}
