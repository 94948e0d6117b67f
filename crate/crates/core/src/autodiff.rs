//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records a straight-line program as it is evaluated. Every
//! recording method checks operand shapes up front and reports the offending
//! node on mismatch. [`Tape::backward`] then sweeps the record in reverse and
//! accumulates adjoints, so a node feeding several consumers receives the sum
//! of their contributions.

use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::linalg::{sign_of, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    AddColumn(Var, Var),
    Activate(Var, Activation),
    ActivateInverse(Var, Activation),
    Square(Var),
    Recip(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    ConcatRows(Vec<Var>),
    Norm(Var),
    Outer(Var, Var),
    DiagFromVec(Var),
    SumSquares(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::ScaleBy(..) => "scale_by",
            Op::AddColumn(..) => "add_column",
            Op::Activate(..) => "activate",
            Op::ActivateInverse(..) => "activate_inverse",
            Op::Square(..) => "square",
            Op::Recip(..) => "recip",
            Op::SliceCols(..) => "slice_cols",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceRows(..) => "slice_rows",
            Op::ConcatRows(..) => "concat_rows",
            Op::Norm(..) => "norm",
            Op::Outer(..) => "outer",
            Op::DiagFromVec(..) => "diag",
            Op::SumSquares(..) => "sum_squares",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
    /// Whether any leaf is upstream of this node.
    tracked: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaves: Vec<Var>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient with respect to `var` (zeros if the loss does not depend on it).
    pub fn wrt(&self, var: Var) -> Matrix {
        match &self.adjoints[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.get(0, 0)
    }

    pub fn leaves(&self) -> &[Var] {
        &self.leaves
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        let tracked = match &op {
            Op::Leaf => true,
            Op::Constant => false,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::ScaleBy(a, b)
            | Op::AddColumn(a, b)
            | Op::Outer(a, b) => self.tracked(*a) || self.tracked(*b),
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::Activate(a, _)
            | Op::ActivateInverse(a, _)
            | Op::Square(a)
            | Op::Recip(a)
            | Op::SliceCols(a, ..)
            | Op::SliceRows(a, ..)
            | Op::Norm(a)
            | Op::DiagFromVec(a)
            | Op::SumSquares(a) => self.tracked(*a),
            Op::ConcatCols(vs) | Op::ConcatRows(vs) => vs.iter().any(|v| self.tracked(*v)),
        };
        self.nodes.push(Node { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    fn mismatch(&self, op: &'static str, detail: String) -> Error {
        Error::Tape {
            node: self.nodes.len(),
            op,
            detail,
        }
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        let v = self.push(Op::Leaf, value);
        self.leaves.push(v);
        v
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Constant, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(self.mismatch("matmul", format!("{sa:?} x {sb:?}")));
        }
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(self.mismatch(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).add(self.value(b));
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).sub(self.value(b));
        Ok(self.push(Op::Sub(a, b), value))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).hadamard(self.value(b));
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(Op::Scale(a, c), value)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// `s * a` where `s` is a `1 x 1` node.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(self.mismatch("scale_by", format!("scalar operand is {:?}", self.shape(s))));
        }
        let value = self.value(a).scale(self.scalar(s));
        Ok(self.push(Op::ScaleBy(a, s), value))
    }

    /// Adds the column vector `col` to every column of `a`.
    pub fn add_column(&mut self, a: Var, col: Var) -> Result<Var> {
        let (sa, sc) = (self.shape(a), self.shape(col));
        if sc != (sa.0, 1) {
            return Err(self.mismatch("add_column", format!("{sa:?} + column {sc:?}")));
        }
        let value = self.value(a).add_column(self.value(col).as_slice());
        Ok(self.push(Op::AddColumn(a, col), value))
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Var {
        let value = self.value(a).map(|x| act.apply(x));
        self.push(Op::Activate(a, act), value)
    }

    pub fn activate_inverse(&mut self, a: Var, act: Activation) -> Var {
        let value = self.value(a).map(|y| act.apply_inverse(y));
        self.push(Op::ActivateInverse(a, act), value)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), value)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 / x);
        self.push(Op::Recip(a), value)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(a);
        if start > end || end > s.1 {
            return Err(self.mismatch("slice_cols", format!("{start}..{end} of {s:?}")));
        }
        let value = self.value(a).columns(start, end);
        Ok(self.push(Op::SliceCols(a, start), value))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(a);
        if start > end || end > s.0 {
            return Err(self.mismatch("slice_rows", format!("{start}..{end} of {s:?}")));
        }
        let value = self.value(a).row_range(start, end);
        Ok(self.push(Op::SliceRows(a, start), value))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map(|p| self.shape(*p).0);
        if rows.is_none() || parts.iter().any(|p| Some(self.shape(*p).0) != rows) {
            let shapes: Vec<_> = parts.iter().map(|p| self.shape(*p)).collect();
            return Err(self.mismatch("concat_cols", format!("{shapes:?}")));
        }
        let mats: Vec<&Matrix> = parts.iter().map(|p| self.value(*p)).collect();
        let value = Matrix::hstack(&mats);
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map(|p| self.shape(*p).1);
        if cols.is_none() || parts.iter().any(|p| Some(self.shape(*p).1) != cols) {
            let shapes: Vec<_> = parts.iter().map(|p| self.shape(*p)).collect();
            return Err(self.mismatch("concat_rows", format!("{shapes:?}")));
        }
        let mats: Vec<&Matrix> = parts.iter().map(|p| self.value(*p)).collect();
        let value = Matrix::vstack(&mats);
        Ok(self.push(Op::ConcatRows(parts.to_vec()), value))
    }

    /// Euclidean (Frobenius) norm as a `1 x 1` node.
    pub fn norm(&mut self, a: Var) -> Var {
        let value = Matrix::from_vec(1, 1, vec![self.value(a).frobenius_norm()]).unwrap();
        self.push(Op::Norm(a), value)
    }

    /// `a bᵀ` for column vectors `a`, `b`.
    pub fn outer(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != 1 || sb.1 != 1 {
            return Err(self.mismatch("outer", format!("{sa:?} (x) {sb:?}")));
        }
        let value = self.value(a).matmul_tr(self.value(b));
        Ok(self.push(Op::Outer(a, b), value))
    }

    pub fn diag_from_vec(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.1 != 1 {
            return Err(self.mismatch("diag", format!("expected a column vector, got {s:?}")));
        }
        let value = Matrix::diag(self.value(a).as_slice());
        Ok(self.push(Op::DiagFromVec(a), value))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let value = Matrix::from_vec(1, 1, vec![self.value(a).sum_squares()]).unwrap();
        self.push(Op::SumSquares(a), value)
    }

    /// Orthonormalization by Householder reflections, recorded as primitive
    /// operations. Mirrors [`crate::linalg::pi_orth`] step by step, so the
    /// values agree with it to rounding.
    pub fn pi_orth(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.shape(a);
        if m < n {
            return Err(self.mismatch("pi_orth", format!("needs rows >= cols, got {m}x{n}")));
        }
        let mut r = a;
        let mut reflectors: Vec<Option<(Var, Var)>> = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for k in 0..n {
            let column = self.slice_cols(r, k, k + 1)?;
            let tail = self.slice_rows(column, k, m)?;
            let tail_values = self.value(tail).as_slice().to_vec();
            let tail_norm: f64 = tail_values.iter().map(|x| x * x).sum::<f64>().sqrt();
            if m - k == 1 || tail_norm == 0.0 {
                reflectors.push(None);
                signs.push(sign_of(tail_values[0]));
                continue;
            }
            let s = sign_of(tail_values[0]);
            let x = if k > 0 {
                let zeros = self.constant(Matrix::zeros(k, 1));
                self.concat_rows(&[zeros, tail])?
            } else {
                tail
            };
            let nrm = self.norm(tail);
            let mut unit = Matrix::zeros(m, 1);
            unit[(k, 0)] = s;
            let unit = self.constant(unit);
            let shift = self.scale_by(unit, nrm)?;
            let v = self.add(x, shift)?;
            let vv = self.sum_squares(v);
            let inv = self.recip(vv);
            let coef = self.scale(inv, 2.0);
            r = self.reflect(r, v, coef)?;
            reflectors.push(Some((v, coef)));
            signs.push(-s);
        }
        let mut q = self.constant(Matrix::eye(m, n));
        for (v, coef) in reflectors.iter().rev().flatten() {
            q = self.reflect(q, *v, *coef)?;
        }
        let sign_mask = Matrix::from_fn(m, n, |_, j| signs[j]);
        let sign_mask = self.constant(sign_mask);
        self.mul(q, sign_mask)
    }

    /// `x − coef · v (vᵀ x)`.
    fn reflect(&mut self, x: Var, v: Var, coef: Var) -> Result<Var> {
        let vt = self.transpose(v);
        let vtx = self.matmul(vt, x)?;
        let update = self.matmul(v, vtx)?;
        let update = self.scale_by(update, coef)?;
        self.sub(x, update)
    }

    /// Reverse sweep from the `1 x 1` node `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Tape {
                node: loss.0,
                op: self.nodes[loss.0].op.name(),
                detail: format!("backward needs a scalar, got {:?}", self.shape(loss)),
            });
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]).unwrap());
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            self.propagate(idx, &g, &mut adj);
            adj[idx] = Some(g);
        }
        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, idx: usize, g: &Matrix, adj: &mut [Option<Matrix>]) {
        let out = &self.nodes[idx].value;
        let mut send = |v: Var, contribution: Matrix| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut adj[v.0] {
                Some(acc) => acc.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        match &self.nodes[idx].op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                if self.tracked(*a) {
                    send(*a, g.matmul_tr(self.value(*b)));
                }
                if self.tracked(*b) {
                    send(*b, self.value(*a).tr_matmul(g));
                }
            }
            Op::Transpose(a) => send(*a, g.transpose()),
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if self.tracked(*a) {
                    send(*a, g.hadamard(self.value(*b)));
                }
                if self.tracked(*b) {
                    send(*b, g.hadamard(self.value(*a)));
                }
            }
            Op::Scale(a, c) => send(*a, g.scale(*c)),
            Op::ScaleBy(a, s) => {
                if self.tracked(*a) {
                    send(*a, g.scale(self.scalar(*s)));
                }
                if self.tracked(*s) {
                    let ds: f64 = g
                        .as_slice()
                        .iter()
                        .zip(self.value(*a).as_slice())
                        .map(|(x, y)| x * y)
                        .sum();
                    send(*s, Matrix::from_vec(1, 1, vec![ds]).unwrap());
                }
            }
            Op::AddColumn(a, col) => {
                send(*a, g.clone());
                if self.tracked(*col) {
                    let sums: Vec<f64> = (0..g.rows()).map(|i| g.row(i).iter().sum()).collect();
                    send(*col, Matrix::column_vector(&sums));
                }
            }
            Op::Activate(a, act) => {
                let x = self.value(*a);
                send(*a, g.zip_map(x, |gi, xi| gi * act.derivative(xi)));
            }
            Op::ActivateInverse(a, act) => {
                // (ρ⁻¹)'(y) = 1 / ρ'(ρ⁻¹(y)), and ρ⁻¹(y) is this node's value.
                send(*a, g.zip_map(out, |gi, xi| gi / act.derivative(xi)));
            }
            Op::Square(a) => {
                let x = self.value(*a);
                send(*a, g.zip_map(x, |gi, xi| 2.0 * gi * xi));
            }
            Op::Recip(a) => {
                send(*a, g.zip_map(out, |gi, yi| -gi * yi * yi));
            }
            Op::SliceCols(a, start) => {
                let (r, c) = self.shape(*a);
                let mut full = Matrix::zeros(r, c);
                for i in 0..r {
                    for j in 0..g.cols() {
                        full[(i, start + j)] = g.get(i, j);
                    }
                }
                send(*a, full);
            }
            Op::SliceRows(a, start) => {
                let (r, c) = self.shape(*a);
                let mut full = Matrix::zeros(r, c);
                for i in 0..g.rows() {
                    for j in 0..c {
                        full[(start + i, j)] = g.get(i, j);
                    }
                }
                send(*a, full);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    if self.tracked(*p) {
                        send(*p, g.columns(off, off + w));
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let h = self.shape(*p).0;
                    if self.tracked(*p) {
                        send(*p, g.row_range(off, off + h));
                    }
                    off += h;
                }
            }
            Op::Norm(a) => {
                let n = out.get(0, 0);
                let x = self.value(*a);
                let factor = if n > 0.0 { g.get(0, 0) / n } else { 0.0 };
                send(*a, x.scale(factor));
            }
            Op::Outer(a, b) => {
                if self.tracked(*a) {
                    send(*a, g.matmul(self.value(*b)));
                }
                if self.tracked(*b) {
                    send(*b, g.tr_matmul(self.value(*a)));
                }
            }
            Op::DiagFromVec(a) => {
                let d: Vec<f64> = (0..g.rows()).map(|i| g.get(i, i)).collect();
                send(*a, Matrix::column_vector(&d));
            }
            Op::SumSquares(a) => {
                let x = self.value(*a);
                send(*a, x.scale(2.0 * g.get(0, 0)));
            }
        }
    }
}

/// A scalar-valued computation recorded onto a tape from leaf variables and a
/// data batch.
pub trait Program {
    fn record(&self, tape: &mut Tape, leaves: &[Var], batch: &Matrix) -> Result<Var>;
}

impl<F> Program for F
where
    F: Fn(&mut Tape, &[Var], &Matrix) -> Result<Var>,
{
    fn record(&self, tape: &mut Tape, leaves: &[Var], batch: &Matrix) -> Result<Var> {
        self(tape, leaves, batch)
    }
}

/// A recorded forward pass.
pub struct Recording {
    pub tape: Tape,
    pub leaves: Vec<Var>,
    pub loss: Var,
}

impl Recording {
    pub fn loss_value(&self) -> f64 {
        self.tape.scalar(self.loss)
    }

    /// Gradients on the leaves, in leaf order.
    pub fn gradients(&self) -> Result<Vec<Matrix>> {
        let grads = self.tape.backward(self.loss)?;
        Ok(self.leaves.iter().map(|v| grads.wrt(*v)).collect())
    }
}

/// Records `program` on a fresh tape with copies of `leaves` as inputs.
pub fn forward<P: Program + ?Sized>(program: &P, leaves: &[Matrix], batch: &Matrix) -> Result<Recording> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|m| tape.leaf(m.clone())).collect();
    let loss = program.record(&mut tape, &vars, batch)?;
    if tape.shape(loss) != (1, 1) {
        return Err(Error::Tape {
            node: loss.0,
            op: tape.nodes[loss.0].op.name(),
            detail: format!("program output must be scalar, got {:?}", tape.shape(loss)),
        });
    }
    Ok(Recording {
        tape,
        leaves: vars,
        loss,
    })
}

/// Loss value and leaf gradients in one call.
pub fn value_and_grad<P: Program + ?Sized>(
    program: &P,
    leaves: &[Matrix],
    batch: &Matrix,
) -> Result<(f64, Vec<Matrix>)> {
    let rec = forward(program, leaves, batch)?;
    Ok((rec.loss_value(), rec.gradients()?))
}

/// Largest relative discrepancy between taped gradients and central finite
/// differences over every leaf entry:
/// `|g_ad − g_fd| / max(1e-8, |g_ad| + |g_fd|)`.
pub fn grad_check<P: Program + ?Sized>(
    program: &P,
    leaves: &[Matrix],
    batch: &Matrix,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let (_, grads) = value_and_grad(program, leaves, batch)?;
    let mut probe: Vec<Matrix> = leaves.to_vec();
    let mut worst: f64 = 0.0;
    for (l, grad) in grads.iter().enumerate() {
        for k in 0..leaves[l].as_slice().len() {
            let orig = leaves[l].as_slice()[k];
            probe[l].as_mut_slice()[k] = orig + step;
            let plus = forward(program, &probe, batch)?.loss_value();
            probe[l].as_mut_slice()[k] = orig - step;
            let minus = forward(program, &probe, batch)?.loss_value();
            probe[l].as_mut_slice()[k] = orig;
            let fd = (plus - minus) / (2.0 * step);
            let ad = grad.as_slice()[k];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
