//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! Every operation on a recording [`Tape`] appends a node holding its value and
//! the indices of its operands. [`Tape::backward`] walks the nodes in reverse
//! and accumulates vector-Jacobian products into each operand. Node indices are
//! assigned in execution order, so reverse index order is a valid topological
//! order for the backward sweep.
//!
//! An inference tape ([`Tape::inference`]) records nothing: values flow through
//! the same kernels and are dropped as soon as they go out of scope.
//!
//! ```
//! use stgraph::numerics::{Matrix, Tape};
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Matrix::from_rows(&[[3.0]]));
//! let y = tape.mul(&x, &x).unwrap();
//! let loss = tape.sum(&y);
//! let grads = tape.backward(&loss).unwrap();
//! assert_eq!(grads.wrt(&x)[(0, 0)], 6.0);
//! ```

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::numerics::elementary::{sigmoid, tanh};
use crate::numerics::matrix::{gemm_nt, gemm_tn, product, softmax_in_place};
use crate::numerics::sparse::{SparseOp, Summation};
use crate::numerics::Matrix;

/// A matrix value, optionally tracked by a recording tape.
#[derive(Clone, Debug)]
pub struct Var {
    value: Rc<Matrix>,
    node: Option<usize>,
}

impl Var {
    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn rows(&self) -> usize {
        self.value.rows()
    }

    pub fn cols(&self) -> usize {
        self.value.cols()
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }

    /// Scalar value of a 1×1 result.
    pub fn scalar(&self) -> f64 {
        self.value[(0, 0)]
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    ScaleRows(usize, usize),
    Affine(usize, f64, f64),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    ConcatCols(Vec<usize>),
    SliceCols(usize, usize, usize),
    SumRows(usize),
    SumCols(usize),
    SoftmaxRows(usize),
    Propagate(Rc<SparseOp>, usize),
    MaskedAbsSum {
        pred: usize,
        target: Rc<Matrix>,
        mask: Option<Rc<Matrix>>,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Rc<Matrix>,
    needs_grad: bool,
}

/// Operation record. See the module docs.
#[derive(Debug)]
pub struct Tape {
    recording: bool,
    summation: Summation,
    nodes: RefCell<Vec<Node>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// A recording tape; graph propagation sums in index order.
    pub fn new() -> Self {
        Self {
            recording: true,
            summation: Summation::Sequential,
            nodes: RefCell::new(Vec::new()),
        }
    }

    /// A non-recording tape; graph propagation sums in canonical order so that
    /// outputs are exactly equivariant under node relabelling.
    pub fn inference() -> Self {
        Self {
            recording: false,
            summation: Summation::Canonical,
            nodes: RefCell::new(Vec::new()),
        }
    }

    /// A non-recording tape that sums in index order, like training does.
    /// Cheaper than [`Tape::inference`] when exact equivariance is not needed.
    pub fn scoring() -> Self {
        Self {
            recording: false,
            summation: Summation::Sequential,
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A trainable input: gradients are reported for it.
    pub fn leaf(&self, value: Matrix) -> Var {
        self.leaf_rc(Rc::new(value), true)
    }

    /// A leaf sharing storage with the caller.
    pub fn leaf_shared(&self, value: Rc<Matrix>) -> Var {
        self.leaf_rc(value, true)
    }

    /// A fixed input: recorded for replay but never differentiated.
    pub fn constant(&self, value: Matrix) -> Var {
        self.leaf_rc(Rc::new(value), false)
    }

    fn leaf_rc(&self, value: Rc<Matrix>, trainable: bool) -> Var {
        self.push(Op::Leaf, value, trainable)
    }

    fn push(&self, op: Op, value: Rc<Matrix>, needs_grad: bool) -> Var {
        if !self.recording {
            return Var { value, node: None };
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            value: Rc::clone(&value),
            needs_grad,
        });
        Var {
            value,
            node: Some(nodes.len() - 1),
        }
    }

    fn needs(&self, vars: &[&Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter()
            .any(|v| v.node.is_some_and(|i| nodes[i].needs_grad))
    }

    fn emit(&self, op: impl FnOnce() -> Op, value: Matrix, inputs: &[&Var]) -> Var {
        if !self.recording {
            return Var {
                value: Rc::new(value),
                node: None,
            };
        }
        let needs = self.needs(inputs);
        self.push(op(), Rc::new(value), needs)
    }

    fn id(v: &Var) -> usize {
        // Vars created by a recording tape always carry a node; callers must not
        // mix vars from different tapes.
        v.node.unwrap_or(usize::MAX)
    }

    pub fn matmul(&self, a: &Var, b: &Var) -> Result<Var> {
        let out = a.value.matmul(&b.value)?;
        Ok(self.emit(|| Op::MatMul(Self::id(a), Self::id(b)), out, &[a, b]))
    }

    pub fn add(&self, a: &Var, b: &Var) -> Result<Var> {
        let out = a.value.add(&b.value)?;
        Ok(self.emit(|| Op::Add(Self::id(a), Self::id(b)), out, &[a, b]))
    }

    pub fn sub(&self, a: &Var, b: &Var) -> Result<Var> {
        let out = a.value.sub(&b.value)?;
        Ok(self.emit(|| Op::Sub(Self::id(a), Self::id(b)), out, &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&self, a: &Var, b: &Var) -> Result<Var> {
        let out = a.value.hadamard(&b.value)?;
        Ok(self.emit(|| Op::Mul(Self::id(a), Self::id(b)), out, &[a, b]))
    }

    /// Multiplies row `i` of `x` by `w[i]`; `w` is a column vector.
    pub fn scale_rows(&self, x: &Var, w: &Var) -> Result<Var> {
        let out = scale_rows(&x.value, &w.value)?;
        Ok(self.emit(|| Op::ScaleRows(Self::id(x), Self::id(w)), out, &[x, w]))
    }

    /// `scale · x + shift`, elementwise.
    pub fn affine(&self, x: &Var, scale: f64, shift: f64) -> Var {
        let out = x.value.map(|v| scale * v + shift);
        self.emit(|| Op::Affine(Self::id(x), scale, shift), out, &[x])
    }

    pub fn scale(&self, x: &Var, s: f64) -> Var {
        self.affine(x, s, 0.0)
    }

    pub fn sigmoid(&self, x: &Var) -> Var {
        let out = x.value.map(sigmoid);
        self.emit(|| Op::Sigmoid(Self::id(x)), out, &[x])
    }

    pub fn tanh(&self, x: &Var) -> Var {
        let out = x.value.map(tanh);
        self.emit(|| Op::Tanh(Self::id(x)), out, &[x])
    }

    pub fn relu(&self, x: &Var) -> Var {
        let out = x.value.map(|v| v.max(0.0));
        self.emit(|| Op::Relu(Self::id(x)), out, &[x])
    }

    pub fn concat_cols(&self, parts: &[&Var]) -> Result<Var> {
        let values: Vec<&Matrix> = parts.iter().map(|p| p.value.as_ref()).collect();
        let out = Matrix::concat_cols(&values)?;
        Ok(self.emit(
            || Op::ConcatCols(parts.iter().map(|p| Self::id(p)).collect()),
            out,
            parts,
        ))
    }

    pub fn slice_cols(&self, x: &Var, start: usize, end: usize) -> Result<Var> {
        let out = x.value.slice_cols(start, end)?;
        Ok(self.emit(|| Op::SliceCols(Self::id(x), start, end), out, &[x]))
    }

    /// Per-row totals as an `r × 1` column.
    pub fn sum_rows(&self, x: &Var) -> Var {
        let out = Matrix::column(&x.value.row_sums());
        self.emit(|| Op::SumRows(Self::id(x)), out, &[x])
    }

    /// Per-column totals as a `1 × c` row.
    pub fn sum_cols(&self, x: &Var) -> Var {
        let out = sum_cols(&x.value);
        self.emit(|| Op::SumCols(Self::id(x)), out, &[x])
    }

    /// Sum of all entries as a 1×1 value.
    pub fn sum(&self, x: &Var) -> Var {
        let rows = self.sum_rows(x);
        self.sum_cols(&rows)
    }

    pub fn softmax_rows(&self, x: &Var) -> Var {
        let out = softmax_rows(&x.value);
        self.emit(|| Op::SoftmaxRows(Self::id(x)), out, &[x])
    }

    /// Block-wise graph operator application, see [`SparseOp`].
    pub fn propagate(&self, op: &Rc<SparseOp>, x: &Var) -> Result<Var> {
        let out = op.apply(&x.value, self.summation)?;
        Ok(self.emit(|| Op::Propagate(Rc::clone(op), Self::id(x)), out, &[x]))
    }

    /// `Σ mask ∘ |pred − target|` as a 1×1 value; without a mask every entry counts.
    pub fn masked_abs_sum(
        &self,
        pred: &Var,
        target: &Rc<Matrix>,
        mask: Option<&Rc<Matrix>>,
    ) -> Result<Var> {
        if pred.shape() != target.shape() {
            return Err(pred.value.mismatch("masked_abs_sum", target));
        }
        if let Some(m) = mask {
            if m.shape() != target.shape() {
                return Err(m.mismatch("masked_abs_sum mask", target));
            }
        }
        let out = masked_abs_sum(&pred.value, target, mask.map(|m| m.as_ref()));
        Ok(self.emit(
            || Op::MaskedAbsSum {
                pred: Self::id(pred),
                target: Rc::clone(target),
                mask: mask.cloned(),
            },
            out,
            &[pred],
        ))
    }

    /// Mean absolute error over unmasked entries; zero when everything is masked.
    pub fn masked_mae(
        &self,
        pred: &Var,
        target: &Rc<Matrix>,
        mask: Option<&Rc<Matrix>>,
    ) -> Result<Var> {
        let total = self.masked_abs_sum(pred, target, mask)?;
        let count = mask.map_or(target.len() as f64, |m| m.sum());
        if count == 0.0 {
            log::warn!("masked MAE over an entirely masked target");
            return Ok(self.scale(&total, 0.0));
        }
        Ok(self.scale(&total, 1.0 / count))
    }

    /// Gradients of a 1×1 `output` with respect to every trainable leaf.
    pub fn backward(&self, output: &Var) -> Result<Gradients> {
        if output.shape() != (1, 1) {
            return Err(Error::contract(format!(
                "backward needs a 1x1 output, got {}x{}",
                output.rows(),
                output.cols()
            )));
        }
        let Some(root) = output.node else {
            return Err(Error::contract("backward on an untracked value"));
        };
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Matrix>> = vec![None; nodes.len()];
        grads[root] = Some(Matrix::filled(1, 1, 1.0));

        for i in (0..=root).rev() {
            if !nodes[i].needs_grad {
                continue;
            }
            if matches!(nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            backprop(&nodes, i, &g, &mut grads);
        }

        let leaves = nodes
            .iter()
            .zip(grads)
            .map(|(n, g)| match n.op {
                Op::Leaf if n.needs_grad => Some(g.unwrap_or_else(|| Matrix::zeros(n.value.rows(), n.value.cols()))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads: leaves })
    }

    /// Recomputes every recorded value from the leaves.
    pub fn replay(&self) -> Vec<Matrix> {
        let nodes = self.nodes.borrow();
        let mut values: Vec<Matrix> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let v = match &node.op {
                Op::Leaf => node.value.as_ref().clone(),
                op => forward(op, &values, self.summation),
            };
            values.push(v);
        }
        values
    }

    /// Values currently stored on the tape, in record order.
    pub fn recorded_values(&self) -> Vec<Matrix> {
        self.nodes
            .borrow()
            .iter()
            .map(|n| n.value.as_ref().clone())
            .collect()
    }
}

/// Gradients for the trainable leaves of one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: &Var) -> Option<&Matrix> {
        v.node.and_then(|i| self.grads.get(i)?.as_ref())
    }

    /// Gradient of `v`, zeros if `v` is untracked or did not influence the output.
    pub fn wrt(&self, v: &Var) -> Matrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(v.rows(), v.cols()))
    }
}

fn forward(op: &Op, values: &[Matrix], summation: Summation) -> Matrix {
    let v = |i: usize| &values[i];
    match op {
        Op::Leaf => unreachable!("leaves are not recomputed"),
        Op::MatMul(a, b) => product(v(*a), v(*b)),
        Op::Add(a, b) => v(*a).zip("add", v(*b), |x, y| x + y).expect("recorded shapes"),
        Op::Sub(a, b) => v(*a).zip("sub", v(*b), |x, y| x - y).expect("recorded shapes"),
        Op::Mul(a, b) => v(*a).zip("mul", v(*b), |x, y| x * y).expect("recorded shapes"),
        Op::ScaleRows(x, w) => scale_rows(v(*x), v(*w)).expect("recorded shapes"),
        Op::Affine(x, s, t) => v(*x).map(|e| s * e + t),
        Op::Sigmoid(x) => v(*x).map(sigmoid),
        Op::Tanh(x) => v(*x).map(tanh),
        Op::Relu(x) => v(*x).map(|e| e.max(0.0)),
        Op::ConcatCols(parts) => {
            let ms: Vec<&Matrix> = parts.iter().map(|&p| v(p)).collect();
            Matrix::concat_cols(&ms).expect("recorded shapes")
        }
        Op::SliceCols(x, start, end) => v(*x).slice_cols(*start, *end).expect("recorded shapes"),
        Op::SumRows(x) => Matrix::column(&v(*x).row_sums()),
        Op::SumCols(x) => sum_cols(v(*x)),
        Op::SoftmaxRows(x) => softmax_rows(v(*x)),
        Op::Propagate(s, x) => s.apply(v(*x), summation).expect("recorded shapes"),
        Op::MaskedAbsSum { pred, target, mask } => {
            masked_abs_sum(v(*pred), target, mask.as_deref())
        }
    }
}

fn backprop(nodes: &[Node], i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
    let val = |j: usize| nodes[j].value.as_ref();
    let wants = |j: usize| nodes[j].needs_grad;
    macro_rules! slot {
        ($j:expr) => {
            grad_slot(nodes, grads, $j)
        };
    }

    match &nodes[i].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            if wants(*a) {
                gemm_nt(g, val(*b), slot!(*a));
            }
            if wants(*b) {
                gemm_tn(val(*a), g, slot!(*b));
            }
        }
        Op::Add(a, b) => {
            if wants(*a) {
                slot!(*a).accumulate(g);
            }
            if wants(*b) {
                slot!(*b).accumulate(g);
            }
        }
        Op::Sub(a, b) => {
            if wants(*a) {
                slot!(*a).accumulate(g);
            }
            if wants(*b) {
                zip_into(slot!(*b), g, g, |x, _| -x);
            }
        }
        Op::Mul(a, b) => {
            if wants(*a) {
                zip_into(slot!(*a), g, val(*b), |x, y| x * y);
            }
            if wants(*b) {
                zip_into(slot!(*b), g, val(*a), |x, y| x * y);
            }
        }
        Op::ScaleRows(x, w) => {
            let xv = val(*x);
            let wv = val(*w);
            if wants(*x) {
                let dx = slot!(*x);
                for r in 0..g.rows() {
                    let s = wv[(r, 0)];
                    for (d, &e) in dx.row_mut(r).iter_mut().zip(g.row(r)) {
                        *d += e * s;
                    }
                }
            }
            if wants(*w) {
                let dw = slot!(*w);
                for r in 0..g.rows() {
                    let dot: f64 = g.row(r).iter().zip(xv.row(r)).map(|(a, b)| a * b).sum();
                    dw[(r, 0)] += dot;
                }
            }
        }
        Op::Affine(x, s, _) => {
            if wants(*x) {
                let s = *s;
                zip_into(slot!(*x), g, g, |e, _| e * s);
            }
        }
        Op::Sigmoid(x) => {
            if wants(*x) {
                zip_into(slot!(*x), g, &nodes[i].value, |e, y| e * y * (1.0 - y));
            }
        }
        Op::Tanh(x) => {
            if wants(*x) {
                zip_into(slot!(*x), g, &nodes[i].value, |e, y| e * (1.0 - y * y));
            }
        }
        Op::Relu(x) => {
            if wants(*x) {
                zip_into(slot!(*x), g, val(*x), |e, v| if v > 0.0 { e } else { 0.0 });
            }
        }
        Op::ConcatCols(parts) => {
            let mut offset = 0;
            for &p in parts {
                let width = val(p).cols();
                if wants(p) {
                    let dp = slot!(p);
                    for r in 0..g.rows() {
                        for (d, &e) in dp.row_mut(r).iter_mut().zip(&g.row(r)[offset..offset + width]) {
                            *d += e;
                        }
                    }
                }
                offset += width;
            }
        }
        Op::SliceCols(x, start, _) => {
            if wants(*x) {
                let dx = slot!(*x);
                let w = g.cols();
                for r in 0..g.rows() {
                    for (d, &e) in dx.row_mut(r)[*start..*start + w].iter_mut().zip(g.row(r)) {
                        *d += e;
                    }
                }
            }
        }
        Op::SumRows(x) => {
            if wants(*x) {
                let dx = slot!(*x);
                for r in 0..g.rows() {
                    let e = g[(r, 0)];
                    dx.row_mut(r).iter_mut().for_each(|d| *d += e);
                }
            }
        }
        Op::SumCols(x) => {
            if wants(*x) {
                let dx = slot!(*x);
                for r in 0..dx.rows() {
                    for (d, &e) in dx.row_mut(r).iter_mut().zip(g.row(0)) {
                        *d += e;
                    }
                }
            }
        }
        Op::SoftmaxRows(x) => {
            if wants(*x) {
                let y = &nodes[i].value;
                let dx = slot!(*x);
                for r in 0..g.rows() {
                    let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                    for ((d, &e), &yv) in dx.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                        *d += yv * (e - dot);
                    }
                }
            }
        }
        Op::Propagate(s, x) => {
            if wants(*x) {
                s.apply_transpose_into(g, slot!(*x));
            }
        }
        Op::MaskedAbsSum { pred, target, mask } => {
            if wants(*pred) {
                let scale = g[(0, 0)];
                let p = val(*pred);
                let dp = slot!(*pred);
                for (k, d) in dp.as_mut_slice().iter_mut().enumerate() {
                    let m = mask.as_ref().map_or(1.0, |m| m.as_slice()[k]);
                    let diff = p.as_slice()[k] - target.as_slice()[k];
                    let sign = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    *d += scale * m * sign;
                }
            }
        }
    }
}

fn grad_slot<'a>(nodes: &[Node], grads: &'a mut [Option<Matrix>], j: usize) -> &'a mut Matrix {
    let (r, c) = nodes[j].value.shape();
    grads[j].get_or_insert_with(|| Matrix::zeros(r, c))
}

fn zip_into(dst: &mut Matrix, a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) {
    for ((d, &x), &y) in dst.as_mut_slice().iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
        *d += f(x, y);
    }
}

fn scale_rows(x: &Matrix, w: &Matrix) -> Result<Matrix> {
    if w.cols() != 1 || w.rows() != x.rows() {
        return Err(x.mismatch("scale_rows", w));
    }
    let mut out = x.clone();
    for r in 0..x.rows() {
        let s = w[(r, 0)];
        out.row_mut(r).iter_mut().for_each(|v| *v *= s);
    }
    Ok(out)
}

fn sum_cols(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, x.cols());
    for r in 0..x.rows() {
        for (o, &v) in out.row_mut(0).iter_mut().zip(x.row(r)) {
            *o += v;
        }
    }
    out
}

fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

fn masked_abs_sum(pred: &Matrix, target: &Matrix, mask: Option<&Matrix>) -> Matrix {
    let total: f64 = match mask {
        Some(m) => pred
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .zip(m.as_slice())
            .map(|((p, t), m)| m * (p - t).abs())
            .sum(),
        None => pred
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| (p - t).abs())
            .sum(),
    };
    Matrix::filled(1, 1, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_sum_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::column(&[3.0]));
        let y = tape.mul(&x, &x).unwrap();
        let loss = tape.sum(&y);
        assert_eq!(loss.scalar(), 9.0);
        let g = tape.backward(&loss).unwrap();
        assert_eq!(g.wrt(&x), Matrix::column(&[6.0]));
    }

    #[test]
    fn linear_gradient_is_coefficient() {
        let tape = Tape::new();
        let c = Matrix::from_rows(&[[1.5, -2.0], [0.25, 4.0]]);
        let x = tape.leaf(Matrix::from_rows(&[[9.0, -3.0], [0.1, 7.0]]));
        let cv = tape.constant(c.clone());
        let loss = tape.sum(&tape.mul(&cv, &x).unwrap());
        let g = tape.backward(&loss).unwrap();
        assert_eq!(g.wrt(&x), c);
        assert!(g.get(&cv).is_none());
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::zeros(2, 1));
        assert!(matches!(tape.backward(&x), Err(Error::Contract(_))));
    }

    #[test]
    fn inference_tape_records_nothing() {
        let tape = Tape::inference();
        let x = tape.leaf(Matrix::identity(2));
        let y = tape.tanh(&tape.matmul(&x, &x).unwrap());
        assert!(!y.is_tracked());
        assert!(tape.is_empty());
        assert!(tape.backward(&tape.sum(&y)).is_err());
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::column(&[1.0, 2.0]));
        let unused = tape.leaf(Matrix::zeros(3, 3));
        let loss = tape.sum(&x);
        let g = tape.backward(&loss).unwrap();
        assert_eq!(g.wrt(&unused), Matrix::zeros(3, 3));
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f = sum(x ∘ x + x) → df/dx = 2x + 1
        let tape = Tape::new();
        let x = tape.leaf(Matrix::column(&[1.0, -2.0]));
        let y = tape.add(&tape.mul(&x, &x).unwrap(), &x).unwrap();
        let g = tape.backward(&tape.sum(&y)).unwrap();
        assert_eq!(g.wrt(&x), Matrix::column(&[3.0, -3.0]));
    }

    #[test]
    fn masked_mae_value_and_gradient() {
        let tape = Tape::new();
        let pred = tape.leaf(Matrix::from_rows(&[[5.0, 3.0]]));
        let target = Rc::new(Matrix::from_rows(&[[0.0, 2.0]]));
        let mask = Rc::new(target.map(|t| if t != 0.0 { 1.0 } else { 0.0 }));
        let loss = tape.masked_mae(&pred, &target, Some(&mask)).unwrap();
        assert_eq!(loss.scalar(), 1.0);
        let g = tape.backward(&loss).unwrap();
        assert_eq!(g.wrt(&pred), Matrix::from_rows(&[[0.0, 1.0]]));
    }
}
