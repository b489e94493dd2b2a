//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! Every primitive computes its value eagerly and appends a node holding the
//! value, its inputs and whatever its adjoint needs. [`Tape::backward`]
//! replays the nodes in reverse. Graph-shaped primitives (segment means,
//! segment softmax, weighted neighbor sums) borrow the hypergraph's
//! compressed indices for the lifetime of the tape.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::graph::Csr;
use crate::numeric::matrix::{dot, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<'g> {
    Leaf,
    Constant,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    ElementwiseMul(Var, Var),
    LeakyRelu(Var, f64),
    MaskRows(Var, Cow<'g, [bool]>),
    RowSum(Var),
    Sum(Var),
    SumSquares(Var),
    Dot(Var, Var),
    RowDot(Var, Var),
    L2NormalizeRows { input: Var, eps: f64, norms: Vec<f64> },
    ConcatCols(Vec<Var>),
    VStack(Vec<Var>),
    SliceRows(Var, usize),
    GatherRows(Var, Cow<'g, [usize]>),
    PairDot(Var, Vec<usize>, Vec<usize>),
    SegmentMean(Var, &'g Csr),
    SegmentSoftmax(Var, &'g [usize]),
    WeightedSegmentSum(Var, Var, &'g Csr),
    Sigmoid(Var),
    Log(Var),
    NegLogSigmoid(Var),
}

impl Op<'_> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::MatMul(..) => "matmul",
            Op::AddBias(..) => "add_bias",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Scale(..) => "scale",
            Op::ElementwiseMul(..) => "elementwise_mul",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::MaskRows(..) => "mask_rows",
            Op::RowSum(..) => "row_sum",
            Op::Sum(..) => "sum",
            Op::SumSquares(..) => "sum_squares",
            Op::Dot(..) => "dot",
            Op::RowDot(..) => "row_dot",
            Op::L2NormalizeRows { .. } => "l2_normalize_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::VStack(..) => "vstack",
            Op::SliceRows(..) => "slice_rows",
            Op::GatherRows(..) => "gather_rows",
            Op::PairDot(..) => "pair_dot",
            Op::SegmentMean(..) => "segment_mean",
            Op::SegmentSoftmax(..) => "segment_softmax",
            Op::WeightedSegmentSum(..) => "weighted_segment_sum",
            Op::Sigmoid(..) => "sigmoid",
            Op::Log(..) => "log",
            Op::NegLogSigmoid(..) => "neg_log_sigmoid",
        }
    }
}

#[derive(Debug)]
struct Node<'g> {
    value: Matrix,
    op: Op<'g>,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

/// Gradients of a scalar with respect to every leaf of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Matrix {
        match self.grads.get(var.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Matrix::zeros(r, c)
            }
        }
    }

    /// Moves the gradients of `vars` out, in order.
    pub fn take(mut self, vars: &[Var]) -> Vec<Matrix> {
        vars.iter()
            .map(|v| match self.grads.get_mut(v.0).and_then(Option::take) {
                Some(g) => g,
                None => {
                    let (r, c) = self.shapes[v.0];
                    Matrix::zeros(r, c)
                }
            })
            .collect()
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)` without overflow for large `|x|`.
pub fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).max(0.0) + (-x.abs()).exp().ln_1p()
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> (usize, usize) {
        self.nodes[var.0].value.shape()
    }

    fn requires(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op<'g>) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::contract(format!("non-finite value produced by {}", op.name())));
        }
        let requires_grad = match &op {
            Op::Leaf => true,
            Op::Constant => false,
            Op::MatMul(a, b)
            | Op::AddBias(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::ElementwiseMul(a, b)
            | Op::Dot(a, b)
            | Op::RowDot(a, b)
            | Op::WeightedSegmentSum(a, b, _) => self.requires(*a) || self.requires(*b),
            Op::Scale(a, _)
            | Op::LeakyRelu(a, _)
            | Op::MaskRows(a, _)
            | Op::RowSum(a)
            | Op::Sum(a)
            | Op::SumSquares(a)
            | Op::L2NormalizeRows { input: a, .. }
            | Op::SliceRows(a, _)
            | Op::GatherRows(a, _)
            | Op::PairDot(a, ..)
            | Op::SegmentMean(a, _)
            | Op::SegmentSoftmax(a, _)
            | Op::Sigmoid(a)
            | Op::Log(a)
            | Op::NegLogSigmoid(a) => self.requires(*a),
            Op::ConcatCols(vs) | Op::VStack(vs) => vs.iter().any(|v| self.requires(*v)),
        };
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Trainable input; receives a gradient.
    pub fn leaf(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Leaf)
    }

    /// Fixed input; never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Constant)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(value, Op::MatMul(a, b))
    }

    /// Adds a `1 x c` bias row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::contract(format!(
                "add_bias expects a 1x{} bias, got {}x{}",
                xv.cols(),
                bv.rows(),
                bv.cols()
            )));
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (o, b) in value.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        self.push(value, Op::AddBias(x, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b))?;
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.check_same_shape(bv, "sub")?;
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x - y).collect();
        let value = Matrix::new(av.rows(), av.cols(), data)?;
        self.push(value, Op::Sub(a, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v * c);
        self.push(value, Op::Scale(x, c))
    }

    pub fn elementwise_mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.check_same_shape(bv, "elementwise_mul")?;
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Matrix::new(av.rows(), av.cols(), data)?;
        self.push(value, Op::ElementwiseMul(a, b))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let value = self.value(x).map(|v| leaky(v, slope));
        self.push(value, Op::LeakyRelu(x, slope))
    }

    /// Zeroes rows whose mask entry is `false`.
    pub fn mask_rows(&mut self, x: Var, keep: impl Into<Cow<'g, [bool]>>) -> Result<Var> {
        let keep = keep.into();
        let xv = self.value(x);
        if keep.len() != xv.rows() {
            return Err(Error::contract(format!("mask_rows mask has {} entries for {} rows", keep.len(), xv.rows())));
        }
        let mut value = xv.clone();
        for (r, &k) in keep.iter().enumerate() {
            if !k {
                value.row_mut(r).fill(0.0);
            }
        }
        self.push(value, Op::MaskRows(x, keep))
    }

    /// Sum across columns: `n x c -> n x 1`.
    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let sums: Vec<f64> = (0..xv.rows()).map(|r| xv.row(r).iter().sum()).collect();
        self.push(Matrix::column_vector(&sums), Op::RowSum(x))
    }

    /// Sum of all entries, as a 1x1 matrix.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x))
    }

    /// Squared Frobenius norm, as a 1x1 matrix.
    pub fn sum_squares(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let value = Matrix::scalar(dot(xv.data(), xv.data()));
        self.push(value, Op::SumSquares(x))
    }

    /// Inner product of two equally shaped operands, as a 1x1 matrix.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.check_same_shape(bv, "dot")?;
        let value = Matrix::scalar(dot(av.data(), bv.data()));
        self.push(value, Op::Dot(a, b))
    }

    /// Per-row inner products: `n x c, n x c -> n x 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.check_same_shape(bv, "row_dot")?;
        let values: Vec<f64> = (0..av.rows()).map(|r| dot(av.row(r), bv.row(r))).collect();
        self.push(Matrix::column_vector(&values), Op::RowDot(a, b))
    }

    /// Divides each row by `max(‖row‖₂, eps)`. Rows with norm at least `eps`
    /// come out with unit norm; smaller rows (including zero rows) stay finite.
    pub fn l2_normalize_rows(&mut self, x: Var, eps: f64) -> Result<Var> {
        if !(eps > 0.0) {
            return Err(Error::contract(format!("l2_normalize_rows needs eps > 0, got {eps}")));
        }
        let mut value = self.value(x).clone();
        let mut norms = Vec::with_capacity(value.rows());
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            let n = dot(row, row).sqrt().max(eps);
            for v in row.iter_mut() {
                *v /= n;
            }
            norms.push(n);
        }
        self.push(value, Op::L2NormalizeRows { input: x, eps, norms })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::contract("concat_cols needs at least one input"));
        };
        let rows = self.value(first).rows();
        if let Some(bad) = parts.iter().find(|v| self.value(**v).rows() != rows) {
            return Err(Error::contract(format!("concat_cols row mismatch: {} vs {}", rows, self.value(*bad).rows())));
        }
        let cols: usize = parts.iter().map(|v| self.value(*v).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for v in parts {
                data.extend_from_slice(self.value(*v).row(r));
            }
        }
        let value = Matrix::new(rows, cols, data)?;
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn vstack(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::contract("vstack needs at least one input"));
        };
        let cols = self.value(first).cols();
        if let Some(bad) = parts.iter().find(|v| self.value(**v).cols() != cols) {
            return Err(Error::contract(format!("vstack column mismatch: {} vs {}", cols, self.value(*bad).cols())));
        }
        let mut data = Vec::new();
        for v in parts {
            data.extend_from_slice(self.value(*v).data());
        }
        let rows = data.len() / cols.max(1);
        let value = Matrix::new(rows, cols, data)?;
        self.push(value, Op::VStack(parts.to_vec()))
    }

    /// Rows `[start, end)` of `x`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xv = self.value(x);
        if start > end || end > xv.rows() {
            return Err(Error::contract(format!("slice_rows {start}..{end} out of bounds for {} rows", xv.rows())));
        }
        let cols = xv.cols();
        let value = Matrix::new(end - start, cols, xv.data()[start * cols..end * cols].to_vec())?;
        self.push(value, Op::SliceRows(x, start))
    }

    pub fn gather_rows(&mut self, x: Var, index: impl Into<Cow<'g, [usize]>>) -> Result<Var> {
        let index = index.into();
        let xv = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::contract(format!("gather_rows index {bad} out of bounds for {} rows", xv.rows())));
        }
        let mut data = Vec::with_capacity(index.len() * xv.cols());
        for &i in index.iter() {
            data.extend_from_slice(xv.row(i));
        }
        let value = Matrix::new(index.len(), xv.cols(), data)?;
        self.push(value, Op::GatherRows(x, index))
    }

    /// `out[p] = x[left[p]] · x[right[p]]` as an `n x 1` column, without
    /// materializing the gathered rows.
    pub fn pair_dot(&mut self, x: Var, left: Vec<usize>, right: Vec<usize>) -> Result<Var> {
        let xv = self.value(x);
        if left.len() != right.len() {
            return Err(Error::contract(format!("pair_dot index lengths differ: {} vs {}", left.len(), right.len())));
        }
        if let Some(&bad) = left.iter().chain(&right).find(|&&i| i >= xv.rows()) {
            return Err(Error::contract(format!("pair_dot index {bad} out of bounds for {} rows", xv.rows())));
        }
        let values: Vec<f64> = left.iter().zip(&right).map(|(&l, &r)| dot(xv.row(l), xv.row(r))).collect();
        self.push(Matrix::column_vector(&values), Op::PairDot(x, left, right))
    }

    /// Row `r` of the output is the mean of the input rows listed in
    /// `adjacency.row(r)`, or zero for an empty list. Accumulation runs in
    /// list order, which the graph keeps ascending.
    pub fn segment_mean(&mut self, x: Var, adjacency: &'g Csr) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = adjacency.indices().iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::contract(format!("segment_mean index {bad} out of bounds for {} rows", xv.rows())));
        }
        let mut value = Matrix::zeros(adjacency.num_rows(), xv.cols());
        for r in 0..adjacency.num_rows() {
            let members = adjacency.row(r);
            if members.is_empty() {
                continue;
            }
            let out = value.row_mut(r);
            for &m in members {
                for (o, v) in out.iter_mut().zip(xv.row(m)) {
                    *o += v;
                }
            }
            let inv = 1.0 / members.len() as f64;
            for o in out.iter_mut() {
                *o *= inv;
            }
        }
        self.push(value, Op::SegmentMean(x, adjacency))
    }

    /// Softmax of a column vector within segments `offsets[s]..offsets[s+1]`.
    pub fn segment_softmax(&mut self, scores: Var, offsets: &'g [usize]) -> Result<Var> {
        let sv = self.value(scores);
        if sv.cols() != 1 || offsets.last().copied() != Some(sv.rows()) {
            return Err(Error::contract(format!(
                "segment_softmax expects a {}x1 column, got {}x{}",
                offsets.last().copied().unwrap_or(0),
                sv.rows(),
                sv.cols()
            )));
        }
        let mut out = vec![0.0; sv.rows()];
        for w in offsets.windows(2) {
            let seg = &sv.data()[w[0]..w[1]];
            if seg.is_empty() {
                continue;
            }
            let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (o, &s) in out[w[0]..w[1]].iter_mut().zip(seg) {
                *o = (s - max).exp();
                total += *o;
            }
            for o in &mut out[w[0]..w[1]] {
                *o /= total;
            }
        }
        self.push(Matrix::column_vector(&out), Op::SegmentSoftmax(scores, offsets))
    }

    /// Row `r` of the output is `Σ_p weights[p] · x[adjacency.indices[p]]`
    /// over the flat positions `p` of row `r`.
    pub fn weighted_segment_sum(&mut self, x: Var, weights: Var, adjacency: &'g Csr) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(weights));
        if wv.shape() != (adjacency.nnz(), 1) {
            return Err(Error::contract(format!(
                "weighted_segment_sum expects {}x1 weights, got {}x{}",
                adjacency.nnz(),
                wv.rows(),
                wv.cols()
            )));
        }
        if let Some(&bad) = adjacency.indices().iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::contract(format!(
                "weighted_segment_sum index {bad} out of bounds for {} rows",
                xv.rows()
            )));
        }
        let mut value = Matrix::zeros(adjacency.num_rows(), xv.cols());
        for r in 0..adjacency.num_rows() {
            let out = value.row_mut(r);
            for p in adjacency.span(r) {
                let w = wv.data()[p];
                for (o, v) in out.iter_mut().zip(xv.row(adjacency.indices()[p])) {
                    *o += w * v;
                }
            }
        }
        self.push(value, Op::WeightedSegmentSum(x, weights, adjacency))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(sigmoid);
        self.push(value, Op::Sigmoid(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.data().iter().any(|&v| v <= 0.0) {
            return Err(Error::contract("log of a non-positive value"));
        }
        let value = xv.map(f64::ln);
        self.push(value, Op::Log(x))
    }

    /// Elementwise `-ln σ(x)`, stable for extreme arguments.
    pub fn neg_log_sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(neg_log_sigmoid);
        self.push(value, Op::NegLogSigmoid(x))
    }

    /// Reverse sweep from a 1x1 `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::contract(format!("backward needs a scalar loss, got {}x{}", shape.0, shape.1)));
        }
        let mut grads: Vec<Option<Matrix>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf | Op::Constant) || !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
        }

        Ok(Gradients { grads, shapes: self.nodes.iter().map(|n| n.value.shape()).collect() })
    }

    /// Mutable gradient slot for `var`, or `None` if it needs no gradient.
    fn slot<'a>(&self, grads: &'a mut [Option<Matrix>], var: Var) -> Option<&'a mut Matrix> {
        if !self.requires(var) {
            return None;
        }
        let (r, c) = self.shape(var);
        Some(grads[var.0].get_or_insert_with(|| Matrix::zeros(r, c)))
    }

    fn propagate(&self, node: &Node<'g>, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                if self.requires(*a) {
                    let da = g.matmul_transposed(self.value(*b))?;
                    self.slot(grads, *a).unwrap().add_assign(&da)?;
                }
                if self.requires(*b) {
                    let db = self.value(*a).transposed_matmul(g)?;
                    self.slot(grads, *b).unwrap().add_assign(&db)?;
                }
            }
            Op::AddBias(x, b) => {
                if let Some(dx) = self.slot(grads, *x) {
                    dx.add_assign(g)?;
                }
                if let Some(db) = self.slot(grads, *b) {
                    let db = db.data_mut();
                    for r in 0..g.rows() {
                        for (o, v) in db.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if let Some(d) = self.slot(grads, *v) {
                        d.add_assign(g)?;
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(da) = self.slot(grads, *a) {
                    da.add_assign(g)?;
                }
                if let Some(db) = self.slot(grads, *b) {
                    for (o, v) in db.data_mut().iter_mut().zip(g.data()) {
                        *o -= v;
                    }
                }
            }
            Op::Scale(x, c) => {
                if let Some(dx) = self.slot(grads, *x) {
                    for (o, v) in dx.data_mut().iter_mut().zip(g.data()) {
                        *o += c * v;
                    }
                }
            }
            Op::ElementwiseMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(da) = self.slot(grads, *a) {
                    for ((o, gv), y) in da.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                        *o += gv * y;
                    }
                }
                if let Some(db) = self.slot(grads, *b) {
                    for ((o, gv), x) in db.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        *o += gv * x;
                    }
                }
            }
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x);
                if let Some(dx) = self.slot(grads, *x) {
                    for ((o, gv), v) in dx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                        *o += if *v > 0.0 { *gv } else { slope * gv };
                    }
                }
            }
            Op::MaskRows(x, keep) => {
                if let Some(dx) = self.slot(grads, *x) {
                    for (r, &k) in keep.iter().enumerate() {
                        if k {
                            for (o, v) in dx.row_mut(r).iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                    }
                }
            }
            Op::RowSum(x) => {
                if let Some(dx) = self.slot(grads, *x) {
                    for r in 0..dx.rows() {
                        let gv = g.data()[r];
                        for o in dx.row_mut(r) {
                            *o += gv;
                        }
                    }
                }
            }
            Op::Sum(x) => {
                let gv = g.data()[0];
                if let Some(dx) = self.slot(grads, *x) {
                    for o in dx.data_mut() {
                        *o += gv;
                    }
                }
            }
            Op::SumSquares(x) => {
                let gv = g.data()[0];
                let xv = self.value(*x);
                if let Some(dx) = self.slot(grads, *x) {
                    for (o, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        *o += 2.0 * gv * v;
                    }
                }
            }
            Op::Dot(a, b) => {
                let gv = g.data()[0];
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(da) = self.slot(grads, *a) {
                    for (o, y) in da.data_mut().iter_mut().zip(bv.data()) {
                        *o += gv * y;
                    }
                }
                if let Some(db) = self.slot(grads, *b) {
                    for (o, x) in db.data_mut().iter_mut().zip(av.data()) {
                        *o += gv * x;
                    }
                }
            }
            Op::RowDot(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(da) = self.slot(grads, *a) {
                    for r in 0..av.rows() {
                        let gv = g.data()[r];
                        for (o, y) in da.row_mut(r).iter_mut().zip(bv.row(r)) {
                            *o += gv * y;
                        }
                    }
                }
                if let Some(db) = self.slot(grads, *b) {
                    for r in 0..bv.rows() {
                        let gv = g.data()[r];
                        for (o, x) in db.row_mut(r).iter_mut().zip(av.row(r)) {
                            *o += gv * x;
                        }
                    }
                }
            }
            Op::L2NormalizeRows { input, eps, norms } => {
                let y = &node.value;
                if let Some(dx) = self.slot(grads, *input) {
                    for r in 0..y.rows() {
                        let n = norms[r];
                        let (yr, gr) = (y.row(r), g.row(r));
                        let out = dx.row_mut(r);
                        if n > *eps {
                            let proj = dot(yr, gr);
                            for ((o, gv), yv) in out.iter_mut().zip(gr).zip(yr) {
                                *o += (gv - yv * proj) / n;
                            }
                        } else {
                            for (o, gv) in out.iter_mut().zip(gr) {
                                *o += gv / eps;
                            }
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for v in parts {
                    let cols = self.value(*v).cols();
                    if let Some(dv) = self.slot(grads, *v) {
                        for r in 0..g.rows() {
                            for (o, gv) in dv.row_mut(r).iter_mut().zip(&g.row(r)[offset..offset + cols]) {
                                *o += gv;
                            }
                        }
                    }
                    offset += cols;
                }
            }
            Op::VStack(parts) => {
                let mut offset = 0;
                for v in parts {
                    let len = self.value(*v).len();
                    if let Some(dv) = self.slot(grads, *v) {
                        for (o, gv) in dv.data_mut().iter_mut().zip(&g.data()[offset..offset + len]) {
                            *o += gv;
                        }
                    }
                    offset += len;
                }
            }
            Op::SliceRows(x, start) => {
                if let Some(dx) = self.slot(grads, *x) {
                    let cols = g.cols();
                    let base = start * cols;
                    for (o, gv) in dx.data_mut()[base..base + g.len()].iter_mut().zip(g.data()) {
                        *o += gv;
                    }
                }
            }
            Op::GatherRows(x, index) => {
                if let Some(dx) = self.slot(grads, *x) {
                    for (p, &i) in index.iter().enumerate() {
                        for (o, gv) in dx.row_mut(i).iter_mut().zip(g.row(p)) {
                            *o += gv;
                        }
                    }
                }
            }
            Op::PairDot(x, left, right) => {
                let xv = self.value(*x);
                if let Some(dx) = self.slot(grads, *x) {
                    for (p, (&l, &r)) in left.iter().zip(right).enumerate() {
                        let gv = g.data()[p];
                        for (o, v) in dx.row_mut(l).iter_mut().zip(xv.row(r)) {
                            *o += gv * v;
                        }
                        for (o, v) in dx.row_mut(r).iter_mut().zip(xv.row(l)) {
                            *o += gv * v;
                        }
                    }
                }
            }
            Op::SegmentMean(x, adjacency) => {
                if let Some(dx) = self.slot(grads, *x) {
                    for r in 0..adjacency.num_rows() {
                        let members = adjacency.row(r);
                        if members.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / members.len() as f64;
                        for &m in members {
                            for (o, gv) in dx.row_mut(m).iter_mut().zip(g.row(r)) {
                                *o += gv * inv;
                            }
                        }
                    }
                }
            }
            Op::SegmentSoftmax(x, offsets) => {
                let y = node.value.data();
                if let Some(dx) = self.slot(grads, *x) {
                    let dx = dx.data_mut();
                    for w in offsets.windows(2) {
                        let range = w[0]..w[1];
                        let inner = dot(&y[range.clone()], &g.data()[range.clone()]);
                        for p in range {
                            dx[p] += y[p] * (g.data()[p] - inner);
                        }
                    }
                }
            }
            Op::WeightedSegmentSum(x, weights, adjacency) => {
                let (xv, wv) = (self.value(*x), self.value(*weights));
                if let Some(dx) = self.slot(grads, *x) {
                    for r in 0..adjacency.num_rows() {
                        for p in adjacency.span(r) {
                            let w = wv.data()[p];
                            for (o, gv) in dx.row_mut(adjacency.indices()[p]).iter_mut().zip(g.row(r)) {
                                *o += w * gv;
                            }
                        }
                    }
                }
                if let Some(dw) = self.slot(grads, *weights) {
                    let dw = dw.data_mut();
                    for r in 0..adjacency.num_rows() {
                        for p in adjacency.span(r) {
                            dw[p] += dot(g.row(r), xv.row(adjacency.indices()[p]));
                        }
                    }
                }
            }
            Op::Sigmoid(x) => {
                let y = &node.value;
                if let Some(dx) = self.slot(grads, *x) {
                    for ((o, gv), yv) in dx.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gv * yv * (1.0 - yv);
                    }
                }
            }
            Op::Log(x) => {
                let xv = self.value(*x);
                if let Some(dx) = self.slot(grads, *x) {
                    for ((o, gv), v) in dx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                        *o += gv / v;
                    }
                }
            }
            Op::NegLogSigmoid(x) => {
                let xv = self.value(*x);
                if let Some(dx) = self.slot(grads, *x) {
                    for ((o, gv), v) in dx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                        *o += gv * (sigmoid(*v) - 1.0);
                    }
                }
            }
        }
        Ok(())
    }
}
