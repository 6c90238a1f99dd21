//! Dense f64 tensor engine with reverse-mode automatic differentiation.
//!
//! Every operation is recorded on a [`Graph`] (a flat tape); `backward`
//! walks the tape in reverse and accumulates gradients into each node's
//! `grad` buffer. Everything is f64 and single-threaded per graph.

use crate::error::{Error, Result};
use rand::Rng;

/// Epsilon added to the variance inside layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Additive mask value for disallowed attention positions. Finite on
/// purpose: softmax over a fully masked row stays NaN-free.
pub const MASK_NEG: f64 = -1e30;

/// A dense tensor. `values` and `grad` are row-major flat buffers of the
/// same length; `grad` is all-zero right after creation and after
/// [`Graph::zero_grad`].
#[derive(Debug, Clone)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub requires_grad: bool,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul { a: TensorId, b: TensorId },
    Add { a: TensorId, b: TensorId },
    Sub { a: TensorId, b: TensorId },
    Mul { a: TensorId, b: TensorId },
    Scale { a: TensorId, factor: f64 },
    AddRowBias { a: TensorId, bias: TensorId },
    AddColBias { a: TensorId, bias: TensorId },
    Transpose { a: TensorId },
    ConcatCols { a: TensorId, b: TensorId },
    SliceRows { a: TensorId, start: usize },
    SliceCols { a: TensorId, start: usize },
    GatherRows { a: TensorId, indices: Vec<usize> },
    Sigmoid { a: TensorId },
    Relu { a: TensorId },
    SoftmaxRows { a: TensorId },
    LayerNorm { a: TensorId, gain: TensorId, bias: TensorId },
    /// `keep` holds 0.0 for dropped entries and 1/(1-p) for kept ones.
    Dropout { a: TensorId, keep: Vec<f64> },
    CrossEntropy { logits: TensorId, targets: Vec<usize>, ignore: Option<usize> },
    /// Teacher probabilities are raw data, not a node: no gradient can
    /// ever flow back into the teacher.
    KlDivRows { logits: TensorId, teacher: Vec<f64>, row_mask: Vec<bool> },
    Sum { a: TensorId },
    Mean { a: TensorId },
}

struct Node {
    tensor: Tensor,
    op: Op,
}

/// Execution tape. Operand nodes always precede their results, so a
/// single reverse sweep visits every node after all of its consumers.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn shape_str(shape: &[usize]) -> String {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    format!("[{}]", dims.join("x"))
}

/// Plain matrix product with k-ascending accumulation order. The
/// gradient checks and the triple-loop oracle rely on this exact
/// summation order.
pub fn matmul_raw(a: &[f64], b: &[f64], p: usize, q: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * r];
    for i in 0..p {
        let a_row = &a[i * q..(i + 1) * q];
        let out_row = &mut out[i * r..(i + 1) * r];
        for (k, &a_ik) in a_row.iter().enumerate() {
            let b_row = &b[k * r..(k + 1) * r];
            for (o, &b_kj) in out_row.iter_mut().zip(b_row.iter()) {
                *o += a_ik * b_kj;
            }
        }
    }
    out
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise log-softmax with max subtraction.
fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    row.iter().map(|&x| x - max - log_sum).collect()
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn tensor(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    pub fn values(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].tensor.values
    }

    pub fn grad(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].tensor.grad
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].tensor.shape
    }

    fn rows(&self, id: TensorId) -> usize {
        self.shape(id)[0]
    }

    fn cols(&self, id: TensorId) -> usize {
        self.shape(id)[1]
    }

    fn require_2d(&self, id: TensorId, what: &str) -> Result<(usize, usize)> {
        let s = self.shape(id);
        if s.len() != 2 {
            return Err(Error::Shape(format!("{what} expects a 2-d tensor, got {}", shape_str(s))));
        }
        Ok((s[0], s[1]))
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<f64>, requires_grad: bool, op: Op) -> TensorId {
        let numel = values.len();
        self.nodes.push(Node {
            tensor: Tensor { shape, values, grad: vec![0.0; numel], requires_grad },
            op,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn requires(&self, id: TensorId) -> bool {
        self.nodes[id.0].tensor.requires_grad
    }

    /// Insert a leaf tensor.
    pub fn leaf(&mut self, shape: Vec<usize>, values: Vec<f64>, requires_grad: bool) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("leaf with zero-sized dimension: {}", shape_str(&shape))));
        }
        if numel != values.len() {
            return Err(Error::Shape(format!(
                "leaf shape {} implies {} values, got {}",
                shape_str(&shape),
                numel,
                values.len()
            )));
        }
        Ok(self.push(shape, values, requires_grad, Op::Leaf))
    }

    /// Leaf that never receives gradients.
    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Result<TensorId> {
        self.leaf(shape, values, false)
    }

    pub fn scalar(&mut self, value: f64) -> TensorId {
        self.push(vec![1], vec![value], false, Op::Leaf)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (p, q) = self.require_2d(a, "matmul lhs")?;
        let (q2, r) = self.require_2d(b, "matmul rhs")?;
        if q != q2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions differ: {} vs {}",
                shape_str(self.shape(a)),
                shape_str(self.shape(b))
            )));
        }
        let values = matmul_raw(self.values(a), self.values(b), p, q, r);
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(vec![p, r], values, rg, Op::MatMul { a, b }))
    }

    fn elementwise(&mut self, a: TensorId, b: TensorId, name: &str, f: fn(f64, f64) -> f64, op: Op) -> Result<TensorId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{name} operand shapes differ: {} vs {}",
                shape_str(self.shape(a)),
                shape_str(self.shape(b))
            )));
        }
        let values: Vec<f64> = self
            .values(a)
            .iter()
            .zip(self.values(b).iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(self.shape(a).to_vec(), values, rg, op))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise(a, b, "add", |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise(a, b, "sub", |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise(a, b, "mul", |x, y| x * y, Op::Mul { a, b })
    }

    pub fn scale(&mut self, a: TensorId, factor: f64) -> TensorId {
        let values: Vec<f64> = self.values(a).iter().map(|&x| x * factor).collect();
        let rg = self.requires(a);
        self.push(self.shape(a).to_vec(), values, rg, Op::Scale { a, factor })
    }

    /// `x[p×q] + bias[q]`, bias added to every row.
    pub fn add_row_bias(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId> {
        let (p, q) = self.require_2d(a, "add_row_bias input")?;
        if self.shape(bias) != [q] {
            return Err(Error::Shape(format!(
                "row bias must be [{q}], got {}",
                shape_str(self.shape(bias))
            )));
        }
        let mut values = self.values(a).to_vec();
        let b = self.values(bias);
        for i in 0..p {
            for j in 0..q {
                values[i * q + j] += b[j];
            }
        }
        let rg = self.requires(a) || self.requires(bias);
        Ok(self.push(vec![p, q], values, rg, Op::AddRowBias { a, bias }))
    }

    /// `x[p×q] + bias[p]`, bias entry `i` added across row `i`.
    pub fn add_col_bias(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId> {
        let (p, q) = self.require_2d(a, "add_col_bias input")?;
        if self.shape(bias) != [p] {
            return Err(Error::Shape(format!(
                "column bias must be [{p}], got {}",
                shape_str(self.shape(bias))
            )));
        }
        let mut values = self.values(a).to_vec();
        let b = self.values(bias);
        for i in 0..p {
            for j in 0..q {
                values[i * q + j] += b[i];
            }
        }
        let rg = self.requires(a) || self.requires(bias);
        Ok(self.push(vec![p, q], values, rg, Op::AddColBias { a, bias }))
    }

    pub fn transpose(&mut self, a: TensorId) -> Result<TensorId> {
        let (p, q) = self.require_2d(a, "transpose")?;
        let src = self.values(a);
        let mut values = vec![0.0; p * q];
        for i in 0..p {
            for j in 0..q {
                values[j * p + i] = src[i * q + j];
            }
        }
        let rg = self.requires(a);
        Ok(self.push(vec![q, p], values, rg, Op::Transpose { a }))
    }

    /// Concatenate along columns: `[p×q1] ++ [p×q2] -> [p×(q1+q2)]`.
    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (p, q1) = self.require_2d(a, "concat_cols lhs")?;
        let (p2, q2) = self.require_2d(b, "concat_cols rhs")?;
        if p != p2 {
            return Err(Error::Shape(format!(
                "concat_cols row counts differ: {} vs {}",
                shape_str(self.shape(a)),
                shape_str(self.shape(b))
            )));
        }
        let mut values = Vec::with_capacity(p * (q1 + q2));
        for i in 0..p {
            values.extend_from_slice(&self.values(a)[i * q1..(i + 1) * q1]);
            values.extend_from_slice(&self.values(b)[i * q2..(i + 1) * q2]);
        }
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(vec![p, q1 + q2], values, rg, Op::ConcatCols { a, b }))
    }

    pub fn slice_rows(&mut self, a: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let (p, q) = self.require_2d(a, "slice_rows")?;
        if start + len > p || len == 0 {
            return Err(Error::Index(format!(
                "slice_rows {start}..{} out of range for {} rows",
                start + len,
                p
            )));
        }
        let values = self.values(a)[start * q..(start + len) * q].to_vec();
        let rg = self.requires(a);
        Ok(self.push(vec![len, q], values, rg, Op::SliceRows { a, start }))
    }

    pub fn slice_cols(&mut self, a: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let (p, q) = self.require_2d(a, "slice_cols")?;
        if start + len > q || len == 0 {
            return Err(Error::Index(format!(
                "slice_cols {start}..{} out of range for {} columns",
                start + len,
                q
            )));
        }
        let mut values = Vec::with_capacity(p * len);
        for i in 0..p {
            values.extend_from_slice(&self.values(a)[i * q + start..i * q + start + len]);
        }
        let rg = self.requires(a);
        Ok(self.push(vec![p, len], values, rg, Op::SliceCols { a, start }))
    }

    /// Select rows by index (duplicates allowed); the workhorse behind
    /// embedding lookup and "[CLS]" row selection.
    pub fn gather_rows(&mut self, a: TensorId, indices: &[usize]) -> Result<TensorId> {
        let (p, q) = self.require_2d(a, "gather_rows")?;
        if indices.is_empty() {
            return Err(Error::Index("gather_rows with empty index list".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= p) {
            return Err(Error::Index(format!("gather_rows index {bad} out of range for {p} rows")));
        }
        let mut values = Vec::with_capacity(indices.len() * q);
        for &i in indices {
            values.extend_from_slice(&self.values(a)[i * q..(i + 1) * q]);
        }
        let rg = self.requires(a);
        Ok(self.push(vec![indices.len(), q], values, rg, Op::GatherRows { a, indices: indices.to_vec() }))
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        let values: Vec<f64> = self.values(a).iter().map(|&x| stable_sigmoid(x)).collect();
        let rg = self.requires(a);
        self.push(self.shape(a).to_vec(), values, rg, Op::Sigmoid { a })
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let values: Vec<f64> = self.values(a).iter().map(|&x| x.max(0.0)).collect();
        let rg = self.requires(a);
        self.push(self.shape(a).to_vec(), values, rg, Op::Relu { a })
    }

    /// Row-wise softmax with max-subtraction stabilization.
    pub fn softmax_rows(&mut self, a: TensorId) -> Result<TensorId> {
        let (p, q) = self.require_2d(a, "softmax_rows")?;
        if self.values(a).iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("softmax_rows input contains NaN or infinity".into()));
        }
        let src = self.values(a);
        let mut values = vec![0.0; p * q];
        for i in 0..p {
            let row = &src[i * q..(i + 1) * q];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..q {
                let e = (row[j] - max).exp();
                values[i * q + j] = e;
                sum += e;
            }
            for j in 0..q {
                values[i * q + j] /= sum;
            }
        }
        let rg = self.requires(a);
        Ok(self.push(vec![p, q], values, rg, Op::SoftmaxRows { a }))
    }

    /// Row-wise layer normalization: `(x - mean) / sqrt(var + eps) * gain + bias`.
    pub fn layer_norm(&mut self, a: TensorId, gain: TensorId, bias: TensorId) -> Result<TensorId> {
        let (p, h) = self.require_2d(a, "layer_norm input")?;
        if h < 2 {
            return Err(Error::Shape(format!("layer_norm needs at least 2 features per row, got {h}")));
        }
        if self.shape(gain) != [h] || self.shape(bias) != [h] {
            return Err(Error::Shape(format!(
                "layer_norm gain/bias must be [{h}], got {} and {}",
                shape_str(self.shape(gain)),
                shape_str(self.shape(bias))
            )));
        }
        let src = self.values(a);
        let g = self.values(gain);
        let b = self.values(bias);
        let mut values = vec![0.0; p * h];
        for i in 0..p {
            let row = &src[i * h..(i + 1) * h];
            let mean = row.iter().sum::<f64>() / h as f64;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / h as f64;
            let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for j in 0..h {
                values[i * h + j] = (row[j] - mean) * inv_std * g[j] + b[j];
            }
        }
        let rg = self.requires(a) || self.requires(gain) || self.requires(bias);
        Ok(self.push(vec![p, h], values, rg, Op::LayerNorm { a, gain, bias }))
    }

    /// Inverted dropout with an explicit generator. `p == 0` is the
    /// identity and records nothing.
    pub fn dropout<R: Rng>(&mut self, a: TensorId, p: f64, rng: &mut R) -> Result<TensorId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Input(format!("dropout probability must be in [0,1), got {p}")));
        }
        if p == 0.0 {
            return Ok(a);
        }
        let scale = 1.0 / (1.0 - p);
        let keep: Vec<f64> = (0..self.values(a).len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { scale })
            .collect();
        let values: Vec<f64> = self.values(a).iter().zip(keep.iter()).map(|(&x, &k)| x * k).collect();
        let rg = self.requires(a);
        Ok(self.push(self.shape(a).to_vec(), values, rg, Op::Dropout { a, keep }))
    }

    /// Mean over non-ignored positions of `-log softmax(logits)[t, target_t]`.
    /// All positions ignored yields 0 with zero gradient.
    pub fn cross_entropy(&mut self, logits: TensorId, targets: &[usize], ignore: Option<usize>) -> Result<TensorId> {
        let (t, v) = self.require_2d(logits, "cross_entropy logits")?;
        if targets.len() != t {
            return Err(Error::Shape(format!(
                "cross_entropy got {} targets for {} logit rows",
                targets.len(),
                t
            )));
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for (row, &target) in targets.iter().enumerate() {
            if Some(target) == ignore {
                continue;
            }
            if target >= v {
                return Err(Error::Index(format!(
                    "cross_entropy target {target} out of range for vocabulary {v}"
                )));
            }
            let log_probs = log_softmax_row(&self.values(logits)[row * v..(row + 1) * v]);
            total -= log_probs[target];
            count += 1;
        }
        let value = if count == 0 { 0.0 } else { total / count as f64 };
        let rg = self.requires(logits);
        Ok(self.push(
            vec![1],
            vec![value],
            rg,
            Op::CrossEntropy { logits, targets: targets.to_vec(), ignore },
        ))
    }

    /// Token-level KL(teacher || student) averaged over unmasked rows.
    /// `teacher` holds per-row probability distributions and is plain
    /// data, so the teacher side is structurally detached.
    pub fn kl_div_rows(&mut self, logits: TensorId, teacher: &[f64], row_mask: &[bool]) -> Result<TensorId> {
        let (t, v) = self.require_2d(logits, "kl_div_rows logits")?;
        if teacher.len() != t * v {
            return Err(Error::Shape(format!(
                "kl_div_rows teacher has {} values, expected {}",
                teacher.len(),
                t * v
            )));
        }
        if row_mask.len() != t {
            return Err(Error::Shape(format!(
                "kl_div_rows mask has {} rows, expected {t}",
                row_mask.len()
            )));
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for row in 0..t {
            if !row_mask[row] {
                continue;
            }
            let log_p = log_softmax_row(&self.values(logits)[row * v..(row + 1) * v]);
            let q = &teacher[row * v..(row + 1) * v];
            let mut kl = 0.0;
            for j in 0..v {
                if q[j] > 0.0 {
                    kl += q[j] * (q[j].ln() - log_p[j]);
                }
            }
            total += kl;
            count += 1;
        }
        let value = if count == 0 { 0.0 } else { total / count as f64 };
        let rg = self.requires(logits);
        Ok(self.push(
            vec![1],
            vec![value],
            rg,
            Op::KlDivRows { logits, teacher: teacher.to_vec(), row_mask: row_mask.to_vec() },
        ))
    }

    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let value = self.values(a).iter().sum();
        let rg = self.requires(a);
        self.push(vec![1], vec![value], rg, Op::Sum { a })
    }

    pub fn mean(&mut self, a: TensorId) -> TensorId {
        let n = self.values(a).len();
        let value = self.values(a).iter().sum::<f64>() / n as f64;
        let rg = self.requires(a);
        self.push(vec![1], vec![value], rg, Op::Mean { a })
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.tensor.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate into
    /// every node's `grad`; call [`Graph::zero_grad`] between passes to
    /// reset.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.tensor(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {}",
                shape_str(self.shape(loss))
            )));
        }
        // Per-sweep buffers keep repeated backward calls additive without
        // double-counting previously accumulated grads.
        let n = self.nodes.len();
        let mut g: Vec<Vec<f64>> = self.nodes.iter().map(|node| vec![0.0; node.tensor.numel()]).collect();
        g[loss.0][0] = 1.0;

        for i in (0..n).rev() {
            if !self.nodes[i].tensor.requires_grad {
                continue;
            }
            if g[i].iter().all(|&x| x == 0.0) {
                continue;
            }
            let grad = std::mem::take(&mut g[i]);
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {
                    g[i] = grad;
                    continue;
                }
                Op::MatMul { a, b } => {
                    let (p, q) = (self.rows(a), self.cols(a));
                    let r = self.cols(b);
                    if self.requires(a) {
                        // dA = dC · Bᵀ
                        let bv = self.values(b);
                        let mut bt = vec![0.0; r * q];
                        for k in 0..q {
                            for j in 0..r {
                                bt[j * q + k] = bv[k * r + j];
                            }
                        }
                        let da = matmul_raw(&grad, &bt, p, r, q);
                        accumulate(&mut g[a.0], &da);
                    }
                    if self.requires(b) {
                        // dB = Aᵀ · dC
                        let av = self.values(a);
                        let mut at = vec![0.0; q * p];
                        for i2 in 0..p {
                            for k in 0..q {
                                at[k * p + i2] = av[i2 * q + k];
                            }
                        }
                        let db = matmul_raw(&at, &grad, q, p, r);
                        accumulate(&mut g[b.0], &db);
                    }
                }
                Op::Add { a, b } => {
                    if self.requires(a) {
                        accumulate(&mut g[a.0], &grad);
                    }
                    if self.requires(b) {
                        accumulate(&mut g[b.0], &grad);
                    }
                }
                Op::Sub { a, b } => {
                    if self.requires(a) {
                        accumulate(&mut g[a.0], &grad);
                    }
                    if self.requires(b) {
                        for (gb, &gr) in g[b.0].iter_mut().zip(grad.iter()) {
                            *gb -= gr;
                        }
                    }
                }
                Op::Mul { a, b } => {
                    if self.requires(a) {
                        let bv = self.values(b).to_vec();
                        for ((ga, &gr), &y) in g[a.0].iter_mut().zip(grad.iter()).zip(bv.iter()) {
                            *ga += gr * y;
                        }
                    }
                    if self.requires(b) {
                        let av = self.values(a).to_vec();
                        for ((gb, &gr), &x) in g[b.0].iter_mut().zip(grad.iter()).zip(av.iter()) {
                            *gb += gr * x;
                        }
                    }
                }
                Op::Scale { a, factor } => {
                    if self.requires(a) {
                        for (ga, &gr) in g[a.0].iter_mut().zip(grad.iter()) {
                            *ga += gr * factor;
                        }
                    }
                }
                Op::AddRowBias { a, bias } => {
                    let (p, q) = (self.rows(a), self.cols(a));
                    if self.requires(a) {
                        accumulate(&mut g[a.0], &grad);
                    }
                    if self.requires(bias) {
                        for i2 in 0..p {
                            for j in 0..q {
                                g[bias.0][j] += grad[i2 * q + j];
                            }
                        }
                    }
                }
                Op::AddColBias { a, bias } => {
                    let (p, q) = (self.rows(a), self.cols(a));
                    if self.requires(a) {
                        accumulate(&mut g[a.0], &grad);
                    }
                    if self.requires(bias) {
                        for i2 in 0..p {
                            for j in 0..q {
                                g[bias.0][i2] += grad[i2 * q + j];
                            }
                        }
                    }
                }
                Op::Transpose { a } => {
                    if self.requires(a) {
                        let (p, q) = (self.rows(a), self.cols(a));
                        for i2 in 0..p {
                            for j in 0..q {
                                g[a.0][i2 * q + j] += grad[j * p + i2];
                            }
                        }
                    }
                }
                Op::ConcatCols { a, b } => {
                    let (p, q1) = (self.rows(a), self.cols(a));
                    let q2 = self.cols(b);
                    let q = q1 + q2;
                    if self.requires(a) {
                        for i2 in 0..p {
                            for j in 0..q1 {
                                g[a.0][i2 * q1 + j] += grad[i2 * q + j];
                            }
                        }
                    }
                    if self.requires(b) {
                        for i2 in 0..p {
                            for j in 0..q2 {
                                g[b.0][i2 * q2 + j] += grad[i2 * q + q1 + j];
                            }
                        }
                    }
                }
                Op::SliceRows { a, start } => {
                    if self.requires(a) {
                        let q = self.cols(a);
                        for (idx, &gr) in grad.iter().enumerate() {
                            g[a.0][start * q + idx] += gr;
                        }
                    }
                }
                Op::SliceCols { a, start } => {
                    if self.requires(a) {
                        let q = self.cols(a);
                        let len = self.nodes[i].tensor.shape[1];
                        let p = self.rows(a);
                        for i2 in 0..p {
                            for j in 0..len {
                                g[a.0][i2 * q + start + j] += grad[i2 * len + j];
                            }
                        }
                    }
                }
                Op::GatherRows { a, indices } => {
                    if self.requires(a) {
                        let q = self.cols(a);
                        for (out_row, &src_row) in indices.iter().enumerate() {
                            for j in 0..q {
                                g[a.0][src_row * q + j] += grad[out_row * q + j];
                            }
                        }
                    }
                }
                Op::Sigmoid { a } => {
                    if self.requires(a) {
                        let out = self.nodes[i].tensor.values.clone();
                        for ((ga, &gr), &s) in g[a.0].iter_mut().zip(grad.iter()).zip(out.iter()) {
                            *ga += gr * s * (1.0 - s);
                        }
                    }
                }
                Op::Relu { a } => {
                    if self.requires(a) {
                        let inp = self.values(a).to_vec();
                        for ((ga, &gr), &x) in g[a.0].iter_mut().zip(grad.iter()).zip(inp.iter()) {
                            if x > 0.0 {
                                *ga += gr;
                            }
                        }
                    }
                }
                Op::SoftmaxRows { a } => {
                    if self.requires(a) {
                        let (p, q) = (self.rows(a), self.cols(a));
                        let out = self.nodes[i].tensor.values.clone();
                        for i2 in 0..p {
                            let s = &out[i2 * q..(i2 + 1) * q];
                            let gr = &grad[i2 * q..(i2 + 1) * q];
                            let dot: f64 = s.iter().zip(gr.iter()).map(|(&x, &y)| x * y).sum();
                            for j in 0..q {
                                g[a.0][i2 * q + j] += s[j] * (gr[j] - dot);
                            }
                        }
                    }
                }
                Op::LayerNorm { a, gain, bias } => {
                    let (p, h) = (self.rows(a), self.cols(a));
                    let src = self.values(a).to_vec();
                    let gv = self.values(gain).to_vec();
                    for i2 in 0..p {
                        let row = &src[i2 * h..(i2 + 1) * h];
                        let gr = &grad[i2 * h..(i2 + 1) * h];
                        let mean = row.iter().sum::<f64>() / h as f64;
                        let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / h as f64;
                        let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let xhat: Vec<f64> = row.iter().map(|&x| (x - mean) * inv_std).collect();
                        if self.requires(gain) {
                            for j in 0..h {
                                g[gain.0][j] += gr[j] * xhat[j];
                            }
                        }
                        if self.requires(bias) {
                            for j in 0..h {
                                g[bias.0][j] += gr[j];
                            }
                        }
                        if self.requires(a) {
                            let dxhat: Vec<f64> = (0..h).map(|j| gr[j] * gv[j]).collect();
                            let sum_dxhat: f64 = dxhat.iter().sum();
                            let sum_dxhat_xhat: f64 = dxhat.iter().zip(xhat.iter()).map(|(&d, &x)| d * x).sum();
                            let hf = h as f64;
                            for j in 0..h {
                                g[a.0][i2 * h + j] +=
                                    inv_std / hf * (hf * dxhat[j] - sum_dxhat - xhat[j] * sum_dxhat_xhat);
                            }
                        }
                    }
                }
                Op::Dropout { a, keep } => {
                    if self.requires(a) {
                        for ((ga, &gr), &k) in g[a.0].iter_mut().zip(grad.iter()).zip(keep.iter()) {
                            *ga += gr * k;
                        }
                    }
                }
                Op::CrossEntropy { logits, targets, ignore } => {
                    if self.requires(logits) {
                        let v = self.cols(logits);
                        let count = targets.iter().filter(|&&t| Some(t) != ignore).count();
                        if count > 0 {
                            let go = grad[0] / count as f64;
                            let lv = self.values(logits).to_vec();
                            for (row, &target) in targets.iter().enumerate() {
                                if Some(target) == ignore {
                                    continue;
                                }
                                let log_probs = log_softmax_row(&lv[row * v..(row + 1) * v]);
                                for j in 0..v {
                                    let p_j = log_probs[j].exp();
                                    let indicator = if j == target { 1.0 } else { 0.0 };
                                    g[logits.0][row * v + j] += go * (p_j - indicator);
                                }
                            }
                        }
                    }
                }
                Op::KlDivRows { logits, teacher, row_mask } => {
                    if self.requires(logits) {
                        let v = self.cols(logits);
                        let count = row_mask.iter().filter(|&&m| m).count();
                        if count > 0 {
                            let go = grad[0] / count as f64;
                            let lv = self.values(logits).to_vec();
                            for (row, &include) in row_mask.iter().enumerate() {
                                if !include {
                                    continue;
                                }
                                let log_p = log_softmax_row(&lv[row * v..(row + 1) * v]);
                                for j in 0..v {
                                    let p_j = log_p[j].exp();
                                    g[logits.0][row * v + j] += go * (p_j - teacher[row * v + j]);
                                }
                            }
                        }
                    }
                }
                Op::Sum { a } => {
                    if self.requires(a) {
                        for ga in g[a.0].iter_mut() {
                            *ga += grad[0];
                        }
                    }
                }
                Op::Mean { a } => {
                    if self.requires(a) {
                        let n_el = self.nodes[a.0].tensor.numel() as f64;
                        for ga in g[a.0].iter_mut() {
                            *ga += grad[0] / n_el;
                        }
                    }
                }
            }
            g[i] = grad;
        }

        for (node, gi) in self.nodes.iter_mut().zip(g.into_iter()) {
            if node.tensor.requires_grad {
                accumulate(&mut node.tensor.grad, &gi);
            }
        }
        Ok(())
    }
}

fn accumulate(target: &mut [f64], src: &[f64]) {
    for (t, &s) in target.iter_mut().zip(src.iter()) {
        *t += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn rand_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()
    }

    /// Central finite differences on a scalar-valued graph builder. The
    /// builder gets fresh leaf values each call so the graph is rebuilt
    /// from scratch for every probe.
    fn finite_diff_check(
        build: &dyn Fn(&mut Graph, &[Vec<f64>]) -> (TensorId, Vec<TensorId>),
        inputs: &[Vec<f64>],
        tol: f64,
    ) {
        let mut graph = Graph::new();
        let (loss, leaves) = build(&mut graph, inputs);
        graph.backward(loss).unwrap();
        let analytic: Vec<Vec<f64>> = leaves.iter().map(|&id| graph.grad(id).to_vec()).collect();

        let h = 1e-5;
        for (leaf_idx, leaf_values) in inputs.iter().enumerate() {
            for j in 0..leaf_values.len() {
                let mut plus = inputs.to_vec();
                plus[leaf_idx][j] += h;
                let mut g_plus = Graph::new();
                let (l_plus, _) = build(&mut g_plus, &plus);
                let f_plus = g_plus.values(l_plus)[0];

                let mut minus = inputs.to_vec();
                minus[leaf_idx][j] -= h;
                let mut g_minus = Graph::new();
                let (l_minus, _) = build(&mut g_minus, &minus);
                let f_minus = g_minus.values(l_minus)[0];

                let numeric = (f_plus - f_minus) / (2.0 * h);
                let a = analytic[leaf_idx][j];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
                assert!(
                    rel < tol,
                    "leaf {leaf_idx} element {j}: analytic {a} vs numeric {numeric} (rel {rel})"
                );
            }
        }
    }

    #[test]
    fn matmul_identity() {
        let mut g = Graph::new();
        let a = g.leaf(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0], false).unwrap();
        let eye = g.leaf(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0], false).unwrap();
        let c = g.matmul(a, eye).unwrap();
        assert_eq!(g.values(c), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_annihilating() {
        let mut g = Graph::new();
        let a = g.leaf(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0], false).unwrap();
        let b = g.leaf(vec![2, 2], vec![0.0, 0.0, 0.0, 1.0], false).unwrap();
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.values(c), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = rng.gen_range(1..=8);
            let q = rng.gen_range(1..=8);
            let r = rng.gen_range(1..=8);
            let av = rand_values(&mut rng, p * q);
            let bv = rand_values(&mut rng, q * r);

            // Independent naive oracle with a local accumulator.
            let mut expect = vec![0.0; p * r];
            for i in 0..p {
                for j in 0..r {
                    let mut acc = 0.0;
                    for k in 0..q {
                        acc += av[i * q + k] * bv[k * r + j];
                    }
                    expect[i * r + j] = acc;
                }
            }

            let mut g = Graph::new();
            let a = g.leaf(vec![p, q], av, false).unwrap();
            let b = g.leaf(vec![q, r], bv, false).unwrap();
            let c = g.matmul(a, b).unwrap();
            assert_eq!(g.values(c), expect.as_slice(), "{}x{}x{}", p, q, r);
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(vec![2, 3], vec![0.0; 6], false).unwrap();
        let b = g.leaf(vec![2, 2], vec![0.0; 4], false).unwrap();
        let err = g.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2x3]") && msg.contains("[2x2]"), "{msg}");
    }

    #[test]
    fn softmax_uniform_and_single_column() {
        let mut g = Graph::new();
        let a = g.leaf(vec![1, 4], vec![0.0; 4], false).unwrap();
        let s = g.softmax_rows(a).unwrap();
        for &v in g.values(s) {
            assert!(close(v, 0.25, 1e-12));
        }
        let b = g.leaf(vec![1, 1], vec![3.7], false).unwrap();
        let s1 = g.softmax_rows(b).unwrap();
        assert!(close(g.values(s1)[0], 1.0, 1e-12));
    }

    #[test]
    fn softmax_hand_values() {
        // exp-normalize of [1,2,3] computed by hand at f64.
        let e1 = 1f64.exp();
        let e2 = 2f64.exp();
        let e3 = 3f64.exp();
        let z = e1 + e2 + e3;
        let mut g = Graph::new();
        let a = g.leaf(vec![1, 3], vec![1.0, 2.0, 3.0], false).unwrap();
        let s = g.softmax_rows(a).unwrap();
        let out = g.values(s);
        assert!(close(out[0], e1 / z, 1e-15));
        assert!(close(out[1], e2 / z, 1e-15));
        assert!(close(out[2], e3 / z, 1e-15));
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let mut g = Graph::new();
        let a = g.leaf(vec![1, 2], vec![f64::NAN, 0.0], false).unwrap();
        assert!(matches!(g.softmax_rows(a), Err(Error::Numeric(_))));
        let b = g.leaf(vec![1, 2], vec![f64::INFINITY, 0.0], false).unwrap();
        assert!(matches!(g.softmax_rows(b), Err(Error::Numeric(_))));
    }

    #[test]
    fn sigmoid_basics() {
        let mut g = Graph::new();
        let a = g.leaf(vec![1, 3], vec![0.0, -50.0, 30.0], false).unwrap();
        let s = g.sigmoid(a);
        let out = g.values(s);
        assert!(close(out[0], 0.5, 1e-15));
        assert!(out[1] > 0.0 && out[1] < 1e-20, "saturated but finite: {}", out[1]);
        assert!(out[2] < 1.0 && out[2] > 1.0 - 1e-12);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigmoid_symmetry() {
        let mut g = Graph::new();
        let xs = vec![0.3, -1.7, 4.0, -0.05];
        let neg: Vec<f64> = xs.iter().map(|&x| -x).collect();
        let a = g.leaf(vec![1, 4], xs, false).unwrap();
        let b = g.leaf(vec![1, 4], neg, false).unwrap();
        let sa = g.sigmoid(a);
        let sb = g.sigmoid(b);
        for (&x, &y) in g.values(sa).iter().zip(g.values(sb).iter()) {
            assert!(close(x + y, 1.0, 1e-12));
        }
    }

    #[test]
    fn layer_norm_constant_row_is_zero() {
        let mut g = Graph::new();
        let a = g.leaf(vec![1, 4], vec![2.5; 4], false).unwrap();
        let gain = g.leaf(vec![4], vec![1.0; 4], false).unwrap();
        let bias = g.leaf(vec![4], vec![0.0; 4], false).unwrap();
        let y = g.layer_norm(a, gain, bias).unwrap();
        for &v in g.values(y) {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn layer_norm_two_element_row() {
        // Closed form: mean 2, var 1, so [1,3] -> [-1,1] up to epsilon.
        let mut g = Graph::new();
        let a = g.leaf(vec![1, 2], vec![1.0, 3.0], false).unwrap();
        let gain = g.leaf(vec![2], vec![1.0; 2], false).unwrap();
        let bias = g.leaf(vec![2], vec![0.0; 2], false).unwrap();
        let y = g.layer_norm(a, gain, bias).unwrap();
        assert!(close(g.values(y)[0], -1.0, 1e-3));
        assert!(close(g.values(y)[1], 1.0, 1e-3));
    }

    #[test]
    fn layer_norm_output_mean_is_bias_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = Graph::new();
        let a = g.leaf(vec![1, 6], rand_values(&mut rng, 6), false).unwrap();
        let gain = g.leaf(vec![6], vec![1.0; 6], false).unwrap();
        let bias_values = rand_values(&mut rng, 6);
        let bias_mean = bias_values.iter().sum::<f64>() / 6.0;
        let bias = g.leaf(vec![6], bias_values, false).unwrap();
        let y = g.layer_norm(a, gain, bias).unwrap();
        let mean = g.values(y).iter().sum::<f64>() / 6.0;
        assert!(close(mean, bias_mean, 1e-6));
    }

    #[test]
    fn layer_norm_rejects_single_feature() {
        let mut g = Graph::new();
        let a = g.leaf(vec![3, 1], vec![0.0; 3], false).unwrap();
        let gain = g.leaf(vec![1], vec![1.0], false).unwrap();
        let bias = g.leaf(vec![1], vec![0.0], false).unwrap();
        assert!(matches!(g.layer_norm(a, gain, bias), Err(Error::Shape(_))));
    }

    #[test]
    fn cross_entropy_aligned_and_uniform() {
        let mut g = Graph::new();
        // Strong one-hot logits aligned with targets: loss near zero.
        let mut logits = vec![0.0; 3 * 4];
        for (row, &t) in [1usize, 0, 3].iter().enumerate() {
            logits[row * 4 + t] = 50.0;
        }
        let a = g.leaf(vec![3, 4], logits, false).unwrap();
        let loss = g.cross_entropy(a, &[1, 0, 3], None).unwrap();
        assert!(g.values(loss)[0] < 1e-9);

        // Uniform logits: loss is ln V.
        let b = g.leaf(vec![2, 4], vec![0.0; 8], false).unwrap();
        let loss2 = g.cross_entropy(b, &[2, 1], None).unwrap();
        assert!(close(g.values(loss2)[0], 4f64.ln(), 1e-12));
    }

    #[test]
    fn cross_entropy_all_ignored_is_zero_with_zero_grad() {
        let mut g = Graph::new();
        let a = g.leaf(vec![2, 3], vec![0.5; 6], true).unwrap();
        let loss = g.cross_entropy(a, &[9, 9], Some(9)).unwrap();
        assert_eq!(g.values(loss)[0], 0.0);
        g.backward(loss).unwrap();
        assert!(g.grad(a).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cross_entropy_out_of_range_target() {
        let mut g = Graph::new();
        let a = g.leaf(vec![1, 3], vec![0.0; 3], false).unwrap();
        assert!(matches!(g.cross_entropy(a, &[5], None), Err(Error::Index(_))));
    }

    #[test]
    fn backward_sum_gives_ones() {
        let mut g = Graph::new();
        let x = g.leaf(vec![2, 3], vec![0.3; 6], true).unwrap();
        let loss = g.sum(x);
        g.backward(loss).unwrap();
        assert!(g.grad(x).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn backward_sum_of_squares() {
        let mut g = Graph::new();
        let x = g.leaf(vec![1, 2], vec![1.0, 2.0], true).unwrap();
        let xx = g.mul(x, x).unwrap();
        let loss = g.sum(xx);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x), &[2.0, 4.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(vec![2, 2], vec![0.0; 4], true).unwrap();
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut g = Graph::new();
        let x = g.leaf(vec![1, 2], vec![1.0, 2.0], true).unwrap();
        let loss = g.sum(x);
        g.backward(loss).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x), &[2.0, 2.0]);
        g.zero_grad();
        assert_eq!(g.grad(x), &[0.0, 0.0]);
    }

    #[test]
    fn seeded_forward_backward_is_bit_identical() {
        let run = || -> (Vec<f64>, Vec<f64>) {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut g = Graph::new();
            let x = g.leaf(vec![3, 4], (0..12).map(|i| (i as f64) * 0.17 - 1.0).collect(), true).unwrap();
            let w = g.leaf(vec![4, 4], (0..16).map(|i| ((i * 7) % 5) as f64 * 0.21 - 0.4).collect(), true).unwrap();
            let h = g.matmul(x, w).unwrap();
            let h = g.dropout(h, 0.25, &mut rng).unwrap();
            let s = g.softmax_rows(h).unwrap();
            let loss = g.cross_entropy(s, &[0, 1, 2], None).unwrap();
            g.backward(loss).unwrap();
            (g.grad(x).to_vec(), g.grad(w).to_vec())
        };
        let (gx1, gw1) = run();
        let (gx2, gw2) = run();
        assert!(gx1.iter().zip(gx2.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(gw1.iter().zip(gw2.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn dropout_scales_and_disables() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = Graph::new();
        let x = g.leaf(vec![1, 1000], vec![1.0; 1000], false).unwrap();
        let y = g.dropout(x, 0.5, &mut rng).unwrap();
        let kept: Vec<f64> = g.values(y).iter().cloned().filter(|&v| v != 0.0).collect();
        assert!(kept.iter().all(|&v| close(v, 2.0, 1e-12)));
        assert!(kept.len() > 400 && kept.len() < 600);
        // p = 0 is the identity: same node comes back.
        let z = g.dropout(x, 0.0, &mut rng).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn finite_differences_across_all_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x34 = rand_values(&mut rng, 12);
        let w43 = rand_values(&mut rng, 12);
        let b3 = rand_values(&mut rng, 3);
        let b4 = rand_values(&mut rng, 4);
        let y34 = rand_values(&mut rng, 12);

        // matmul + add_row_bias + sigmoid + softmax + cross_entropy chain
        finite_diff_check(
            &|g, inp| {
                let x = g.leaf(vec![3, 4], inp[0].clone(), true).unwrap();
                let w = g.leaf(vec![4, 3], inp[1].clone(), true).unwrap();
                let b = g.leaf(vec![3], inp[2].clone(), true).unwrap();
                let h = g.matmul(x, w).unwrap();
                let h = g.add_row_bias(h, b).unwrap();
                let s = g.sigmoid(h);
                let sm = g.softmax_rows(s).unwrap();
                let loss = g.cross_entropy(sm, &[0, 2, 1], None).unwrap();
                (loss, vec![x, w, b])
            },
            &[x34.clone(), w43.clone(), b3.clone()],
            1e-4,
        );

        // sub, mul, scale, transpose, mean
        finite_diff_check(
            &|g, inp| {
                let x = g.leaf(vec![3, 4], inp[0].clone(), true).unwrap();
                let y = g.leaf(vec![3, 4], inp[1].clone(), true).unwrap();
                let d = g.sub(x, y).unwrap();
                let m = g.mul(d, x).unwrap();
                let t = g.transpose(m).unwrap();
                let sc = g.scale(t, 0.7);
                let loss = g.mean(sc);
                (loss, vec![x, y])
            },
            &[x34.clone(), y34.clone()],
            1e-4,
        );

        // layer_norm + add_col_bias + relu + sum
        finite_diff_check(
            &|g, inp| {
                let x = g.leaf(vec![3, 4], inp[0].clone(), true).unwrap();
                let gain = g.leaf(vec![4], inp[1].clone(), true).unwrap();
                let bias = g.leaf(vec![4], inp[2].clone(), true).unwrap();
                let cb = g.leaf(vec![3], inp[3].clone(), true).unwrap();
                let n = g.layer_norm(x, gain, bias).unwrap();
                let n = g.add_col_bias(n, cb).unwrap();
                let r = g.relu(n);
                let loss = g.sum(r);
                (loss, vec![x, gain, bias, cb])
            },
            &[x34.clone(), b4.clone(), rand_values(&mut rng, 4), b3.clone()],
            1e-4,
        );

        // concat_cols, slice_rows, slice_cols, gather_rows
        finite_diff_check(
            &|g, inp| {
                let x = g.leaf(vec![3, 4], inp[0].clone(), true).unwrap();
                let y = g.leaf(vec![3, 4], inp[1].clone(), true).unwrap();
                let c = g.concat_cols(x, y).unwrap();
                let r = g.slice_rows(c, 1, 2).unwrap();
                let s = g.slice_cols(r, 2, 5).unwrap();
                let gth = g.gather_rows(s, &[1, 0, 1]).unwrap();
                let sm = g.softmax_rows(gth).unwrap();
                let loss = g.cross_entropy(sm, &[3, 0, 4], None).unwrap();
                (loss, vec![x, y])
            },
            &[x34.clone(), y34.clone()],
            1e-4,
        );

        // kl_div_rows against fixed teacher distributions
        finite_diff_check(
            &|g, inp| {
                let x = g.leaf(vec![2, 3], inp[0].clone(), true).unwrap();
                let teacher = vec![0.5, 0.3, 0.2, 0.1, 0.1, 0.8];
                let loss = g.kl_div_rows(x, &teacher, &[true, true]).unwrap();
                (loss, vec![x])
            },
            &[x34[..6].to_vec()],
            1e-4,
        );

        // dropout as a fixed linear map (same seed both sides of the probe)
        finite_diff_check(
            &|g, inp| {
                let mut drng = ChaCha8Rng::seed_from_u64(5);
                let x = g.leaf(vec![3, 4], inp[0].clone(), true).unwrap();
                let d = g.dropout(x, 0.4, &mut drng).unwrap();
                let loss = g.sum(d);
                (loss, vec![x])
            },
            &[y34.clone()],
            1e-4,
        );
    }
}
