//! Dense vectors/matrices and a reverse-mode tape sufficient for small MLPs,
//! Gumbel activations, MSE/BCE losses, and Adam updates.
//!
//! Tape nodes hold vector values (a scalar is a length-1 vector). Matrices
//! appear only as operands of `matvec`, registered separately so weight
//! gradients can be switched off when a network is frozen (e.g. during
//! latent inversion).

use crate::error::{Error, Result};
use crate::gumbel;

/// Contiguous f64 vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn zeros(n: usize) -> Self {
        Vector { data: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix {}x{} needs {} elements, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// y = A·x.
    pub fn matvec(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matvec: matrix has {} cols, vector has {} elements",
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.as_slice()) {
                acc += a * b;
            }
            *o = acc;
        }
        Ok(Vector::new(out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatId(usize);

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param,
    MatVec { mat: MatId, x: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    SoftmaxTemp { x: NodeId, tau: f64 },
    HardOneHotSt { soft: NodeId },
    Slice { x: NodeId, start: usize },
    Concat(Vec<NodeId>),
    Mse { a: NodeId, b: NodeId },
    BceWithLogits { logit: NodeId, target: f64 },
    SumScalars(Vec<NodeId>),
}

struct Node {
    op: Op,
    value: Vector,
}

struct MatOperand {
    value: Matrix,
    tracked: bool,
}

/// Append-only Wengert list. Forward values are computed eagerly; `backward`
/// replays the list in reverse, accumulating gradients additively over
/// fan-out.
pub struct Tape {
    nodes: Vec<Node>,
    mats: Vec<MatOperand>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            mats: Vec::new(),
        }
    }

    fn push(&mut self, op: Op, value: Vector) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Vector {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> Result<f64> {
        let v = self.value(id);
        if v.len() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected scalar node, got length {}",
                v.len()
            )));
        }
        Ok(v[0])
    }

    pub fn constant(&mut self, v: Vector) -> NodeId {
        self.push(Op::Const, v)
    }

    pub fn param(&mut self, v: Vector) -> NodeId {
        self.push(Op::Param, v)
    }

    pub fn matrix(&mut self, m: Matrix, tracked: bool) -> MatId {
        self.mats.push(MatOperand { value: m, tracked });
        MatId(self.mats.len() - 1)
    }

    pub fn matvec(&mut self, mat: MatId, x: NodeId) -> Result<NodeId> {
        let y = self.mats[mat.0].value.matvec(self.value(x))?;
        Ok(self.push(Op::MatVec { mat, x }, y))
    }

    /// W·x + b with a tape record for backward.
    pub fn linear(&mut self, weights: MatId, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let wx = self.matvec(weights, x)?;
        self.add(wx, bias)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(Error::DimensionMismatch(format!(
                "add: {} vs {}",
                va.len(),
                vb.len()
            )));
        }
        let v = Vector::new(
            va.as_slice()
                .iter()
                .zip(vb.as_slice())
                .map(|(x, y)| x + y)
                .collect(),
        );
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(Error::DimensionMismatch(format!(
                "sub: {} vs {}",
                va.len(),
                vb.len()
            )));
        }
        let v = Vector::new(
            va.as_slice()
                .iter()
                .zip(vb.as_slice())
                .map(|(x, y)| x - y)
                .collect(),
        );
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = Vector::new(self.value(a).as_slice().iter().map(|x| x * c).collect());
        self.push(Op::Scale(a, c), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = Vector::new(self.value(a).as_slice().iter().map(|x| x.tanh()).collect());
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = Vector::new(
            self.value(a)
                .as_slice()
                .iter()
                .map(|&x| sigmoid(x))
                .collect(),
        );
        self.push(Op::Sigmoid(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = Vector::new(
            self.value(a)
                .as_slice()
                .iter()
                .map(|&x| if x > 0.0 { x } else { 0.0 })
                .collect(),
        );
        self.push(Op::Relu(a), v)
    }

    /// softmax(x / tau) with max-subtraction.
    pub fn softmax_temp(&mut self, x: NodeId, tau: f64) -> Result<NodeId> {
        if tau <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {tau}"
            )));
        }
        let y = gumbel::tempered_softmax(self.value(x).as_slice(), tau)?;
        Ok(self.push(Op::SoftmaxTemp { x, tau }, Vector::new(y)))
    }

    /// Forward: exactly one-hot at the argmax of the soft probabilities
    /// (ties to the lowest index). Backward: straight-through, the gradient
    /// flows to the soft parent unchanged.
    pub fn hard_one_hot_st(&mut self, soft: NodeId) -> NodeId {
        let y = gumbel::one_hot_argmax(self.value(soft).as_slice());
        self.push(Op::HardOneHotSt { soft }, Vector::new(y))
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(x);
        if start + len > v.len() {
            return Err(Error::DimensionMismatch(format!(
                "slice [{start}, {}) out of bounds for length {}",
                start + len,
                v.len()
            )));
        }
        let out = Vector::new(v.as_slice()[start..start + len].to_vec());
        Ok(self.push(Op::Slice { x, start }, out))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut out = Vec::new();
        for p in parts {
            out.extend_from_slice(self.value(*p).as_slice());
        }
        self.push(Op::Concat(parts.to_vec()), Vector::new(out))
    }

    /// Mean of element-wise squared differences.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(Error::DimensionMismatch(format!(
                "mse: {} vs {}",
                va.len(),
                vb.len()
            )));
        }
        if va.is_empty() {
            return Err(Error::InvalidArgument("mse of empty vectors".into()));
        }
        let v = mse_value(va.as_slice(), vb.as_slice());
        Ok(self.push(Op::Mse { a, b }, Vector::new(vec![v])))
    }

    /// Numerically stable binary cross-entropy on a raw logit.
    pub fn bce_with_logits(&mut self, logit: NodeId, target: f64) -> Result<NodeId> {
        let v = self.value(logit);
        if v.len() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "bce_with_logits expects a scalar logit, got length {}",
                v.len()
            )));
        }
        let x = v[0];
        let loss = x.max(0.0) - x * target + (-x.abs()).exp().ln_1p();
        Ok(self.push(Op::BceWithLogits { logit, target }, Vector::new(vec![loss])))
    }

    pub fn sum_scalars(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut acc = 0.0;
        for p in parts {
            let v = self.value(*p);
            if v.len() != 1 {
                return Err(Error::DimensionMismatch(
                    "sum_scalars over non-scalar node".into(),
                ));
            }
            acc += v[0];
        }
        Ok(self.push(Op::SumScalars(parts.to_vec()), Vector::new(vec![acc])))
    }

    pub fn mean_scalars(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("mean over zero scalars".into()));
        }
        let s = self.sum_scalars(parts)?;
        Ok(self.scale(s, 1.0 / parts.len() as f64))
    }

    /// Reverse sweep from a scalar loss node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::DimensionMismatch(
                "backward: loss node must be scalar".into(),
            ));
        }
        let mut node_grads: Vec<Vector> = self
            .nodes
            .iter()
            .map(|n| Vector::zeros(n.value.len()))
            .collect();
        let mut mat_grads: Vec<Option<Matrix>> = self
            .mats
            .iter()
            .map(|m| {
                if m.tracked {
                    Some(Matrix::zeros(m.value.rows(), m.value.cols()))
                } else {
                    None
                }
            })
            .collect();
        node_grads[loss.0][0] = 1.0;

        for idx in (0..=loss.0).rev() {
            let g = std::mem::replace(&mut node_grads[idx], Vector::zeros(0));
            match &self.nodes[idx].op {
                Op::Const | Op::Param => {
                    node_grads[idx] = g;
                    continue;
                }
                Op::MatVec { mat, x } => {
                    let w = &self.mats[mat.0].value;
                    let xv = &self.nodes[x.0].value;
                    let gx = node_grads[x.0].as_mut_slice();
                    for i in 0..w.rows() {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for (j, gxj) in gx.iter_mut().enumerate() {
                            *gxj += w.get(i, j) * gi;
                        }
                    }
                    if let Some(gw) = mat_grads[mat.0].as_mut() {
                        for i in 0..w.rows() {
                            let gi = g[i];
                            if gi == 0.0 {
                                continue;
                            }
                            for j in 0..w.cols() {
                                let cur = gw.get(i, j);
                                gw.set(i, j, cur + gi * xv[j]);
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut node_grads[a.0], g.as_slice(), 1.0);
                    accumulate(&mut node_grads[b.0], g.as_slice(), 1.0);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut node_grads[a.0], g.as_slice(), 1.0);
                    accumulate(&mut node_grads[b.0], g.as_slice(), -1.0);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut node_grads[a.0], g.as_slice(), *c);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[idx].value;
                    let ga = node_grads[a.0].as_mut_slice();
                    for (i, gai) in ga.iter_mut().enumerate() {
                        *gai += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[idx].value;
                    let ga = node_grads[a.0].as_mut_slice();
                    for (i, gai) in ga.iter_mut().enumerate() {
                        *gai += g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Relu(a) => {
                    let xv = &self.nodes[a.0].value;
                    let ga = node_grads[a.0].as_mut_slice();
                    for (i, gai) in ga.iter_mut().enumerate() {
                        if xv[i] > 0.0 {
                            *gai += g[i];
                        }
                    }
                }
                Op::SoftmaxTemp { x, tau } => {
                    let y = &self.nodes[idx].value;
                    let dot: f64 = g
                        .as_slice()
                        .iter()
                        .zip(y.as_slice())
                        .map(|(gi, yi)| gi * yi)
                        .sum();
                    let gx = node_grads[x.0].as_mut_slice();
                    for (i, gxi) in gx.iter_mut().enumerate() {
                        *gxi += y[i] * (g[i] - dot) / tau;
                    }
                }
                Op::HardOneHotSt { soft } => {
                    accumulate(&mut node_grads[soft.0], g.as_slice(), 1.0);
                }
                Op::Slice { x, start } => {
                    let gx = node_grads[x.0].as_mut_slice();
                    for (i, gi) in g.as_slice().iter().enumerate() {
                        gx[start + i] += gi;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts.clone() {
                        let len = self.nodes[p.0].value.len();
                        let gp = node_grads[p.0].as_mut_slice();
                        for (i, gpi) in gp.iter_mut().enumerate() {
                            *gpi += g[off + i];
                        }
                        off += len;
                    }
                }
                Op::Mse { a, b } => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let n = va.len() as f64;
                    let g0 = g[0];
                    {
                        let ga = node_grads[a.0].as_mut_slice();
                        for (i, gai) in ga.iter_mut().enumerate() {
                            *gai += g0 * 2.0 * (va[i] - vb[i]) / n;
                        }
                    }
                    {
                        let gb = node_grads[b.0].as_mut_slice();
                        for (i, gbi) in gb.iter_mut().enumerate() {
                            *gbi -= g0 * 2.0 * (va[i] - vb[i]) / n;
                        }
                    }
                }
                Op::BceWithLogits { logit, target } => {
                    let x = self.nodes[logit.0].value[0];
                    node_grads[logit.0][0] += g[0] * (sigmoid(x) - target);
                }
                Op::SumScalars(parts) => {
                    for p in parts.clone() {
                        node_grads[p.0][0] += g[0];
                    }
                }
            }
            node_grads[idx] = g;
        }

        Ok(Gradients {
            node_grads,
            mat_grads,
        })
    }
}

fn accumulate(dst: &mut Vector, src: &[f64], factor: f64) {
    for (d, s) in dst.as_mut_slice().iter_mut().zip(src) {
        *d += factor * s;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn mse_value(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

pub struct Gradients {
    node_grads: Vec<Vector>,
    mat_grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn node(&self, id: NodeId) -> &Vector {
        &self.node_grads[id.0]
    }

    pub fn mat(&self, id: MatId) -> Option<&Matrix> {
        self.mat_grads[id.0].as_ref()
    }
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    /// Defaults used for adversarial training.
    pub fn gan_training() -> Self {
        AdamHyper {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        }
    }

    /// Defaults used for latent inversion.
    pub fn inversion() -> Self {
        AdamHyper {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Per-parameter-tensor Adam state with bias correction.
pub struct AdamState {
    hyper: AdamHyper,
    step: u64,
    slots: Vec<Moments>,
}

impl AdamState {
    pub fn new(hyper: AdamHyper, sizes: &[usize]) -> Self {
        AdamState {
            hyper,
            step: 0,
            slots: sizes
                .iter()
                .map(|&n| Moments {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                })
                .collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over the whole parameter list. Aborts with a
    /// diagnostic if any updated parameter is non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.slots.len() || grads.len() != self.slots.len() {
            return Err(Error::DimensionMismatch(format!(
                "adam: {} slots, {} params, {} grads",
                self.slots.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let h = self.hyper;
        let bc1 = 1.0 - h.beta1.powi(t);
        let bc2 = 1.0 - h.beta2.powi(t);
        for ((slot, p), g) in self.slots.iter_mut().zip(params.iter_mut()).zip(grads) {
            if p.len() != slot.m.len() || g.len() != slot.m.len() {
                return Err(Error::DimensionMismatch(format!(
                    "adam: slot size {} vs param {} / grad {}",
                    slot.m.len(),
                    p.len(),
                    g.len()
                )));
            }
            for i in 0..p.len() {
                slot.m[i] = h.beta1 * slot.m[i] + (1.0 - h.beta1) * g[i];
                slot.v[i] = h.beta2 * slot.v[i] + (1.0 - h.beta2) * g[i] * g[i];
                let m_hat = slot.m[i] / bc1;
                let v_hat = slot.v[i] / bc2;
                p[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
                if !p[i].is_finite() {
                    return Err(Error::NonFinite(format!(
                        "adam produced non-finite parameter at step {}",
                        self.step
                    )));
                }
            }
        }
        Ok(())
    }
}
