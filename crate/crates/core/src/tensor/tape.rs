use std::collections::BTreeMap;

use super::kernels;
use super::store::{GradBuf, Gradients, ParamId, ParameterStore};
use super::{Shape, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Logistic(Var),
    Concat(Vec<Var>),
    PickRow(Var, usize),
    Sum(Var),
    Scale(Var, f64),
    AddScalar(Var),
}

#[derive(Debug)]
struct Node {
    op: Op,
    // `None` for parameter nodes, whose value lives in the store.
    value: Option<Tensor>,
    shape: Shape,
}

/// Records a computation for one reverse-mode pass.
///
/// Nodes are appended in execution order, so every node's inputs precede it
/// and the backward pass is a single reverse sweep.
pub struct Tape<'s> {
    store: &'s ParameterStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    backpropagated: bool,
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParameterStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
            backpropagated: false,
        }
    }

    pub fn store(&self) -> &'s ParameterStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node so the tape can be reused.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.param_nodes.iter_mut().for_each(|p| *p = None);
        self.backpropagated = false;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    /// The single value of a `(1, 1)` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    fn push(&mut self, op: Op, value: Tensor, name: &'static str) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let shape = value.shape();
        self.nodes.push(Node {
            op,
            value: Some(value),
            shape,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant input that receives no parameter gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var, TensorError> {
        self.push(Op::Leaf, value, "constant")
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Tensor::zeros(rows, cols))
            .expect("zeros are finite")
    }

    /// The tape node for a stored parameter; repeated calls share one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.index()] {
            return v;
        }
        let shape = self.store.value(id).shape();
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            shape,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.index()] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(TensorError::Shape {
                op: "matmul",
                left: (m, k),
                right: (k2, n),
            });
        }
        let data = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push(Op::MatMul(a, b), Tensor::from_vec(m, n, data)?, "matmul")
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::Shape {
                op,
                left: self.shape(a),
                right: self.shape(b),
            });
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (rows, cols) = self.shape(a);
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::from_vec(rows, cols, data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let (rows, cols) = self.shape(a);
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        Tensor::from_vec(rows, cols, data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        let t = self.zip_with(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), t, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("sub", a, b)?;
        let t = self.zip_with(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), t, "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("mul", a, b)?;
        let t = self.zip_with(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), t, "mul")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.map(a, f64::tanh);
        self.push(Op::Tanh(a), t, "tanh")
    }

    pub fn logistic(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.map(a, kernels::logistic);
        self.push(Op::Logistic(a), t, "logistic")
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, TensorError> {
        let t = self.map(a, |x| x * factor);
        self.push(Op::Scale(a, factor), t, "scale")
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let t = self.map(a, |x| x + c);
        self.push(Op::AddScalar(a), t, "add_scalar")
    }

    /// Sum of all elements as a `(1, 1)` value.
    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s), "sum")
    }

    /// Stacks column vectors vertically.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let mut data = Vec::new();
        for &p in parts {
            let shape = self.shape(p);
            if shape.1 != 1 {
                return Err(TensorError::Shape {
                    op: "concat",
                    left: shape,
                    right: (shape.0, 1),
                });
            }
            data.extend_from_slice(self.value(p).data());
        }
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(data), "concat")
    }

    /// Row `row` of `a` as a column vector; on a vector this is one element.
    pub fn pick_row(&mut self, a: Var, row: usize) -> Result<Var, TensorError> {
        let shape = self.shape(a);
        if row >= shape.0 {
            return Err(TensorError::Index {
                op: "pick_row",
                index: row,
                shape,
            });
        }
        let data = self.value(a).row(row).to_vec();
        self.push(Op::PickRow(a, row), Tensor::vector(data), "pick_row")
    }

    /// Reverse sweep from `loss`, returning gradients for every parameter the
    /// loss depends on.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, TensorError> {
        if self.backpropagated {
            return Err(TensorError::AlreadyBackpropagated);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NotScalar(shape));
        }
        self.backpropagated = true;

        let n_params = self.store.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        let mut row_grads: Vec<Option<BTreeMap<usize, Vec<f64>>>> = vec![None; n_params];
        grads[loss.0] = Some(vec![1.0]);

        for index in (0..=loss.0).rev() {
            let Some(g) = grads[index].take() else { continue };
            let node = &self.nodes[index];
            match &node.op {
                Op::Leaf => {}
                Op::Param(_) => {
                    // Parameter nodes keep their gradient for collection below.
                    grads[index] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = self.shape(*b).1;
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    if self.needs_grad(*a) {
                        let da = grad_buf(&mut grads, *a, m * k);
                        kernels::matmul_grad_left(&g, bv, da, m, k, n);
                    }
                    if self.needs_grad(*b) {
                        let db = grad_buf(&mut grads, *b, k * n);
                        kernels::matmul_grad_right(av, &g, db, m, k, n);
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, &g, 1.0);
                    self.accumulate(&mut grads, *b, &g, 1.0);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut grads, *a, &g, 1.0);
                    self.accumulate(&mut grads, *b, &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs_grad(a) {
                        let other = self.value(b).data();
                        let da = grad_buf(&mut grads, a, g.len());
                        for i in 0..g.len() {
                            da[i] += g[i] * other[i];
                        }
                    }
                    if self.needs_grad(b) {
                        let other = self.value(a).data();
                        let db = grad_buf(&mut grads, b, g.len());
                        for i in 0..g.len() {
                            db[i] += g[i] * other[i];
                        }
                    }
                }
                Op::Tanh(a) => {
                    if self.needs_grad(*a) {
                        let y = node.value.as_ref().expect("owned").data();
                        let da = grad_buf(&mut grads, *a, g.len());
                        for i in 0..g.len() {
                            da[i] += g[i] * (1.0 - y[i] * y[i]);
                        }
                    }
                }
                Op::Logistic(a) => {
                    if self.needs_grad(*a) {
                        let y = node.value.as_ref().expect("owned").data();
                        let da = grad_buf(&mut grads, *a, g.len());
                        for i in 0..g.len() {
                            da[i] += g[i] * y[i] * (1.0 - y[i]);
                        }
                    }
                }
                Op::Scale(a, factor) => self.accumulate(&mut grads, *a, &g, *factor),
                Op::AddScalar(a) => self.accumulate(&mut grads, *a, &g, 1.0),
                Op::Sum(a) => {
                    if self.needs_grad(*a) {
                        let len = self.value(*a).len();
                        let da = grad_buf(&mut grads, *a, len);
                        da.iter_mut().for_each(|x| *x += g[0]);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        self.accumulate(&mut grads, p, &g[offset..offset + len], 1.0);
                        offset += len;
                    }
                }
                Op::PickRow(a, row) => {
                    if let Op::Param(id) = self.nodes[a.0].op {
                        // Embedding lookups stay row-sparse.
                        let rows = row_grads[id.index()].get_or_insert_with(BTreeMap::new);
                        let buf = rows.entry(*row).or_insert_with(|| vec![0.0; g.len()]);
                        kernels::axpy(1.0, &g, buf);
                    } else if self.needs_grad(*a) {
                        let cols = self.shape(*a).1;
                        let len = self.value(*a).len();
                        let da = grad_buf(&mut grads, *a, len);
                        kernels::axpy(1.0, &g, &mut da[row * cols..(row + 1) * cols]);
                    }
                }
            }
        }

        let mut entries: Vec<Option<GradBuf>> = vec![None; n_params];
        for (id, slot) in self.param_nodes.iter().enumerate() {
            let dense = slot.and_then(|v| grads.get_mut(v.0).and_then(Option::take));
            let rows = row_grads[id].take();
            entries[id] = match (dense, rows) {
                (None, None) => None,
                (Some(d), None) => Some(GradBuf::Dense(d)),
                (None, Some(r)) => Some(GradBuf::Rows(r)),
                (Some(mut d), Some(r)) => {
                    let cols = self.store.value(ParamId(id)).cols();
                    for (row, g) in r {
                        kernels::axpy(1.0, &g, &mut d[row * cols..(row + 1) * cols]);
                    }
                    Some(GradBuf::Dense(d))
                }
            };
        }
        let shapes = self.store.ids().map(|id| self.store.value(id).shape()).collect();
        Ok(Gradients { entries, shapes })
    }

    fn needs_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Leaf)
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], target: Var, g: &[f64], factor: f64) {
        if !self.needs_grad(target) {
            return;
        }
        let buf = grad_buf(grads, target, g.len());
        kernels::axpy(factor, g, buf);
    }
}

fn grad_buf(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}
