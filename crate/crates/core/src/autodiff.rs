//! Reverse-mode differentiation over a recorded operation tape.
//!
//! The primitive set is deliberately closed: add, sub, elementwise mul,
//! scalar mul (constant and taped-scalar flavors), matrix-vector product,
//! exp, ln, tanh, sigmoid, stabilized log-sum-exp, squared L2 norm, inner
//! product, and concatenation. Everything else in the crate is composed from
//! these, which keeps the gradient-check surface enumerable.
//!
//! Long unrolled chains (the multi-step sampler) are recorded through
//! [`Tape::checkpointed_chain`]: each segment appears on the tape as a single
//! node holding only its boundary value, and is re-executed on a scratch tape
//! during the backward pass.

use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::linalg;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value on a [`Tape`]. Cheap to copy; only valid with the tape
/// that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

/// Re-runnable segment for checkpointed recording: maps one taped value to
/// another on whatever tape it is handed.
pub type ChainFn = Rc<dyn Fn(&mut Tape, Var) -> Result<Var>>;

#[derive(Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ScaleConst(Var, f64),
    ScaleVar { scalar: Var, tensor: Var },
    MatVec { matrix: Var, vector: Var },
    Exp(Var),
    Ln(Var),
    Tanh(Var),
    Sigmoid(Var),
    LogSumExp(Var),
    SqNorm(Var),
    Inner(Var, Var),
    Concat(Vec<Var>),
    Checkpoint { input: Var, f: ChainFn },
}

struct Node {
    value: Vec<f64>,
    shape: Vec<usize>,
    op: Op,
    /// Leaves created with `constant` opt out of gradient accumulation; the
    /// backward pass skips the (possibly large) products feeding them.
    requires_grad: bool,
}

/// Append-only record of a forward computation. One tape per optimization
/// step; a tape is confined to a single thread.
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.index].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.index].shape
    }

    /// Scalar payload of a shape-[] value.
    pub fn scalar_value(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.index].value.len(), 1);
        self.nodes[v.index].value[0]
    }

    fn check_owned(&self, op: &'static str, v: Var) -> Result<()> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::TapeMismatch { op });
        }
        Ok(())
    }

    fn check_finite(&self, op: &'static str, v: Var) -> Result<()> {
        if !linalg::all_finite(&self.nodes[v.index].value) {
            return Err(Error::NonFinite {
                context: format!("input of {op}"),
            });
        }
        Ok(())
    }

    fn check_inputs(&self, op: &'static str, vars: &[Var]) -> Result<()> {
        for &v in vars {
            self.check_owned(op, v)?;
            self.check_finite(op, v)?;
        }
        Ok(())
    }

    fn push(&mut self, value: Vec<f64>, shape: Vec<usize>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(value.len(), numel(&shape));
        self.nodes.push(Node {
            value,
            shape,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    // ---- leaves ---------------------------------------------------------

    /// Differentiable input. Shape [] for scalars, [n] for vectors, [m, n]
    /// for row-major matrices.
    pub fn leaf(&mut self, values: &[f64], shape: &[usize]) -> Result<Var> {
        self.leaf_inner(values, shape, true)
    }

    /// Non-differentiable input (model parameters during noise optimization,
    /// schedule coefficients, watermark patterns, ...).
    pub fn constant(&mut self, values: &[f64], shape: &[usize]) -> Result<Var> {
        self.leaf_inner(values, shape, false)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Result<Var> {
        self.leaf_inner(&[value], &[], true)
    }

    pub fn scalar_constant(&mut self, value: f64) -> Result<Var> {
        self.leaf_inner(&[value], &[], false)
    }

    fn leaf_inner(&mut self, values: &[f64], shape: &[usize], requires_grad: bool) -> Result<Var> {
        if values.len() != numel(shape) {
            return Err(Error::ShapeMismatch {
                op: "leaf",
                detail: format!("{} values for shape {:?}", values.len(), shape),
            });
        }
        if !linalg::all_finite(values) {
            return Err(Error::NonFinite {
                context: "leaf values".into(),
            });
        }
        Ok(self.push(values.to_vec(), shape.to_vec(), Op::Leaf, requires_grad))
    }

    // ---- recorded primitives --------------------------------------------

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.nodes[a.index].shape != self.nodes[b.index].shape {
            return Err(Error::ShapeMismatch {
                op,
                detail: format!(
                    "{:?} vs {:?}",
                    self.nodes[a.index].shape, self.nodes[b.index].shape
                ),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_inputs("add", &[a, b])?;
        self.same_shape("add", a, b)?;
        let value = linalg::add(&self.nodes[a.index].value, &self.nodes[b.index].value);
        let shape = self.nodes[a.index].shape.clone();
        Ok(self.push(value, shape, Op::Add(a, b), true))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_inputs("sub", &[a, b])?;
        self.same_shape("sub", a, b)?;
        let value = linalg::sub(&self.nodes[a.index].value, &self.nodes[b.index].value);
        let shape = self.nodes[a.index].shape.clone();
        Ok(self.push(value, shape, Op::Sub(a, b), true))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_inputs("mul", &[a, b])?;
        self.same_shape("mul", a, b)?;
        let value: Vec<f64> = self.nodes[a.index]
            .value
            .iter()
            .zip(&self.nodes[b.index].value)
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.nodes[a.index].shape.clone();
        Ok(self.push(value, shape, Op::Mul(a, b), true))
    }

    pub fn scale_const(&mut self, a: Var, c: f64) -> Result<Var> {
        self.check_inputs("scale_const", &[a])?;
        if !c.is_finite() {
            return Err(Error::NonFinite {
                context: "scale_const coefficient".into(),
            });
        }
        let value = linalg::scale(&self.nodes[a.index].value, c);
        let shape = self.nodes[a.index].shape.clone();
        Ok(self.push(value, shape, Op::ScaleConst(a, c), true))
    }

    /// Broadcast multiply of a taped scalar against a tensor.
    pub fn scale(&mut self, scalar: Var, tensor: Var) -> Result<Var> {
        self.check_inputs("scale", &[scalar, tensor])?;
        if self.nodes[scalar.index].value.len() != 1 {
            return Err(Error::NotScalar {
                op: "scale",
                len: self.nodes[scalar.index].value.len(),
            });
        }
        let s = self.nodes[scalar.index].value[0];
        let value = linalg::scale(&self.nodes[tensor.index].value, s);
        let shape = self.nodes[tensor.index].shape.clone();
        Ok(self.push(value, shape, Op::ScaleVar { scalar, tensor }, true))
    }

    pub fn matvec(&mut self, matrix: Var, vector: Var) -> Result<Var> {
        self.check_inputs("matvec", &[matrix, vector])?;
        let mshape = self.nodes[matrix.index].shape.clone();
        let vshape = self.nodes[vector.index].shape.clone();
        if mshape.len() != 2 || vshape.len() != 1 || mshape[1] != vshape[0] {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                detail: format!("matrix {mshape:?} vs vector {vshape:?}"),
            });
        }
        let value = linalg::matvec_flat(
            &self.nodes[matrix.index].value,
            mshape[0],
            mshape[1],
            &self.nodes[vector.index].value,
        );
        Ok(self.push(value, vec![mshape[0]], Op::MatVec { matrix, vector }, true))
    }

    fn unary(
        &mut self,
        op_name: &'static str,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.check_inputs(op_name, &[a])?;
        let value: Vec<f64> = self.nodes[a.index].value.iter().map(|&x| f(x)).collect();
        let shape = self.nodes[a.index].shape.clone();
        Ok(self.push(value, shape, op, true))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, f64::exp, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary("ln", a, f64::ln, Op::Ln(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    /// Stabilized log(sum(exp(x))) of a vector, yielding a scalar.
    pub fn log_sum_exp(&mut self, a: Var) -> Result<Var> {
        self.check_inputs("log_sum_exp", &[a])?;
        if self.nodes[a.index].shape.len() != 1 || self.nodes[a.index].value.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "log_sum_exp",
                detail: format!("need a non-empty vector, got {:?}", self.nodes[a.index].shape),
            });
        }
        let value = linalg::log_sum_exp(&self.nodes[a.index].value);
        Ok(self.push(vec![value], vec![], Op::LogSumExp(a), true))
    }

    pub fn sq_norm(&mut self, a: Var) -> Result<Var> {
        self.check_inputs("sq_norm", &[a])?;
        let value = linalg::norm_sq(&self.nodes[a.index].value);
        Ok(self.push(vec![value], vec![], Op::SqNorm(a), true))
    }

    pub fn inner(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_inputs("inner", &[a, b])?;
        self.same_shape("inner", a, b)?;
        let value = linalg::dot(&self.nodes[a.index].value, &self.nodes[b.index].value);
        Ok(self.push(vec![value], vec![], Op::Inner(a, b), true))
    }

    /// Concatenate scalars and/or vectors into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "concat",
                detail: "no inputs".into(),
            });
        }
        self.check_inputs("concat", parts)?;
        let mut value = Vec::new();
        for &p in parts {
            if self.nodes[p.index].shape.len() > 1 {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    detail: format!("rank-{} input", self.nodes[p.index].shape.len()),
                });
            }
            value.extend_from_slice(&self.nodes[p.index].value);
        }
        let len = value.len();
        Ok(self.push(value, vec![len], Op::Concat(parts.to_vec()), true))
    }

    // ---- checkpointing ---------------------------------------------------

    /// Record `f` as a single opaque node. The intermediate operations inside
    /// `f` are executed on a throwaway tape and not stored; backward re-runs
    /// `f` from the boundary value.
    pub fn checkpoint(&mut self, input: Var, f: ChainFn) -> Result<Var> {
        self.check_inputs("checkpoint", &[input])?;
        let mut scratch = Tape::new();
        let leaf = scratch.leaf(
            &self.nodes[input.index].value.clone(),
            &self.nodes[input.index].shape.clone(),
        )?;
        let out = f(&mut scratch, leaf)?;
        scratch.check_owned("checkpoint", out)?;
        let value = scratch.nodes[out.index].value.clone();
        let shape = scratch.nodes[out.index].shape.clone();
        Ok(self.push(value, shape, Op::Checkpoint { input, f }, true))
    }

    /// Chain `steps` with one checkpoint node per segment of `segment_len`
    /// steps (final segment may be shorter). Peak stored state is bounded by
    /// the number of segments on this tape plus one segment's worth of nodes
    /// on the replay tape.
    pub fn checkpointed_chain(
        &mut self,
        input: Var,
        steps: &[ChainFn],
        segment_len: usize,
    ) -> Result<Var> {
        if segment_len == 0 {
            return Err(Error::InvalidArgument(
                "checkpoint segment length must be at least 1".into(),
            ));
        }
        let mut current = input;
        for chunk in steps.chunks(segment_len) {
            let segment: Vec<ChainFn> = chunk.to_vec();
            let f: ChainFn = Rc::new(move |tape: &mut Tape, v: Var| {
                let mut x = v;
                for step in &segment {
                    x = step(tape, x)?;
                }
                Ok(x)
            });
            current = self.checkpoint(current, f)?;
        }
        Ok(current)
    }

    // ---- backward --------------------------------------------------------

    /// Gradients of a scalar `loss` with respect to tape leaves. Leaves the
    /// loss never touched get zero gradients.
    pub fn backward(&mut self, loss: Var, wrt: &[Var]) -> Result<Vec<Vec<f64>>> {
        self.check_owned("backward", loss)?;
        if self.nodes[loss.index].value.len() != 1 {
            return Err(Error::NotScalar {
                op: "backward",
                len: self.nodes[loss.index].value.len(),
            });
        }
        for &w in wrt {
            self.check_owned("backward", w)?;
            if !matches!(self.nodes[w.index].op, Op::Leaf) {
                return Err(Error::NotLeaf { op: "backward" });
            }
        }
        self.backward_seeded(loss, &[1.0], wrt)
    }

    /// Vector-Jacobian product: seed an arbitrary cotangent at `at` and pull
    /// it back to the requested leaves.
    fn backward_seeded(&self, at: Var, seed: &[f64], wrt: &[Var]) -> Result<Vec<Vec<f64>>> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; at.index + 1];
        grads[at.index] = Some(seed.to_vec());

        for idx in (0..=at.index).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            // Keep leaf gradients around for collection below.
            if matches!(self.nodes[idx].op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            let op = self.nodes[idx].op.clone();
            self.backward_op(idx, &op, &g, &mut grads)?;
        }

        Ok(wrt
            .iter()
            .map(|w| match grads.get(w.index).and_then(|g| g.clone()) {
                Some(g) => g,
                None => vec![0.0; self.nodes[w.index].value.len()],
            })
            .collect())
    }

    fn wants_grad(&self, v: Var) -> bool {
        self.nodes[v.index].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contribution: &[f64]) {
        if !self.wants_grad(v) {
            return;
        }
        match &mut grads[v.index] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contribution) {
                    *e += c;
                }
            }
            slot => *slot = Some(contribution.to_vec()),
        }
    }

    fn backward_op(
        &self,
        idx: usize,
        op: &Op,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) -> Result<()> {
        let out_value = &self.nodes[idx].value;
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g);
                self.accumulate(grads, *b, g);
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g);
                if self.wants_grad(*b) {
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    self.accumulate(grads, *b, &neg);
                }
            }
            Op::Mul(a, b) => {
                if self.wants_grad(*a) {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[b.index].value)
                        .map(|(x, y)| x * y)
                        .collect();
                    self.accumulate(grads, *a, &da);
                }
                if self.wants_grad(*b) {
                    let db: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.index].value)
                        .map(|(x, y)| x * y)
                        .collect();
                    self.accumulate(grads, *b, &db);
                }
            }
            Op::ScaleConst(a, c) => {
                if self.wants_grad(*a) {
                    self.accumulate(grads, *a, &linalg::scale(g, *c));
                }
            }
            Op::ScaleVar { scalar, tensor } => {
                if self.wants_grad(*scalar) {
                    let ds = linalg::dot(g, &self.nodes[tensor.index].value);
                    self.accumulate(grads, *scalar, &[ds]);
                }
                if self.wants_grad(*tensor) {
                    let s = self.nodes[scalar.index].value[0];
                    self.accumulate(grads, *tensor, &linalg::scale(g, s));
                }
            }
            Op::MatVec { matrix, vector } => {
                let (rows, cols) = {
                    let s = &self.nodes[matrix.index].shape;
                    (s[0], s[1])
                };
                if self.wants_grad(*matrix) {
                    let x = &self.nodes[vector.index].value;
                    let mut dw = vec![0.0; rows * cols];
                    for r in 0..rows {
                        for c in 0..cols {
                            dw[r * cols + c] = g[r] * x[c];
                        }
                    }
                    self.accumulate(grads, *matrix, &dw);
                }
                if self.wants_grad(*vector) {
                    let w = &self.nodes[matrix.index].value;
                    let mut dx = vec![0.0; cols];
                    for r in 0..rows {
                        for c in 0..cols {
                            dx[c] += w[r * cols + c] * g[r];
                        }
                    }
                    self.accumulate(grads, *vector, &dx);
                }
            }
            Op::Exp(a) => {
                if self.wants_grad(*a) {
                    let da: Vec<f64> = g.iter().zip(out_value).map(|(x, y)| x * y).collect();
                    self.accumulate(grads, *a, &da);
                }
            }
            Op::Ln(a) => {
                if self.wants_grad(*a) {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.index].value)
                        .map(|(x, y)| x / y)
                        .collect();
                    self.accumulate(grads, *a, &da);
                }
            }
            Op::Tanh(a) => {
                if self.wants_grad(*a) {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(out_value)
                        .map(|(x, y)| x * (1.0 - y * y))
                        .collect();
                    self.accumulate(grads, *a, &da);
                }
            }
            Op::Sigmoid(a) => {
                if self.wants_grad(*a) {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(out_value)
                        .map(|(x, y)| x * y * (1.0 - y))
                        .collect();
                    self.accumulate(grads, *a, &da);
                }
            }
            Op::LogSumExp(a) => {
                if self.wants_grad(*a) {
                    let lse = out_value[0];
                    let da: Vec<f64> = self.nodes[a.index]
                        .value
                        .iter()
                        .map(|x| g[0] * (x - lse).exp())
                        .collect();
                    self.accumulate(grads, *a, &da);
                }
            }
            Op::SqNorm(a) => {
                if self.wants_grad(*a) {
                    let da: Vec<f64> = self.nodes[a.index]
                        .value
                        .iter()
                        .map(|x| 2.0 * g[0] * x)
                        .collect();
                    self.accumulate(grads, *a, &da);
                }
            }
            Op::Inner(a, b) => {
                if self.wants_grad(*a) {
                    self.accumulate(grads, *a, &linalg::scale(&self.nodes[b.index].value, g[0]));
                }
                if self.wants_grad(*b) {
                    self.accumulate(grads, *b, &linalg::scale(&self.nodes[a.index].value, g[0]));
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p.index].value.len();
                    if self.wants_grad(p) {
                        self.accumulate(grads, p, &g[offset..offset + len]);
                    }
                    offset += len;
                }
            }
            Op::Checkpoint { input, f } => {
                if self.wants_grad(*input) {
                    let mut scratch = Tape::new();
                    let leaf = scratch.leaf(
                        &self.nodes[input.index].value,
                        &self.nodes[input.index].shape,
                    )?;
                    let out = f(&mut scratch, leaf)?;
                    let din = scratch.backward_seeded(out, g, &[leaf])?;
                    self.accumulate(grads, *input, &din[0]);
                }
            }
        }
        Ok(())
    }
}
