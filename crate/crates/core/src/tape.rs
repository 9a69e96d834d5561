//! Reverse-mode automatic differentiation on a flat, append-only tape.
//!
//! Scalars are [`Var`] handles (node id + value). Every operation appends a
//! record holding its parents and the local partial derivatives evaluated at
//! creation time, so [`Tape::backward`] is a single linear sweep over the
//! records in reverse creation order.
//!
//! Besides scalar arithmetic the tape knows two batched block operations used
//! by the networks: an affine layer applied to a block of jet lanes and the
//! elementwise `tanh` jet map. Both write their outputs to a contiguous range
//! of node ids, which keeps the reverse sweep in strictly decreasing id order.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapeError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{op} is undefined at {value}")]
    DomainError { op: &'static str, value: f64 },
}

/// Handle to a scalar node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Var {
    id: u32,
    value: f64,
}

impl Var {
    pub fn id(&self) -> usize {
        self.id as usize
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Number of derivative slots carried per network evaluation point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JetOrder {
    /// Value only.
    Value,
    /// Value plus d/dx, d/dy, d/dt.
    First,
    /// Value, first derivatives and d2/dx2, d2/dxdy, d2/dy2.
    Second,
}

impl JetOrder {
    /// Lanes used per point.
    pub fn lanes(self) -> usize {
        match self {
            JetOrder::Value => 1,
            JetOrder::First => 4,
            JetOrder::Second => 7,
        }
    }
}

/// Lane offsets inside a jet block.
pub mod slot {
    pub const VAL: usize = 0;
    pub const DX: usize = 1;
    pub const DY: usize = 2;
    pub const DT: usize = 3;
    pub const DXX: usize = 4;
    pub const DXY: usize = 5;
    pub const DYY: usize = 6;
}

/// A contiguous range of nodes created by one block operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf {
        start: u32,
    },
    Unary {
        out: u32,
        a: u32,
        da: f64,
    },
    Binary {
        out: u32,
        a: u32,
        b: u32,
        da: f64,
        db: f64,
    },
    Lincomb {
        out: u32,
        pool: u32,
        len: u32,
    },
    Affine {
        out: u32,
        input: u32,
        weight: u32,
        bias: u32,
        n_in: u32,
        n_out: u32,
        points: u32,
        order: JetOrder,
    },
    TanhJet {
        out: u32,
        input: u32,
        width: u32,
        points: u32,
        order: JetOrder,
        cache: u32,
    },
}

impl Op {
    fn first_output(&self) -> u32 {
        match *self {
            Op::Leaf { start, .. } => start,
            Op::Unary { out, .. }
            | Op::Binary { out, .. }
            | Op::Lincomb { out, .. }
            | Op::Affine { out, .. }
            | Op::TanhJet { out, .. } => out,
        }
    }
}

/// Append-only record of a computation.
#[derive(Default, Clone, Debug)]
pub struct Tape {
    values: Vec<f64>,
    ops: Vec<Op>,
    pool_ids: Vec<u32>,
    pool_coef: Vec<f64>,
    cache: Vec<f64>,
}

/// Adjoints produced by [`Tape::backward`], indexed by node id.
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    /// d(root)/d(var). Zero for nodes the root does not depend on.
    pub fn wrt(&self, var: Var) -> f64 {
        self.adjoints[var.id()]
    }

    pub fn get(&self, id: usize) -> f64 {
        self.adjoints[id]
    }

    pub fn block(&self, block: Block) -> &[f64] {
        &self.adjoints[block.range()]
    }

    pub fn len(&self) -> usize {
        self.adjoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops all nodes but keeps the allocations.
    pub fn clear(&mut self) {
        self.values.clear();
        self.ops.clear();
        self.pool_ids.clear();
        self.pool_coef.clear();
        self.cache.clear();
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: usize) -> f64 {
        self.values[id]
    }

    /// Handle to an existing node, e.g. an element of a block.
    pub fn var_at(&self, id: usize) -> Var {
        Var {
            id: id as u32,
            value: self.values[id],
        }
    }

    pub fn block_values(&self, block: Block) -> &[f64] {
        &self.values[block.range()]
    }

    fn push(&mut self, value: f64) -> u32 {
        let id = self.values.len();
        assert!(id < u32::MAX as usize, "tape exceeds u32 node ids");
        self.values.push(value);
        id as u32
    }

    fn node(&self, id: u32) -> Var {
        Var {
            id,
            value: self.values[id as usize],
        }
    }

    /// New leaf node.
    pub fn var(&mut self, value: f64) -> Var {
        debug_assert!(value.is_finite(), "non-finite leaf {value}");
        let id = self.push(value);
        self.ops.push(Op::Leaf { start: id });
        self.node(id)
    }

    /// A leaf used as a constant. Identical to [`Tape::var`]; the gradient with
    /// respect to it is simply never read.
    pub fn constant(&mut self, value: f64) -> Var {
        self.var(value)
    }

    /// Contiguous block of leaves, e.g. all parameters of a network.
    pub fn leaf_block(&mut self, values: &[f64]) -> Block {
        let start = self.values.len();
        assert!(start + values.len() < u32::MAX as usize);
        self.values.extend_from_slice(values);
        self.ops.push(Op::Leaf {
            start: start as u32,
        });
        Block {
            start,
            len: values.len(),
        }
    }

    fn unary_op(&mut self, a: Var, value: f64, da: f64) -> Var {
        let out = self.push(value);
        self.ops.push(Op::Unary { out, a: a.id, da });
        self.node(out)
    }

    fn binary_op(&mut self, a: Var, b: Var, value: f64, da: f64, db: f64) -> Var {
        let out = self.push(value);
        self.ops.push(Op::Binary {
            out,
            a: a.id,
            b: b.id,
            da,
            db,
        });
        self.node(out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_op(a, b, a.value + b.value, 1.0, 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_op(a, b, a.value - b.value, 1.0, -1.0)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_op(a, b, a.value * b.value, b.value, a.value)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        if b.value == 0.0 {
            return Err(TapeError::DivisionByZero);
        }
        let inv = 1.0 / b.value;
        let q = a.value * inv;
        Ok(self.binary_op(a, b, q, inv, -q * inv))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary_op(a, -a.value, -1.0)
    }

    pub fn sq(&mut self, a: Var) -> Var {
        self.unary_op(a, a.value * a.value, 2.0 * a.value)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var, TapeError> {
        if a.value < 0.0 {
            return Err(TapeError::DomainError {
                op: "sqrt",
                value: a.value,
            });
        }
        let s = a.value.sqrt();
        Ok(self.unary_op(a, s, 0.5 / s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let s = a.value.tanh();
        self.unary_op(a, s, 1.0 - s * s)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = a.value.exp();
        self.unary_op(a, e, e)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary_op(a, a.value.sin(), a.value.cos())
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary_op(a, a.value.cos(), -a.value.sin())
    }

    /// `c * a` for a constant `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary_op(a, c * a.value, c)
    }

    /// `a + c` for a constant `c`.
    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.unary_op(a, a.value + c, 1.0)
    }

    /// `sum_i coef_i * var_i`, accumulated left to right.
    pub fn lincomb(&mut self, terms: &[(Var, f64)]) -> Var {
        let mut value = 0.0;
        for &(v, c) in terms {
            value += c * v.value;
        }
        let pool = self.pool_ids.len() as u32;
        for &(v, c) in terms {
            self.pool_ids.push(v.id);
            self.pool_coef.push(c);
        }
        let out = self.push(value);
        self.ops.push(Op::Lincomb {
            out,
            pool,
            len: terms.len() as u32,
        });
        self.node(out)
    }

    pub fn sum(&mut self, vars: &[Var]) -> Var {
        let terms: Vec<(Var, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
        self.lincomb(&terms)
    }

    /// Batched affine map over jet lanes.
    ///
    /// `input` holds `n_in` rows of `points * order.lanes()` lanes; `weight`
    /// is a row-major `n_out x n_in` matrix and `bias` has `n_out` entries.
    /// Every lane is multiplied by the weights; the bias only enters value
    /// lanes since derivative lanes of a constant vanish.
    pub fn affine(
        &mut self,
        input: Block,
        weight: Block,
        bias: Block,
        n_out: usize,
        points: usize,
        order: JetOrder,
    ) -> Block {
        let k = order.lanes();
        let lanes = points * k;
        let n_in = input.len / lanes;
        assert_eq!(input.len, n_in * lanes, "input block shape");
        assert_eq!(weight.len, n_out * n_in, "weight block shape");
        assert_eq!(bias.len, n_out, "bias block shape");
        let start = self.values.len();
        self.values.resize(start + n_out * lanes, 0.0);
        {
            let (prev, out) = self.values.split_at_mut(start);
            let w = ArrayView2::from_shape((n_out, n_in), &prev[weight.range()]).unwrap();
            let x = ArrayView2::from_shape((n_in, lanes), &prev[input.range()]).unwrap();
            let mut y = ArrayViewMut2::from_shape((n_out, lanes), &mut out[..]).unwrap();
            general_mat_mul(1.0, &w, &x, 0.0, &mut y);
            let b = &prev[bias.range()];
            for (j, row) in out.chunks_exact_mut(lanes).enumerate() {
                for lane in row.iter_mut().step_by(k) {
                    *lane += b[j];
                }
            }
        }
        self.ops.push(Op::Affine {
            out: start as u32,
            input: input.start as u32,
            weight: weight.start as u32,
            bias: bias.start as u32,
            n_in: n_in as u32,
            n_out: n_out as u32,
            points: points as u32,
            order,
        });
        Block {
            start,
            len: n_out * lanes,
        }
    }

    /// Elementwise `tanh` on a jet block, propagating first and second
    /// input derivatives by the chain rule:
    /// `(s(z), s'(z) z_a, s''(z) z_a z_b + s'(z) z_ab)`.
    pub fn tanh_jet(&mut self, input: Block, points: usize, order: JetOrder) -> Block {
        use slot::*;
        let k = order.lanes();
        let lanes = points * k;
        let width = input.len / lanes;
        assert_eq!(input.len, width * lanes, "tanh input block shape");
        let start = self.values.len();
        let cache = self.cache.len();
        self.values.resize(start + input.len, 0.0);
        self.cache.resize(cache + 3 * width * points, 0.0);
        let (prev, out) = self.values.split_at_mut(start);
        let z = &prev[input.range()];
        let cache_buf = &mut self.cache[cache..];
        for j in 0..width {
            for p in 0..points {
                let base = j * lanes + p * k;
                let zj = &z[base..base + k];
                let o = &mut out[base..base + k];
                let s = zj[VAL].tanh();
                let s1 = 1.0 - s * s;
                let s2 = -2.0 * s * s1;
                let s3 = -2.0 * s1 * s1 - 2.0 * s * s2;
                o[VAL] = s;
                if k > 1 {
                    o[DX] = s1 * zj[DX];
                    o[DY] = s1 * zj[DY];
                    o[DT] = s1 * zj[DT];
                }
                if k > 4 {
                    o[DXX] = s2 * zj[DX] * zj[DX] + s1 * zj[DXX];
                    o[DXY] = s2 * zj[DX] * zj[DY] + s1 * zj[DXY];
                    o[DYY] = s2 * zj[DY] * zj[DY] + s1 * zj[DYY];
                }
                let c = 3 * (j * points + p);
                cache_buf[c] = s1;
                cache_buf[c + 1] = s2;
                cache_buf[c + 2] = s3;
            }
        }
        self.ops.push(Op::TanhJet {
            out: start as u32,
            input: input.start as u32,
            width: width as u32,
            points: points as u32,
            order,
            cache: cache as u32,
        });
        Block {
            start,
            len: input.len,
        }
    }

    /// Reverse sweep seeded with d(root)/d(root) = 1.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut adj = vec![0.0; self.values.len()];
        adj[root.id()] = 1.0;
        for op in self.ops.iter().rev() {
            if op.first_output() > root.id {
                continue;
            }
            self.backprop_op(op, &mut adj);
        }
        Gradients { adjoints: adj }
    }

    fn backprop_op(&self, op: &Op, adj: &mut [f64]) {
        match *op {
            Op::Leaf { .. } => {}
            Op::Unary { out, a, da } => {
                let g = adj[out as usize];
                adj[a as usize] += g * da;
            }
            Op::Binary { out, a, b, da, db } => {
                let g = adj[out as usize];
                adj[a as usize] += g * da;
                adj[b as usize] += g * db;
            }
            Op::Lincomb { out, pool, len } => {
                let g = adj[out as usize];
                if g != 0.0 {
                    let r = pool as usize..(pool + len) as usize;
                    for (&id, &c) in self.pool_ids[r.clone()].iter().zip(&self.pool_coef[r]) {
                        adj[id as usize] += g * c;
                    }
                }
            }
            Op::Affine {
                out,
                input,
                weight,
                bias,
                n_in,
                n_out,
                points,
                order,
            } => {
                let (n_in, n_out) = (n_in as usize, n_out as usize);
                let k = order.lanes();
                let lanes = points as usize * k;
                let out = out as usize;
                let (lower, upper) = adj.split_at_mut(out);
                let g_out = &upper[..n_out * lanes];
                let g = ArrayView2::from_shape((n_out, lanes), g_out).unwrap();
                let w_range = weight as usize..weight as usize + n_out * n_in;
                let x_range = input as usize..input as usize + n_in * lanes;
                let w = ArrayView2::from_shape((n_out, n_in), &self.values[w_range.clone()])
                    .unwrap();
                let x =
                    ArrayView2::from_shape((n_in, lanes), &self.values[x_range.clone()]).unwrap();
                // dL/dW = G X^T
                let mut gw = ndarray::Array2::<f64>::zeros((n_out, n_in));
                general_mat_mul(1.0, &g, &x.t(), 0.0, &mut gw);
                for (dst, src) in lower[w_range].iter_mut().zip(gw.iter()) {
                    *dst += *src;
                }
                // dL/db = sum of value lanes
                let b0 = bias as usize;
                for (j, row) in g_out.chunks_exact(lanes).enumerate() {
                    let mut acc = 0.0;
                    for lane in row.iter().step_by(k) {
                        acc += *lane;
                    }
                    lower[b0 + j] += acc;
                }
                // dL/dX = W^T G
                let mut gx = ArrayViewMut2::from_shape((n_in, lanes), &mut lower[x_range]).unwrap();
                general_mat_mul(1.0, &w.t(), &g, 1.0, &mut gx);
            }
            Op::TanhJet {
                out,
                input,
                width,
                points,
                order,
                cache,
            } => {
                use slot::*;
                let k = order.lanes();
                let points = points as usize;
                let lanes = points * k;
                let out = out as usize;
                let input = input as usize;
                let (lower, upper) = adj.split_at_mut(out);
                let g_all = &upper[..width as usize * lanes];
                let cache = &self.cache[cache as usize..];
                for j in 0..width as usize {
                    for p in 0..points {
                        let base = j * lanes + p * k;
                        let g = &g_all[base..base + k];
                        let z = &self.values[input + base..input + base + k];
                        let gz = &mut lower[input + base..input + base + k];
                        let c = 3 * (j * points + p);
                        let (s1, s2, s3) = (cache[c], cache[c + 1], cache[c + 2]);
                        let mut dv = g[VAL] * s1;
                        if k > 1 {
                            dv += s2 * (g[DX] * z[DX] + g[DY] * z[DY] + g[DT] * z[DT]);
                            gz[DX] += g[DX] * s1;
                            gz[DY] += g[DY] * s1;
                            gz[DT] += g[DT] * s1;
                        }
                        if k > 4 {
                            let (zx, zy) = (z[DX], z[DY]);
                            dv += g[DXX] * (s3 * zx * zx + s2 * z[DXX]);
                            dv += g[DXY] * (s3 * zx * zy + s2 * z[DXY]);
                            dv += g[DYY] * (s3 * zy * zy + s2 * z[DYY]);
                            gz[DX] += g[DXX] * 2.0 * s2 * zx + g[DXY] * s2 * zy;
                            gz[DY] += g[DYY] * 2.0 * s2 * zy + g[DXY] * s2 * zx;
                            gz[DXX] += g[DXX] * s1;
                            gz[DXY] += g[DXY] * s1;
                            gz[DYY] += g[DYY] * s1;
                        }
                        gz[VAL] += dv;
                    }
                }
            }
        }
    }

    /// First node id written by each record, in creation order.
    #[cfg(test)]
    fn record_outputs(&self) -> Vec<u32> {
        self.ops.iter().map(Op::first_output).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn leaf_echo_and_identity_gradient() {
        let mut tape = Tape::new();
        let x = tape.var(2.0);
        assert_eq!(x.value(), 2.0);
        let g = tape.backward(x);
        assert_eq!(g.wrt(x), 1.0);
    }

    #[test]
    fn unused_leaf_has_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.var(1.5);
        let unused = tape.var(7.0);
        let y = tape.sin(x);
        let z = tape.mul(y, x);
        let g = tape.backward(z);
        assert_eq!(g.wrt(unused), 0.0);
    }

    #[test]
    fn product_rule() {
        let mut tape = Tape::new();
        let a = tape.var(3.0);
        let b = tape.var(4.0);
        let c = tape.mul(a, b);
        assert_eq!(c.value(), 12.0);
        let g = tape.backward(c);
        assert_eq!(g.wrt(a), 4.0);
        assert_eq!(g.wrt(b), 3.0);
    }

    #[test]
    fn quotient_partial() {
        let mut tape = Tape::new();
        let a = tape.var(1.0);
        let b = tape.var(2.0);
        let q = tape.div(a, b).unwrap();
        assert_eq!(q.value(), 0.5);
        let g = tape.backward(q);
        assert_eq!(g.wrt(b), -0.25);
        assert_eq!(g.wrt(a), 0.5);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.var(1.0);
        let b = tape.var(0.0);
        assert_eq!(tape.div(a, b), Err(TapeError::DivisionByZero));
    }

    #[test]
    fn sqrt_of_negative_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.var(-1.0);
        assert!(matches!(tape.sqrt(a), Err(TapeError::DomainError { .. })));
    }

    #[test]
    fn self_cancellation() {
        let mut tape = Tape::new();
        let x = tape.var(0.7);
        let d = tape.sub(x, x);
        assert_eq!(d.value(), 0.0);
        assert_eq!(tape.backward(d).wrt(x), 0.0);
    }

    #[test]
    fn unary_values_and_partials() {
        let mut tape = Tape::new();
        let z = tape.var(0.0);
        let t = tape.tanh(z);
        assert_eq!(t.value(), 0.0);
        assert_eq!(tape.backward(t).wrt(z), 1.0);
        let e = tape.exp(z);
        assert_eq!(e.value(), 1.0);
        assert_eq!(tape.backward(e).wrt(z), 1.0);
        let h = tape.var(FRAC_PI_2);
        let s = tape.sin(h);
        assert_eq!(s.value(), 1.0);
        assert!(tape.backward(s).wrt(h).abs() < 1e-16);
    }

    #[test]
    fn single_neuron_chain_rule() {
        let mut tape = Tape::new();
        let w = tape.var(0.0);
        let b = tape.var(0.0);
        let x = tape.var(5.0);
        let wx = tape.mul(w, x);
        let z = tape.add(wx, b);
        let y = tape.tanh(z);
        let g = tape.backward(y);
        assert_eq!(g.wrt(w), 5.0);
        assert_eq!(g.wrt(b), 1.0);
    }

    #[test]
    fn records_are_in_increasing_id_order() {
        let mut tape = Tape::new();
        let a = tape.var(1.0);
        let blk = tape.leaf_block(&[1.0, 2.0, 3.0]);
        let b = tape.var_at(blk.start + 1);
        let c = tape.mul(a, b);
        let _ = tape.lincomb(&[(c, 2.0), (a, -1.0)]);
        let outs = tape.record_outputs();
        assert!(outs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn clear_resets_length() {
        let mut tape = Tape::new();
        let a = tape.var(1.0);
        let _ = tape.sq(a);
        assert_eq!(tape.len(), 2);
        tape.clear();
        assert!(tape.is_empty());
    }

    #[derive(Clone, Debug)]
    enum Expr {
        Leaf(usize),
        Add(Box<Expr>, Box<Expr>),
        Sub(Box<Expr>, Box<Expr>),
        Mul(Box<Expr>, Box<Expr>),
        Div(Box<Expr>, Box<Expr>),
        Tanh(Box<Expr>),
        Exp(Box<Expr>),
        Sin(Box<Expr>),
        Cos(Box<Expr>),
        Sq(Box<Expr>),
        Sqrt(Box<Expr>),
        Neg(Box<Expr>),
    }

    const LEAVES: usize = 4;

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = (0..LEAVES).prop_map(Expr::Leaf);
        leaf.prop_recursive(8, 64, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(a.into(), b.into())),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(a.into(), b.into())),
                inner.clone().prop_map(|a| Expr::Tanh(a.into())),
                inner.clone().prop_map(|a| Expr::Exp(a.into())),
                inner.clone().prop_map(|a| Expr::Sin(a.into())),
                inner.clone().prop_map(|a| Expr::Cos(a.into())),
                inner.clone().prop_map(|a| Expr::Sq(a.into())),
                inner.clone().prop_map(|a| Expr::Sqrt(a.into())),
                inner.prop_map(|a| Expr::Neg(a.into())),
            ]
        })
    }

    // Division and sqrt are guarded so every generated tree stays in domain:
    // the denominator is 1 + b^2 and the radicand is 1 + a^2.
    fn eval_f64(e: &Expr, x: &[f64]) -> f64 {
        match e {
            Expr::Leaf(i) => x[*i],
            Expr::Add(a, b) => eval_f64(a, x) + eval_f64(b, x),
            Expr::Sub(a, b) => eval_f64(a, x) - eval_f64(b, x),
            Expr::Mul(a, b) => eval_f64(a, x) * eval_f64(b, x),
            Expr::Div(a, b) => {
                let d = eval_f64(b, x);
                eval_f64(a, x) / (1.0 + d * d)
            }
            Expr::Tanh(a) => eval_f64(a, x).tanh(),
            Expr::Exp(a) => eval_f64(a, x).tanh().exp(),
            Expr::Sin(a) => eval_f64(a, x).sin(),
            Expr::Cos(a) => eval_f64(a, x).cos(),
            Expr::Sq(a) => eval_f64(a, x).tanh().powi(2),
            Expr::Sqrt(a) => {
                let v = eval_f64(a, x);
                (1.0 + v * v).sqrt()
            }
            Expr::Neg(a) => -eval_f64(a, x),
        }
    }

    fn eval_tape(e: &Expr, tape: &mut Tape, x: &[Var]) -> Var {
        match e {
            Expr::Leaf(i) => x[*i],
            Expr::Add(a, b) => {
                let (a, b) = (eval_tape(a, tape, x), eval_tape(b, tape, x));
                tape.add(a, b)
            }
            Expr::Sub(a, b) => {
                let (a, b) = (eval_tape(a, tape, x), eval_tape(b, tape, x));
                tape.sub(a, b)
            }
            Expr::Mul(a, b) => {
                let (a, b) = (eval_tape(a, tape, x), eval_tape(b, tape, x));
                tape.mul(a, b)
            }
            Expr::Div(a, b) => {
                let a = eval_tape(a, tape, x);
                let b = eval_tape(b, tape, x);
                let b2 = tape.sq(b);
                let d = tape.add_const(b2, 1.0);
                tape.div(a, d).unwrap()
            }
            Expr::Tanh(a) => {
                let a = eval_tape(a, tape, x);
                tape.tanh(a)
            }
            Expr::Exp(a) => {
                let a = eval_tape(a, tape, x);
                let t = tape.tanh(a);
                tape.exp(t)
            }
            Expr::Sin(a) => {
                let a = eval_tape(a, tape, x);
                tape.sin(a)
            }
            Expr::Cos(a) => {
                let a = eval_tape(a, tape, x);
                tape.cos(a)
            }
            Expr::Sq(a) => {
                let a = eval_tape(a, tape, x);
                let t = tape.tanh(a);
                tape.sq(t)
            }
            Expr::Sqrt(a) => {
                let a = eval_tape(a, tape, x);
                let a2 = tape.sq(a);
                let r = tape.add_const(a2, 1.0);
                tape.sqrt(r).unwrap()
            }
            Expr::Neg(a) => {
                let a = eval_tape(a, tape, x);
                tape.neg(a)
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn backward_matches_central_differences(
            expr in arb_expr(),
            x in prop::array::uniform4(-1.5f64..1.5),
        ) {
            let mut tape = Tape::new();
            let vars: Vec<Var> = x.iter().map(|&v| tape.var(v)).collect();
            let root = eval_tape(&expr, &mut tape, &vars);
            prop_assert!((root.value() - eval_f64(&expr, &x)).abs() <= 1e-12 * (1.0 + root.value().abs()));
            let grads = tape.backward(root);
            let h = 1e-6;
            for i in 0..LEAVES {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (eval_f64(&expr, &xp) - eval_f64(&expr, &xm)) / (2.0 * h);
                let ad = grads.wrt(vars[i]);
                let scale = fd.abs().max(ad.abs()).max(1.0);
                prop_assert!((ad - fd).abs() <= 1e-6 * scale,
                    "leaf {}: ad {} fd {}", i, ad, fd);
            }
        }

        #[test]
        fn gradient_is_linear_in_the_root(
            f in arb_expr(),
            g in arb_expr(),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            x in prop::array::uniform4(-1.0f64..1.0),
        ) {
            let mut tape = Tape::new();
            let vars: Vec<Var> = x.iter().map(|&v| tape.var(v)).collect();
            let fv = eval_tape(&f, &mut tape, &vars);
            let gv = eval_tape(&g, &mut tape, &vars);
            let combo = tape.lincomb(&[(fv, a), (gv, b)]);
            let gc = tape.backward(combo);
            let gf = tape.backward(fv);
            let gg = tape.backward(gv);
            for v in &vars {
                let expect = a * gf.wrt(*v) + b * gg.wrt(*v);
                prop_assert!((gc.wrt(*v) - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }

        #[test]
        fn tape_length_is_deterministic(expr in arb_expr(), x in prop::array::uniform4(-1.0f64..1.0)) {
            let build = || {
                let mut tape = Tape::new();
                let vars: Vec<Var> = x.iter().map(|&v| tape.var(v)).collect();
                let _ = eval_tape(&expr, &mut tape, &vars);
                tape.len()
            };
            prop_assert_eq!(build(), build());
        }
    }

    fn tanh_jet_reference(z: &[f64; 7]) -> [f64; 7] {
        let s = z[0].tanh();
        let s1 = 1.0 - s * s;
        let s2 = -2.0 * s * s1;
        [
            s,
            s1 * z[1],
            s1 * z[2],
            s1 * z[3],
            s2 * z[1] * z[1] + s1 * z[4],
            s2 * z[1] * z[2] + s1 * z[5],
            s2 * z[2] * z[2] + s1 * z[6],
        ]
    }

    #[test]
    fn tanh_jet_backward_matches_finite_differences() {
        let z0 = [0.3, -0.7, 1.1, 0.4, -0.2, 0.9, 0.5];
        let weights = [0.7, -1.3, 0.2, 0.9, 1.7, -0.4, 0.6];
        let mut tape = Tape::new();
        let input = tape.leaf_block(&z0);
        let out = tape.tanh_jet(input, 1, JetOrder::Second);
        let terms: Vec<(Var, f64)> = (0..7)
            .map(|c| (tape.var_at(out.start + c), weights[c]))
            .collect();
        let root = tape.lincomb(&terms);
        let g = tape.backward(root);
        let f = |z: &[f64; 7]| {
            tanh_jet_reference(z)
                .iter()
                .zip(weights)
                .map(|(o, w)| o * w)
                .sum::<f64>()
        };
        let h = 1e-6;
        for c in 0..7 {
            let mut zp = z0;
            let mut zm = z0;
            zp[c] += h;
            zm[c] -= h;
            let fd = (f(&zp) - f(&zm)) / (2.0 * h);
            let ad = g.get(input.start + c);
            assert!((ad - fd).abs() < 1e-8, "slot {c}: {ad} vs {fd}");
        }
    }

    #[test]
    fn affine_backward_matches_scalar_expansion() {
        // 2 outputs, 3 inputs, 2 points, first-order lanes.
        let k = JetOrder::First.lanes();
        let x: Vec<f64> = (0..3 * 2 * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..6).map(|i| (i as f64 * 0.91).cos()).collect();
        let b = vec![0.25, -0.5];
        let coef: Vec<f64> = (0..2 * 2 * k).map(|i| 1.0 + 0.1 * i as f64).collect();

        let mut tape = Tape::new();
        let xb = tape.leaf_block(&x);
        let wb = tape.leaf_block(&w);
        let bb = tape.leaf_block(&b);
        let out = tape.affine(xb, wb, bb, 2, 2, JetOrder::First);
        let terms: Vec<(Var, f64)> = coef
            .iter()
            .enumerate()
            .map(|(i, &c)| (tape.var_at(out.start + i), c))
            .collect();
        let root = tape.lincomb(&terms);
        let g = tape.backward(root);

        let mut tape2 = Tape::new();
        let xs: Vec<Var> = x.iter().map(|&v| tape2.var(v)).collect();
        let ws: Vec<Var> = w.iter().map(|&v| tape2.var(v)).collect();
        let bs: Vec<Var> = b.iter().map(|&v| tape2.var(v)).collect();
        let lanes = 2 * k;
        let mut terms2 = Vec::new();
        for j in 0..2 {
            for l in 0..lanes {
                let mut acc = Vec::new();
                for i in 0..3 {
                    acc.push(tape2.mul(ws[j * 3 + i], xs[i * lanes + l]));
                }
                if l % k == 0 {
                    acc.push(bs[j]);
                }
                let s = tape2.sum(&acc);
                assert!((s.value() - tape.value(out.start + j * lanes + l)).abs() < 1e-14);
                terms2.push((s, coef[j * lanes + l]));
            }
        }
        let root2 = tape2.lincomb(&terms2);
        let g2 = tape2.backward(root2);
        for i in 0..x.len() {
            assert!((g.get(xb.start + i) - g2.wrt(xs[i])).abs() < 1e-12);
        }
        for i in 0..w.len() {
            assert!((g.get(wb.start + i) - g2.wrt(ws[i])).abs() < 1e-12);
        }
        for i in 0..b.len() {
            assert!((g.get(bb.start + i) - g2.wrt(bs[i])).abs() < 1e-12);
        }
    }
}
