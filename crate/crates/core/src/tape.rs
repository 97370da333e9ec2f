//! Reverse-mode differentiation over dense matrices.
//!
//! Nodes are appended in evaluation order, so every parent precedes its
//! children and a single reverse sweep visits each node exactly once.
//! Rows are batch elements; all primitives are batch-parallel.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data does not match its shape");
        Self { rows, cols, data }
    }

    /// Single column built from `values`.
    pub fn column(values: &[f64]) -> Self {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "elementwise shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn add_assign(&mut self, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn slice_cols(&self, start: usize, end: usize) -> Self {
        let width = end - start;
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Self::from_vec(self.rows, width, data)
    }
}

/// `c = alpha·op(a)·op(b) + beta·c`, with `op` an optional transpose.
fn gemm(alpha: f64, a: &Matrix, ta: bool, b: &Matrix, tb: bool, beta: f64, c: &mut Matrix) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(c.shape(), (m, n), "output shape mismatch");
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: strides and extents describe the backing buffers exactly and
    // `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm(1.0, a, false, b, false, 0.0, &mut c);
    c
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `a + bias`, bias a single row broadcast over all rows of `a`
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Slice { src: NodeId, start: usize },
    Concat(Vec<NodeId>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Append-only record of a forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = matmul(self.value(a), self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(bias));
        assert_eq!((1, av.cols), bv.shape(), "bias must be a single matching row");
        let mut value = av.clone();
        for r in 0..value.rows {
            for (x, b) in value.data[r * av.cols..(r + 1) * av.cols].iter_mut().zip(&bv.data) {
                *x += b;
            }
        }
        self.push(Op::AddRow(a, bias), value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).zip(self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), value)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), value)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(libm::tanh);
        self.push(Op::Tanh(a), value)
    }

    /// Columns `start..end` of `src`.
    pub fn slice(&mut self, src: NodeId, start: usize, end: usize) -> NodeId {
        let value = self.value(src).slice_cols(start, end);
        self.push(Op::Slice { src, start }, value)
    }

    /// Column-wise concatenation; all parts share a row count.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let v = self.value(p);
                assert_eq!(v.rows, rows, "concat parts must share a row count");
                data.extend_from_slice(v.row(r));
            }
        }
        self.push(Op::Concat(parts.to_vec()), Matrix::from_vec(rows, cols, data))
    }

    /// Reverse sweep from the given output gradients. Gradients of interior
    /// nodes are released as soon as they have been propagated; leaf
    /// gradients are kept.
    pub fn backward(&self, seeds: &[(NodeId, Matrix)]) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        for (id, g) in seeds {
            assert_eq!(g.shape(), self.value(*id).shape(), "seed shape mismatch");
            accumulate(&mut grads[id.0], g.clone());
        }
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    gemm_into(&mut grads[a.0], &g, false, bv, true);
                    gemm_into_t(&mut grads[b.0], av, &g);
                }
                Op::AddRow(a, bias) => {
                    let mut gb = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (acc, x) in gb.data.iter_mut().zip(g.row(r)) {
                            *acc += x;
                        }
                    }
                    accumulate(&mut grads[bias.0], gb);
                    accumulate(&mut grads[a.0], g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[b.0], g.clone());
                    accumulate(&mut grads[a.0], g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[b.0], g.map(|x| -x));
                    accumulate(&mut grads[a.0], g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads[a.0], g.zip(bv, |x, y| x * y));
                    accumulate(&mut grads[b.0], g.zip(av, |x, y| x * y));
                }
                Op::Sigmoid(a) => {
                    accumulate(&mut grads[a.0], g.zip(&node.value, |x, y| x * y * (1.0 - y)));
                }
                Op::Tanh(a) => {
                    accumulate(&mut grads[a.0], g.zip(&node.value, |x, y| x * (1.0 - y * y)));
                }
                Op::Slice { src, start } => {
                    let sv = self.value(*src);
                    let slot = grads[src.0].get_or_insert_with(|| Matrix::zeros(sv.rows, sv.cols));
                    for r in 0..g.rows {
                        let dst = &mut slot.data[r * sv.cols + start..r * sv.cols + start + g.cols];
                        for (d, x) in dst.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let width = self.value(*p).cols;
                        accumulate(&mut grads[p.0], g.slice_cols(offset, offset + width));
                        offset += width;
                    }
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

/// `slot += g · op(b)`
fn gemm_into(slot: &mut Option<Matrix>, g: &Matrix, tg: bool, b: &Matrix, tb: bool) {
    let rows = if tg { g.cols } else { g.rows };
    let cols = if tb { b.rows } else { b.cols };
    match slot {
        Some(existing) => gemm(1.0, g, tg, b, tb, 1.0, existing),
        None => {
            let mut out = Matrix::zeros(rows, cols);
            gemm(1.0, g, tg, b, tb, 0.0, &mut out);
            *slot = Some(out);
        }
    }
}

/// `slot += aᵀ · g`
fn gemm_into_t(slot: &mut Option<Matrix>, a: &Matrix, g: &Matrix) {
    gemm_into(slot, a, true, g, false);
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` when the node does not influence any seeded output.
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads[id.0].as_ref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<Matrix> {
        self.grads[id.0].take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Scalar objective `Σ w ⊙ f(x)` and its gradient w.r.t. every input,
    /// checked against central differences.
    fn check(inputs: Vec<Matrix>, build: impl Fn(&mut Tape, &[NodeId]) -> NodeId) {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let forward = |xs: &[Matrix]| {
            let mut tape = Tape::new();
            let ids: Vec<NodeId> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
            let out = build(&mut tape, &ids);
            (tape, ids, out)
        };
        let (tape, ids, out) = forward(&inputs);
        let (r, c) = tape.value(out).shape();
        let weights = random(&mut rng, r, c);
        let objective = |xs: &[Matrix]| {
            let (tape, _, out) = forward(xs);
            tape.value(out).data.iter().zip(&weights.data).map(|(a, b)| a * b).sum::<f64>()
        };
        let grads = tape.backward(&[(out, weights.clone())]);
        let h = 1e-6;
        for (k, id) in ids.iter().enumerate() {
            let analytic = grads.get(*id).cloned().unwrap_or_else(|| Matrix::zeros(inputs[k].rows, inputs[k].cols));
            for e in 0..inputs[k].data.len() {
                let mut plus = inputs.clone();
                plus[k].data[e] += h;
                let mut minus = inputs.clone();
                minus[k].data[e] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let a = analytic.data[e];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-6, "input {k} element {e}: analytic {a} vs fd {fd}");
            }
        }
    }

    #[test]
    fn primitive_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = |r, c| random(&mut rng, r, c);
        check(vec![m(3, 4), m(4, 2)], |t, x| t.matmul(x[0], x[1]));
        check(vec![m(3, 4), m(1, 4)], |t, x| t.add_row(x[0], x[1]));
        check(vec![m(2, 3), m(2, 3)], |t, x| t.add(x[0], x[1]));
        check(vec![m(2, 3), m(2, 3)], |t, x| t.sub(x[0], x[1]));
        check(vec![m(2, 3), m(2, 3)], |t, x| t.mul(x[0], x[1]));
        check(vec![m(2, 3)], |t, x| t.sigmoid(x[0]));
        check(vec![m(2, 3)], |t, x| t.tanh(x[0]));
        check(vec![m(2, 5)], |t, x| t.slice(x[0], 1, 4));
        check(vec![m(2, 1), m(2, 3)], |t, x| t.concat(&[x[0], x[1], x[0]]));
    }

    #[test]
    fn reused_nodes_accumulate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        check(vec![random(&mut rng, 2, 2)], |t, x| {
            let s = t.tanh(x[0]);
            let p = t.mul(s, x[0]);
            t.add(p, s)
        });
    }

    #[test]
    fn unreachable_leaves_have_no_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(Matrix::column(&[1.0, 2.0]));
        let b = tape.leaf(Matrix::column(&[3.0, 4.0]));
        let out = tape.tanh(a);
        let grads = tape.backward(&[(out, Matrix::column(&[1.0, 1.0]))]);
        assert!(grads.get(a).is_some());
        assert!(grads.get(b).is_none());
    }
}
