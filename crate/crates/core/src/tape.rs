//! Reverse-mode automatic differentiation on a flat tape.
//!
//! Values are dense `f64` matrices; rows are batch samples. Nodes are
//! evaluated eagerly when pushed. `backward` emits the gradient of a scalar
//! node as *new tape nodes*, so gradients are themselves differentiable —
//! which is what the gradient penalty needs: the penalty term contains
//! `∇_x D(x)` and is then differentiated again with respect to the
//! discriminator weights.
//!
//! Binary elementwise ops broadcast like NumPy over the two axes (a dimension
//! of 1 stretches); the backward pass sums gradients over stretched axes.

use ndarray::{Array2, Axis};
use std::ops::Range;
use std::sync::Arc;

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Sqrt(NodeId),
    Sigmoid(NodeId),
    /// max(x, slope * x); slope 0 is a plain rectifier
    LeakyRelu(NodeId, f64),
    Clamp(NodeId, f64, f64),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    SumAxis0(NodeId),
    SumAxis1(NodeId),
    SumAll(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, Range<usize>),
    /// inverse of SliceCols: place into a zero matrix of `total` columns
    PadCols(NodeId, usize, usize),
    Scale(NodeId, f64),
    AddConst(NodeId, f64),
    /// elementwise product with a constant matrix (piecewise-linear backward masks)
    MulMask(NodeId, Arc<Array2<f64>>),
    /// identity value, no gradient flow
    Detach(NodeId),
}

struct Node {
    op: Op,
    value: Array2<f64>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let dim = |x: usize, y: usize| -> usize {
        if x == y {
            x
        } else if x == 1 {
            y
        } else if y == 1 {
            x
        } else {
            panic!("incompatible broadcast dims {x} vs {y}")
        }
    };
    (dim(a.0, b.0), dim(a.1, b.1))
}

fn binary(
    a: &Array2<f64>,
    b: &Array2<f64>,
    f: impl Fn(f64, f64) -> f64,
) -> Array2<f64> {
    let shape = broadcast_shape(a.dim(), b.dim());
    if a.dim() == b.dim() {
        let mut out = a.clone();
        out.zip_mut_with(b, |x, &y| *x = f(*x, y));
        return out;
    }
    let ab = a.broadcast(shape).expect("broadcast lhs");
    let bb = b.broadcast(shape).expect("broadcast rhs");
    let mut out = ab.to_owned();
    out.zip_mut_with(&bb, |x, &y| *x = f(*x, y));
    out
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

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.dim(), (1, 1), "node is not a scalar");
        v[[0, 0]]
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn leaf_scalar(&mut self, value: f64) -> NodeId {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> NodeId {
        self.leaf(Array2::zeros((rows, cols)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = binary(self.value(a), self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = binary(self.value(a), self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = binary(self.value(a), self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = binary(self.value(a), self.value(b), |x, y| x / y);
        self.push(Op::Div(a, b), v)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| -x);
        self.push(Op::Neg(a), v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::ln);
        self.push(Op::Ln(a), v)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::sqrt);
        self.push(Op::Sqrt(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), v)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), v)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(
            av.ncols(),
            bv.nrows(),
            "matmul inner dims {} vs {}",
            av.ncols(),
            bv.nrows()
        );
        let v = av.dot(bv);
        self.push(Op::MatMul(a, b), v)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).t().to_owned();
        self.push(Op::Transpose(a), v)
    }

    pub fn sum_axis0(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(Op::SumAxis0(a), v)
    }

    pub fn sum_axis1(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(Op::SumAxis1(a), v)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).sum();
        self.push(Op::SumAll(a), Array2::from_elem((1, 1), s))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).nrows();
        let total: usize = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut v = Array2::zeros((rows, total));
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.nrows(), rows, "concat row mismatch");
            v.slice_mut(ndarray::s![.., off..off + pv.ncols()])
                .assign(pv);
            off += pv.ncols();
        }
        self.push(Op::ConcatCols(parts.to_vec()), v)
    }

    pub fn slice_cols(&mut self, a: NodeId, range: Range<usize>) -> NodeId {
        let v = self
            .value(a)
            .slice(ndarray::s![.., range.clone()])
            .to_owned();
        self.push(Op::SliceCols(a, range), v)
    }

    pub fn pad_cols(&mut self, a: NodeId, offset: usize, total: usize) -> NodeId {
        let av = self.value(a);
        let mut v = Array2::zeros((av.nrows(), total));
        v.slice_mut(ndarray::s![.., offset..offset + av.ncols()])
            .assign(av);
        self.push(Op::PadCols(a, offset, total), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).mapv(|x| c * x);
        self.push(Op::Scale(a, c), v)
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).mapv(|x| x + c);
        self.push(Op::AddConst(a, c), v)
    }

    fn mul_mask(&mut self, a: NodeId, mask: Arc<Array2<f64>>) -> NodeId {
        let v = binary(self.value(a), &mask, |x, y| x * y);
        self.push(Op::MulMask(a, mask), v)
    }

    pub fn detach(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).clone();
        self.push(Op::Detach(a), v)
    }

    // --- conveniences built from primitives ---

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    pub fn mean_axis1(&mut self, a: NodeId) -> NodeId {
        let d = self.value(a).ncols() as f64;
        let s = self.sum_axis1(a);
        self.scale(s, 1.0 / d)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.mul(a, a)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.leaky_relu(a, 0.0)
    }

    /// Row-wise softmax; shift-invariance makes detaching the row max safe.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let max = self
            .value(a)
            .map_axis(Axis(1), |row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .insert_axis(Axis(1));
        let max = self.leaf(max);
        let shifted = self.sub(a, max);
        let e = self.exp(shifted);
        let denom = self.sum_axis1(e);
        self.div(e, denom)
    }

    /// Row-wise layer normalisation with learnable gain and bias (1 x d each).
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let mu = self.mean_axis1(x);
        let centered = self.sub(x, mu);
        let sq = self.square(centered);
        let var = self.mean_axis1(sq);
        let var_eps = self.add_const(var, 1e-5);
        let sd = self.sqrt(var_eps);
        let normed = self.div(centered, sd);
        let scaled = self.mul(normed, gain);
        self.add(scaled, bias)
    }

    /// Gradient of scalar `root` with respect to each node in `wrt`.
    ///
    /// Returned gradients are tape nodes and can be differentiated again.
    /// `None` means the root does not depend on that node.
    pub fn backward(&mut self, root: NodeId, wrt: &[NodeId]) -> Vec<Option<NodeId>> {
        assert_eq!(self.value(root).dim(), (1, 1), "backward root must be scalar");
        let n = root + 1;

        // needed[i]: some wrt node is reachable from i, so its gradient matters
        let mut needed = vec![false; n];
        for &w in wrt {
            assert!(w < n, "wrt node {w} not an ancestor of root {root}");
            needed[w] = true;
        }
        for i in 0..n {
            if needed[i] {
                continue;
            }
            let dep = self.nodes[i].op.inputs().iter().any(|&j| needed[j]);
            if dep {
                needed[i] = true;
            }
        }

        let mut grads: Vec<Option<NodeId>> = vec![None; n];
        let one = self.leaf(Array2::from_elem((1, 1), 1.0));
        grads[root] = Some(one);

        for i in (0..n).rev() {
            let Some(g) = grads[i] else { continue };
            if !needed[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.accumulate_broadcast(&mut grads, a, g, &needed);
                    self.accumulate_broadcast(&mut grads, b, g, &needed);
                }
                Op::Sub(a, b) => {
                    self.accumulate_broadcast(&mut grads, a, g, &needed);
                    if needed[b] {
                        let ng = self.neg(g);
                        self.accumulate_broadcast(&mut grads, b, ng, &needed);
                    }
                }
                Op::Mul(a, b) => {
                    if needed[a] {
                        let ga = self.mul(g, b);
                        self.accumulate_broadcast(&mut grads, a, ga, &needed);
                    }
                    if needed[b] {
                        let gb = self.mul(g, a);
                        self.accumulate_broadcast(&mut grads, b, gb, &needed);
                    }
                }
                Op::Div(a, b) => {
                    if needed[a] {
                        let ga = self.div(g, b);
                        self.accumulate_broadcast(&mut grads, a, ga, &needed);
                    }
                    if needed[b] {
                        let num = self.mul(g, a);
                        let b2 = self.mul(b, b);
                        let gb = self.div(num, b2);
                        let gb = self.neg(gb);
                        self.accumulate_broadcast(&mut grads, b, gb, &needed);
                    }
                }
                Op::Neg(a) => {
                    if needed[a] {
                        let ga = self.neg(g);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::Exp(a) => {
                    if needed[a] {
                        let ga = self.mul(g, i);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::Ln(a) => {
                    if needed[a] {
                        let ga = self.div(g, a);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::Sqrt(a) => {
                    if needed[a] {
                        let denom = self.scale(i, 2.0);
                        let ga = self.div(g, denom);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::Sigmoid(a) => {
                    if needed[a] {
                        let one_minus = self.add_const(i, -1.0);
                        let one_minus = self.neg(one_minus);
                        let gy = self.mul(i, one_minus);
                        let ga = self.mul(g, gy);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    if needed[a] {
                        let mask = self.nodes[a]
                            .value
                            .mapv(|x| if x > 0.0 { 1.0 } else { slope });
                        let ga = self.mul_mask(g, Arc::new(mask));
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    if needed[a] {
                        let mask = self.nodes[a]
                            .value
                            .mapv(|x| if x >= lo && x <= hi { 1.0 } else { 0.0 });
                        let ga = self.mul_mask(g, Arc::new(mask));
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::MatMul(a, b) => {
                    if needed[a] {
                        let bt = self.transpose(b);
                        let ga = self.matmul(g, bt);
                        self.accumulate(&mut grads, a, ga);
                    }
                    if needed[b] {
                        let at = self.transpose(a);
                        let gb = self.matmul(at, g);
                        self.accumulate(&mut grads, b, gb);
                    }
                }
                Op::Transpose(a) => {
                    if needed[a] {
                        let ga = self.transpose(g);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::SumAxis0(a) | Op::SumAxis1(a) | Op::SumAll(a) => {
                    if needed[a] {
                        let (r, c) = self.nodes[a].value.dim();
                        let zeros = self.zeros(r, c);
                        let ga = self.add(zeros, g);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.nodes[p].value.ncols();
                        if needed[p] {
                            let gp = self.slice_cols(g, off..off + w);
                            self.accumulate(&mut grads, p, gp);
                        }
                        off += w;
                    }
                }
                Op::SliceCols(a, range) => {
                    if needed[a] {
                        let total = self.nodes[a].value.ncols();
                        let ga = self.pad_cols(g, range.start, total);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::PadCols(a, offset, _total) => {
                    if needed[a] {
                        let w = self.nodes[a].value.ncols();
                        let ga = self.slice_cols(g, offset..offset + w);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::Scale(a, c) => {
                    if needed[a] {
                        let ga = self.scale(g, c);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::AddConst(a, _) => {
                    if needed[a] {
                        self.accumulate(&mut grads, a, g);
                    }
                }
                Op::MulMask(a, mask) => {
                    if needed[a] {
                        let ga = self.mul_mask(g, mask);
                        self.accumulate(&mut grads, a, ga);
                    }
                }
                Op::Detach(_) => {}
            }
        }

        wrt.iter().map(|&w| grads[w]).collect()
    }

    fn accumulate(&mut self, grads: &mut [Option<NodeId>], target: NodeId, g: NodeId) {
        grads[target] = Some(match grads[target] {
            Some(existing) => self.add(existing, g),
            None => g,
        });
    }

    /// Accumulate with reduction over axes the forward op broadcast.
    fn accumulate_broadcast(
        &mut self,
        grads: &mut [Option<NodeId>],
        target: NodeId,
        g: NodeId,
        needed: &[bool],
    ) {
        if !needed[target] {
            return;
        }
        let tshape = self.nodes[target].value.dim();
        let gshape = self.nodes[g].value.dim();
        let mut g = g;
        if tshape.0 == 1 && gshape.0 > 1 {
            g = self.sum_axis0(g);
        }
        if tshape.1 == 1 && gshape.1 > 1 {
            g = self.sum_axis1(g);
        }
        self.accumulate(grads, target, g);
    }
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::MatMul(a, b) => vec![*a, *b],
            Op::Neg(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Sqrt(a)
            | Op::Sigmoid(a)
            | Op::LeakyRelu(a, _)
            | Op::Clamp(a, _, _)
            | Op::Transpose(a)
            | Op::SumAxis0(a)
            | Op::SumAxis1(a)
            | Op::SumAll(a)
            | Op::SliceCols(a, _)
            | Op::PadCols(a, _, _)
            | Op::Scale(a, _)
            | Op::AddConst(a, _)
            | Op::MulMask(a, _) => vec![*a],
            Op::ConcatCols(parts) => parts.clone(),
            Op::Detach(_) => vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fd_gradient(
        f: &mut dyn FnMut(&Array2<f64>) -> f64,
        x: &Array2<f64>,
        eps: f64,
    ) -> Array2<f64> {
        let mut g = Array2::zeros(x.dim());
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[[r, c]] += eps;
            xm[[r, c]] -= eps;
            g[[r, c]] = (f(&xp) - f(&xm)) / (2.0 * eps);
        }
        g
    }

    #[test]
    fn broadcast_add_and_backward() {
        let mut t = Tape::new();
        let a = t.leaf(array![[1.0, 2.0], [3.0, 4.0]]);
        let b = t.leaf(array![[10.0, 20.0]]);
        let c = t.add(a, b);
        assert_eq!(t.value(c), &array![[11.0, 22.0], [13.0, 24.0]]);
        let s = t.sum_all(c);
        let g = t.backward(s, &[a, b]);
        assert_eq!(t.value(g[0].unwrap()), &array![[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(t.value(g[1].unwrap()), &array![[2.0, 2.0]]);
    }

    #[test]
    fn matmul_gradients_match_finite_differences() {
        let mut t = Tape::new();
        let a_val = array![[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]];
        let b_val = array![[1.0, 0.5], [-0.5, 2.0], [0.25, -1.5]];
        let a = t.leaf(a_val.clone());
        let b = t.leaf(b_val.clone());
        let c = t.matmul(a, b);
        let sq = t.square(c);
        let loss = t.sum_all(sq);
        let g = t.backward(loss, &[a, b]);

        let mut fa = |x: &Array2<f64>| x.dot(&b_val).mapv(|v| v * v).sum();
        let fd_a = fd_gradient(&mut fa, &a_val, 1e-6);
        let ga = t.value(g[0].unwrap());
        for (x, y) in ga.iter().zip(fd_a.iter()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn layer_norm_backward_matches_finite_differences() {
        let mut t = Tape::new();
        let x_val = array![[0.3, -0.7, 1.2, 0.1], [2.0, 0.0, -1.0, 0.5]];
        let x = t.leaf(x_val.clone());
        let gain = t.leaf(array![[1.1, 0.9, 1.0, 1.3]]);
        let bias = t.leaf(array![[0.1, -0.2, 0.0, 0.3]]);
        let y = t.layer_norm(x, gain, bias);
        let sq = t.square(y);
        let loss = t.sum_all(sq);
        let g = t.backward(loss, &[x]);

        let mut f = |xv: &Array2<f64>| {
            let mut t = Tape::new();
            let x = t.leaf(xv.clone());
            let gain = t.leaf(array![[1.1, 0.9, 1.0, 1.3]]);
            let bias = t.leaf(array![[0.1, -0.2, 0.0, 0.3]]);
            let y = t.layer_norm(x, gain, bias);
            let sq = t.square(y);
            let loss = t.sum_all(sq);
            t.scalar(loss)
        };
        let fd = fd_gradient(&mut f, &x_val, 1e-6);
        let ga = t.value(g[0].unwrap());
        for (a, b) in ga.iter().zip(fd.iter()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn second_order_gradient_is_exact_on_a_cubic() {
        // f(x) = sum(x^3); df/dx = 3x^2; d( sum(df/dx) )/dx = 6x
        let mut t = Tape::new();
        let x_val = array![[1.0, -2.0], [0.5, 3.0]];
        let x = t.leaf(x_val.clone());
        let x2 = t.mul(x, x);
        let x3 = t.mul(x2, x);
        let f = t.sum_all(x3);
        let g1 = t.backward(f, &[x])[0].unwrap();
        let g1_sum = t.sum_all(g1);
        let g2 = t.backward(g1_sum, &[x])[0].unwrap();
        let expected = x_val.mapv(|v| 6.0 * v);
        assert_eq!(t.value(g2), &expected);
    }

    #[test]
    fn softmax_rows_sums_to_one_and_grad_checks() {
        let mut t = Tape::new();
        let x_val = array![[1.0, 2.0, -0.5], [0.0, 0.0, 0.0]];
        let x = t.leaf(x_val.clone());
        let y = t.softmax_rows(x);
        let sums = t.value(y).sum_axis(Axis(1));
        for s in sums {
            assert!((s - 1.0).abs() < 1e-12);
        }
        // gradient of first output component wrt x
        let y0 = t.slice_cols(y, 0..1);
        let loss = t.sum_all(y0);
        let g = t.backward(loss, &[x])[0].unwrap();
        let mut f = |xv: &Array2<f64>| {
            let mut t = Tape::new();
            let x = t.leaf(xv.clone());
            let y = t.softmax_rows(x);
            let y0 = t.slice_cols(y, 0..1);
            let loss = t.sum_all(y0);
            t.scalar(loss)
        };
        let fd = fd_gradient(&mut f, &x_val, 1e-6);
        for (a, b) in t.value(g).iter().zip(fd.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(array![[2.0]]);
        let d = t.detach(x);
        let y = t.mul(x, d); // y = x * const(x)
        let loss = t.sum_all(y);
        let g = t.backward(loss, &[x])[0].unwrap();
        assert_eq!(t.scalar(g), 2.0); // not 2x = 4
    }

    #[test]
    fn concat_slice_roundtrip_gradients() {
        let mut t = Tape::new();
        let a = t.leaf(array![[1.0, 2.0]]);
        let b = t.leaf(array![[3.0]]);
        let c = t.concat_cols(&[a, b]);
        let picked = t.slice_cols(c, 1..3);
        let sq = t.square(picked);
        let loss = t.sum_all(sq);
        let g = t.backward(loss, &[a, b]);
        assert_eq!(t.value(g[0].unwrap()), &array![[0.0, 4.0]]);
        assert_eq!(t.value(g[1].unwrap()), &array![[6.0]]);
    }
}
