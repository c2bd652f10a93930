//! Reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every operation applied to [`Var`] handles in execution
//! order, so the recorded list is already topologically sorted. [`Tape::backward`]
//! sweeps it in reverse and accumulates gradients additively across fan-out.
//!
//! There is no broadcasting: every shape coercion (`broadcast_rows`,
//! `transpose`) is an explicit op.

use std::cell::{Ref, RefCell};
use std::rc::Rc;
use std::sync::Arc;

use super::matrix::{gemm_acc, Matrix, Real, SparseRows};
use crate::error::{Error, Result};

/// Norms below this are treated as zero by `cosine` and `row_normalize`.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    Relu(usize),
    ConcatCols(usize, usize),
    ColMax { src: usize, argmax: Vec<usize> },
    ColMean(usize),
    Cosine { a: usize, b: usize, na: T, nb: T },
    Hinge(usize),
    Sum(usize),
    Transpose(usize),
    BroadcastRows(usize),
    RowNormalize { src: usize, norms: Vec<T> },
    SparseMatMul { adj: Arc<SparseRows<T>>, src: usize },
}

#[derive(Debug)]
struct Node<T> {
    value: Rc<Matrix<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Append-only operation record for one forward pass. Single-threaded; build one
/// per example when running passes concurrently.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a trainable input.
    pub fn param(&self, value: Matrix<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf, true)
    }

    /// Records an input that receives no gradient.
    pub fn constant(&self, value: Matrix<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Matrix<T>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value_of(&self, id: usize) -> Rc<Matrix<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn grad_flag(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Smallest distance of any recorded non-smooth op from its kink: `|x|` for
    /// relu/hinge inputs, the top-two gap per column for `col_max`, and the
    /// operand norms of `cosine` (undefined at zero). `None` when the tape has no
    /// such op.
    pub fn kink_margin(&self) -> Option<T> {
        let nodes = self.nodes.borrow();
        let mut best: Option<T> = None;
        let mut see = |v: T| {
            best = Some(match best {
                Some(b) if b <= v => b,
                _ => v,
            });
        };
        for node in nodes.iter() {
            match &node.op {
                Op::Relu(src) | Op::Hinge(src) => {
                    for &x in nodes[*src].value.data() {
                        see(x.abs());
                    }
                }
                Op::Cosine { na, nb, .. } => {
                    see(*na);
                    see(*nb);
                }
                Op::ColMax { src, argmax } => {
                    let x = &nodes[*src].value;
                    if x.rows() < 2 {
                        continue;
                    }
                    for (c, &r_max) in argmax.iter().enumerate() {
                        let top = x.get(r_max, c);
                        let runner_up = (0..x.rows())
                            .filter(|&r| r != r_max)
                            .map(|r| x.get(r, c))
                            .fold(T::neg_infinity(), T::max);
                        see(top - runner_up);
                    }
                }
                _ => {}
            }
        }
        best
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.shape() != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss must be 1x1, got {:?}", root.value.shape()),
            ));
        }
        let mut grads: Vec<Option<Matrix<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Matrix::scalar(T::one()));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if node.requires_grad {
                propagate(&nodes, &node.op, &node.value, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Matrix<T>>], id: usize, g: Matrix<T>) {
    match &mut grads[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_with<T: Real>(
    grads: &mut [Option<Matrix<T>>],
    id: usize,
    shape: (usize, usize),
    f: impl FnOnce(&mut Matrix<T>),
) {
    let slot = grads[id].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1));
    f(slot);
}

fn propagate<T: Real>(
    nodes: &[Node<T>],
    op: &Op<T>,
    out: &Matrix<T>,
    g: &Matrix<T>,
    grads: &mut [Option<Matrix<T>>],
) {
    let needs = |id: usize| nodes[id].requires_grad;
    let val = |id: usize| &*nodes[id].value;
    match *op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            if needs(a) {
                accumulate_with(grads, a, val(a).shape(), |acc| {
                    gemm_acc(g, false, val(b), true, acc)
                });
            }
            if needs(b) {
                accumulate_with(grads, b, val(b).shape(), |acc| {
                    gemm_acc(val(a), true, g, false, acc)
                });
            }
        }
        Op::Add(a, b) => {
            if needs(a) {
                accumulate(grads, a, g.clone());
            }
            if needs(b) {
                accumulate(grads, b, g.clone());
            }
        }
        Op::Sub(a, b) => {
            if needs(a) {
                accumulate(grads, a, g.clone());
            }
            if needs(b) {
                accumulate(grads, b, g.map(|v| -v));
            }
        }
        Op::Mul(a, b) => {
            if needs(a) {
                accumulate(grads, a, g.zip_map(val(b), |gv, bv| gv * bv));
            }
            if needs(b) {
                accumulate(grads, b, g.zip_map(val(a), |gv, av| gv * av));
            }
        }
        Op::Scale(a, s) => {
            if needs(a) {
                accumulate(grads, a, g.scaled(s));
            }
        }
        Op::Relu(a) | Op::Hinge(a) => {
            if needs(a) {
                accumulate(
                    grads,
                    a,
                    g.zip_map(val(a), |gv, x| if x > T::zero() { gv } else { T::zero() }),
                );
            }
        }
        Op::ConcatCols(a, b) => {
            let p = val(a).cols();
            let q = val(b).cols();
            if needs(a) {
                accumulate_with(grads, a, val(a).shape(), |acc| {
                    for r in 0..g.rows() {
                        for (o, &v) in acc.row_mut(r).iter_mut().zip(&g.row(r)[..p]) {
                            *o += v;
                        }
                    }
                });
            }
            if needs(b) && q > 0 {
                accumulate_with(grads, b, val(b).shape(), |acc| {
                    for r in 0..g.rows() {
                        for (o, &v) in acc.row_mut(r).iter_mut().zip(&g.row(r)[p..]) {
                            *o += v;
                        }
                    }
                });
            }
        }
        Op::ColMax { src, ref argmax } => {
            if needs(src) {
                accumulate_with(grads, src, val(src).shape(), |acc| {
                    for (c, &r) in argmax.iter().enumerate() {
                        let cur = acc.get(r, c);
                        acc.set(r, c, cur + g.get(0, c));
                    }
                });
            }
        }
        Op::ColMean(src) => {
            if needs(src) {
                let m = val(src).rows();
                let inv = T::one() / T::from_usize(m).unwrap();
                accumulate_with(grads, src, val(src).shape(), |acc| {
                    for r in 0..m {
                        for (o, &v) in acc.row_mut(r).iter_mut().zip(g.row(0)) {
                            *o += v * inv;
                        }
                    }
                });
            }
        }
        Op::Cosine { a, b, na, nb } => {
            let eps = T::from_f64_lossy(NORM_EPS);
            if na < eps || nb < eps {
                return;
            }
            let gv = g.item();
            let c = out.item();
            let (u, v) = (val(a), val(b));
            if needs(a) {
                let grad = u.zip_map(v, |ui, vi| gv * (vi / (na * nb) - c * ui / (na * na)));
                accumulate(grads, a, grad);
            }
            if needs(b) {
                let grad = v.zip_map(u, |vi, ui| gv * (ui / (na * nb) - c * vi / (nb * nb)));
                accumulate(grads, b, grad);
            }
        }
        Op::Sum(a) => {
            if needs(a) {
                let (r, c) = val(a).shape();
                accumulate(grads, a, Matrix::filled(r, c, g.item()));
            }
        }
        Op::Transpose(a) => {
            if needs(a) {
                accumulate(grads, a, g.transpose());
            }
        }
        Op::BroadcastRows(a) => {
            if needs(a) {
                accumulate_with(grads, a, val(a).shape(), |acc| {
                    for r in 0..g.rows() {
                        for (o, &v) in acc.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                });
            }
        }
        Op::RowNormalize { src, ref norms } => {
            if needs(src) {
                let eps = T::from_f64_lossy(NORM_EPS);
                accumulate_with(grads, src, val(src).shape(), |acc| {
                    for (r, &n) in norms.iter().enumerate() {
                        if n < eps {
                            continue;
                        }
                        let y = out.row(r);
                        let gy = g.row(r);
                        let dot: T = y.iter().zip(gy).map(|(&a, &b)| a * b).sum();
                        for ((o, &yi), &gi) in acc.row_mut(r).iter_mut().zip(y).zip(gy) {
                            *o += (gi - yi * dot) / n;
                        }
                    }
                });
            }
        }
        Op::SparseMatMul { ref adj, src } => {
            if needs(src) {
                accumulate_with(grads, src, val(src).shape(), |acc| {
                    adj.mul_dense_transposed_acc(g, acc)
                });
            }
        }
    }
}

/// Result of [`Tape::backward`]: one optional gradient per recorded value.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to `var`; `None` if it did not influence
    /// the loss or does not require gradients.
    pub fn get(&self, var: Var<'_, T>) -> Option<&Matrix<T>> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    /// Like [`get`](Self::get) but returns zeros of the right shape when absent.
    pub fn get_or_zeros(&self, var: Var<'_, T>) -> Matrix<T> {
        match self.get(var) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = var.shape();
                Matrix::zeros(r, c)
            }
        }
    }
}

impl<'t, T: Real> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Matrix<T>> {
        self.tape.value_of(self.id)
    }

    /// Borrowed view of the value; do not hold across op calls on the same tape.
    pub fn value_ref(&self) -> Ref<'t, Matrix<T>> {
        Ref::map(self.tape.nodes.borrow(), |n| &*n[self.id].value)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value_ref().shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.grad_flag(self.id)
    }

    fn unary(&self, value: Matrix<T>, op: Op<T>) -> Var<'t, T> {
        self.tape.push(value, op, self.requires_grad())
    }

    fn binary(&self, other: &Var<'t, T>, value: Matrix<T>, op: Op<T>) -> Var<'t, T> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
        let rg = self.requires_grad() || other.requires_grad();
        self.tape.push(value, op, rg)
    }

    pub fn matmul(&self, other: &Var<'t, T>) -> Result<Var<'t, T>> {
        let value = self.value().matmul(&other.value())?;
        Ok(self.binary(other, value, Op::MatMul(self.id, other.id)))
    }

    fn same_shape(&self, other: &Var<'t, T>, op: &'static str) -> Result<()> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(Error::shape(op, format!("{a:?} vs {b:?}")));
        }
        Ok(())
    }

    pub fn add(&self, other: &Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_shape(other, "add")?;
        let value = self.value().zip_map(&other.value(), |a, b| a + b);
        Ok(self.binary(other, value, Op::Add(self.id, other.id)))
    }

    pub fn sub(&self, other: &Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_shape(other, "sub")?;
        let value = self.value().zip_map(&other.value(), |a, b| a - b);
        Ok(self.binary(other, value, Op::Sub(self.id, other.id)))
    }

    pub fn mul(&self, other: &Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_shape(other, "mul")?;
        let value = self.value().zip_map(&other.value(), |a, b| a * b);
        Ok(self.binary(other, value, Op::Mul(self.id, other.id)))
    }

    pub fn scale(&self, s: T) -> Var<'t, T> {
        let value = self.value().scaled(s);
        self.unary(value, Op::Scale(self.id, s))
    }

    pub fn neg(&self) -> Var<'t, T> {
        self.scale(-T::one())
    }

    pub fn relu(&self) -> Var<'t, T> {
        let value = self.value().map(|x| if x > T::zero() { x } else { T::zero() });
        self.unary(value, Op::Relu(self.id))
    }

    /// `max(0, x)` on a 1x1 value.
    pub fn hinge(&self) -> Result<Var<'t, T>> {
        let v = self.value();
        if v.shape() != (1, 1) {
            return Err(Error::shape("hinge", format!("expected 1x1, got {:?}", v.shape())));
        }
        let value = v.map(|x| if x > T::zero() { x } else { T::zero() });
        Ok(self.unary(value, Op::Hinge(self.id)))
    }

    pub fn concat_cols(&self, other: &Var<'t, T>) -> Result<Var<'t, T>> {
        let (a, b) = (self.value(), other.value());
        if a.rows() != b.rows() {
            return Err(Error::shape(
                "concat_cols",
                format!("{:?} vs {:?}", a.shape(), b.shape()),
            ));
        }
        let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
        for r in 0..a.rows() {
            let row = out.row_mut(r);
            row[..a.cols()].copy_from_slice(a.row(r));
            row[a.cols()..].copy_from_slice(b.row(r));
        }
        Ok(self.binary(other, out, Op::ConcatCols(self.id, other.id)))
    }

    /// Per-column maximum. Ties resolve to the lowest row index, which is also
    /// where the gradient goes.
    pub fn col_max(&self) -> Result<Var<'t, T>> {
        let a = self.value();
        if a.rows() == 0 {
            return Err(Error::shape("col_max", "empty input"));
        }
        let mut argmax = vec![0usize; a.cols()];
        let mut out = Matrix::zeros(1, a.cols());
        for (c, best_row) in argmax.iter_mut().enumerate() {
            let mut best = a.get(0, c);
            for r in 1..a.rows() {
                let v = a.get(r, c);
                if v > best {
                    best = v;
                    *best_row = r;
                }
            }
            out.set(0, c, best);
        }
        Ok(self.unary(out, Op::ColMax { src: self.id, argmax }))
    }

    pub fn col_mean(&self) -> Result<Var<'t, T>> {
        let a = self.value();
        if a.rows() == 0 {
            return Err(Error::shape("col_mean", "empty input"));
        }
        let inv = T::one() / T::from_usize(a.rows()).unwrap();
        let mut out = Matrix::zeros(1, a.cols());
        for r in 0..a.rows() {
            for (o, &v) in out.row_mut(0).iter_mut().zip(a.row(r)) {
                *o += v;
            }
        }
        let out = out.scaled(inv);
        Ok(self.unary(out, Op::ColMean(self.id)))
    }

    /// Cosine similarity of two row vectors as a 1x1 value. Zero when either norm
    /// is below [`NORM_EPS`], with zero gradient.
    pub fn cosine(&self, other: &Var<'t, T>) -> Result<Var<'t, T>> {
        let (u, v) = (self.value(), other.value());
        if u.rows() != 1 || u.shape() != v.shape() {
            return Err(Error::shape(
                "cosine",
                format!("{:?} vs {:?}", u.shape(), v.shape()),
            ));
        }
        let na = norm(u.data());
        let nb = norm(v.data());
        let eps = T::from_f64_lossy(NORM_EPS);
        let c = if na < eps || nb < eps {
            T::zero()
        } else {
            dot(u.data(), v.data()) / (na * nb)
        };
        Ok(self.binary(
            other,
            Matrix::scalar(c),
            Op::Cosine {
                a: self.id,
                b: other.id,
                na,
                nb,
            },
        ))
    }

    pub fn sum(&self) -> Var<'t, T> {
        let value = Matrix::scalar(self.value().sum());
        self.unary(value, Op::Sum(self.id))
    }

    pub fn transpose(&self) -> Var<'t, T> {
        let value = self.value().transpose();
        self.unary(value, Op::Transpose(self.id))
    }

    /// Repeats a single row `m` times.
    pub fn broadcast_rows(&self, m: usize) -> Result<Var<'t, T>> {
        let a = self.value();
        if a.rows() != 1 {
            return Err(Error::shape(
                "broadcast_rows",
                format!("expected one row, got {:?}", a.shape()),
            ));
        }
        let mut out = Matrix::zeros(m, a.cols());
        for r in 0..m {
            out.row_mut(r).copy_from_slice(a.row(0));
        }
        Ok(self.unary(out, Op::BroadcastRows(self.id)))
    }

    /// Scales every row to unit length; rows with norm below [`NORM_EPS`] become zero.
    pub fn row_normalize(&self) -> Var<'t, T> {
        let a = self.value();
        let eps = T::from_f64_lossy(NORM_EPS);
        let mut out = Matrix::zeros(a.rows(), a.cols());
        let mut norms = Vec::with_capacity(a.rows());
        for r in 0..a.rows() {
            let n = norm(a.row(r));
            norms.push(n);
            if n >= eps {
                for (o, &v) in out.row_mut(r).iter_mut().zip(a.row(r)) {
                    *o = v / n;
                }
            }
        }
        self.unary(out, Op::RowNormalize { src: self.id, norms })
    }

    /// `adj · self` for a constant sparse `adj`.
    pub fn sparse_left_mul(&self, adj: Arc<SparseRows<T>>) -> Result<Var<'t, T>> {
        let a = self.value();
        if adj.shape().1 != a.rows() {
            return Err(Error::shape(
                "sparse_left_mul",
                format!("{:?} x {:?}", adj.shape(), a.shape()),
            ));
        }
        let value = adj.mul_dense(&a);
        Ok(self.unary(value, Op::SparseMatMul { adj, src: self.id }))
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows)
    }

    #[test]
    fn matmul_identity_and_shape_error() {
        let tape = Tape::new();
        let i = tape.constant(Matrix::identity(2));
        let x = tape.param(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        assert_eq!(*i.matmul(&x).unwrap().value(), *x.value());
        let r = tape.constant(m(&[&[1.0, 2.0]]));
        let c = tape.constant(m(&[&[1.0], &[1.0]]));
        assert_eq!(r.matmul(&c).unwrap().value().item(), 3.0);
        let a = tape.constant(Matrix::zeros(2, 3));
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn elementwise_examples() {
        let tape = Tape::new();
        let x = tape.param(m(&[&[1.0, -2.0]]));
        let ones = tape.constant(Matrix::filled(1, 2, 1.0));
        assert_eq!(*x.mul(&ones).unwrap().value(), *x.value());
        assert_eq!(*x.sub(&x).unwrap().value(), Matrix::zeros(1, 2));
        let a = tape.constant(m(&[&[1.0, 2.0]]));
        let b = tape.constant(m(&[&[3.0, 4.0]]));
        assert_eq!(*a.add(&b).unwrap().value(), m(&[&[4.0, 6.0]]));
        assert!(a.add(&tape.constant(Matrix::zeros(2, 1))).is_err());
    }

    #[test]
    fn relu_and_hinge_subgradient_at_zero() {
        let tape = Tape::new();
        let x = tape.param(m(&[&[1.5, -1.0, 0.0]]));
        let y = x.relu();
        assert_eq!(*y.value(), m(&[&[1.5, 0.0, 0.0]]));
        let g = tape.backward(y.sum()).unwrap();
        assert_eq!(*g.get(x).unwrap(), m(&[&[1.0, 0.0, 0.0]]));

        for (input, expect) in [(-1.5, 0.0), (0.4, 0.4), (0.0, 0.0)] {
            let tape = Tape::new();
            let x = tape.param(Matrix::scalar(input));
            let h = x.hinge().unwrap();
            assert_eq!(h.value().item(), expect);
            let g = tape.backward(h).unwrap();
            let expect_grad = if input > 0.0 { 1.0 } else { 0.0 };
            assert_eq!(g.get_or_zeros(x).item(), expect_grad);
        }
    }

    #[test]
    fn concat_shapes() {
        let tape = Tape::<f64>::new();
        let a = tape.constant(Matrix::zeros(3, 2));
        let b = tape.constant(Matrix::zeros(3, 3));
        assert_eq!(a.concat_cols(&b).unwrap().shape(), (3, 5));
        let x = tape.constant(m(&[&[1.0, 2.0]]));
        let e = tape.constant(Matrix::zeros(1, 0));
        assert_eq!(*x.concat_cols(&e).unwrap().value(), *x.value());
        assert!(a.concat_cols(&x).is_err());
    }

    #[test]
    fn col_max_ties_route_to_first_row() {
        let tape = Tape::new();
        let x = tape.param(m(&[&[1.0, -1.0], &[0.0, 3.0]]));
        assert_eq!(*x.col_max().unwrap().value(), m(&[&[1.0, 3.0]]));

        let t = tape.param(m(&[&[2.0, 0.0], &[2.0, 0.0]]));
        let mx = t.col_max().unwrap();
        assert_eq!(*mx.value(), m(&[&[2.0, 0.0]]));
        let g = tape.backward(mx.sum()).unwrap();
        assert_eq!(*g.get(t).unwrap(), m(&[&[1.0, 1.0], &[0.0, 0.0]]));

        assert!(tape.constant(Matrix::zeros(0, 2)).col_max().is_err());
    }

    #[test]
    fn col_mean_examples() {
        let tape = Tape::new();
        let x = tape.param(m(&[&[1.0, 1.0], &[3.0, 3.0]]));
        let y = x.col_mean().unwrap();
        assert_eq!(*y.value(), m(&[&[2.0, 2.0]]));
        let g = tape.backward(y.sum()).unwrap();
        assert_eq!(*g.get(x).unwrap(), Matrix::filled(2, 2, 0.5));
        assert!(tape.constant(Matrix::zeros(0, 1)).col_mean().is_err());
    }

    #[test]
    fn cosine_examples() {
        let tape = Tape::new();
        let e1 = tape.constant(m(&[&[1.0, 0.0]]));
        let e2 = tape.constant(m(&[&[0.0, 1.0]]));
        assert_eq!(e1.cosine(&e2).unwrap().value().item(), 0.0);
        let x = tape.param(m(&[&[0.3, -1.2, 2.0]]));
        assert!((x.cosine(&x).unwrap().value().item() - 1.0).abs() < 1e-12);
        let x3 = x.scale(3.0);
        assert!((x.cosine(&x3).unwrap().value().item() - 1.0).abs() < 1e-12);
        let z = tape.param(Matrix::zeros(1, 3));
        let c = z.cosine(&x).unwrap();
        assert_eq!(c.value().item(), 0.0);
        let g = tape.backward(c).unwrap();
        assert!(g.get(z).is_none() || g.get(z).unwrap().max_abs() == 0.0);
        assert!(e1.cosine(&tape.constant(Matrix::zeros(1, 3))).is_err());
    }

    #[test]
    fn backward_examples() {
        let tape = Tape::new();
        let x = tape.param(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let g = tape.backward(x.sum()).unwrap();
        assert_eq!(*g.get(x).unwrap(), Matrix::filled(2, 2, 1.0));

        let tape = Tape::new();
        let x = tape.param(m(&[&[0.7, -0.2, 1.1]]));
        let g = tape.backward(x.cosine(&x).unwrap()).unwrap();
        assert!(g.get(x).unwrap().max_abs() < 1e-12);

        let tape = Tape::new();
        let x = tape.param(m(&[&[1.0, 2.0]]));
        let g = tape.backward(x.add(&x).unwrap().sum()).unwrap();
        assert_eq!(*g.get(x).unwrap(), Matrix::filled(1, 2, 2.0));

        let tape = Tape::new();
        let x = tape.param(m(&[&[1.0, 2.0]]));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn constants_receive_no_gradient() {
        let tape = Tape::new();
        let c = tape.constant(m(&[&[1.0, 2.0]]));
        let x = tape.param(m(&[&[3.0, 4.0]]));
        let g = tape.backward(c.mul(&x).unwrap().sum()).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(*g.get(x).unwrap(), m(&[&[1.0, 2.0]]));
    }

    #[test]
    fn kink_margin_reports_nearest_kink() {
        let tape = Tape::new();
        let x = tape.param(m(&[&[0.5, -0.01], &[0.2, 3.0]]));
        let _ = x.relu();
        let _ = x.col_max().unwrap();
        assert!((tape.kink_margin().unwrap() - 0.01).abs() < 1e-15);
    }
}
