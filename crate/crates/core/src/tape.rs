//! Reverse-mode automatic differentiation over matrices.
//!
//! A `GradTape` records matrix operations eagerly (define-by-run). Calling
//! [`GradTape::grad`] walks the recording backwards and *builds the adjoint
//! computation out of ordinary tape operations*, so the returned gradients are
//! themselves differentiable nodes. That is what makes a loss containing an
//! input gradient (a gradient-penalty term) differentiable with respect to the
//! network parameters.
//!
//! Rectifier subgradient at exactly zero is taken as zero.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{CoreError, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

static TAPE_IDS: AtomicU64 = AtomicU64::new(0);

/// Handle to a node on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Clone, Copy)]
enum Op<T> {
    Leaf,
    Constant,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Neg(usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, T),
    AddScalar(usize, T),
    Relu(usize),
    Exp(usize),
    Ln(usize),
    Sqrt(usize),
    SumCols(usize),
    SumRows(usize),
    SumAll(usize),
    RepeatCols(usize),
    RepeatRows(usize),
    BroadcastAll(usize),
    /// a - column broadcast over a's columns
    SubCol(usize, usize),
    /// a + row broadcast over a's rows
    AddRow(usize, usize),
    ConcatCols(usize, usize),
    SliceCols(usize, usize, usize),
}

struct Node<T> {
    op: Op<T>,
    value: DenseMatrix<T>,
    requires: bool,
}

pub struct GradTape<T> {
    id: u64,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for GradTape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> GradTape<T> {
    pub fn new() -> Self {
        Self {
            id: TAPE_IDS.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a differentiable leaf (parameter or probed input).
    pub fn var(&mut self, value: DenseMatrix<T>) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Registers a non-differentiable value (data, targets, masks).
    pub fn constant(&mut self, value: DenseMatrix<T>) -> Var {
        self.push(Op::Constant, value, false)
    }

    pub fn value(&self, v: Var) -> &DenseMatrix<T> {
        self.check(v);
        &self.nodes[v.idx].value
    }

    /// Reads a 1x1 node as a scalar.
    pub fn scalar(&self, v: Var) -> T {
        let m = self.value(v);
        assert_eq!((m.rows(), m.cols()), (1, 1), "scalar() on non 1x1 node");
        m.get(0, 0)
    }

    fn check(&self, v: Var) {
        assert_eq!(v.tape, self.id, "Var used on a foreign tape");
        assert!(v.idx < self.nodes.len());
    }

    fn push(&mut self, op: Op<T>, value: DenseMatrix<T>, requires: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn unary(&mut self, a: Var, op: Op<T>, value: DenseMatrix<T>) -> Var {
        let requires = self.nodes[a.idx].requires;
        self.push(op, value, requires)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, value: DenseMatrix<T>) -> Var {
        let requires = self.nodes[a.idx].requires || self.nodes[b.idx].requires;
        self.push(op, value, requires)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.check(a);
        self.check(b);
        let v = self.nodes[a.idx].value.matmul(&self.nodes[b.idx].value);
        self.binary(a, b, Op::MatMul(a.idx, b.idx), v)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.transpose();
        self.unary(a, Op::Transpose(a.idx), v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.check(a);
        self.check(b);
        let v = self.nodes[a.idx].value.add(&self.nodes[b.idx].value);
        self.binary(a, b, Op::Add(a.idx, b.idx), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.check(a);
        self.check(b);
        let v = self.nodes[a.idx].value.sub(&self.nodes[b.idx].value);
        self.binary(a, b, Op::Sub(a.idx, b.idx), v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.map(|x| -x);
        self.unary(a, Op::Neg(a.idx), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.check(a);
        self.check(b);
        let v = self.nodes[a.idx].value.hadamard(&self.nodes[b.idx].value);
        self.binary(a, b, Op::Mul(a.idx, b.idx), v)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.check(a);
        self.check(b);
        let av = &self.nodes[a.idx].value;
        let bv = &self.nodes[b.idx].value;
        assert_eq!((av.rows(), av.cols()), (bv.rows(), bv.cols()), "div shape");
        let data = av
            .data()
            .iter()
            .zip(bv.data().iter())
            .map(|(&x, &y)| x / y)
            .collect();
        let v = DenseMatrix::from_vec_unchecked(av.rows(), av.cols(), data);
        self.binary(a, b, Op::Div(a.idx, b.idx), v)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.scale(c);
        self.unary(a, Op::Scale(a.idx, c), v)
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.map(|x| x + c);
        self.unary(a, Op::AddScalar(a.idx, c), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.map(|x| x.max(T::zero()));
        self.unary(a, Op::Relu(a.idx), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.map(|x| x.exp());
        self.unary(a, Op::Exp(a.idx), v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.map(|x| x.ln());
        self.unary(a, Op::Ln(a.idx), v)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.map(|x| x.sqrt());
        self.unary(a, Op::Sqrt(a.idx), v)
    }

    pub fn sum_cols(&mut self, a: Var) -> Var {
        self.check(a);
        let av = &self.nodes[a.idx].value;
        let data: Vec<T> = (0..av.rows())
            .map(|i| av.row(i).iter().copied().sum())
            .collect();
        let v = DenseMatrix::from_vec_unchecked(av.rows(), 1, data);
        self.unary(a, Op::SumCols(a.idx), v)
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        self.check(a);
        let av = &self.nodes[a.idx].value;
        let mut data = vec![T::zero(); av.cols()];
        for i in 0..av.rows() {
            for (acc, &x) in data.iter_mut().zip(av.row(i)) {
                *acc += x;
            }
        }
        let v = DenseMatrix::from_vec_unchecked(1, av.cols(), data);
        self.unary(a, Op::SumRows(a.idx), v)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        self.check(a);
        let s = self.nodes[a.idx].value.sum();
        let v = DenseMatrix::from_vec_unchecked(1, 1, vec![s]);
        self.unary(a, Op::SumAll(a.idx), v)
    }

    /// Tiles a column vector across `cols` columns.
    pub fn repeat_cols(&mut self, a: Var, cols: usize) -> Var {
        self.check(a);
        let av = &self.nodes[a.idx].value;
        assert_eq!(av.cols(), 1, "repeat_cols expects n x 1");
        let mut data = Vec::with_capacity(av.rows() * cols);
        for i in 0..av.rows() {
            let x = av.get(i, 0);
            data.extend(std::iter::repeat(x).take(cols));
        }
        let v = DenseMatrix::from_vec_unchecked(av.rows(), cols, data);
        self.unary(a, Op::RepeatCols(a.idx), v)
    }

    /// Tiles a row vector across `rows` rows.
    pub fn repeat_rows(&mut self, a: Var, rows: usize) -> Var {
        self.check(a);
        let av = &self.nodes[a.idx].value;
        assert_eq!(av.rows(), 1, "repeat_rows expects 1 x m");
        let mut data = Vec::with_capacity(rows * av.cols());
        for _ in 0..rows {
            data.extend_from_slice(av.row(0));
        }
        let v = DenseMatrix::from_vec_unchecked(rows, av.cols(), data);
        self.unary(a, Op::RepeatRows(a.idx), v)
    }

    pub fn broadcast_all(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        self.check(a);
        let s = self.scalar(a);
        let v = DenseMatrix::from_vec_unchecked(rows, cols, vec![s; rows * cols]);
        self.unary(a, Op::BroadcastAll(a.idx), v)
    }

    /// `a[i][j] - c[i][0]`
    pub fn sub_col(&mut self, a: Var, c: Var) -> Var {
        self.check(a);
        self.check(c);
        let av = &self.nodes[a.idx].value;
        let cv = &self.nodes[c.idx].value;
        assert_eq!(cv.cols(), 1, "sub_col expects n x 1 broadcast");
        assert_eq!(av.rows(), cv.rows(), "sub_col row mismatch");
        let mut data = Vec::with_capacity(av.rows() * av.cols());
        for i in 0..av.rows() {
            let off = cv.get(i, 0);
            data.extend(av.row(i).iter().map(|&x| x - off));
        }
        let v = DenseMatrix::from_vec_unchecked(av.rows(), av.cols(), data);
        self.binary(a, c, Op::SubCol(a.idx, c.idx), v)
    }

    /// `a[i][j] + r[0][j]`
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        self.check(a);
        self.check(r);
        let av = &self.nodes[a.idx].value;
        let rv = &self.nodes[r.idx].value;
        assert_eq!(rv.rows(), 1, "add_row expects 1 x m broadcast");
        assert_eq!(av.cols(), rv.cols(), "add_row column mismatch");
        let mut data = Vec::with_capacity(av.rows() * av.cols());
        for i in 0..av.rows() {
            data.extend(av.row(i).iter().zip(rv.row(0)).map(|(&x, &b)| x + b));
        }
        let v = DenseMatrix::from_vec_unchecked(av.rows(), av.cols(), data);
        self.binary(a, r, Op::AddRow(a.idx, r.idx), v)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        self.check(a);
        self.check(b);
        let v = self.nodes[a.idx].value.hstack(&self.nodes[b.idx].value);
        self.binary(a, b, Op::ConcatCols(a.idx, b.idx), v)
    }

    pub fn slice_cols(&mut self, a: Var, from: usize, to: usize) -> Var {
        self.check(a);
        let v = self.nodes[a.idx].value.slice_cols(from, to);
        self.unary(a, Op::SliceCols(a.idx, from, to), v)
    }

    // ---- composite helpers ----

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = {
            let v = self.value(a);
            v.rows() * v.cols()
        };
        let s = self.sum_all(a);
        self.scale(s, T::one() / T::from_usize_lossy(n))
    }

    /// Per-row Euclidean norm, `sqrt(sum(a^2) + eps)` as an n x 1 column.
    ///
    /// `eps` keeps the derivative finite when a row is exactly zero.
    pub fn row_l2_norm(&mut self, a: Var, eps: T) -> Var {
        let sq = self.square(a);
        let s = self.sum_cols(sq);
        let shifted = self.add_scalar(s, eps);
        self.sqrt(shifted)
    }

    /// Reverse-mode gradients of scalar `y` with respect to `wrt`.
    ///
    /// The adjoints are recorded as tape operations, so the returned `Var`s
    /// may participate in further losses and be differentiated again.
    pub fn grad(&mut self, y: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        if y.tape != self.id || y.idx >= self.nodes.len() {
            return Err(CoreError::Contract("loss was not computed on this tape".into()));
        }
        for w in wrt {
            if w.tape != self.id || w.idx >= self.nodes.len() {
                return Err(CoreError::Contract("gradient target is not on this tape".into()));
            }
        }
        {
            let yv = &self.nodes[y.idx].value;
            if (yv.rows(), yv.cols()) != (1, 1) {
                return Err(CoreError::Contract(format!(
                    "grad expects a scalar loss, got {}x{}",
                    yv.rows(),
                    yv.cols()
                )));
            }
        }

        let mut adjoint: Vec<Option<Var>> = vec![None; y.idx + 1];
        let seed = self.constant(DenseMatrix::from_vec_unchecked(1, 1, vec![T::one()]));
        adjoint[y.idx] = Some(seed);

        for i in (0..=y.idx).rev() {
            let Some(g) = adjoint[i] else { continue };
            if !self.nodes[i].requires {
                continue;
            }
            let op = self.nodes[i].op;
            match op {
                Op::Leaf | Op::Constant => {}
                Op::MatMul(a, b) => {
                    if self.nodes[a].requires {
                        let bt = self.transpose(self.var_at(b));
                        let da = self.matmul(g, bt);
                        self.accumulate(&mut adjoint, a, da);
                    }
                    if self.nodes[b].requires {
                        let at = self.transpose(self.var_at(a));
                        let db = self.matmul(at, g);
                        self.accumulate(&mut adjoint, b, db);
                    }
                }
                Op::Transpose(a) => {
                    if self.nodes[a].requires {
                        let da = self.transpose(g);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::Add(a, b) => {
                    if self.nodes[a].requires {
                        self.accumulate(&mut adjoint, a, g);
                    }
                    if self.nodes[b].requires {
                        self.accumulate(&mut adjoint, b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.nodes[a].requires {
                        self.accumulate(&mut adjoint, a, g);
                    }
                    if self.nodes[b].requires {
                        let db = self.neg(g);
                        self.accumulate(&mut adjoint, b, db);
                    }
                }
                Op::Neg(a) => {
                    if self.nodes[a].requires {
                        let da = self.neg(g);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::Mul(a, b) => {
                    if self.nodes[a].requires {
                        let da = self.mul(g, self.var_at(b));
                        self.accumulate(&mut adjoint, a, da);
                    }
                    if self.nodes[b].requires {
                        let db = self.mul(g, self.var_at(a));
                        self.accumulate(&mut adjoint, b, db);
                    }
                }
                Op::Div(a, b) => {
                    if self.nodes[a].requires {
                        let da = self.div(g, self.var_at(b));
                        self.accumulate(&mut adjoint, a, da);
                    }
                    if self.nodes[b].requires {
                        let out = self.var_at(i);
                        let ratio = self.div(out, self.var_at(b));
                        let num = self.mul(g, ratio);
                        let db = self.neg(num);
                        self.accumulate(&mut adjoint, b, db);
                    }
                }
                Op::Scale(a, c) => {
                    if self.nodes[a].requires {
                        let da = self.scale(g, c);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::AddScalar(a, _) => {
                    if self.nodes[a].requires {
                        self.accumulate(&mut adjoint, a, g);
                    }
                }
                Op::Relu(a) => {
                    if self.nodes[a].requires {
                        // Mask is piecewise constant; subgradient at 0 is 0.
                        let mask = self.nodes[a]
                            .value
                            .map(|x| if x > T::zero() { T::one() } else { T::zero() });
                        let mask = self.constant(mask);
                        let da = self.mul(g, mask);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::Exp(a) => {
                    if self.nodes[a].requires {
                        let da = self.mul(g, self.var_at(i));
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::Ln(a) => {
                    if self.nodes[a].requires {
                        let da = self.div(g, self.var_at(a));
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::Sqrt(a) => {
                    if self.nodes[a].requires {
                        let two_out = self.scale(self.var_at(i), T::from_f64_lossy(2.0));
                        let da = self.div(g, two_out);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::SumCols(a) => {
                    if self.nodes[a].requires {
                        let cols = self.nodes[a].value.cols();
                        let da = self.repeat_cols(g, cols);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::SumRows(a) => {
                    if self.nodes[a].requires {
                        let rows = self.nodes[a].value.rows();
                        let da = self.repeat_rows(g, rows);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::SumAll(a) => {
                    if self.nodes[a].requires {
                        let (r, c) = {
                            let v = &self.nodes[a].value;
                            (v.rows(), v.cols())
                        };
                        let da = self.broadcast_all(g, r, c);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::RepeatCols(a) => {
                    if self.nodes[a].requires {
                        let da = self.sum_cols(g);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::RepeatRows(a) => {
                    if self.nodes[a].requires {
                        let da = self.sum_rows(g);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::BroadcastAll(a) => {
                    if self.nodes[a].requires {
                        let da = self.sum_all(g);
                        self.accumulate(&mut adjoint, a, da);
                    }
                }
                Op::SubCol(a, c) => {
                    if self.nodes[a].requires {
                        self.accumulate(&mut adjoint, a, g);
                    }
                    if self.nodes[c].requires {
                        let s = self.sum_cols(g);
                        let dc = self.neg(s);
                        self.accumulate(&mut adjoint, c, dc);
                    }
                }
                Op::AddRow(a, r) => {
                    if self.nodes[a].requires {
                        self.accumulate(&mut adjoint, a, g);
                    }
                    if self.nodes[r].requires {
                        let dr = self.sum_rows(g);
                        self.accumulate(&mut adjoint, r, dr);
                    }
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.nodes[a].value.cols();
                    let cb = self.nodes[b].value.cols();
                    if self.nodes[a].requires {
                        let da = self.slice_cols(g, 0, ca);
                        self.accumulate(&mut adjoint, a, da);
                    }
                    if self.nodes[b].requires {
                        let db = self.slice_cols(g, ca, ca + cb);
                        self.accumulate(&mut adjoint, b, db);
                    }
                }
                Op::SliceCols(a, from, to) => {
                    if self.nodes[a].requires {
                        let (rows, cols) = {
                            let v = &self.nodes[a].value;
                            (v.rows(), v.cols())
                        };
                        let mut padded = g;
                        if from > 0 {
                            let left = self.constant(DenseMatrix::zeros(rows, from));
                            padded = self.concat_cols(left, padded);
                        }
                        if to < cols {
                            let right = self.constant(DenseMatrix::zeros(rows, cols - to));
                            padded = self.concat_cols(padded, right);
                        }
                        self.accumulate(&mut adjoint, a, padded);
                    }
                }
            }
        }

        let grads = wrt
            .iter()
            .map(|w| match adjoint.get(w.idx).copied().flatten() {
                Some(g) => g,
                None => {
                    let (r, c) = {
                        let v = &self.nodes[w.idx].value;
                        (v.rows(), v.cols())
                    };
                    self.constant(DenseMatrix::zeros(r, c))
                }
            })
            .collect();
        Ok(grads)
    }

    fn var_at(&self, idx: usize) -> Var {
        Var {
            tape: self.id,
            idx,
        }
    }

    fn accumulate(&mut self, adjoint: &mut [Option<Var>], target: usize, contribution: Var) {
        adjoint[target] = Some(match adjoint[target] {
            Some(existing) => self.add(existing, contribution),
            None => contribution,
        });
    }
}
