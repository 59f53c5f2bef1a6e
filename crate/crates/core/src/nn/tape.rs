//! Reverse-mode differentiation over matrix-valued operations.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] with seed gradients for some outputs walks the record
//! in reverse and accumulates the gradient of every node.

use super::matrix::Matrix;
use std::borrow::Cow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulNt(Var, Var),
    /// Adds a `1 x n` row to every row.
    AddRow(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Tanh(Var),
    Scale(Var, f64),
    SoftmaxRows(Var),
    ConcatCols(Var, Var),
}

struct Node<'a> {
    value: Cow<'a, Matrix>,
    op: Op,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A leaf that borrows its value, for parameters shared across tapes.
    pub fn param(&mut self, value: &'a Matrix) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_nt(self.value(b));
        self.push(v, Op::MatMulNt(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows, 1);
        let mut v = self.value(a).clone();
        assert_eq!(v.cols, r.cols);
        for chunk in v.data.chunks_mut(r.cols) {
            for (x, b) in chunk.iter_mut().zip(&r.data) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .map(|x| if x > 0.0 || x.is_nan() { x } else { 0.0 });
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        let cols = v.cols;
        for row in v.data.chunks_mut(cols) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.rows, vb.rows);
        let mut data = Vec::with_capacity(va.len() + vb.len());
        for r in 0..va.rows {
            data.extend_from_slice(va.row(r));
            data.extend_from_slice(vb.row(r));
        }
        let v = Matrix::from_vec(va.rows, va.cols + vb.cols, data);
        self.push(v, Op::ConcatCols(a, b))
    }

    /// Gradients of `sum_i <seed_i, output_i>` with respect to every node.
    pub fn backward(&self, seeds: &[(Var, Matrix)]) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        for (v, g) in seeds {
            accumulate(&mut grads, *v, g.clone());
        }
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul_nt(self.value(b));
                    let db = self.value(a).matmul_tn(&g);
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::MatMulNt(a, b) => {
                    let da = g.matmul(self.value(b));
                    let db = g.matmul_tn(self.value(a));
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::AddRow(a, row) => {
                    let mut dr = Matrix::zeros(1, g.cols);
                    for chunk in g.data.chunks(g.cols) {
                        for (d, x) in dr.data.iter_mut().zip(chunk) {
                            *d += x;
                        }
                    }
                    accumulate(&mut grads, row, dr);
                    accumulate(&mut grads, a, g.clone());
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, b, g.clone());
                    accumulate(&mut grads, a, g.clone());
                }
                Op::Relu(a) => {
                    let input = self.value(a);
                    let mut d = g.clone();
                    for (x, &z) in d.data.iter_mut().zip(&input.data) {
                        if z <= 0.0 {
                            *x = 0.0;
                        }
                    }
                    accumulate(&mut grads, a, d);
                }
                Op::Tanh(a) => {
                    let mut d = g.clone();
                    for (x, &y) in d.data.iter_mut().zip(&node.value.data) {
                        *x *= 1.0 - y * y;
                    }
                    accumulate(&mut grads, a, d);
                }
                Op::Scale(a, c) => accumulate(&mut grads, a, g.map(|x| x * c)),
                Op::SoftmaxRows(a) => {
                    let s = &node.value;
                    let mut d = Matrix::zeros(s.rows, s.cols);
                    for r in 0..s.rows {
                        let (sr, gr) = (s.row(r), g.row(r));
                        let inner: f64 = sr.iter().zip(gr).map(|(x, y)| x * y).sum();
                        for c in 0..s.cols {
                            d.data[r * s.cols + c] = sr[c] * (gr[c] - inner);
                        }
                    }
                    accumulate(&mut grads, a, d);
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(a).cols;
                    let cb = self.value(b).cols;
                    let mut da = Matrix::zeros(g.rows, ca);
                    let mut db = Matrix::zeros(g.rows, cb);
                    for r in 0..g.rows {
                        let row = g.row(r);
                        da.data[r * ca..(r + 1) * ca].copy_from_slice(&row[..ca]);
                        db.data[r * cb..(r + 1) * cb].copy_from_slice(&row[ca..]);
                    }
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
            }
            // Keep leaf gradients for the caller.
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` when the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
}
