//! A small reverse-mode differentiation tape over dense f64 matrices.

use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Mat {
        assert_eq!(data.len(), rows * cols, "shape {rows}x{cols} does not match {} values", data.len());
        Mat { rows, cols, data }
    }

    pub fn column(data: Vec<f64>) -> Mat {
        let n = data.len();
        Mat::from_vec(n, 1, data)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul {:?} x {:?}", self.shape(), other.shape());
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    fn zip(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!(self.shape(), other.shape());
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    fn add_assign(&mut self, other: &Mat) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Log-softmax of a slice, computed stably.
pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    xs.iter().map(|x| x - lse).collect()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    log_softmax(xs).into_iter().map(f64::exp).collect()
}

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Parameter tensor `i` of the store the tape reads from.
    Param(usize),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    SliceRows(Var, usize),
    ConcatRows(Vec<Var>),
    /// Softmax over a column vector.
    Softmax(Var),
    /// `-log softmax(x)[i]` of a column vector, as a 1x1 value.
    NegLogSoftmaxAt(Var, usize),
    /// Row `r` of the output is the mean of the listed rows of the input
    /// (zero for an empty list).
    MeanGather(Var, Vec<Vec<usize>>),
    /// Column means as a 1 x cols row.
    MeanRows(Var),
    Sum(Vec<Var>),
}

struct Node {
    op: Op,
    value: Option<Mat>,
}

/// Records operations for one forward pass. Parameters are read from
/// `params` in place.
pub struct Tape<'p> {
    params: &'p [Mat],
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Mat]) -> Self {
        Tape { params, nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Mat) -> Var {
        self.nodes.push(Node { op, value: Some(value) });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        match &self.nodes[v.0] {
            Node { op: Op::Param(i), .. } => &self.params[*i],
            Node { value: Some(m), .. } => m,
            Node { value: None, .. } => unreachable!("non-parameter nodes carry values"),
        }
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.push(Op::Leaf, m)
    }

    pub fn param(&mut self, i: usize) -> Var {
        self.nodes.push(Node { op: Op::Param(i), value: None });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), v)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        let cols = m.cols;
        let v = Mat::from_vec(len, cols, m.data[start * cols..(start + len) * cols].to_vec());
        self.push(Op::SliceRows(a, start), v)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        self.push(Op::ConcatRows(parts.to_vec()), Mat::from_vec(rows, cols, data))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let m = self.value(a);
        assert_eq!(m.cols, 1, "softmax takes a column");
        let v = Mat::column(softmax(&m.data));
        self.push(Op::Softmax(a), v)
    }

    pub fn neg_log_softmax_at(&mut self, a: Var, i: usize) -> Var {
        let m = self.value(a);
        assert_eq!(m.cols, 1, "neg_log_softmax_at takes a column");
        let v = -log_softmax(&m.data)[i];
        self.push(Op::NegLogSoftmaxAt(a, i), Mat::from_vec(1, 1, vec![v]))
    }

    pub fn mean_gather(&mut self, table: Var, rows: Vec<Vec<usize>>) -> Var {
        let t = self.value(table);
        let mut out = Mat::zeros(rows.len(), t.cols);
        for (r, idx) in rows.iter().enumerate() {
            let w = 1.0 / idx.len().max(1) as f64;
            for &i in idx {
                for (o, x) in out.data[r * t.cols..(r + 1) * t.cols].iter_mut().zip(t.row(i)) {
                    *o += w * x;
                }
            }
        }
        self.push(Op::MeanGather(table, rows), out)
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut out = Mat::zeros(1, m.cols);
        for r in 0..m.rows {
            for (o, x) in out.data.iter_mut().zip(m.row(r)) {
                *o += x / m.rows as f64;
            }
        }
        self.push(Op::MeanRows(a), out)
    }

    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let total = parts.iter().map(|&p| self.value(p).data[0]).sum();
        self.push(Op::Sum(parts.to_vec()), Mat::from_vec(1, 1, vec![total]))
    }

    /// Gradients of the 1x1 value `loss` with respect to every parameter
    /// tensor read on this tape (`None` for tensors not read).
    pub fn backward(&self, loss: Var) -> Vec<Option<Mat>> {
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Mat::from_vec(1, 1, vec![1.0]));
        let mut out: Vec<Option<Mat>> = vec![None; self.params.len()];
        let acc = |grads: &mut Vec<Option<Mat>>, v: Var, g: Mat| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        };
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(i) => match &mut out[*i] {
                    Some(existing) => existing.add_assign(&g),
                    slot => *slot = Some(g),
                },
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose());
                    let gb = self.value(*a).transpose().matmul(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip(self.value(*b), |x, y| x * y);
                    let gb = g.zip(self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap();
                    acc(&mut grads, *a, g.zip(y, |g, y| g * y * (1.0 - y)));
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap();
                    acc(&mut grads, *a, g.zip(y, |g, y| g * (1.0 - y * y)));
                }
                Op::SliceRows(a, start) => {
                    let src = self.value(*a);
                    let mut full = Mat::zeros(src.rows, src.cols);
                    full.data[start * src.cols..start * src.cols + g.data.len()].copy_from_slice(&g.data);
                    acc(&mut grads, *a, full);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).data.len();
                        let (r, c) = self.value(p).shape();
                        acc(&mut grads, p, Mat::from_vec(r, c, g.data[offset..offset + n].to_vec()));
                        offset += n;
                    }
                }
                Op::Softmax(a) => {
                    let y = node.value.as_ref().unwrap();
                    let dot: f64 = g.data.iter().zip(&y.data).map(|(g, y)| g * y).sum();
                    acc(&mut grads, *a, g.zip(y, |g, y| y * (g - dot)));
                }
                Op::NegLogSoftmaxAt(a, i) => {
                    let mut p = softmax(&self.value(*a).data);
                    p[*i] -= 1.0;
                    let g0 = g.data[0];
                    acc(&mut grads, *a, Mat::column(p.into_iter().map(|x| x * g0).collect()));
                }
                Op::MeanGather(table, rows) => {
                    let t = self.value(*table);
                    let mut gt = Mat::zeros(t.rows, t.cols);
                    for (r, idx) in rows.iter().enumerate() {
                        let w = 1.0 / idx.len().max(1) as f64;
                        for &i in idx {
                            for (o, x) in gt.data[i * t.cols..(i + 1) * t.cols].iter_mut().zip(g.row(r)) {
                                *o += w * x;
                            }
                        }
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::MeanRows(a) => {
                    let src = self.value(*a);
                    let mut ga = Mat::zeros(src.rows, src.cols);
                    for r in 0..src.rows {
                        for (o, x) in ga.data[r * src.cols..(r + 1) * src.cols].iter_mut().zip(&g.data) {
                            *o = x / src.rows as f64;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        acc(&mut grads, p, g.clone());
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(params: &mut [Mat], i: usize, f: &dyn Fn(&[Mat]) -> f64) -> Mat {
        let eps = 1e-6;
        let mut g = Mat::zeros(params[i].rows, params[i].cols);
        for k in 0..params[i].data.len() {
            let orig = params[i].data[k];
            params[i].data[k] = orig + eps;
            let up = f(params);
            params[i].data[k] = orig - eps;
            let down = f(params);
            params[i].data[k] = orig;
            g.data[k] = (up - down) / (2.0 * eps);
        }
        g
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut params = vec![
            Mat::from_vec(3, 2, vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.7]),
            Mat::from_vec(2, 1, vec![0.6, -0.9]),
            Mat::from_vec(4, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]),
        ];
        let build = |tape: &mut Tape<'_>| {
            let a = tape.param(0);
            let x = tape.param(1);
            let t = tape.param(2);
            let ax = tape.matmul(a, x);
            let s = tape.sigmoid(ax);
            let th = tape.tanh(ax);
            let m = tape.mul(s, th);
            let sum = tape.add(m, ax);
            let top = tape.slice_rows(sum, 0, 2);
            let xt = tape.transpose(x);
            let tt = tape.transpose(xt);
            let cat = tape.concat_rows(&[top, tt]);
            let sm = tape.softmax(cat);
            let g = tape.mean_gather(t, vec![vec![0, 3], vec![1], vec![2, 2, 0], vec![3]]);
            let mr = tape.mean_rows(g);
            let mrt = tape.transpose(mr);
            let smx = tape.slice_rows(sm, 0, 2);
            let prod = tape.mul(smx, mrt);
            let cat2 = tape.concat_rows(&[prod, ax]);
            let l1 = tape.neg_log_softmax_at(cat2, 3);
            let l2 = tape.neg_log_softmax_at(sm, 1);
            tape.sum(&[l1, l2])
        };
        let loss_of = |p: &[Mat]| {
            let mut tape = Tape::new(p);
            let l = build(&mut tape);
            tape.value(l).data[0]
        };
        let grads = {
            let mut tape = Tape::new(&params);
            let l = build(&mut tape);
            tape.backward(l)
        };
        for i in 0..params.len() {
            let fd = numeric_grad(&mut params, i, &loss_of);
            let an = grads[i].as_ref().unwrap();
            for (a, n) in an.data.iter().zip(&fd.data) {
                assert!((a - n).abs() < 1e-7, "param {i}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn log_softmax_is_normalized() {
        let lp = log_softmax(&[1000.0, 1000.0, -5.0]);
        let total: f64 = lp.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((lp[0] - lp[1]).abs() < 1e-15);
    }
}
