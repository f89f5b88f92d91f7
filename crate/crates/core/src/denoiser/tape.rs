//! Reverse-mode differentiation over 2-D `f64` tensors.
//!
//! Ops are coarse (matmul, layer norm, multi-head attention pieces, fused
//! softmax cross-entropy) so the tape stays short. Pair tensors over `N` nodes
//! are stored as `N² × d` with row `i·N + j`.

use crate::error::{Error, Result};
use ndarray::{s, Array1, Array2, Axis, Zip};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

const LN_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    Param { offset: usize },
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
    },
    Softmax(Var),
    OuterSum { a: Var, b: Var },
    HeadLogits { q: Var, k: Var, heads: usize, scale: f64 },
    AddPairBias { logits: Var, bias: Var },
    AttnApply { p: Var, v: Var, heads: usize },
    SymPairs(Var),
    ConcatCols(Vec<Var>),
    SoftmaxXent {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        probs: Array2<f64>,
    },
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
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

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// A constant input; receives no gradient.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A trainable tensor whose gradient lands at `offset..offset + len` of the
    /// flat gradient vector, in row-major order.
    pub fn param(&mut self, value: Array2<f64>, offset: usize) -> Var {
        self.push(value, Op::Param { offset })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// Adds a `1 × d` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    /// Row-wise layer normalisation with a `1 × d` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mean = xv.sum_axis(Axis(1)) / d;
        let mut xhat = xv.clone();
        let mut inv_std = Array1::zeros(xv.nrows());
        for (r, mut row) in xhat.rows_mut().into_iter().enumerate() {
            row -= mean[r];
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            row *= inv;
            inv_std[r] = inv;
        }
        let out = &xhat * self.value(gain) + self.value(bias);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::Softmax(a))
    }

    /// `out[i·N + j] = a[i] + b[j]` for `N × d` inputs.
    pub fn outer_sum(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let (n, d) = av.dim();
        let mut out = Array2::zeros((n * n, d));
        for i in 0..n {
            for j in 0..n {
                let mut row = out.row_mut(i * n + j);
                row.assign(&av.row(i));
                row += &bv.row(j);
            }
        }
        self.push(out, Op::OuterSum { a, b })
    }

    /// Per-head scaled dot products: `out[h·N + i, j] = scale · q_h[i]·k_h[j]`.
    pub fn head_logits(&mut self, q: Var, k: Var, heads: usize, scale: f64) -> Var {
        let (qv, kv) = (self.value(q), self.value(k));
        let (n, dm) = qv.dim();
        let dk = dm / heads;
        let mut out = Array2::zeros((heads * n, n));
        for h in 0..heads {
            let cols = s![.., h * dk..(h + 1) * dk];
            let block = qv.slice(cols).dot(&kv.slice(cols).t()) * scale;
            out.slice_mut(s![h * n..(h + 1) * n, ..]).assign(&block);
        }
        self.push(out, Op::HeadLogits { q, k, heads, scale })
    }

    /// Adds pair bias `b[i·N + j, h]` to `logits[h·N + i, j]`.
    pub fn add_pair_bias(&mut self, logits: Var, bias: Var) -> Var {
        let mut out = self.value(logits).clone();
        let bv = self.value(bias);
        let n = out.ncols();
        let heads = bv.ncols();
        for h in 0..heads {
            for i in 0..n {
                for j in 0..n {
                    out[[h * n + i, j]] += bv[[i * n + j, h]];
                }
            }
        }
        self.push(out, Op::AddPairBias { logits, bias })
    }

    /// `out[:, head h] = P_h · V[:, head h]` with `P_h` the h-th `N × N` block.
    pub fn attn_apply(&mut self, p: Var, v: Var, heads: usize) -> Var {
        let (pv, vv) = (self.value(p), self.value(v));
        let (n, dm) = vv.dim();
        let dk = dm / heads;
        let mut out = Array2::zeros((n, dm));
        for h in 0..heads {
            let block = pv.slice(s![h * n..(h + 1) * n, ..]).dot(&vv.slice(s![.., h * dk..(h + 1) * dk]));
            out.slice_mut(s![.., h * dk..(h + 1) * dk]).assign(&block);
        }
        self.push(out, Op::AttnApply { p, v, heads })
    }

    /// `(z[i·N + j] + z[j·N + i]) / 2`.
    pub fn sym_pairs(&mut self, z: Var) -> Var {
        let zv = self.value(z);
        let n = (zv.nrows() as f64).sqrt().round() as usize;
        let mut out = zv.clone();
        for i in 0..n {
            for j in 0..n {
                let mut row = out.row_mut(i * n + j);
                row += &zv.row(j * n + i);
                row *= 0.5;
            }
        }
        self.push(out, Op::SymPairs(z))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concatenated parts share a row count");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// `Σ_r w_r · (−ln softmax(logits_r)[t_r])` as a `1 × 1` tensor.
    pub fn softmax_xent(&mut self, logits: Var, targets: Vec<usize>, weights: Vec<f64>) -> Var {
        let probs = softmax_rows(self.value(logits));
        let lv = self.value(logits);
        let mut total = 0.0;
        for (r, (&t, &w)) in targets.iter().zip(&weights).enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = lv.row(r);
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            total += w * (lse - row[t]);
        }
        self.push(
            Array2::from_elem((1, 1), total),
            Op::SoftmaxXent {
                logits,
                targets,
                weights,
                probs,
            },
        )
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    /// Back-propagates from the `1 × 1` output `root` and returns the gradient
    /// with respect to every parameter, packed into a flat vector of `len`.
    pub fn backward(&self, root: Var, len: usize) -> Result<Vec<f64>> {
        if self.nodes.is_empty() || root.0 >= self.nodes.len() {
            return Err(Error::State("backward called without a recorded forward pass".into()));
        }
        if self.value(root).dim() != (1, 1) {
            return Err(Error::State("backward needs a scalar root".into()));
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Array2::from_elem((1, 1), 1.0));
        let mut flat = vec![0.0; len];
        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param { offset } => {
                    let dst = &mut flat[*offset..*offset + g.len()];
                    for (d, x) in dst.iter_mut().zip(g.iter()) {
                        *d += x;
                    }
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = &g * self.value(*b);
                    let db = &g * self.value(*a);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g * *c),
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0;
                        }
                    });
                    acc(&mut grads, *a, d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    acc(&mut grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *gain, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * self.value(*gain);
                    let d = xhat.ncols() as f64;
                    let mut dx = Array2::zeros(xhat.dim());
                    for r in 0..xhat.nrows() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let sum = dh.sum();
                        let dot = dh.dot(&xh);
                        let inv = inv_std[r];
                        dx.row_mut(r)
                            .assign(&((&dh * d - sum - &xh * dot) * (inv / d)));
                    }
                    acc(&mut grads, *x, dx);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut d = &g * y;
                    for (mut row, yr) in d.rows_mut().into_iter().zip(y.rows()) {
                        let s = row.sum();
                        row.zip_mut_with(&yr, |v, &yy| *v -= yy * s);
                    }
                    acc(&mut grads, *a, d);
                }
                Op::OuterSum { a, b } => {
                    let n = self.value(*a).nrows();
                    let d = self.value(*a).ncols();
                    let mut da = Array2::zeros((n, d));
                    let mut db = Array2::zeros((n, d));
                    for i in 0..n {
                        for j in 0..n {
                            let row = g.row(i * n + j);
                            let mut ra = da.row_mut(i);
                            ra += &row;
                            let mut rb = db.row_mut(j);
                            rb += &row;
                        }
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::HeadLogits { q, k, heads, scale } => {
                    let (qv, kv) = (self.value(*q), self.value(*k));
                    let (n, dm) = qv.dim();
                    let dk = dm / heads;
                    let mut dq = Array2::zeros((n, dm));
                    let mut dkk = Array2::zeros((n, dm));
                    for h in 0..*heads {
                        let gs = g.slice(s![h * n..(h + 1) * n, ..]);
                        let cols = s![.., h * dk..(h + 1) * dk];
                        dq.slice_mut(cols).assign(&(gs.dot(&kv.slice(cols)) * *scale));
                        dkk.slice_mut(cols).assign(&(gs.t().dot(&qv.slice(cols)) * *scale));
                    }
                    acc(&mut grads, *q, dq);
                    acc(&mut grads, *k, dkk);
                }
                Op::AddPairBias { logits, bias } => {
                    let heads = self.value(*bias).ncols();
                    let n = g.ncols();
                    let mut db = Array2::zeros((n * n, heads));
                    for h in 0..heads {
                        for i in 0..n {
                            for j in 0..n {
                                db[[i * n + j, h]] = g[[h * n + i, j]];
                            }
                        }
                    }
                    acc(&mut grads, *bias, db);
                    acc(&mut grads, *logits, g);
                }
                Op::AttnApply { p, v, heads } => {
                    let (pv, vv) = (self.value(*p), self.value(*v));
                    let (n, dm) = vv.dim();
                    let dk = dm / heads;
                    let mut dp = Array2::zeros(pv.dim());
                    let mut dv = Array2::zeros((n, dm));
                    for h in 0..*heads {
                        let cols = s![.., h * dk..(h + 1) * dk];
                        let rows = s![h * n..(h + 1) * n, ..];
                        let gh = g.slice(cols);
                        dp.slice_mut(rows).assign(&gh.dot(&vv.slice(cols).t()));
                        dv.slice_mut(cols).assign(&pv.slice(rows).t().dot(&gh));
                    }
                    acc(&mut grads, *p, dp);
                    acc(&mut grads, *v, dv);
                }
                Op::SymPairs(z) => {
                    let n = (g.nrows() as f64).sqrt().round() as usize;
                    let mut dz = g.clone();
                    for i in 0..n {
                        for j in 0..n {
                            let mut row = dz.row_mut(i * n + j);
                            row += &g.row(j * n + i);
                            row *= 0.5;
                        }
                    }
                    acc(&mut grads, *z, dz);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::SoftmaxXent {
                    logits,
                    targets,
                    weights,
                    probs,
                } => {
                    let up = g[[0, 0]];
                    let mut d = probs.clone();
                    for (r, mut row) in d.rows_mut().into_iter().enumerate() {
                        let w = weights[r] * up;
                        row *= w;
                        row[targets[r]] -= w;
                    }
                    acc(&mut grads, *logits, d);
                }
            }
        }
        Ok(flat)
    }
}

pub fn softmax_rows(a: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |x, &y| x.max(y));
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row /= z;
    }
    out
}
