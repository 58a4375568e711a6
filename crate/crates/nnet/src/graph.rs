//! Tape of tensor operations with reverse accumulation.
//!
//! Every operation appends a node holding its forward value. [`Graph::backward`]
//! walks the tape in reverse from a scalar node and returns the gradient of
//! that scalar with respect to every node that influences it.
//!
//! Subgradients at kinks (ReLU at 0, ties in max pooling, sqrt at 0) are 0
//! or go to the first maximal element. [`Graph::kink_distance`] reports how
//! close the current forward pass came to any such point.

use crate::error::{NnetError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { x: Var, w: Var, b: Var, pad: usize },
    MaxPool2 { x: Var, argmax: Vec<usize>, min_gap: f64 },
    Relu(Var),
    Dense { x: Var, w: Var, b: Var },
    Reshape(Var),
    L2Normalize { x: Var, norms: Vec<f64> },
    RowSqDist { a: Var, b: Var },
    Sqrt(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddScalar(Var),
    Scale(Var, f64),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to graph nodes.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// None when `v` does not influence the differentiated scalar.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_err<T>(msg: String) -> Result<T> {
    Err(NnetError::Shape(msg))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Input or parameter node.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.leaf(Tensor::scalar(v))
    }

    /// Same-padded stride-1 convolution. `x`: [N, C, H, W], `w`: [O, C, K, K]
    /// with odd K, `b`: [O]. Output [N, O, H, W].
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if xs.len() != 4 || ws.len() != 4 || bs.len() != 1 {
            return shape_err(format!("conv2d shapes x {xs:?} w {ws:?} b {bs:?}"));
        }
        let (n, c, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (o, wc, k, k2) = (ws[0], ws[1], ws[2], ws[3]);
        if wc != c || k != k2 || k % 2 == 0 || bs[0] != o {
            return shape_err(format!("conv2d shapes x {xs:?} w {ws:?} b {bs:?}"));
        }
        let pad = k / 2;
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(b).data();
        let plane = h * wd;
        let mut out = vec![0.0; n * o * plane];
        for ni in 0..n {
            for oi in 0..o {
                let dst = &mut out[(ni * o + oi) * plane..(ni * o + oi + 1) * plane];
                dst.fill(bv[oi]);
                for ci in 0..c {
                    let src = &xv[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                    for ky in 0..k {
                        for kx in 0..k {
                            let wt = wv[((oi * c + ci) * k + ky) * k + kx];
                            conv_tap(dst, src, h, wd, ky as isize - pad as isize, kx as isize - pad as isize, |d, s| {
                                *d += wt * s
                            });
                        }
                    }
                }
            }
        }
        let t = Tensor::new(vec![n, o, h, wd], out)?;
        Ok(self.push(t, Op::Conv2d { x, w, b, pad }))
    }

    /// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 4 || xs[2] < 2 || xs[3] < 2 {
            return shape_err(format!("max_pool2 input {xs:?}"));
        }
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (oh, ow) = (h / 2, w / 2);
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        let mut min_gap = f64::INFINITY;
        for nc in 0..n * c {
            let base = nc * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let idx = [
                        base + 2 * oy * w + 2 * ox,
                        base + 2 * oy * w + 2 * ox + 1,
                        base + (2 * oy + 1) * w + 2 * ox,
                        base + (2 * oy + 1) * w + 2 * ox + 1,
                    ];
                    let mut best = idx[0];
                    for &i in &idx[1..] {
                        if xv[i] > xv[best] {
                            best = i;
                        }
                    }
                    let second = idx
                        .iter()
                        .filter(|&&i| i != best)
                        .map(|&i| xv[i])
                        .fold(f64::NEG_INFINITY, f64::max);
                    // zero ties come from clamped ReLU outputs, which do not move
                    if !(xv[best] == 0.0 && second == 0.0) {
                        min_gap = min_gap.min(xv[best] - second);
                    }
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let t = Tensor::new(vec![n, c, oh, ow], out)?;
        Ok(self.push(t, Op::MaxPool2 { x, argmax, min_gap }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a.max(0.0)).collect()).unwrap();
        self.push(t, Op::Relu(x))
    }

    /// `x` [N, I] times `w` [I, O] plus `b` [O].
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || ws[1] != bs[0] {
            return shape_err(format!("dense shapes x {xs:?} w {ws:?} b {bs:?}"));
        }
        let (n, i_dim, o_dim) = (xs[0], ws[0], ws[1]);
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; n * o_dim];
        for ni in 0..n {
            let dst = &mut out[ni * o_dim..(ni + 1) * o_dim];
            dst.copy_from_slice(bv);
            for ii in 0..i_dim {
                let a = xv[ni * i_dim + ii];
                if a == 0.0 {
                    continue;
                }
                for (d, &wt) in dst.iter_mut().zip(&wv[ii * o_dim..(ii + 1) * o_dim]) {
                    *d += a * wt;
                }
            }
        }
        let t = Tensor::new(vec![n, o_dim], out)?;
        Ok(self.push(t, Op::Dense { x, w, b }))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// Flattens all but the first axis.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).shape();
        let n = s[0];
        let rest = s[1..].iter().product();
        self.reshape(x, vec![n, rest])
    }

    /// Scales each row of a 2-d tensor to unit Euclidean norm.
    pub fn l2_normalize(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape();
        if xs.len() != 2 {
            return shape_err(format!("l2_normalize input {xs:?}"));
        }
        let (n, d) = (xs[0], xs[1]);
        let xv = self.value(x).data();
        let mut norms = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n * d);
        for r in 0..n {
            let row = &xv[r * d..(r + 1) * d];
            let norm = row.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            norms.push(norm);
            out.extend(row.iter().map(|a| a / norm));
        }
        let t = Tensor::new(vec![n, d], out)?;
        Ok(self.push(t, Op::L2Normalize { x, norms }))
    }

    /// Row-wise squared Euclidean distance of two [N, D] tensors, shape [N].
    pub fn row_sq_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sa != sb {
            return shape_err(format!("row_sq_distance shapes {sa:?} vs {sb:?}"));
        }
        let (n, d) = (sa[0], sa[1]);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let out = (0..n)
            .map(|r| (0..d).map(|j| (av[r * d + j] - bv[r * d + j]).powi(2)).sum())
            .collect();
        Ok(self.push(Tensor::new(vec![n], out)?, Op::RowSqDist { a, b }))
    }

    /// Row-wise Euclidean distance, shape [N].
    pub fn row_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let sq = self.row_sq_distance(a, b)?;
        Ok(self.sqrt(sq))
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| a.max(0.0).sqrt()).collect()).unwrap();
        self.push(t, Op::Sqrt(x))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return shape_err(format!("{name} shapes {:?} vs {:?}", va.shape(), vb.shape()));
        }
        Tensor::new(
            va.shape().to_vec(),
            va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect(),
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| a + c).collect()).unwrap();
        self.push(t, Op::AddScalar(x))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| a * c).collect()).unwrap();
        self.push(t, Op::Scale(x, c))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| a * a).collect()).unwrap();
        self.push(t, Op::Square(x))
    }

    /// max(0, x + margin), elementwise.
    pub fn hinge(&mut self, x: Var, margin: f64) -> Var {
        let shifted = self.add_scalar(x, margin);
        self.relu(shifted)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(x))
    }

    /// Per-row cross-entropy of softmax(logits) against `labels`, shape [N].
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let ls = self.value(logits).shape();
        if ls.len() != 2 || ls[0] != labels.len() {
            return shape_err(format!("cross-entropy logits {ls:?} with {} labels", labels.len()));
        }
        let (n, c) = (ls[0], ls[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return shape_err(format!("label {bad} out of range for {c} classes"));
        }
        let lv = self.value(logits).data();
        let mut probs = Vec::with_capacity(n * c);
        let mut losses = Vec::with_capacity(n);
        for r in 0..n {
            let row = &lv[r * c..(r + 1) * c];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            let lse = m + z.ln();
            losses.push(lse - row[labels[r]]);
            probs.extend(row.iter().map(|v| (v - lse).exp()));
        }
        let t = Tensor::new(vec![n], losses)?;
        Ok(self.push(
            t,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Smallest distance, over the current forward values, to a point where
    /// some operation is not differentiable. Infinity if there is none.
    pub fn kink_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) | Op::Sqrt(x) => {
                    for &a in self.value(*x).data() {
                        d = d.min(a.abs());
                    }
                }
                Op::MaxPool2 { min_gap, .. } => d = d.min(*min_gap),
                _ => {}
            }
        }
        d
    }

    /// Reverse accumulation from the one-element node `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(
            self.value(loss).len(),
            1,
            "backward() needs a scalar, got shape {:?}",
            self.value(loss).shape()
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(self.value(loss).shape().to_vec(), vec![1.0]).unwrap());
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let mut acc = |v: Var, t: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        let like = |v: Var, data: Vec<f64>| Tensor::new(self.value(v).shape().to_vec(), data).unwrap();
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, pad } => {
                let (xs, ws) = (self.value(*x).shape(), self.value(*w).shape());
                let (n, c, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
                let (o, k) = (ws[0], ws[2]);
                let plane = h * wd;
                let xv = self.value(*x).data();
                let wv = self.value(*w).data();
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; wv.len()];
                let mut gb = vec![0.0; o];
                for ni in 0..n {
                    for oi in 0..o {
                        let go = &gd[(ni * o + oi) * plane..(ni * o + oi + 1) * plane];
                        gb[oi] += go.iter().sum::<f64>();
                        for ci in 0..c {
                            let src = &xv[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                            let gsrc = &mut gx[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                            for ky in 0..k {
                                for kx in 0..k {
                                    let wi = ((oi * c + ci) * k + ky) * k + kx;
                                    let wt = wv[wi];
                                    let (dy, dx) = (ky as isize - *pad as isize, kx as isize - *pad as isize);
                                    let mut s = 0.0;
                                    conv_tap_read(go, src, h, wd, dy, dx, |gv, sv| s += gv * sv);
                                    gw[wi] += s;
                                    conv_tap_scatter(go, gsrc, h, wd, dy, dx, wt);
                                }
                            }
                        }
                    }
                }
                acc(*x, like(*x, gx));
                acc(*w, like(*w, gw));
                acc(*b, like(*b, gb));
            }
            Op::MaxPool2 { x, argmax, .. } => {
                let mut gx = vec![0.0; self.value(*x).len()];
                for (&src, &gv) in argmax.iter().zip(gd) {
                    gx[src] += gv;
                }
                acc(*x, like(*x, gx));
            }
            Op::Relu(x) => {
                let gx = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(&a, &gv)| if a > 0.0 { gv } else { 0.0 })
                    .collect();
                acc(*x, like(*x, gx));
            }
            Op::Dense { x, w, b } => {
                let (xs, ws) = (self.value(*x).shape(), self.value(*w).shape());
                let (n, i_dim, o_dim) = (xs[0], ws[0], ws[1]);
                let xv = self.value(*x).data();
                let wv = self.value(*w).data();
                let mut gx = vec![0.0; n * i_dim];
                let mut gw = vec![0.0; i_dim * o_dim];
                let mut gb = vec![0.0; o_dim];
                for ni in 0..n {
                    let grow = &gd[ni * o_dim..(ni + 1) * o_dim];
                    for (b_acc, &gv) in gb.iter_mut().zip(grow) {
                        *b_acc += gv;
                    }
                    for ii in 0..i_dim {
                        let wrow = &wv[ii * o_dim..(ii + 1) * o_dim];
                        gx[ni * i_dim + ii] = wrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        let a = xv[ni * i_dim + ii];
                        if a != 0.0 {
                            for (gwv, &gv) in gw[ii * o_dim..(ii + 1) * o_dim].iter_mut().zip(grow) {
                                *gwv += a * gv;
                            }
                        }
                    }
                }
                acc(*x, like(*x, gx));
                acc(*w, like(*w, gw));
                acc(*b, like(*b, gb));
            }
            Op::Reshape(x) => acc(*x, like(*x, gd.to_vec())),
            Op::L2Normalize { x, norms } => {
                let d = self.value(*x).shape()[1];
                let y = node.value.data();
                let mut gx = Vec::with_capacity(y.len());
                for (r, &norm) in norms.iter().enumerate() {
                    let yr = &y[r * d..(r + 1) * d];
                    let gr = &gd[r * d..(r + 1) * d];
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    gx.extend(yr.iter().zip(gr).map(|(yv, gv)| (gv - yv * dot) / norm));
                }
                acc(*x, like(*x, gx));
            }
            Op::RowSqDist { a, b } => {
                let d = self.value(*a).shape()[1];
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let ga: Vec<f64> = av
                    .iter()
                    .zip(bv)
                    .enumerate()
                    .map(|(j, (x, y))| 2.0 * (x - y) * gd[j / d])
                    .collect();
                let gb = ga.iter().map(|v| -v).collect();
                acc(*a, like(*a, ga));
                acc(*b, like(*b, gb));
            }
            Op::Sqrt(x) => {
                let gx = node
                    .value
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(&y, &gv)| if y > 0.0 { gv / (2.0 * y) } else { 0.0 })
                    .collect();
                acc(*x, like(*x, gx));
            }
            Op::Add(a, b) => {
                acc(*a, like(*a, gd.to_vec()));
                acc(*b, like(*b, gd.to_vec()));
            }
            Op::Sub(a, b) => {
                acc(*a, like(*a, gd.to_vec()));
                acc(*b, like(*b, gd.iter().map(|v| -v).collect()));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, like(*a, gd.iter().zip(bv).map(|(g, y)| g * y).collect()));
                acc(*b, like(*b, gd.iter().zip(av).map(|(g, x)| g * x).collect()));
            }
            Op::AddScalar(x) => acc(*x, like(*x, gd.to_vec())),
            Op::Scale(x, c) => acc(*x, like(*x, gd.iter().map(|v| v * c).collect())),
            Op::Square(x) => {
                let xv = self.value(*x).data();
                acc(*x, like(*x, gd.iter().zip(xv).map(|(g, a)| 2.0 * a * g).collect()));
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                acc(*x, like(*x, vec![gd[0]; n]));
            }
            Op::Mean(x) => {
                let n = self.value(*x).len();
                acc(*x, like(*x, vec![gd[0] / n as f64; n]));
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let c = self.value(*logits).shape()[1];
                let mut gl = probs.clone();
                for (r, &l) in labels.iter().enumerate() {
                    gl[r * c + l] -= 1.0;
                    for v in &mut gl[r * c..(r + 1) * c] {
                        *v *= gd[r];
                    }
                }
                acc(*logits, like(*logits, gl));
            }
        }
    }
}

/// Visits (dst, src) pairs for one kernel tap at offset (dy, dx), where
/// `dst[y][x]` pairs with `src[y + dy][x + dx]` inside the plane.
#[inline]
fn conv_tap(dst: &mut [f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize, mut f: impl FnMut(&mut f64, f64)) {
    let (y0, y1) = tap_range(h, dy);
    let (x0, x1) = tap_range(w, dx);
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let drow = &mut dst[y * w + x0..y * w + x1];
        let srow = &src[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
        for (d, &s) in drow.iter_mut().zip(srow) {
            f(d, s);
        }
    }
}

#[inline]
fn conv_tap_read(go: &[f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize, mut f: impl FnMut(f64, f64)) {
    let (y0, y1) = tap_range(h, dy);
    let (x0, x1) = tap_range(w, dx);
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let grow = &go[y * w + x0..y * w + x1];
        let srow = &src[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
        for (&g, &s) in grow.iter().zip(srow) {
            f(g, s);
        }
    }
}

#[inline]
fn conv_tap_scatter(go: &[f64], gsrc: &mut [f64], h: usize, w: usize, dy: isize, dx: isize, wt: f64) {
    let (y0, y1) = tap_range(h, dy);
    let (x0, x1) = tap_range(w, dx);
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let grow = &go[y * w + x0..y * w + x1];
        let srow = &mut gsrc[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
        for (s, &g) in srow.iter_mut().zip(grow) {
            *s += wt * g;
        }
    }
}

/// Output coordinates [lo, hi) whose input coordinate `y + d` is in [0, n).
#[inline]
fn tap_range(n: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).min(n as isize).max(0) as usize;
    (lo.min(hi), hi)
}
