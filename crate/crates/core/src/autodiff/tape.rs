use super::kernels::{col2im_add, gemm, im2col, rm, tr, Window};
use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Option<Var> },
    Conv2d { x: Var, w: Var, b: Option<Var>, win: Window, batch: usize, out_channels: usize },
    ConvT2d { x: Var, w: Var, b: Option<Var>, win: Window, batch: usize, in_channels: usize },
    LeakyRelu { x: Var, slope: f32 },
    Tanh { x: Var },
    Softplus { x: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Scale { x: Var, factor: f32 },
    Reshape { x: Var },
    Sum { x: Var },
    MeanAbs { a: Var, b: Var },
    SumSquares { x: Var },
    MeanSquares { a: Var, b: Var },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Linear { x, w, b } | Op::Conv2d { x, w, b, .. } | Op::ConvT2d { x, w, b, .. } => {
                let mut v = vec![x, w];
                v.extend(b);
                v
            }
            Op::LeakyRelu { x, .. }
            | Op::Tanh { x }
            | Op::Softplus { x }
            | Op::Scale { x, .. }
            | Op::Reshape { x }
            | Op::Sum { x }
            | Op::SumSquares { x } => vec![x],
            Op::Add { a, b } | Op::Sub { a, b } | Op::MeanAbs { a, b } | Op::MeanSquares { a, b } => {
                vec![a, b]
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f32>,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f32>>,
}

/// Define-by-run record of a forward computation.
///
/// Nodes are appended in evaluation order, so every input precedes its
/// consumer and a reverse sweep is a valid topological traversal.
#[derive(Clone, Debug, Default)]
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

    fn push(&mut self, shape: Vec<usize>, value: Vec<f32>, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { shape, value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf holding a copy of `t`.
    pub fn leaf(&mut self, t: &Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: t.data().to_vec(),
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.leaf(t, false)
    }

    pub fn param(&mut self, t: &Tensor) -> Var {
        self.leaf(t, true)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f32] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f32 {
        self.nodes[v.0].value[0]
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("tape nodes hold consistent shapes")
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// `x[N,D] · w[D,M] + b[M]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
            return Err(shape_err("linear", format!("input {xs:?} vs weight {ws:?}")));
        }
        let (n, d, m) = (xs[0], xs[1], ws[1]);
        if let Some(b) = b {
            if self.shape(b) != [m] {
                return Err(shape_err("linear", format!("bias {:?}, expected [{m}]", self.shape(b))));
            }
        }
        let mut out = vec![0.0; n * m];
        gemm(n, d, m, self.value(x), rm(d), self.value(w), rm(m), 0.0, &mut out);
        if let Some(b) = b {
            let bias = self.value(b);
            for row in out.chunks_mut(m) {
                row.iter_mut().zip(bias).for_each(|(o, &bv)| *o += bv);
            }
        }
        Ok(self.push(vec![n, m], out, Op::Linear { x, w, b }))
    }

    /// Cross-correlation of `x[N,C,H,W]` with `w[K,C,kh,kw]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 {
            return Err(shape_err("conv2d", format!("input {xs:?}, kernel {ws:?}: both must be 4-D")));
        }
        if xs[1] != ws[1] {
            return Err(shape_err(
                "conv2d",
                format!("input has {} channels but kernel {ws:?} expects {}", xs[1], ws[1]),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be >= 1".into()));
        }
        let (n, c, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (k, kh, kw) = (ws[0], ws[2], ws[3]);
        if kh > h + 2 * pad || kw > wd + 2 * pad {
            return Err(shape_err("conv2d", format!("kernel {kh}x{kw} larger than padded input {h}x{wd}")));
        }
        let win = Window {
            channels: c,
            h,
            w: wd,
            kh,
            kw,
            stride,
            pad,
            ho: (h + 2 * pad - kh) / stride + 1,
            wo: (wd + 2 * pad - kw) / stride + 1,
        };
        self.check_bias("conv2d", b, k)?;
        let (rows, cols_n) = (win.col_rows(), win.col_cols());
        let mut cols = vec![0.0; rows * cols_n];
        let mut out = vec![0.0; n * k * cols_n];
        let in_len = c * h * wd;
        for i in 0..n {
            im2col(&win, &self.value(x)[i * in_len..(i + 1) * in_len], &mut cols);
            let dst = &mut out[i * k * cols_n..(i + 1) * k * cols_n];
            gemm(k, rows, cols_n, self.value(w), rm(rows), &cols, rm(cols_n), 0.0, dst);
            if let Some(b) = b {
                add_channel_bias(dst, self.value(b), cols_n);
            }
        }
        let shape = vec![n, k, win.ho, win.wo];
        Ok(self.push(shape, out, Op::Conv2d { x, w, b, win, batch: n, out_channels: k }))
    }

    /// Transposed convolution of `x[N,Cin,H,W]` with `w[Cin,Cout,kh,kw]`: the
    /// adjoint of [`Tape::conv2d`] under the same kernel. Output size is
    /// `(H-1)·stride - 2·pad + kh`.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 {
            return Err(shape_err("conv_transpose2d", format!("input {xs:?}, kernel {ws:?}: both must be 4-D")));
        }
        if xs[1] != ws[0] {
            return Err(shape_err(
                "conv_transpose2d",
                format!("input has {} channels but kernel {ws:?} expects {}", xs[1], ws[0]),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv_transpose2d stride must be >= 1".into()));
        }
        let (n, cin, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, kh, kw) = (ws[1], ws[2], ws[3]);
        let ho = ((h - 1) * stride + kh).checked_sub(2 * pad);
        let wo = ((wd - 1) * stride + kw).checked_sub(2 * pad);
        let (ho, wo) = match (ho, wo) {
            (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
            _ => {
                return Err(shape_err(
                    "conv_transpose2d",
                    format!("padding {pad} leaves no output for {h}x{wd} input and {kh}x{kw} kernel"),
                ))
            }
        };
        let win = Window { channels: cout, h: ho, w: wo, kh, kw, stride, pad, ho: h, wo: wd };
        self.check_bias("conv_transpose2d", b, cout)?;
        let (rows, cols_n) = (win.col_rows(), win.col_cols());
        let mut cols = vec![0.0; rows * cols_n];
        let out_len = cout * ho * wo;
        let mut out = vec![0.0; n * out_len];
        for i in 0..n {
            let xi = &self.value(x)[i * cin * cols_n..(i + 1) * cin * cols_n];
            gemm(rows, cin, cols_n, self.value(w), tr(rows), xi, rm(cols_n), 0.0, &mut cols);
            let dst = &mut out[i * out_len..(i + 1) * out_len];
            col2im_add(&win, &cols, dst);
            if let Some(b) = b {
                add_channel_bias(dst, self.value(b), ho * wo);
            }
        }
        let shape = vec![n, cout, ho, wo];
        Ok(self.push(shape, out, Op::ConvT2d { x, w, b, win, batch: n, in_channels: cin }))
    }

    fn check_bias(&self, op: &'static str, b: Option<Var>, channels: usize) -> Result<()> {
        match b {
            Some(b) if self.shape(b) != [channels] => Err(shape_err(
                op,
                format!("bias {:?}, expected [{channels}]", self.shape(b)),
            )),
            _ => Ok(()),
        }
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f32) -> Var {
        let out = self.value(x).iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect();
        self.push(self.shape(x).to_vec(), out, Op::LeakyRelu { x, slope })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, 0.0)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(self.shape(x).to_vec(), out, Op::Tanh { x })
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| v.max(0.0) + (-v.abs()).exp().ln_1p()).collect();
        self.push(self.shape(x).to_vec(), out, Op::Softplus { x })
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::Sub { a, b }))
    }

    pub fn scale(&mut self, x: Var, factor: f32) -> Var {
        let out = self.value(x).iter().map(|v| v * factor).collect();
        self.push(self.shape(x).to_vec(), out, Op::Scale { x, factor })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(shape_err("reshape", format!("cannot view {:?} as {shape:?}", self.shape(x))));
        }
        let out = self.value(x).to_vec();
        Ok(self.push(shape.to_vec(), out, Op::Reshape { x }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).iter().map(|&v| v as f64).sum();
        self.push(vec![1], vec![s as f32], Op::Sum { x })
    }

    /// Mean absolute difference.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("l1", a, b)?;
        let n = self.value(a).len() as f64;
        let s: f64 = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| (x - y).abs() as f64)
            .sum();
        Ok(self.push(vec![1], vec![(s / n) as f32], Op::MeanAbs { a, b }))
    }

    /// Sum of squared differences.
    pub fn l2(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        Ok(self.sum_squares(d))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).iter().map(|&v| (v as f64) * (v as f64)).sum();
        self.push(vec![1], vec![s as f32], Op::SumSquares { x })
    }

    /// Mean squared difference.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mse", a, b)?;
        let n = self.value(a).len() as f64;
        let s: f64 = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| {
                let d = (x - y) as f64;
                d * d
            })
            .sum();
        Ok(self.push(vec![1], vec![(s / n) as f32], Op::MeanSquares { a, b }))
    }

    /// Back-propagates from a scalar `loss`, adding into the gradient buffer
    /// of every reachable leaf that requires a gradient. Repeated calls
    /// accumulate.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(Error::NonScalarLoss(root.shape.clone()));
        }
        if !root.requires_grad {
            return Ok(());
        }
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut leaf_grads = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let need = |v: Var| nodes[v.0].requires_grad;
            let val = |v: Var| nodes[v.0].value.as_slice();
            match node.op {
                Op::Leaf => leaf_grads.push((i, g)),
                Op::Linear { x, w, b } => {
                    let (n, d) = (nodes[x.0].shape[0], nodes[x.0].shape[1]);
                    let m = node.shape[1];
                    if need(x) {
                        let dx = slot(&mut grads, x, n * d);
                        gemm(n, m, d, &g, rm(m), val(w), tr(m), 1.0, dx);
                    }
                    if need(w) {
                        let dw = slot(&mut grads, w, d * m);
                        gemm(d, n, m, val(x), tr(d), &g, rm(m), 1.0, dw);
                    }
                    if let Some(b) = b.filter(|&b| need(b)) {
                        let db = slot(&mut grads, b, m);
                        for row in g.chunks(m) {
                            db.iter_mut().zip(row).for_each(|(a, &r)| *a += r);
                        }
                    }
                }
                Op::Conv2d { x, w, b, win, batch, out_channels: k } => {
                    let (rows, ncol) = (win.col_rows(), win.col_cols());
                    let in_len = win.channels * win.h * win.w;
                    let mut cols = vec![0.0; rows * ncol];
                    for i in 0..batch {
                        let gi = &g[i * k * ncol..(i + 1) * k * ncol];
                        if need(w) {
                            im2col(&win, &val(x)[i * in_len..(i + 1) * in_len], &mut cols);
                            let dw = slot(&mut grads, w, k * rows);
                            gemm(k, ncol, rows, gi, rm(ncol), &cols, tr(ncol), 1.0, dw);
                        }
                        if need(x) {
                            gemm(rows, k, ncol, val(w), tr(rows), gi, rm(ncol), 0.0, &mut cols);
                            let dx = slot(&mut grads, x, batch * in_len);
                            col2im_add(&win, &cols, &mut dx[i * in_len..(i + 1) * in_len]);
                        }
                        if let Some(b) = b.filter(|&b| need(b)) {
                            channel_sums_add(gi, slot(&mut grads, b, k), ncol);
                        }
                    }
                }
                Op::ConvT2d { x, w, b, win, batch, in_channels: cin } => {
                    let (rows, ncol) = (win.col_rows(), win.col_cols());
                    let out_len = win.channels * win.h * win.w;
                    let mut cols = vec![0.0; rows * ncol];
                    for i in 0..batch {
                        let gi = &g[i * out_len..(i + 1) * out_len];
                        if need(x) || need(w) {
                            im2col(&win, gi, &mut cols);
                        }
                        if need(x) {
                            let dx = slot(&mut grads, x, batch * cin * ncol);
                            let dxi = &mut dx[i * cin * ncol..(i + 1) * cin * ncol];
                            gemm(cin, rows, ncol, val(w), rm(rows), &cols, rm(ncol), 1.0, dxi);
                        }
                        if need(w) {
                            let xi = &val(x)[i * cin * ncol..(i + 1) * cin * ncol];
                            let dw = slot(&mut grads, w, cin * rows);
                            gemm(cin, ncol, rows, xi, rm(ncol), &cols, tr(ncol), 1.0, dw);
                        }
                        if let Some(b) = b.filter(|&b| need(b)) {
                            channel_sums_add(gi, slot(&mut grads, b, win.channels), win.h * win.w);
                        }
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    let dx = slot(&mut grads, x, g.len());
                    for ((d, &gv), &xv) in dx.iter_mut().zip(&g).zip(val(x)) {
                        *d += if xv > 0.0 { gv } else { slope * gv };
                    }
                }
                Op::Tanh { x } => {
                    let dx = slot(&mut grads, x, g.len());
                    for ((d, &gv), &y) in dx.iter_mut().zip(&g).zip(&node.value) {
                        *d += gv * (1.0 - y * y);
                    }
                }
                Op::Softplus { x } => {
                    let dx = slot(&mut grads, x, g.len());
                    for ((d, &gv), &xv) in dx.iter_mut().zip(&g).zip(val(x)) {
                        *d += gv / (1.0 + (-xv).exp());
                    }
                }
                Op::Add { a, b } | Op::Sub { a, b } => {
                    let sign = if matches!(node.op, Op::Sub { .. }) { -1.0 } else { 1.0 };
                    if need(a) {
                        let da = slot(&mut grads, a, g.len());
                        da.iter_mut().zip(&g).for_each(|(d, &gv)| *d += gv);
                    }
                    if need(b) {
                        let db = slot(&mut grads, b, g.len());
                        db.iter_mut().zip(&g).for_each(|(d, &gv)| *d += sign * gv);
                    }
                }
                Op::Scale { x, factor } => {
                    let dx = slot(&mut grads, x, g.len());
                    dx.iter_mut().zip(&g).for_each(|(d, &gv)| *d += factor * gv);
                }
                Op::Reshape { x } => {
                    let dx = slot(&mut grads, x, g.len());
                    dx.iter_mut().zip(&g).for_each(|(d, &gv)| *d += gv);
                }
                Op::Sum { x } => {
                    let len = nodes[x.0].value.len();
                    slot(&mut grads, x, len).iter_mut().for_each(|d| *d += g[0]);
                }
                Op::SumSquares { x } => {
                    let xs = val(x);
                    let dx = slot(&mut grads, x, xs.len());
                    dx.iter_mut().zip(xs).for_each(|(d, &v)| *d += 2.0 * v * g[0]);
                }
                Op::MeanAbs { a, b } | Op::MeanSquares { a, b } => {
                    let (av, bv) = (val(a), val(b));
                    let scale = g[0] / av.len() as f32;
                    let local: Vec<f32> = if matches!(node.op, Op::MeanAbs { .. }) {
                        av.iter().zip(bv).map(|(x, y)| sign(x - y) * scale).collect()
                    } else {
                        av.iter().zip(bv).map(|(x, y)| 2.0 * (x - y) * scale).collect()
                    };
                    if need(a) {
                        let da = slot(&mut grads, a, local.len());
                        da.iter_mut().zip(&local).for_each(|(d, &l)| *d += l);
                    }
                    if need(b) {
                        let db = slot(&mut grads, b, local.len());
                        db.iter_mut().zip(&local).for_each(|(d, &l)| *d -= l);
                    }
                }
            }
        }

        for (i, g) in leaf_grads {
            match &mut self.nodes[i].grad {
                Some(buf) => buf.iter_mut().zip(&g).for_each(|(b, &v)| *b += v),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }
}

fn sign(v: f32) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn slot(grads: &mut [Option<Vec<f32>>], v: Var, len: usize) -> &mut [f32] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_channel_bias(dst: &mut [f32], bias: &[f32], plane: usize) {
    for (chunk, &b) in dst.chunks_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn channel_sums_add(g: &[f32], db: &mut [f32], plane: usize) {
    for (chunk, d) in g.chunks(plane).zip(db.iter_mut()) {
        *d += chunk.iter().sum::<f32>();
    }
}
