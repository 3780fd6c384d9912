//! Tape-based reverse-mode differentiation over real tensors.
//!
//! Values are computed eagerly as primitives are recorded. Complex data moves
//! through the tape as `2 x H x W` tensors holding the real and imaginary
//! planes. [`Tape::backward`] walks the recording in reverse and returns a
//! gradient for every node that depends on a parameter.

mod adam;
mod kernels;
mod tensor;

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

pub use adam::{adam_update, Adam, AdamState};
pub use tensor::Tensor;

use crate::error::{bail, Result};
use crate::grid::ComplexGrid;
use crate::numerics::sign;
use crate::sampling::Mask;
use kernels::ConvDims;

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a particular tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d { input: usize, weight: usize, bias: usize, dims: ConvDims },
    Relu(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Scale(usize, f64),
    Fft(usize),
    Ifft(usize),
    /// Sampled bins get `(y + lambda z) / (1 + lambda)`; the rest pass through.
    DcBlend { input: usize, mask: Vec<bool>, lambda: f64 },
    /// `mask * x - y`.
    MaskedResidual { input: usize, mask: Vec<bool> },
    Sum(usize),
    SumSquares(usize),
    L1(usize),
    Tv(usize),
    WaveletL1 { input: usize, levels: usize },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`; `None` for constants.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            bail!(Graph, "variable does not belong to this tape");
        }
        Ok(v.index)
    }

    fn node(&self, v: Var) -> Result<&Node> {
        Ok(&self.nodes[self.idx(v)?])
    }

    /// Differentiable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.node(v).expect("variable from another tape").value
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (x, wt, b) = (self.node(input)?, self.node(weight)?, self.node(bias)?);
        let (cin, h, w) = x.value.chw()?;
        let (cout, wcin, k) = match wt.value.shape()[..] {
            [o, c, k1, k2] if k1 == k2 => (o, c, k1),
            _ => bail!(Shape, "conv weight must be O x C x k x k, got {:?}", wt.value.shape()),
        };
        if wcin != cin {
            bail!(Shape, "conv expects {wcin} input channels, got {cin}");
        }
        if k % 2 == 0 {
            bail!(Shape, "conv kernel size must be odd, got {k}");
        }
        if b.value.shape() != [cout] {
            bail!(Shape, "conv bias must have shape [{cout}], got {:?}", b.value.shape());
        }
        let dims = ConvDims { cin, cout, h, w, k };
        let out = kernels::conv2d_forward(dims, x.value.data(), wt.value.data(), b.value.data());
        let rg = x.requires_grad || wt.requires_grad || b.requires_grad;
        let op = Op::Conv2d { input: input.index, weight: weight.index, bias: bias.index, dims };
        Ok(self.push(Tensor::new(&[cout, h, w], out)?, op, rg))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let n = self.node(x)?;
        let data = n.value.data().iter().map(|&v| v.max(0.0)).collect();
        let t = Tensor::new(n.value.shape(), data)?;
        let rg = n.requires_grad;
        Ok(self.push(t, Op::Relu(x.index), rg))
    }

    fn binary(&mut self, a: Var, b: Var, sub: bool) -> Result<Var> {
        let (na, nb) = (self.node(a)?, self.node(b)?);
        if na.value.shape() != nb.value.shape() {
            bail!(Shape, "elementwise op on {:?} and {:?}", na.value.shape(), nb.value.shape());
        }
        let data = na
            .value
            .data()
            .iter()
            .zip(nb.value.data())
            .map(|(x, y)| if sub { x - y } else { x + y })
            .collect();
        let t = Tensor::new(na.value.shape(), data)?;
        let rg = na.requires_grad || nb.requires_grad;
        let op = if sub { Op::Sub(a.index, b.index) } else { Op::Add(a.index, b.index) };
        Ok(self.push(t, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, false)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, true)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let n = self.node(x)?;
        let t = Tensor::new(n.value.shape(), n.value.data().iter().map(|v| v * c).collect())?;
        let rg = n.requires_grad;
        Ok(self.push(t, Op::Scale(x.index, c), rg))
    }

    fn complex_dims(&self, x: Var) -> Result<(usize, usize)> {
        match self.node(x)?.value.chw()? {
            (2, h, w) => Ok((h, w)),
            (c, _, _) => bail!(Shape, "expected 2 (real, imaginary) channels, got {c}"),
        }
    }

    fn fourier(&mut self, x: Var, inverse: bool) -> Result<Var> {
        let (h, w) = self.complex_dims(x)?;
        let n = self.node(x)?;
        let out = kernels::fft_planes(n.value.data(), h, w, inverse)?;
        let rg = n.requires_grad;
        let op = if inverse { Op::Ifft(x.index) } else { Op::Fft(x.index) };
        Ok(self.push(Tensor::new(&[2, h, w], out)?, op, rg))
    }

    /// Centered orthonormal DFT of a 2-channel complex tensor.
    pub fn fft(&mut self, x: Var) -> Result<Var> {
        self.fourier(x, false)
    }

    pub fn ifft(&mut self, x: Var) -> Result<Var> {
        self.fourier(x, true)
    }

    fn check_kspace(&self, x: Var, y: &ComplexGrid, mask: &Mask) -> Result<(usize, usize)> {
        let (h, w) = self.complex_dims(x)?;
        if y.shape() != (h, w) || mask.shape() != (h, w) {
            bail!(Shape, "k-space tensor {h}x{w} vs measurements {:?} and mask {:?}", y.shape(), mask.shape());
        }
        Ok((h, w))
    }

    /// Data-consistency layer on a k-space tensor; `y` and `mask` are constants.
    pub fn dc_blend(&mut self, zhat: Var, y: &ComplexGrid, mask: &Mask, lambda: f64) -> Result<Var> {
        let (h, w) = self.check_kspace(zhat, y, mask)?;
        let n = self.node(zhat)?;
        let plane = h * w;
        let mut out = n.value.data().to_vec();
        for (p, (&b, yv)) in mask.bits().iter().zip(y.as_slice()).enumerate() {
            if b {
                out[p] = (yv.re + lambda * out[p]) / (1.0 + lambda);
                out[plane + p] = (yv.im + lambda * out[plane + p]) / (1.0 + lambda);
            }
        }
        let rg = n.requires_grad;
        let op = Op::DcBlend { input: zhat.index, mask: mask.bits().to_vec(), lambda };
        Ok(self.push(Tensor::new(&[2, h, w], out)?, op, rg))
    }

    /// `mask * xhat - y` on a k-space tensor.
    pub fn masked_residual(&mut self, xhat: Var, y: &ComplexGrid, mask: &Mask) -> Result<Var> {
        let (h, w) = self.check_kspace(xhat, y, mask)?;
        let n = self.node(xhat)?;
        let plane = h * w;
        let mut out = vec![0.0; 2 * plane];
        for (p, (&b, yv)) in mask.bits().iter().zip(y.as_slice()).enumerate() {
            let (re, im) = if b { (n.value.data()[p], n.value.data()[plane + p]) } else { (0.0, 0.0) };
            out[p] = re - yv.re;
            out[plane + p] = im - yv.im;
        }
        let rg = n.requires_grad;
        let op = Op::MaskedResidual { input: xhat.index, mask: mask.bits().to_vec() };
        Ok(self.push(Tensor::new(&[2, h, w], out)?, op, rg))
    }

    fn reduce(&mut self, x: Var, value: f64, op: Op) -> Result<Var> {
        let rg = self.node(x)?.requires_grad;
        Ok(self.push(Tensor::scalar(value), op, rg))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.node(x)?.value.data().iter().sum();
        self.reduce(x, s, Op::Sum(x.index))
    }

    pub fn sum_squares(&mut self, x: Var) -> Result<Var> {
        let s = self.node(x)?.value.data().iter().map(|v| v * v).sum();
        self.reduce(x, s, Op::SumSquares(x.index))
    }

    pub fn l1_norm(&mut self, x: Var) -> Result<Var> {
        let s = self.node(x)?.value.data().iter().map(|v| v.abs()).sum();
        self.reduce(x, s, Op::L1(x.index))
    }

    /// Anisotropic TV of every channel of a `C x H x W` tensor, summed.
    pub fn tv_penalty(&mut self, x: Var) -> Result<Var> {
        let (c, h, w) = self.node(x)?.value.chw()?;
        let s = kernels::tv_forward(self.node(x)?.value.data(), c, h, w);
        self.reduce(x, s, Op::Tv(x.index))
    }

    /// `||W x_c||_1` summed over the channels of a `C x H x W` tensor.
    pub fn wavelet_l1(&mut self, x: Var, levels: usize) -> Result<Var> {
        let (c, h, w) = self.node(x)?.value.chw()?;
        let s = kernels::wavelet_l1_forward(self.node(x)?.value.data(), c, h, w, levels)?;
        self.reduce(x, s, Op::WaveletL1 { input: x.index, levels })
    }

    /// Reverse-mode accumulation from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let r = self.idx(root)?;
        if !self.nodes[r].value.is_scalar() {
            bail!(Graph, "backward root must be a scalar, got shape {:?}", self.nodes[r].value.shape());
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; r + 1];
        grads[r] = Some(vec![1.0]);

        for i in (0..=r).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads)?;
            grads[i] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| match (g, n.requires_grad, &n.op) {
                (Some(g), _, _) => Some(Tensor::new(n.value.shape(), g).expect("gradient matches value shape")),
                // disconnected parameters
                (None, true, Op::Leaf) => Some(Tensor::zeros(n.value.shape())),
                _ => None,
            })
            .chain(self.nodes[r + 1..].iter().map(|n| {
                (n.requires_grad && matches!(n.op, Op::Leaf)).then(|| Tensor::zeros(n.value.shape()))
            }))
            .collect();
        Ok(Gradients { tape: self.id, grads })
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let val = |i: usize| self.nodes[i].value.data();
        let wants = |i: usize| self.nodes[i].requires_grad;
        let mut acc = |i: usize, contrib: &mut dyn Iterator<Item = f64>| {
            if !self.nodes[i].requires_grad {
                return;
            }
            match &mut grads[i] {
                Some(existing) => existing.iter_mut().zip(contrib).for_each(|(e, c)| *e += c),
                slot => *slot = Some(contrib.collect()),
            }
        };
        match *op {
            Op::Leaf => {}
            Op::Conv2d { input, weight, bias, dims } => {
                let (gin, gw, gb) = kernels::conv2d_backward(dims, val(input), val(weight), g);
                acc(input, &mut gin.into_iter());
                acc(weight, &mut gw.into_iter());
                acc(bias, &mut gb.into_iter());
            }
            Op::Relu(x) => {
                acc(x, &mut val(x).iter().zip(g).map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 }));
            }
            Op::Add(a, b) => {
                acc(a, &mut g.iter().copied());
                acc(b, &mut g.iter().copied());
            }
            Op::Sub(a, b) => {
                acc(a, &mut g.iter().copied());
                acc(b, &mut g.iter().map(|v| -v));
            }
            Op::Scale(x, c) => acc(x, &mut g.iter().map(|v| v * c)),
            Op::Fft(x) | Op::Ifft(x) => {
                if wants(x) {
                    let (_, h, w) = out.chw()?;
                    // adjoint of a unitary map is its inverse
                    let back = kernels::fft_planes(g, h, w, matches!(op, Op::Fft(_)))?;
                    acc(x, &mut back.into_iter());
                }
            }
            Op::DcBlend { input, ref mask, lambda } => {
                let plane = mask.len();
                let keep = lambda / (1.0 + lambda);
                acc(input, &mut g.iter().enumerate().map(|(p, &gv)| if mask[p % plane] { gv * keep } else { gv }));
            }
            Op::MaskedResidual { input, ref mask } => {
                let plane = mask.len();
                acc(input, &mut g.iter().enumerate().map(|(p, &gv)| if mask[p % plane] { gv } else { 0.0 }));
            }
            Op::Sum(x) => acc(x, &mut core::iter::repeat_n(g[0], val(x).len())),
            Op::SumSquares(x) => acc(x, &mut val(x).iter().map(|v| 2.0 * v * g[0])),
            Op::L1(x) => acc(x, &mut val(x).iter().map(|&v| sign(v) * g[0])),
            Op::Tv(x) => {
                if wants(x) {
                    let (c, h, w) = self.nodes[x].value.chw()?;
                    let sub = kernels::tv_backward(val(x), c, h, w);
                    acc(x, &mut sub.into_iter().map(|v| v * g[0]));
                }
            }
            Op::WaveletL1 { input, levels } => {
                if wants(input) {
                    let (c, h, w) = self.nodes[input].value.chw()?;
                    let sub = kernels::wavelet_l1_backward(val(input), c, h, w, levels)?;
                    acc(input, &mut sub.into_iter().map(|v| v * g[0]));
                }
            }
        }
        Ok(())
    }
}
