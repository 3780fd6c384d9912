use alloc::vec::Vec;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{bail, Result};
use crate::forward::{zero_filled, Measurements};
use crate::grid::{ComplexGrid, RealGrid};
use crate::numerics::DEFAULT_LEVELS;

use super::{NetConfig, NetParams, Residual};

/// Tape handles of every weight and bias, mirroring [`NetParams::blocks`].
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub blocks: Vec<Vec<(Var, Var)>>,
}

impl ParamVars {
    /// Handles in [`NetParams::tensors`] order.
    pub fn flat(&self) -> Vec<Var> {
        self.blocks.iter().flatten().flat_map(|&(w, b)| [w, b]).collect()
    }
}

/// Places the parameters on `tape`, as trainable leaves or as constants.
pub fn register_params(tape: &mut Tape, params: &NetParams, trainable: bool) -> ParamVars {
    let mut leaf = |t: &Tensor| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) };
    let blocks = params
        .blocks
        .iter()
        .map(|block| block.iter().map(|l| (leaf(&l.weight), leaf(&l.bias))).collect())
        .collect();
    ParamVars { blocks }
}

pub(crate) fn complex_tensor(g: &ComplexGrid) -> Tensor {
    let mut data = Vec::with_capacity(2 * g.len());
    data.extend(g.as_slice().iter().map(|c| c.re));
    data.extend(g.as_slice().iter().map(|c| c.im));
    Tensor::new(&[2, g.height(), g.width()], data).expect("two planes")
}

pub(crate) fn tensor_complex(t: &Tensor) -> Result<ComplexGrid> {
    let (c, h, w) = t.chw()?;
    if c != 2 {
        bail!(Shape, "expected 2 channels, got {c}");
    }
    let (re, im) = t.data().split_at(h * w);
    Ok(ComplexGrid::from_fn(h, w, |i, j| num_complex::Complex64::new(re[i * w + j], im[i * w + j])))
}

#[derive(Debug, Clone, Copy)]
pub struct NetOutput {
    /// `x_{K+1}` as a `2 x H x W` tensor.
    pub recon: Var,
    /// Input of the last data-consistency layer.
    pub last_z: Var,
}

fn cnn(tape: &mut Tape, x: Var, layers: &[(Var, Var)]) -> Result<Var> {
    let mut h = x;
    for (i, &(w, b)) in layers.iter().enumerate() {
        h = tape.conv2d(h, w, b)?;
        if i + 1 < layers.len() {
            h = tape.relu(h)?;
        }
    }
    Ok(h)
}

/// Records the unrolled network on `tape`.
pub fn net_forward(tape: &mut Tape, params: &ParamVars, y: &Measurements, cfg: &NetConfig) -> Result<NetOutput> {
    cfg.validate()?;
    if params.blocks.len() != cfg.param_blocks() {
        bail!(Shape, "expected {} parameter blocks, got {}", cfg.param_blocks(), params.blocks.len());
    }
    let x1 = tape.constant(complex_tensor(&zero_filled(y)));
    let mut x = x1;
    let mut last_z = x1;
    for k in 0..cfg.blocks {
        let layers = &params.blocks[if cfg.shared_weights { 0 } else { k }];
        let r = cnn(tape, x, layers)?;
        let z = match cfg.residual {
            Residual::None => r,
            Residual::PerBlock => tape.add(x, r)?,
            Residual::Global => tape.add(x1, r)?,
        };
        let zhat = tape.fft(z)?;
        let blended = tape.dc_blend(zhat, y.ksp(), y.mask(), cfg.lambda)?;
        x = tape.ifft(blended)?;
        last_z = z;
    }
    Ok(NetOutput { recon: x, last_z })
}

/// Inference: the complex reconstruction of `y`.
pub fn reconstruct(params: &NetParams, y: &Measurements, cfg: &NetConfig) -> Result<ComplexGrid> {
    params.check(cfg)?;
    let mut tape = Tape::new();
    let pv = register_params(&mut tape, params, false);
    let out = net_forward(&mut tape, &pv, y, cfg)?;
    tensor_complex(tape.value(out.recon))
}

/// `||F_Omega recon - y||^2 + alpha TV(recon) + beta ||W recon||_1`, channels summed.
pub fn unsup_loss(tape: &mut Tape, recon: Var, y: &Measurements, alpha: f64, beta: f64) -> Result<Var> {
    let khat = tape.fft(recon)?;
    let res = tape.masked_residual(khat, y.ksp(), y.mask())?;
    let mut loss = tape.sum_squares(res)?;
    if alpha != 0.0 {
        let tv = tape.tv_penalty(recon)?;
        let tv = tape.scale(tv, alpha)?;
        loss = tape.add(loss, tv)?;
    }
    if beta != 0.0 {
        let wl = tape.wavelet_l1(recon, DEFAULT_LEVELS)?;
        let wl = tape.scale(wl, beta)?;
        loss = tape.add(loss, wl)?;
    }
    Ok(loss)
}

/// Squared error against a real ground truth whose imaginary part is zero.
pub fn sup_loss(tape: &mut Tape, recon: Var, truth: &RealGrid) -> Result<Var> {
    let target = tape.constant(complex_tensor(&truth.to_complex()));
    if tape.value(recon).shape() != tape.value(target).shape() {
        bail!(Shape, "reconstruction {:?} vs truth {:?}", tape.value(recon).shape(), truth.shape());
    }
    let d = tape.sub(recon, target)?;
    tape.sum_squares(d)
}
