//! Unrolled reconstruction network: `K` blocks of a small CNN regularizer
//! followed by the closed-form data-consistency layer.

mod model;
mod train;

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::error::{bail, Result};

pub use model::{net_forward, reconstruct, register_params, sup_loss, unsup_loss, NetOutput, ParamVars};
pub use train::{
    train_with, BatchRunner, Sequential,
    sample_loss_and_grads, train, train_with_clock, validation_loss, LossMode, TrainConfig,
    TrainHistory, TrainSample,
};

/// Where each block's skip connection comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Residual {
    /// `z_k = CNN_k(x_k)`.
    None,
    /// `z_k = x_k + CNN_k(x_k)`.
    PerBlock,
    /// `z_k = x_1 + CNN_k(x_k)`, adding the zero-filled input in every block.
    Global,
}

impl Residual {
    pub fn code(self) -> u8 {
        match self {
            Residual::None => 0,
            Residual::PerBlock => 1,
            Residual::Global => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Residual::None),
            1 => Some(Residual::PerBlock),
            2 => Some(Residual::Global),
            _ => None,
        }
    }
}

/// Architecture of the unrolled network. Defaults are desk scale; the
/// full-size model used 25 blocks of 5 layers with 64 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub blocks: usize,
    pub layers_per_block: usize,
    pub channels: usize,
    pub kernel: usize,
    pub lambda: f64,
    pub residual: Residual,
    pub shared_weights: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            blocks: 5,
            layers_per_block: 3,
            channels: 16,
            kernel: 3,
            lambda: 1.8,
            residual: Residual::PerBlock,
            shared_weights: false,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.layers_per_block == 0 || self.channels == 0 || self.kernel == 0 {
            bail!(Domain, "network sizes must be positive: {self:?}");
        }
        if self.kernel.is_multiple_of(2) {
            bail!(Domain, "kernel size must be odd, got {}", self.kernel);
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            bail!(Domain, "lambda must be finite and nonnegative, got {}", self.lambda);
        }
        Ok(())
    }

    /// Number of distinct parameter blocks.
    pub fn param_blocks(&self) -> usize {
        if self.shared_weights {
            1
        } else {
            self.blocks
        }
    }

    /// `(in, out)` channels of every layer in a block. The first layer reads the
    /// (real, imaginary) pair and the last one writes it back.
    pub fn layer_channels(&self) -> Vec<(usize, usize)> {
        let l = self.layers_per_block;
        (0..l)
            .map(|i| {
                let cin = if i == 0 { 2 } else { self.channels };
                let cout = if i + 1 == l { 2 } else { self.channels };
                (cin, cout)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Parameters `theta_k` of every block, or a single shared block.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub blocks: Vec<Vec<ConvLayer>>,
}

impl NetParams {
    /// Tensors in declaration order: block, layer, weight then bias.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.blocks.iter().flatten().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.blocks.iter_mut().flatten().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn to_vec(&self) -> Vec<Tensor> {
        self.tensors().into_iter().cloned().collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks that the shapes agree with `cfg`.
    pub fn check(&self, cfg: &NetConfig) -> Result<()> {
        if self.blocks.len() != cfg.param_blocks() {
            bail!(Shape, "expected {} parameter blocks, got {}", cfg.param_blocks(), self.blocks.len());
        }
        let plan = cfg.layer_channels();
        for block in &self.blocks {
            if block.len() != plan.len() {
                bail!(Shape, "expected {} layers per block, got {}", plan.len(), block.len());
            }
            for (layer, &(cin, cout)) in block.iter().zip(&plan) {
                if layer.weight.shape() != [cout, cin, cfg.kernel, cfg.kernel] || layer.bias.shape() != [cout] {
                    bail!(Shape, "layer shape {:?} does not match {cout}x{cin}x{k}x{k}", layer.weight.shape(), k = cfg.kernel);
                }
            }
        }
        Ok(())
    }
}

/// He-style uniform weights with bound `sqrt(6 / fan_in)` and zero biases.
pub fn init_net(cfg: &NetConfig, seed: u64) -> Result<NetParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cfg.kernel;
    let blocks = (0..cfg.param_blocks())
        .map(|_| {
            cfg.layer_channels()
                .into_iter()
                .map(|(cin, cout)| {
                    let bound = libm::sqrt(6.0 / (cin * k * k) as f64);
                    let data = (0..cout * cin * k * k).map(|_| rng.random_range(-bound..bound)).collect();
                    ConvLayer {
                        weight: Tensor::new(&[cout, cin, k, k], data).expect("sized above"),
                        bias: Tensor::zeros(&[cout]),
                    }
                })
                .collect()
        })
        .collect();
    Ok(NetParams { blocks })
}

/// All weights set to zero, so every CNN outputs zero.
pub fn zero_net(cfg: &NetConfig) -> Result<NetParams> {
    let mut p = init_net(cfg, 0)?;
    for t in p.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(p)
}
