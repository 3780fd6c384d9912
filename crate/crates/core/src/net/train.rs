use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{adam_update, Adam, AdamState, Tape, Tensor};
use crate::clock::{Clock, NoClock};
use crate::error::{bail, Result};
use crate::forward::Measurements;
use crate::grid::RealGrid;

use super::model::{net_forward, register_params, sup_loss, unsup_loss};
use super::{init_net, NetConfig, NetParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Classical objective on the measurements; ground truth is never read.
    Unsupervised,
    /// Squared error against the ground truth.
    Supervised,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub alpha: f64,
    pub beta: f64,
    pub mode: LossMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, batch: 4, epochs: 30, alpha: 0.005, beta: 0.002, mode: LossMode::Unsupervised, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            bail!(Domain, "learning rate must be finite and nonnegative, got {}", self.lr);
        }
        if self.batch == 0 || self.epochs == 0 {
            bail!(Domain, "batch and epochs must be positive");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            bail!(Domain, "alpha and beta must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainSample {
    pub y: Measurements,
    pub truth: Option<RealGrid>,
}

/// Per-epoch records; all three vectors have one entry per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub wall_time: Vec<f64>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

/// Evaluates independent per-sample closures. Results come back in index
/// order so batch accumulation stays deterministic.
pub trait BatchRunner {
    fn run<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchRunner for Sequential {
    fn run<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        (0..n).map(f).collect()
    }
}

/// Loss of one sample and its gradient for every parameter tensor.
pub fn sample_loss_and_grads(
    params: &NetParams,
    sample: &TrainSample,
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let pv = register_params(&mut tape, params, true);
    let out = net_forward(&mut tape, &pv, &sample.y, net_cfg)?;
    let loss = mode_loss(&mut tape, out.recon, sample, train_cfg)?;
    let grads = tape.backward(loss)?;
    let flat = pv
        .flat()
        .into_iter()
        .zip(params.tensors())
        .map(|(v, t)| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((tape.value(loss).item(), flat))
}

fn mode_loss(tape: &mut Tape, recon: crate::autodiff::Var, sample: &TrainSample, cfg: &TrainConfig) -> Result<crate::autodiff::Var> {
    match cfg.mode {
        LossMode::Unsupervised => unsup_loss(tape, recon, &sample.y, cfg.alpha, cfg.beta),
        LossMode::Supervised => match &sample.truth {
            Some(t) => sup_loss(tape, recon, t),
            None => bail!(Data, "supervised loss needs a ground-truth image"),
        },
    }
}

fn sample_loss(params: &NetParams, sample: &TrainSample, net_cfg: &NetConfig, train_cfg: &TrainConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let pv = register_params(&mut tape, params, false);
    let out = net_forward(&mut tape, &pv, &sample.y, net_cfg)?;
    let loss = mode_loss(&mut tape, out.recon, sample, train_cfg)?;
    Ok(tape.value(loss).item())
}

/// Mean training-mode loss over `samples`.
pub fn validation_loss(
    params: &NetParams,
    samples: &[TrainSample],
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
    runner: &impl BatchRunner,
) -> Result<f64> {
    if samples.is_empty() {
        bail!(Data, "empty validation set");
    }
    let losses = runner.run(samples.len(), &|i| sample_loss(params, &samples[i], net_cfg, train_cfg));
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / samples.len() as f64)
}

fn check_dataset(train: &[TrainSample], val: &[TrainSample], cfg: &TrainConfig) -> Result<()> {
    if train.is_empty() {
        bail!(Data, "training set is empty");
    }
    let shape = train[0].y.shape();
    for s in train.iter().chain(val) {
        if s.y.shape() != shape {
            bail!(Data, "mixed measurement shapes {:?} and {:?}", shape, s.y.shape());
        }
        if cfg.mode == LossMode::Supervised {
            match &s.truth {
                None => bail!(Data, "supervised training needs ground truth for every sample"),
                Some(t) if t.shape() != shape => bail!(Data, "truth {:?} vs measurements {:?}", t.shape(), shape),
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Mini-batch Adam from a seeded initialization; returns the parameters with
/// the lowest validation loss (training loss when `val` is empty).
pub fn train(
    train: &[TrainSample],
    val: &[TrainSample],
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
) -> Result<(NetParams, TrainHistory)> {
    train_with(train, val, net_cfg, train_cfg, &NoClock, &Sequential)
}

/// [`train`] with timing and a custom batch runner.
pub fn train_with_clock(
    train: &[TrainSample],
    val: &[TrainSample],
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
    clock: &impl Clock,
) -> Result<(NetParams, TrainHistory)> {
    train_with(train, val, net_cfg, train_cfg, clock, &Sequential)
}

pub fn train_with(
    train: &[TrainSample],
    val: &[TrainSample],
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
    clock: &impl Clock,
    runner: &impl BatchRunner,
) -> Result<(NetParams, TrainHistory)> {
    net_cfg.validate()?;
    train_cfg.validate()?;
    check_dataset(train, val, train_cfg)?;

    let mut params = init_net(net_cfg, train_cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed ^ 0x0005_eed5_u64.rotate_left(40));
    let adam = Adam::with_lr(train_cfg.lr);
    let mut state = AdamState::new(&params.to_vec());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, NetParams)> = None;

    for epoch in 0..train_cfg.epochs {
        let t0 = clock.now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(train_cfg.batch) {
            let snapshot = &params;
            let results = runner.run(chunk.len(), &|i| {
                sample_loss_and_grads(snapshot, &train[chunk[i]], net_cfg, train_cfg)
            });
            let mut acc: Option<Vec<Tensor>> = None;
            for r in results {
                let (loss, grads) = r?;
                total += loss;
                match &mut acc {
                    None => acc = Some(grads),
                    Some(a) => {
                        for (x, g) in a.iter_mut().zip(&grads) {
                            x.data_mut().iter_mut().zip(g.data()).for_each(|(x, g)| *x += g);
                        }
                    }
                }
            }
            let mut acc = acc.expect("chunks are nonempty");
            let inv = 1.0 / chunk.len() as f64;
            acc.iter_mut().for_each(|t| t.data_mut().iter_mut().for_each(|v| *v *= inv));
            let mut flat = params.to_vec();
            adam_update(&mut flat, &acc, &mut state, &adam)?;
            for (dst, src) in params.tensors_mut().into_iter().zip(flat) {
                *dst = src;
            }
        }
        let train_loss = total / train.len() as f64;
        let val_loss = if val.is_empty() {
            train_loss
        } else {
            validation_loss(&params, val, net_cfg, train_cfg, runner)?
        };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.wall_time.push(clock.now() - t0);
        if val_loss.is_finite() && best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, params.clone()));
            history.best_epoch = epoch;
        }
    }
    let params = best.map(|(_, p)| p).unwrap_or(params);
    Ok((params, history))
}
