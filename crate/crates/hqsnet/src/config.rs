//! `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use hqsnet_core::hqs::HqsConfig;
use hqsnet_core::net::{LossMode, NetConfig, Residual, TrainConfig};

use crate::error::{io_err, HarnessError, Result};

pub const DEFAULT_SIGMAS: [f64; 5] = [0.01, 0.025, 0.05, 0.075, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ZeroFill,
    Hqs,
    HqsNet,
    Cascade,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ZeroFill, Method::Hqs, Method::HqsNet, Method::Cascade];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ZeroFill => "zerofill",
            Method::Hqs => "hqs",
            Method::HqsNet => "hqsnet",
            Method::Cascade => "cascade",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    /// Training mode of a learned method.
    pub fn loss_mode(self) -> Option<LossMode> {
        match self {
            Method::HqsNet => Some(LossMode::Unsupervised),
            Method::Cascade => Some(LossMode::Supervised),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseDomain {
    None,
    Image,
    Kspace,
}

impl NoiseDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseDomain::None => "none",
            NoiseDomain::Image => "image",
            NoiseDomain::Kspace => "kspace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [NoiseDomain::None, NoiseDomain::Image, NoiseDomain::Kspace].into_iter().find(|d| d.as_str() == s)
    }
}

/// Independent RNG stream `stream` of the master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(master ^ mix(stream))
}

pub mod stream {
    pub const MASK: u64 = 1;
    pub const DATA: u64 = 2;
    pub const TRAIN_HQSNET: u64 = 3;
    pub const TRAIN_CASCADE: u64 = 4;
    pub const NOISE: u64 = 100;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: PathBuf,
    pub out: PathBuf,
    mask: Option<PathBuf>,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub accel: f32,
    pub order: u8,
    mask_seed: Option<u64>,
    pub solver: Method,
    pub methods: Vec<Method>,
    pub sweep_methods: Vec<Method>,
    pub hqs: HqsConfig,
    pub net: NetConfig,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub noise_domain: NoiseDomain,
    pub sigma: f64,
    pub sigmas: Vec<f64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    /// When false, timing columns are written as `NA` so outputs are byte-stable.
    pub record_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: PathBuf::from("data"),
            out: PathBuf::from("out"),
            mask: None,
            count: 40,
            height: 32,
            width: 32,
            accel: 4.0,
            order: 2,
            mask_seed: None,
            solver: Method::Hqs,
            methods: Method::ALL.to_vec(),
            sweep_methods: vec![Method::HqsNet, Method::Cascade],
            hqs: HqsConfig::default(),
            net: NetConfig::default(),
            lr: 1e-3,
            batch: 4,
            epochs: 30,
            noise_domain: NoiseDomain::None,
            sigma: 0.0,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            input: None,
            output: None,
            reference: None,
            checkpoint: None,
            record_time: true,
        }
    }
}

fn bad(key: &str, value: &str) -> HarnessError {
    HarnessError::Config(format!("invalid value {value:?} for key {key:?}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list<T>(key: &str, value: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| bad(key, s)))
        .collect()
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| HarnessError::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "seed" => self.seed = num(key, value)?,
            "dataset" => self.dataset = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            "mask" => self.mask = path(),
            "count" => self.count = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "width" => self.width = num(key, value)?,
            "R" => self.accel = num(key, value)?,
            "p" => self.order = num(key, value)?,
            "mask_seed" => self.mask_seed = Some(num(key, value)?),
            "solver" => self.solver = Method::parse(value).ok_or_else(|| bad(key, value))?,
            "methods" => self.methods = list(key, value, Method::parse)?,
            "sweep_methods" => self.sweep_methods = list(key, value, Method::parse)?,
            "lambda" => {
                self.hqs.lambda = num(key, value)?;
                self.net.lambda = self.hqs.lambda;
            }
            "alpha" => self.hqs.alpha = num(key, value)?,
            "beta" => self.hqs.beta = num(key, value)?,
            "outer_max" => self.hqs.outer_max = num(key, value)?,
            "outer_tol" => self.hqs.outer_tol = num(key, value)?,
            "inner_max" => self.hqs.inner_max = num(key, value)?,
            "inner_step" => self.hqs.inner_step = num(key, value)?,
            "inner_tol" => self.hqs.inner_tol = num(key, value)?,
            "blocks" => self.net.blocks = num(key, value)?,
            "layers" => self.net.layers_per_block = num(key, value)?,
            "channels" => self.net.channels = num(key, value)?,
            "kernel" => self.net.kernel = num(key, value)?,
            "residual" => {
                self.net.residual = match value {
                    "none" => Residual::None,
                    "block" => Residual::PerBlock,
                    "global" => Residual::Global,
                    _ => return Err(bad(key, value)),
                }
            }
            "shared" => self.net.shared_weights = boolean(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "noise_domain" => self.noise_domain = NoiseDomain::parse(value).ok_or_else(|| bad(key, value))?,
            "sigma" => self.sigma = num(key, value)?,
            "sigmas" => self.sigmas = list(key, value, |s| s.parse().ok())?,
            "input" => self.input = path(),
            "output" => self.output = path(),
            "reference" => self.reference = path(),
            "checkpoint" => self.checkpoint = path(),
            "record_time" => self.record_time = boolean(key, value)?,
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn mask_path(&self) -> PathBuf {
        self.mask.clone().unwrap_or_else(|| self.dataset.join("mask.msk"))
    }

    pub fn mask_seed(&self) -> u64 {
        self.mask_seed.unwrap_or_else(|| derive_seed(self.seed, stream::MASK))
    }

    pub fn data_seed(&self) -> u64 {
        derive_seed(self.seed, stream::DATA)
    }

    /// Checkpoint of a learned method: the `checkpoint` key, else `<out>/<method>.hqn`.
    pub fn checkpoint_path(&self, method: Method) -> PathBuf {
        match &self.checkpoint {
            Some(p) if method == self.solver => p.clone(),
            _ => self.out.join(format!("{method}.hqn")),
        }
    }

    pub fn train_config(&self, method: Method) -> Result<TrainConfig> {
        let mode = method
            .loss_mode()
            .ok_or_else(|| HarnessError::Config(format!("{method} is not a learned method")))?;
        let stream = if mode == LossMode::Unsupervised { stream::TRAIN_HQSNET } else { stream::TRAIN_CASCADE };
        Ok(TrainConfig {
            lr: self.lr,
            batch: self.batch,
            epochs: self.epochs,
            alpha: self.hqs.alpha,
            beta: self.hqs.beta,
            mode,
            seed: derive_seed(self.seed, stream),
        })
    }

    pub fn require(&self, p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        p.clone().ok_or_else(|| HarnessError::Config(format!("key {key:?} is required")))
    }

    pub fn validate(&self) -> Result<()> {
        self.hqs.validate()?;
        self.net.validate()?;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(HarnessError::Config(msg.into())) };
        check(self.accel >= 1.0 && self.accel.is_finite(), "R must be at least 1")?;
        check(self.count > 0, "count must be positive")?;
        check(self.batch > 0 && self.epochs > 0, "batch and epochs must be positive")?;
        check(self.lr >= 0.0 && self.lr.is_finite(), "lr must be nonnegative")?;
        check(self.sigma >= 0.0 && self.sigmas.iter().all(|s| *s >= 0.0), "noise levels must be nonnegative")?;
        check(!self.methods.is_empty() && !self.sweep_methods.is_empty(), "method lists must not be empty")?;
        Ok(())
    }
}
