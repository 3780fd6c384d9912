//! Method comparison and noise sweeps over the test split, written as CSV.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use hqsnet_core::forward::{add_noise_image, add_noise_kspace, forward_model, zero_filled, Measurements};
use hqsnet_core::hqs::{objective, solve_with_clock, HqsConfig};
use hqsnet_core::metrics::evaluate_complex;
use hqsnet_core::net::{reconstruct, NetConfig, NetParams};
use hqsnet_core::phantom::Split;
use hqsnet_core::{Clock, ComplexGrid, Mask, RealGrid};
use rayon::prelude::*;

use crate::config::{derive_seed, stream, ExperimentConfig, Method, NoiseDomain};
use crate::dataset::{load_split, DatasetManifest};
use crate::error::{io_err, Result};
use crate::exec::MonotonicClock;
use crate::io::load_checkpoint;

pub const CSV_HEADER: [&str; 13] = [
    "instance_id",
    "method",
    "domain",
    "sigma",
    "seed",
    "time_s",
    "loss",
    "psnr",
    "ssim",
    "neg_hfen",
    "rel_psnr",
    "rel_ssim",
    "rel_neg_hfen",
];

/// Noise draws per (domain, sigma) in a sweep.
pub const SWEEP_SEEDS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub instance_id: String,
    pub method: Method,
    pub domain: NoiseDomain,
    pub sigma: f64,
    pub seed: u64,
    pub time_s: Option<f64>,
    pub loss: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub neg_hfen: f64,
    pub rel_psnr: f64,
    pub rel_ssim: f64,
    pub rel_neg_hfen: f64,
}

impl Row {
    fn fields(&self) -> [String; 13] {
        let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |t| t.to_string());
        [
            self.instance_id.clone(),
            self.method.to_string(),
            self.domain.as_str().to_string(),
            self.sigma.to_string(),
            self.seed.to_string(),
            na(self.time_s),
            self.loss.to_string(),
            self.psnr.to_string(),
            self.ssim.to_string(),
            self.neg_hfen.to_string(),
            self.rel_psnr.to_string(),
            self.rel_ssim.to_string(),
            self.rel_neg_hfen.to_string(),
        ]
    }

    fn values(&self) -> [f64; 7] {
        [self.loss, self.psnr, self.ssim, self.neg_hfen, self.rel_psnr, self.rel_ssim, self.rel_neg_hfen]
    }
}

pub fn write_csv(w: impl Write, rows: &[Row]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record(r.fields())?;
    }
    out.flush().map_err(io_err("csv output"))?;
    Ok(())
}

pub fn write_csv_file(path: &Path, rows: &[Row]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let f = std::fs::File::create(path).map_err(io_err(path))?;
    write_csv(std::io::BufWriter::new(f), rows)
}

/// Trained networks needed by a method list.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub hqsnet: Option<(NetParams, NetConfig)>,
    pub cascade: Option<(NetParams, NetConfig)>,
}

impl Models {
    /// Loads the checkpoint of every learned method in `methods`.
    pub fn load(cfg: &ExperimentConfig, methods: &[Method]) -> Result<Self> {
        let mut m = Models::default();
        for &method in methods {
            match method {
                Method::HqsNet => m.hqsnet = Some(load_checkpoint(&cfg.checkpoint_path(method))?),
                Method::Cascade => m.cascade = Some(load_checkpoint(&cfg.checkpoint_path(method))?),
                _ => {}
            }
        }
        Ok(m)
    }

    fn get(&self, method: Method) -> Option<&(NetParams, NetConfig)> {
        match method {
            Method::HqsNet => self.hqsnet.as_ref(),
            Method::Cascade => self.cascade.as_ref(),
            _ => None,
        }
    }
}

/// Reconstruction of `y` by `method` and the wall time of the call alone.
pub fn run_method(
    method: Method,
    y: &Measurements,
    hqs: &HqsConfig,
    models: &Models,
    clock: &impl Clock,
) -> Result<(ComplexGrid, f64)> {
    let t0 = clock.now();
    let x = match method {
        Method::ZeroFill => zero_filled(y),
        Method::Hqs => solve_with_clock(y, hqs, clock)?.0,
        Method::HqsNet | Method::Cascade => {
            let (p, c) = models
                .get(method)
                .ok_or_else(|| crate::HarnessError::Config(format!("no trained model for {method}")))?;
            reconstruct(p, y, c)?
        }
    };
    Ok((x, clock.now() - t0))
}

/// Test-split instance with clean ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: usize,
    pub truth: RealGrid,
    pub y: Measurements,
}

pub fn load_test_split(cfg: &ExperimentConfig) -> Result<(Arc<Mask>, Vec<Instance>)> {
    let m = DatasetManifest::load(&cfg.dataset)?;
    let mask = Arc::new(m.read_mask()?);
    let items = load_split(&m, &mask, Split::Test)?;
    let instances = items.into_iter().map(|(id, truth, y)| Instance { id, truth, y }).collect();
    Ok((mask, instances))
}

/// Measurements of `inst` under noise of level `sigma` in `domain`.
pub fn noisy_measurements(inst: &Instance, mask: &Arc<Mask>, domain: NoiseDomain, sigma: f64, seed: u64) -> Result<Measurements> {
    let s = derive_seed(seed, inst.id as u64);
    Ok(match domain {
        NoiseDomain::None => inst.y.clone(),
        NoiseDomain::Image => forward_model(&add_noise_image(&inst.truth, sigma, s), mask)?,
        NoiseDomain::Kspace => add_noise_kspace(&inst.y, sigma, s),
    })
}

#[derive(Debug, Clone, Copy)]
struct Setting {
    domain: NoiseDomain,
    sigma: f64,
    seed: u64,
}

/// Rows for one instance, one per method, in `methods` order.
fn instance_rows(
    inst: &Instance,
    mask: &Arc<Mask>,
    setting: Setting,
    methods: &[Method],
    cfg: &ExperimentConfig,
    models: &Models,
) -> Result<Vec<Row>> {
    let y = noisy_measurements(inst, mask, setting.domain, setting.sigma, setting.seed)?;
    let clock = MonotonicClock::new();
    let zf = zero_filled(&y);
    methods
        .iter()
        .map(|&method| {
            let (x, t) = run_method(method, &y, &cfg.hqs, models, &clock)?;
            let rec = evaluate_complex(&x, &zf, &inst.truth)?;
            Ok(Row {
                instance_id: inst.id.to_string(),
                method,
                domain: setting.domain,
                sigma: setting.sigma,
                seed: setting.seed,
                time_s: cfg.record_time.then_some(t),
                loss: objective(&x, &y, cfg.hqs.alpha, cfg.hqs.beta)?,
                psnr: rec.psnr_db,
                ssim: rec.ssim,
                neg_hfen: rec.neg_hfen,
                rel_psnr: rec.relative_psnr,
                rel_ssim: rec.relative_ssim,
                rel_neg_hfen: rec.relative_neg_hfen,
            })
        })
        .collect()
}

/// Per-instance rows for every instance, in id order. Timed runs are
/// sequential so measurements do not contend for cores.
fn all_rows(
    instances: &[Instance],
    mask: &Arc<Mask>,
    setting: Setting,
    methods: &[Method],
    cfg: &ExperimentConfig,
    models: &Models,
) -> Result<Vec<Vec<Row>>> {
    let one = |inst: &Instance| instance_rows(inst, mask, setting, methods, cfg, models);
    if cfg.record_time {
        instances.iter().map(one).collect()
    } else {
        instances.par_iter().map(one).collect()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `mean` and `std` rows of one method over its per-instance rows.
fn summary(rows: &[&Row], template: &Row) -> [Row; 2] {
    let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| r.values()[k]).collect() };
    let stats: Vec<(f64, f64)> = (0..7).map(|k| mean_std(&col(k))).collect();
    let times: Option<Vec<f64>> = rows.iter().map(|r| r.time_s).collect();
    let time = times.map(|t| mean_std(&t));
    let make = |id: &str, pick: fn((f64, f64)) -> f64| Row {
        instance_id: id.to_string(),
        time_s: time.map(pick),
        loss: pick(stats[0]),
        psnr: pick(stats[1]),
        ssim: pick(stats[2]),
        neg_hfen: pick(stats[3]),
        rel_psnr: pick(stats[4]),
        rel_ssim: pick(stats[5]),
        rel_neg_hfen: pick(stats[6]),
        ..template.clone()
    };
    [make("mean", |s| s.0), make("std", |s| s.1)]
}

fn summarize(per_instance: &[Vec<Row>], methods: &[Method]) -> Vec<Row> {
    methods
        .iter()
        .enumerate()
        .flat_map(|(k, _)| {
            let rows: Vec<&Row> = per_instance.iter().map(|r| &r[k]).collect();
            summary(&rows, rows[0])
        })
        .collect()
}

/// Per-instance rows for every configured method, then mean and std rows per method.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let models = Models::load(cfg, &cfg.methods)?;
    let (mask, instances) = load_test_split(cfg)?;
    compare_instances(cfg, &models, &mask, &instances)
}

pub fn compare_instances(cfg: &ExperimentConfig, models: &Models, mask: &Arc<Mask>, instances: &[Instance]) -> Result<Vec<Row>> {
    if instances.is_empty() {
        return Err(crate::HarnessError::Config("test split is empty".into()));
    }
    let setting = Setting { domain: cfg.noise_domain, sigma: cfg.sigma, seed: derive_seed(cfg.seed, stream::NOISE) };
    let per = all_rows(instances, mask, setting, &cfg.methods, cfg, models)?;
    let mut rows: Vec<Row> = per.iter().flatten().cloned().collect();
    rows.extend(summarize(&per, &cfg.methods));
    Ok(rows)
}

/// Seeds of the sweep's noise draws.
pub fn sweep_seeds(master: u64) -> [u64; SWEEP_SEEDS] {
    std::array::from_fn(|i| derive_seed(master, stream::NOISE + 1 + i as u64))
}

/// One mean row per (method, domain, sigma, seed) over the test split.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let models = Models::load(cfg, &cfg.sweep_methods)?;
    let (mask, instances) = load_test_split(cfg)?;
    sweep_instances(cfg, &models, &mask, &instances)
}

pub fn sweep_instances(cfg: &ExperimentConfig, models: &Models, mask: &Arc<Mask>, instances: &[Instance]) -> Result<Vec<Row>> {
    if instances.is_empty() {
        return Err(crate::HarnessError::Config("test split is empty".into()));
    }
    let mut untimed = cfg.clone();
    untimed.record_time = false;
    let mut rows = Vec::new();
    for domain in [NoiseDomain::Image, NoiseDomain::Kspace] {
        for &sigma in &cfg.sigmas {
            for seed in sweep_seeds(cfg.seed) {
                let setting = Setting { domain, sigma, seed };
                let per = all_rows(instances, mask, setting, &cfg.sweep_methods, &untimed, models)?;
                rows.extend(summarize(&per, &cfg.sweep_methods).into_iter().filter(|r| r.instance_id == "mean"));
            }
        }
    }
    Ok(rows)
}
