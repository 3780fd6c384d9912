//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use hqsnet_core::forward::{add_noise_image, add_noise_kspace, forward_model, Measurements};
use hqsnet_core::hqs::{objective, solve_with_clock};
use hqsnet_core::metrics::absolute_metrics;
use hqsnet_core::net::{reconstruct, train_with};
use hqsnet_core::phantom::Split;
use hqsnet_core::sampling::{generate_mask_with_radius, verify_mask};

use crate::config::{derive_seed, stream, ExperimentConfig, Method, NoiseDomain};
use crate::dataset::{gen_phantoms, load_split, make_mask, train_samples, DatasetManifest};
use crate::error::{io_err, HarnessError, Result};
use crate::exec::{MonotonicClock, RayonRunner};
use crate::harness::{run_compare, run_noise_sweep, write_csv_file};
use crate::io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hqsnet", version, about = "Compressed-sensing MRI reconstruction: classical HQS and unrolled networks")]
struct Cli {
    /// Experiment config file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Config override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Generate a sampling mask.
    Genmask,
    /// Generate a phantom dataset with its manifest and mask.
    Gendata,
    /// Simulate k-space measurements of an image.
    Simulate,
    /// Reconstruct measurements with the classical solver.
    SolveHqs,
    /// Train HQS-Net (`solver = hqsnet`) or the supervised baseline (`solver = cascade`).
    Train,
    /// Reconstruct measurements with a trained network.
    Reconstruct,
    /// Check a mask file, or score an image against `reference`.
    Evaluate,
    /// Compare all methods on the test split.
    Compare,
    /// PSNR and SSIM of learned methods under increasing noise.
    NoiseSweep,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for kv in &cli.set {
        cfg.apply_override(kv)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| match e {
        HarnessError::Core(c) => HarnessError::Config(c.to_string()),
        e => e,
    })?;
    Ok(cfg)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = build_config(&cli).map_err(Failure::from).and_then(|cfg| dispatch(cli.command, &cfg, out));
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "usage error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn say(out: &mut impl Write, msg: std::fmt::Arguments) -> Result<()> {
    out.write_fmt(msg).and_then(|_| out.write_all(b"\n")).map_err(io_err("stdout"))
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, out: &mut impl Write) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Genmask => genmask(cfg, out)?,
        Command::Gendata => gendata(cfg, out)?,
        Command::Simulate => simulate(cfg, out)?,
        Command::SolveHqs => solve_hqs(cfg, out)?,
        Command::Train => train(cfg, out)?,
        Command::Reconstruct => reconstruct_cmd(cfg, out)?,
        Command::Evaluate => evaluate(cfg, out)?,
        Command::Compare => {
            let rows = run_compare(cfg)?;
            let path = cfg.output.clone().unwrap_or_else(|| cfg.out.join("compare.csv"));
            write_csv_file(&path, &rows)?;
            say(out, format_args!("wrote {} ({} rows)", path.display(), rows.len()))?;
        }
        Command::NoiseSweep => {
            let rows = run_noise_sweep(cfg)?;
            let path = cfg.output.clone().unwrap_or_else(|| cfg.out.join("noise_sweep.csv"));
            write_csv_file(&path, &rows)?;
            say(out, format_args!("wrote {} ({} rows)", path.display(), rows.len()))?;
        }
    }
    Ok(())
}

fn genmask(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let mask = make_mask(cfg.height, cfg.width, cfg.accel, cfg.order, cfg.mask_seed())?;
    let path = cfg.mask_path();
    io::write_mask(&path, &mask)?;
    say(out, format_args!("wrote {}: {}x{}, fraction {:.4} (target {:.4})", path.display(), cfg.height, cfg.width, mask.fraction(), 1.0 / cfg.accel))
}

fn gendata(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let mask = make_mask(cfg.height, cfg.width, cfg.accel, cfg.order, cfg.mask_seed())?;
    let m = gen_phantoms(&cfg.dataset, cfg.count, cfg.height, cfg.width, cfg.data_seed(), &mask)?;
    let n = |s| m.entries_in(s).count();
    say(out, format_args!(
        "wrote {} phantoms to {} (train {}, val {}, test {})",
        m.entries.len(),
        cfg.dataset.display(),
        n(Split::Train),
        n(Split::Val),
        n(Split::Test)
    ))
}

fn load_mask(cfg: &ExperimentConfig) -> Result<Arc<hqsnet_core::Mask>> {
    Ok(Arc::new(io::read_mask(&cfg.mask_path())?))
}

fn read_measurements(cfg: &ExperimentConfig) -> Result<Measurements> {
    let ksp = io::read_grid(&cfg.require(&cfg.input, "input")?)?.into_complex();
    Ok(Measurements::new(ksp, load_mask(cfg)?)?)
}

fn simulate(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let img = io::read_grid(&cfg.require(&cfg.input, "input")?)?.into_real()?;
    let output = cfg.require(&cfg.output, "output")?;
    let mask = load_mask(cfg)?;
    let seed = derive_seed(cfg.seed, stream::NOISE);
    let y = match cfg.noise_domain {
        NoiseDomain::None => forward_model(&img, &mask)?,
        NoiseDomain::Image => forward_model(&add_noise_image(&img, cfg.sigma, seed), &mask)?,
        NoiseDomain::Kspace => add_noise_kspace(&forward_model(&img, &mask)?, cfg.sigma, seed),
    };
    io::write_complex_grid(&output, y.ksp())?;
    say(out, format_args!("wrote {} ({} sampled bins)", output.display(), mask.count()))
}

fn solve_hqs(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let y = read_measurements(cfg)?;
    let output = cfg.require(&cfg.output, "output")?;
    let (x, report) = solve_with_clock(&y, &cfg.hqs, &MonotonicClock::new())?;
    io::write_complex_grid(&output, &x)?;
    say(out, format_args!(
        "objective {:.6} after {} iterations (converged: {}), {:.3} s; wrote {}",
        report.objective_trace.last().copied().unwrap_or(f64::NAN),
        report.outer_iters,
        report.converged,
        report.wall_time,
        output.display()
    ))
}

fn learned(cfg: &ExperimentConfig) -> Result<Method> {
    match cfg.solver {
        m @ (Method::HqsNet | Method::Cascade) => Ok(m),
        m => Err(HarnessError::Config(format!("solver must be hqsnet or cascade, got {m}"))),
    }
}

fn train(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let method = learned(cfg)?;
    let tc = cfg.train_config(method)?;
    let m = DatasetManifest::load(&cfg.dataset)?;
    if (m.height, m.width) != (cfg.height, cfg.width) {
        say(out, format_args!("note: dataset is {}x{}", m.height, m.width))?;
    }
    let mask = Arc::new(m.read_mask()?);
    let train_set = train_samples(&load_split(&m, &mask, Split::Train)?);
    let val_set = train_samples(&load_split(&m, &mask, Split::Val)?);
    let (params, hist) = train_with(&train_set, &val_set, &cfg.net, &tc, &MonotonicClock::new(), &RayonRunner)?;
    let ckpt = cfg.checkpoint_path(method);
    io::save_checkpoint(&ckpt, &params, &cfg.net)?;

    let hist_path = cfg.out.join(format!("train_{method}.csv"));
    let mut w = csv::Writer::from_path(&hist_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::Io { path: hist_path.clone(), source: io },
        k => HarnessError::Format(format!("{k:?}")),
    })?;
    w.write_record(["epoch", "train_loss", "val_loss", "time_s"])?;
    for e in 0..hist.train_loss.len() {
        let t = if cfg.record_time { hist.wall_time[e].to_string() } else { "NA".into() };
        w.write_record([e.to_string(), hist.train_loss[e].to_string(), hist.val_loss[e].to_string(), t])?;
    }
    w.flush().map_err(io_err(&hist_path))?;
    say(out, format_args!(
        "trained {method} for {} epochs on {} samples; best epoch {} (val loss {:.6}); wrote {}",
        hist.train_loss.len(),
        train_set.len(),
        hist.best_epoch,
        hist.val_loss[hist.best_epoch],
        ckpt.display()
    ))
}

fn reconstruct_cmd(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let method = learned(cfg)?;
    let (params, net) = io::load_checkpoint(&cfg.checkpoint_path(method))?;
    let y = read_measurements(cfg)?;
    let output = cfg.require(&cfg.output, "output")?;
    let x = reconstruct(&params, &y, &net)?;
    io::write_complex_grid(&output, &x)?;
    say(out, format_args!("loss {:.6}; wrote {}", objective(&x, &y, cfg.hqs.alpha, cfg.hqs.beta)?, output.display()))
}

fn evaluate(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let input = cfg.require(&cfg.input, "input")?;
    if &io::sniff_magic(&input)? == io::MASK_MAGIC {
        let mask = io::read_mask(&input)?;
        let target = 1.0 / mask.accel as f64;
        let (regen, radius) = generate_mask_with_radius(mask.height(), mask.width(), mask.accel, mask.order, mask.seed)?;
        let report = verify_mask(&mask, radius);
        let reproducible = regen == mask;
        say(out, format_args!(
            "mask {}x{}: fraction {:.4} (target {:.4}, within tolerance: {}), spacing ok: {}, center ok: {}, reproducible: {}",
            mask.height(),
            mask.width(),
            report.fraction,
            target,
            report.fraction_ok(mask.accel as f64),
            report.min_pairwise_ok,
            report.center_ok,
            reproducible
        ))?;
        if !(report.fraction_ok(mask.accel as f64) && report.center_ok) {
            return Err(HarnessError::Format("mask fails its sampling checks".into()));
        }
        return Ok(());
    }
    let x = io::read_grid(&input)?.into_complex().abs();
    let reference = io::read_grid(&cfg.require(&cfg.reference, "reference")?)?.into_real()?;
    let (psnr, ssim, neg_hfen) = absolute_metrics(&x, &reference)?;
    say(out, format_args!("psnr {psnr:.4} dB, ssim {ssim:.6}, neg_hfen {neg_hfen:.6}"))
}
