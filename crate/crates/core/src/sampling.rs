//! Variable-density Poisson-disk under-sampling masks.
//!
//! Darts are thrown over every k-space bin in a seeded random order. A dart at
//! normalized radius `d` is kept only if no earlier dart lies closer than
//! `r(d) = r_base / sqrt(max((1 - d)^p, DENSITY_FLOOR))`. A small disk around
//! the k-space center is always fully sampled and is exempt from the spacing
//! rule. `r_base` is bisected until the sampled fraction lands within
//! [`FRACTION_TOLERANCE`] of `1 / R`.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};

pub const DENSITY_FLOOR: f64 = 1e-3;
/// Radius of the forced center disk as a fraction of `min(H, W)`.
pub const CENTER_FRACTION: f64 = 0.04;
/// Allowed relative deviation of the sampled fraction from `1 / R`.
pub const FRACTION_TOLERANCE: f64 = 0.1;
pub const MAX_BISECTIONS: usize = 40;
pub const MIN_SIDE: usize = 16;

/// The sampled index set with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
    pub accel: f32,
    pub order: u8,
    pub seed: u64,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>, accel: f32, order: u8, seed: u64) -> Result<Self> {
        if height == 0 || width == 0 {
            bail!(Dimension, "mask dimensions must be positive");
        }
        if bits.len() != height * width {
            bail!(Shape, "{height}x{width} mask needs {} bits, got {}", height * width, bits.len());
        }
        if !bits.iter().any(|&b| b) {
            bail!(Data, "mask samples no k-space bins");
        }
        Ok(Self { height, width, bits, accel, order, seed })
    }

    /// Every bin sampled (acceleration 1).
    pub fn full(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![true; height * width], accel: 1.0, order: 0, seed: 0 }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn is_sampled(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.width + j]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }
}

impl crate::grid::Shaped for Mask {
    fn grid_shape(&self) -> (usize, usize) {
        self.shape()
    }
}

/// Polynomial sampling density `(1 - d)^order`.
pub fn density(d: f64, order: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) {
        bail!(Domain, "normalized distance {d} outside [0, 1]");
    }
    Ok(libm::pow(1.0 - d, order as f64))
}

/// Distance from the k-space center `(H/2, W/2)`, scaled so the corner is 1.
pub fn normalized_distance(i: usize, j: usize, height: usize, width: usize) -> f64 {
    let dy = (i as f64 - (height / 2) as f64) / (height / 2) as f64;
    let dx = (j as f64 - (width / 2) as f64) / (width / 2) as f64;
    (libm::sqrt(dy * dy + dx * dx) / core::f64::consts::SQRT_2).min(1.0)
}

pub fn center_radius(height: usize, width: usize) -> f64 {
    CENTER_FRACTION * height.min(width) as f64
}

pub fn in_center_disk(i: usize, j: usize, height: usize, width: usize) -> bool {
    let dy = i as f64 - (height / 2) as f64;
    let dx = j as f64 - (width / 2) as f64;
    let r = center_radius(height, width);
    dy * dy + dx * dx <= r * r
}

/// Local exclusion radius at bin `(i, j)`.
pub fn local_radius(radius_base: f64, i: usize, j: usize, height: usize, width: usize, order: u8) -> f64 {
    let d = normalized_distance(i, j, height, width);
    let rho = libm::pow(1.0 - d, order as f64).max(DENSITY_FLOOR);
    radius_base / libm::sqrt(rho)
}

/// Precomputed per-bin radii and a fixed dart order for one (H, W, p, seed).
struct DartPlan {
    height: usize,
    width: usize,
    order: Vec<usize>,
    forced: Vec<bool>,
    /// `r / r_base` per bin.
    radius_scale: Vec<f64>,
}

impl DartPlan {
    fn new(height: usize, width: usize, order: u8, seed: u64) -> Self {
        let n = height * width;
        let mut darts: Vec<usize> = (0..n).collect();
        darts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut forced = vec![false; n];
        let mut radius_scale = vec![0.0; n];
        for i in 0..height {
            for j in 0..width {
                forced[i * width + j] = in_center_disk(i, j, height, width);
                radius_scale[i * width + j] = local_radius(1.0, i, j, height, width, order);
            }
        }
        Self { height, width, order: darts, forced, radius_scale }
    }

    /// True if some bin in `accepted` other than `(ci, cj)` lies strictly closer than `r`.
    fn has_neighbor(&self, accepted: &[bool], ci: usize, cj: usize, r: f64) -> bool {
        let reach = libm::ceil(r) as isize;
        let r2 = r * r;
        let (ci, cj) = (ci as isize, cj as isize);
        let i0 = (ci - reach).max(0);
        let i1 = (ci + reach).min(self.height as isize - 1);
        let j0 = (cj - reach).max(0);
        let j1 = (cj + reach).min(self.width as isize - 1);
        for i in i0..=i1 {
            let dy = (i - ci) as f64;
            let row = i as usize * self.width;
            for j in j0..=j1 {
                if accepted[row + j as usize] && (i, j) != (ci, cj) {
                    let dx = (j - cj) as f64;
                    if dy * dy + dx * dx < r2 {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn throw(&self, radius_base: f64) -> Vec<bool> {
        let mut darts = vec![false; self.forced.len()];
        for &idx in &self.order {
            if self.forced[idx] {
                continue;
            }
            let r = radius_base * self.radius_scale[idx];
            if !self.has_neighbor(&darts, idx / self.width, idx % self.width, r) {
                darts[idx] = true;
            }
        }
        for (d, &f) in darts.iter_mut().zip(&self.forced) {
            *d |= f;
        }
        darts
    }
}

/// Generates a mask and also returns the calibrated base radius.
pub fn generate_mask_with_radius(height: usize, width: usize, accel: f32, order: u8, seed: u64) -> Result<(Mask, f64)> {
    if height < MIN_SIDE || width < MIN_SIDE {
        bail!(Dimension, "masks need at least {MIN_SIDE}x{MIN_SIDE} bins, got {height}x{width}");
    }
    if !accel.is_finite() || accel < 1.0 {
        bail!(Domain, "acceleration must be >= 1, got {accel}");
    }
    let target = 1.0 / accel as f64;
    let tol = FRACTION_TOLERANCE * target;
    let plan = DartPlan::new(height, width, order, seed);
    let n = (height * width) as f64;

    let (mut lo, mut hi) = (1e-2, height.max(width) as f64);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let bits = plan.throw(mid);
        let fraction = bits.iter().filter(|&&b| b).count() as f64 / n;
        if (fraction - target).abs() <= tol {
            return Ok((Mask::new(height, width, bits, accel, order, seed)?, mid));
        }
        if fraction > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence(alloc::format!(
        "no base radius reached fraction {target:.4} +/- {tol:.4} within {MAX_BISECTIONS} bisections"
    )))
}

/// Deterministic variable-density Poisson-disk mask.
pub fn generate_mask(height: usize, width: usize, accel: f32, order: u8, seed: u64) -> Result<Mask> {
    generate_mask_with_radius(height, width, accel, order, seed).map(|(m, _)| m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskReport {
    pub fraction: f64,
    /// No two sampled bins outside the center disk are closer than the smaller
    /// of their local radii.
    pub min_pairwise_ok: bool,
    pub center_ok: bool,
}

impl MaskReport {
    pub fn all_ok(&self) -> bool {
        self.min_pairwise_ok && self.center_ok
    }

    pub fn fraction_ok(&self, accel: f64) -> bool {
        let target = 1.0 / accel;
        (self.fraction - target).abs() <= FRACTION_TOLERANCE * target
    }
}

pub fn verify_mask(mask: &Mask, radius_base: f64) -> MaskReport {
    let (h, w) = mask.shape();
    let plan_forced: Vec<bool> = (0..h * w).map(|idx| in_center_disk(idx / w, idx % w, h, w)).collect();
    let darts: Vec<bool> = mask.bits().iter().zip(&plan_forced).map(|(&b, &f)| b && !f).collect();
    let center_ok = plan_forced.iter().zip(mask.bits()).all(|(&f, &b)| !f || b) && mask.is_sampled(h / 2, w / 2);

    let mut min_pairwise_ok = true;
    'outer: for i in 0..h {
        for j in 0..w {
            if !darts[i * w + j] {
                continue;
            }
            let rp = local_radius(radius_base, i, j, h, w, mask.order);
            let reach = libm::ceil(rp) as isize;
            for qi in (i as isize - reach).max(0)..=(i as isize + reach).min(h as isize - 1) {
                for qj in (j as isize - reach).max(0)..=(j as isize + reach).min(w as isize - 1) {
                    let (qi, qj) = (qi as usize, qj as usize);
                    if (qi, qj) == (i, j) || !darts[qi * w + qj] {
                        continue;
                    }
                    let rq = local_radius(radius_base, qi, qj, h, w, mask.order);
                    let dy = qi as f64 - i as f64;
                    let dx = qj as f64 - j as f64;
                    let limit = rp.min(rq);
                    if dy * dy + dx * dx < limit * limit {
                        min_pairwise_ok = false;
                        break 'outer;
                    }
                }
            }
        }
    }
    MaskReport { fraction: mask.fraction(), min_pairwise_ok, center_ok }
}

/// Sampling rate in `bins` equal-width annuli of normalized radius.
pub fn radial_profile(mask: &Mask, bins: usize) -> Vec<f64> {
    let (h, w) = mask.shape();
    let mut hits = vec![0usize; bins];
    let mut totals = vec![0usize; bins];
    for i in 0..h {
        for j in 0..w {
            let d = normalized_distance(i, j, h, w);
            let b = ((d * bins as f64) as usize).min(bins - 1);
            totals[b] += 1;
            if mask.is_sampled(i, j) {
                hits[b] += 1;
            }
        }
    }
    hits.iter().zip(&totals).map(|(&k, &n)| if n == 0 { 0.0 } else { k as f64 / n as f64 }).collect()
}
