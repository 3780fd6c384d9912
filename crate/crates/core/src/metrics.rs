//! PSNR, SSIM and HFEN on magnitude images, plus the relative-to-zero-filled
//! convention.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::grid::{ComplexGrid, RealGrid};
use crate::numerics::log_filter;

/// Peak value for images normalized to [0, 1].
pub const PEAK: f64 = 1.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse(x: &RealGrid, reference: &RealGrid) -> Result<f64> {
    x.ensure_same_shape(reference, "metric inputs")?;
    let n = x.len() as f64;
    Ok(x.as_slice().iter().zip(reference.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// `10 log10(PEAK^2 / MSE)`; `+inf` for identical images.
pub fn psnr(x: &RealGrid, reference: &RealGrid) -> Result<f64> {
    let m = mse(x, reference)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(PEAK * PEAK / m))
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut taps: Vec<f64> = (0..size)
        .map(|k| {
            let t = k as f64 - half;
            libm::exp(-t * t / (2.0 * sigma * sigma))
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable valid-mode filtering (no padding): output is `(H-k+1) x (W-k+1)`.
fn filter_valid(data: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = alloc::vec![0.0; h * ow];
    for i in 0..h {
        let src = &data[i * w..(i + 1) * w];
        for j in 0..ow {
            rows[i * ow + j] = taps.iter().zip(&src[j..j + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = alloc::vec![0.0; oh * ow];
    for i in 0..oh {
        for (a, t) in taps.iter().enumerate() {
            let src = &rows[(i + a) * ow..(i + a + 1) * ow];
            for (o, v) in out[i * ow..(i + 1) * ow].iter_mut().zip(src) {
                *o += t * v;
            }
        }
    }
    out
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows.
pub fn ssim(x: &RealGrid, reference: &RealGrid) -> Result<f64> {
    x.ensure_same_shape(reference, "metric inputs")?;
    let (h, w) = x.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        bail!(Dimension, "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}");
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let (a, b) = (x.as_slice(), reference.as_slice());
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| p * q).collect();

    let mu_a = filter_valid(a, h, w, &taps);
    let mu_b = filter_valid(b, h, w, &taps);
    let e_aa = filter_valid(&aa, h, w, &taps);
    let e_bb = filter_valid(&bb, h, w, &taps);
    let e_ab = filter_valid(&ab, h, w, &taps);

    let c1 = (SSIM_K1 * PEAK) * (SSIM_K1 * PEAK);
    let c2 = (SSIM_K2 * PEAK) * (SSIM_K2 * PEAK);
    let n = mu_a.len();
    let mut acc = 0.0;
    for k in 0..n {
        let (ma, mb) = (mu_a[k], mu_b[k]);
        let va = e_aa[k] - ma * ma;
        let vb = e_bb[k] - mb * mb;
        let cov = e_ab[k] - ma * mb;
        acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(acc / n as f64)
}

/// `||LoG(x) - LoG(ref)|| / ||LoG(ref)||`.
pub fn hfen(x: &RealGrid, reference: &RealGrid) -> Result<f64> {
    x.ensure_same_shape(reference, "metric inputs")?;
    let lx = log_filter(x)?;
    let lr = log_filter(reference)?;
    let denom = lr.norm();
    // Rounding leaves a residue of order eps on flat references.
    let scale = reference.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if denom <= 1e-12 * scale * libm::sqrt(reference.len() as f64) {
        bail!(Degenerate, "reference has no high-frequency content");
    }
    let diff: f64 = lx.as_slice().iter().zip(lr.as_slice()).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(libm::sqrt(diff) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub psnr_db: f64,
    pub ssim: f64,
    pub neg_hfen: f64,
    pub relative_psnr: f64,
    pub relative_ssim: f64,
    pub relative_neg_hfen: f64,
}

/// Absolute metrics `(psnr, ssim, -hfen)` of `x` against `reference`.
pub fn absolute_metrics(x: &RealGrid, reference: &RealGrid) -> Result<(f64, f64, f64)> {
    Ok((psnr(x, reference)?, ssim(x, reference)?, -hfen(x, reference)?))
}

fn difference(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

pub fn relative_metrics(recon: &RealGrid, zero_fill: &RealGrid, reference: &RealGrid) -> Result<MetricsRecord> {
    let (p, s, h) = absolute_metrics(recon, reference)?;
    let (p0, s0, h0) = absolute_metrics(zero_fill, reference)?;
    Ok(MetricsRecord {
        psnr_db: p,
        ssim: s,
        neg_hfen: h,
        relative_psnr: difference(p, p0),
        relative_ssim: difference(s, s0),
        relative_neg_hfen: difference(h, h0),
    })
}

/// [`relative_metrics`] on the magnitudes of complex reconstructions.
pub fn evaluate_complex(recon: &ComplexGrid, zero_fill: &ComplexGrid, reference: &RealGrid) -> Result<MetricsRecord> {
    relative_metrics(&recon.abs(), &zero_fill.abs(), reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_real, rng};

    #[test]
    fn identity_cases() {
        let mut r = rng(1);
        let x = random_real(&mut r, 32, 32).map(|v| 0.5 + 0.5 * v);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&x, &x).unwrap(), 1.0);
        assert_eq!(hfen(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn psnr_of_known_mse() {
        let a = RealGrid::zeros(16, 16);
        let b = RealGrid::filled(16, 16, 0.1);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_of_offset_constant() {
        let reference = RealGrid::filled(16, 16, 0.2);
        let x = RealGrid::filled(16, 16, 0.7);
        let c1 = 1e-4;
        let expect = (2.0 * 0.7 * 0.2 + c1) / (0.49 + 0.04 + c1);
        let got = ssim(&x, &reference).unwrap();
        assert!(got < 1.0);
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn hfen_ignores_constant_offsets() {
        let mut r = rng(2);
        let reference = random_real(&mut r, 32, 32);
        let shifted = reference.map(|v| v + 0.3);
        assert!(hfen(&shifted, &reference).unwrap() < 1e-13);
        assert!(matches!(hfen(&reference, &RealGrid::filled(32, 32, 0.5)), Err(crate::Error::Degenerate(_))));
    }

    #[test]
    fn small_inputs_rejected() {
        let g = RealGrid::zeros(10, 10);
        assert!(ssim(&g, &g).is_err());
        assert!(hfen(&g, &g).is_err());
        assert!(psnr(&g, &RealGrid::zeros(10, 11)).is_err());
    }

    #[test]
    fn relative_zero_when_recon_is_zero_fill() {
        let mut r = rng(3);
        let reference = random_real(&mut r, 32, 32);
        let zf = random_real(&mut r, 32, 32);
        let rec = relative_metrics(&zf, &zf, &reference).unwrap();
        assert_eq!((rec.relative_psnr, rec.relative_ssim, rec.relative_neg_hfen), (0.0, 0.0, 0.0));
        let perfect = relative_metrics(&reference, &zf, &reference).unwrap();
        assert_eq!(perfect.relative_psnr, f64::INFINITY);
    }
}
