//! Laplacian-of-Gaussian filtering for the high-frequency error norm.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::grid::RealGrid;

pub const LOG_SIZE: usize = 15;
pub const LOG_SIGMA: f64 = 1.5;

/// Zero-sum 15x15 LoG kernel (same construction as MATLAB's `fspecial('log')`).
pub fn log_kernel() -> [[f64; LOG_SIZE]; LOG_SIZE] {
    let half = (LOG_SIZE / 2) as f64;
    let s2 = LOG_SIGMA * LOG_SIGMA;
    let mut gauss = [[0.0; LOG_SIZE]; LOG_SIZE];
    let mut gsum = 0.0;
    for (a, row) in gauss.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let (y, x) = (a as f64 - half, b as f64 - half);
            *v = libm::exp(-(x * x + y * y) / (2.0 * s2));
            gsum += *v;
        }
    }
    let mut k = [[0.0; LOG_SIZE]; LOG_SIZE];
    let mut ksum = 0.0;
    for a in 0..LOG_SIZE {
        for b in 0..LOG_SIZE {
            let (y, x) = (a as f64 - half, b as f64 - half);
            k[a][b] = gauss[a][b] / gsum * (x * x + y * y - 2.0 * s2) / (s2 * s2);
            ksum += k[a][b];
        }
    }
    let mean = ksum / (LOG_SIZE * LOG_SIZE) as f64;
    for row in k.iter_mut() {
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
    k
}

/// Symmetric (edge-repeating) reflection of an out-of-range index.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

pub fn log_filter(img: &RealGrid) -> Result<RealGrid> {
    let (h, w) = img.shape();
    if h < LOG_SIZE || w < LOG_SIZE {
        bail!(Dimension, "LoG filter needs at least {LOG_SIZE}x{LOG_SIZE}, got {h}x{w}");
    }
    let k = log_kernel();
    let r = (LOG_SIZE / 2) as isize;

    let (ph, pw) = (h + 2 * r as usize, w + 2 * r as usize);
    let mut padded = Vec::with_capacity(ph * pw);
    for i in 0..ph as isize {
        let si = reflect(i - r, h);
        for j in 0..pw as isize {
            padded.push(img[(si, reflect(j - r, w))]);
        }
    }

    let mut out = RealGrid::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (a, krow) in k.iter().enumerate() {
                let prow = &padded[(i + a) * pw + j..(i + a) * pw + j + LOG_SIZE];
                acc += krow.iter().zip(prow).map(|(kv, pv)| kv * pv).sum::<f64>();
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}
