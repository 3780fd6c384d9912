//! Orthonormal multi-level Haar transform with nested-quadrant layout.

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use crate::error::{bail, Result};
use crate::grid::RealGrid;

/// Decomposition depth used by the regularizer.
pub const DEFAULT_LEVELS: usize = 2;

/// Haar coefficients; the deepest approximation band occupies the top-left
/// `H / 2^levels x W / 2^levels` block.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    pub levels: usize,
    pub grid: RealGrid,
}

impl WaveletCoeffs {
    /// Side lengths of the approximation band.
    pub fn approx_shape(&self) -> (usize, usize) {
        (self.grid.height() >> self.levels, self.grid.width() >> self.levels)
    }
}

fn check_levels(h: usize, w: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        bail!(Dimension, "wavelet levels must be positive");
    }
    let block = 1usize << levels;
    if !h.is_multiple_of(block) || !w.is_multiple_of(block) {
        bail!(Dimension, "{h}x{w} grid is not divisible by 2^{levels}");
    }
    Ok(())
}

fn analyze_line(line: &mut [f64], tmp: &mut Vec<f64>) {
    let half = line.len() / 2;
    tmp.clear();
    tmp.extend((0..half).map(|k| (line[2 * k] + line[2 * k + 1]) * FRAC_1_SQRT_2));
    tmp.extend((0..half).map(|k| (line[2 * k] - line[2 * k + 1]) * FRAC_1_SQRT_2));
    line.copy_from_slice(tmp);
}

fn synthesize_line(line: &mut [f64], tmp: &mut Vec<f64>) {
    let half = line.len() / 2;
    tmp.clear();
    for k in 0..half {
        let (a, d) = (line[k], line[half + k]);
        tmp.push((a + d) * FRAC_1_SQRT_2);
        tmp.push((a - d) * FRAC_1_SQRT_2);
    }
    line.copy_from_slice(tmp);
}

/// Applies `f` to every row, then every column, of the top-left `h x w` block.
fn for_block(data: &mut [f64], stride: usize, h: usize, w: usize, rows_first: bool, f: fn(&mut [f64], &mut Vec<f64>)) {
    let mut tmp = Vec::with_capacity(h.max(w));
    let mut col = alloc::vec![0.0; h];
    let do_rows = |data: &mut [f64], tmp: &mut Vec<f64>| {
        for i in 0..h {
            f(&mut data[i * stride..i * stride + w], tmp);
        }
    };
    let do_cols = |data: &mut [f64], tmp: &mut Vec<f64>, col: &mut Vec<f64>| {
        for j in 0..w {
            for i in 0..h {
                col[i] = data[i * stride + j];
            }
            f(col, tmp);
            for i in 0..h {
                data[i * stride + j] = col[i];
            }
        }
    };
    if rows_first {
        do_rows(data, &mut tmp);
        do_cols(data, &mut tmp, &mut col);
    } else {
        do_cols(data, &mut tmp, &mut col);
        do_rows(data, &mut tmp);
    }
}

/// Forward multi-level Haar analysis.
pub fn dwt2(img: &RealGrid, levels: usize) -> Result<WaveletCoeffs> {
    let (h, w) = img.shape();
    check_levels(h, w, levels)?;
    let mut grid = img.clone();
    let data = grid.as_mut_slice();
    for level in 0..levels {
        for_block(data, w, h >> level, w >> level, true, analyze_line);
    }
    Ok(WaveletCoeffs { levels, grid })
}

/// Inverse of [`dwt2`]; since the transform is orthonormal this is also its adjoint.
pub fn idwt2(coeffs: &WaveletCoeffs) -> Result<RealGrid> {
    let (h, w) = coeffs.grid.shape();
    check_levels(h, w, coeffs.levels)?;
    let mut grid = coeffs.grid.clone();
    let data = grid.as_mut_slice();
    for level in (0..coeffs.levels).rev() {
        for_block(data, w, h >> level, w >> level, false, synthesize_line);
    }
    Ok(grid)
}
