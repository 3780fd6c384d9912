//! Anisotropic total variation over forward differences (no wrap-around).

use super::sign;
use crate::grid::RealGrid;

pub fn tv_value(img: &RealGrid) -> f64 {
    let (h, w) = img.shape();
    let x = img.as_slice();
    let mut acc = 0.0;
    for i in 0..h {
        let row = &x[i * w..(i + 1) * w];
        for j in 0..w - 1 {
            acc += (row[j + 1] - row[j]).abs();
        }
        if i + 1 < h {
            let next = &x[(i + 1) * w..(i + 2) * w];
            for j in 0..w {
                acc += (next[j] - row[j]).abs();
            }
        }
    }
    acc
}

/// Subgradient of [`tv_value`]: the adjoint difference operator applied to the
/// per-edge signs.
pub fn tv_subgrad(img: &RealGrid) -> RealGrid {
    let (h, w) = img.shape();
    let x = img.as_slice();
    let mut out = RealGrid::zeros(h, w);
    let g = out.as_mut_slice();
    for i in 0..h {
        for j in 0..w {
            let p = i * w + j;
            if j + 1 < w {
                let s = sign(x[p + 1] - x[p]);
                g[p + 1] += s;
                g[p] -= s;
            }
            if i + 1 < h {
                let s = sign(x[p + w] - x[p]);
                g[p + w] += s;
                g[p] -= s;
            }
        }
    }
    out
}
