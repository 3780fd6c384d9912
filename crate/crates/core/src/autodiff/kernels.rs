//! Forward and adjoint kernels behind the tape primitives.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{ComplexGrid, RealGrid};
use crate::numerics::{dwt2, fft2c, idwt2, ifft2c, sign, tv_subgrad, tv_value};

/// Geometry of a same-padded, stride-1 convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
}

impl ConvDims {
    /// Row/column ranges `(lo, hi)` of output pixels whose tap at offset `d` lands inside the image.
    #[inline]
    fn valid(n: usize, d: isize) -> (usize, usize) {
        let lo = (-d).max(0) as usize;
        let hi = (n as isize - d).min(n as isize).max(0) as usize;
        (lo, hi)
    }

    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize, usize, isize, isize)) {
        let p = (self.k / 2) as isize;
        for o in 0..self.cout {
            for c in 0..self.cin {
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        f(o, c, ky, kx, ky as isize - p, kx as isize - p);
                    }
                }
            }
        }
    }
}

/// Input planes with a zero border of `pad` pixels.
fn zero_pad(input: &[f64], c: usize, h: usize, w: usize, pad: usize) -> Vec<f64> {
    let (hp, wp) = (h + 2 * pad, w + 2 * pad);
    let mut out = vec![0.0; c * hp * wp];
    for ch in 0..c {
        for i in 0..h {
            let src = &input[(ch * h + i) * w..][..w];
            out[(ch * hp + i + pad) * wp + pad..][..w].copy_from_slice(src);
        }
    }
    out
}

pub(crate) fn conv2d_forward(dims: ConvDims, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let ConvDims { cin, cout, h, w, k } = dims;
    let plane = h * w;
    let pad = k / 2;
    let wp = w + 2 * pad;
    let padded = zero_pad(input, cin, h, w, pad);
    let src_plane = (h + 2 * pad) * wp;
    let mut out = vec![0.0; cout * plane];
    for (o, b) in bias.iter().enumerate() {
        out[o * plane..(o + 1) * plane].iter_mut().for_each(|v| *v = *b);
    }
    let taps = |o: usize, c: usize| &weight[(o * cin + c) * k * k..][..k * k];
    // Output channels in pairs so each input load feeds two accumulators.
    let mut pairs = out.chunks_exact_mut(2 * plane);
    for (p, pair) in pairs.by_ref().enumerate() {
        let (d0, d1) = pair.split_at_mut(plane);
        for c in 0..cin {
            let src = &padded[c * src_plane..][..src_plane];
            match (taps(2 * p, c), taps(2 * p + 1, c)) {
                (&[u0, u1, u2, u3, u4, u5, u6, u7, u8], &[v0, v1, v2, v3, v4, v5, v6, v7, v8]) => {
                    for i in 0..h {
                        let row = |ky: usize, kx: usize| &src[(i + ky) * wp + kx..][..w];
                        let (a0, a1, a2) = (row(0, 0), row(0, 1), row(0, 2));
                        let (b0, b1, b2) = (row(1, 0), row(1, 1), row(1, 2));
                        let (c0, c1, c2) = (row(2, 0), row(2, 1), row(2, 2));
                        let e0 = &mut d0[i * w..][..w];
                        let e1 = &mut d1[i * w..][..w];
                        for j in 0..w {
                            let x = [a0[j], a1[j], a2[j], b0[j], b1[j], b2[j], c0[j], c1[j], c2[j]];
                            e0[j] += u0 * x[0] + u1 * x[1] + u2 * x[2] + u3 * x[3] + u4 * x[4]
                                + u5 * x[5] + u6 * x[6] + u7 * x[7] + u8 * x[8];
                            e1[j] += v0 * x[0] + v1 * x[1] + v2 * x[2] + v3 * x[3] + v4 * x[4]
                                + v5 * x[5] + v6 * x[6] + v7 * x[7] + v8 * x[8];
                        }
                    }
                }
                (t0, t1) => {
                    accumulate_taps(d0, src, t0, h, w, k);
                    accumulate_taps(d1, src, t1, h, w, k);
                }
            }
        }
    }
    let rest = pairs.into_remainder();
    if !rest.is_empty() {
        for c in 0..cin {
            accumulate_taps(rest, &padded[c * src_plane..][..src_plane], taps(cout - 1, c), h, w, k);
        }
    }
    out
}

/// `dst += taps * src` for one padded input plane.
fn accumulate_taps(dst: &mut [f64], src: &[f64], taps: &[f64], h: usize, w: usize, k: usize) {
    let wp = w + k - 1;
    for i in 0..h {
        let d = &mut dst[i * w..][..w];
        for (t, &wv) in taps.iter().enumerate() {
            let s = &src[(i + t / k) * wp + t % k..][..w];
            for (dv, x) in d.iter_mut().zip(s) {
                *dv += wv * x;
            }
        }
    }
}

/// Returns gradients with respect to input, weight and bias.
pub(crate) fn conv2d_backward(
    dims: ConvDims,
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let ConvDims { cin, cout, h, w, k } = dims;
    let plane = h * w;
    let mut gin = vec![0.0; cin * plane];
    let mut gw = vec![0.0; cout * cin * k * k];
    let gb: Vec<f64> = (0..cout).map(|o| grad_out[o * plane..(o + 1) * plane].iter().sum()).collect();
    dims.for_each_tap(|o, c, ky, kx, dy, dx| {
        let widx = ((o * cin + c) * k + ky) * k + kx;
        let wv = weight[widx];
        let (i0, i1) = ConvDims::valid(h, dy);
        let (j0, j1) = ConvDims::valid(w, dx);
        let src = &input[c * plane..(c + 1) * plane];
        let g = &grad_out[o * plane..(o + 1) * plane];
        let gi = &mut gin[c * plane..(c + 1) * plane];
        let mut acc = 0.0;
        for i in i0..i1 {
            let si = (i as isize + dy) as usize;
            let lo = si * w + (j0 as isize + dx) as usize;
            let hi = si * w + (j1 as isize + dx) as usize;
            let grow = &g[i * w + j0..i * w + j1];
            for ((gv, sv), giv) in grow.iter().zip(&src[lo..hi]).zip(&mut gi[lo..hi]) {
                acc += gv * sv;
                *giv += wv * gv;
            }
        }
        gw[widx] += acc;
    });
    (gin, gw, gb)
}

/// `(2, H, W)` planes to a complex grid.
pub(crate) fn planes_to_complex(data: &[f64], h: usize, w: usize) -> ComplexGrid {
    let plane = h * w;
    let v = (0..plane).map(|p| Complex64::new(data[p], data[plane + p])).collect();
    ComplexGrid::from_vec(h, w, v).expect("plane sizes checked by caller")
}

pub(crate) fn complex_to_planes(g: &ComplexGrid) -> Vec<f64> {
    let plane = g.len();
    let mut out = vec![0.0; 2 * plane];
    for (p, v) in g.as_slice().iter().enumerate() {
        out[p] = v.re;
        out[plane + p] = v.im;
    }
    out
}

pub(crate) fn fft_planes(data: &[f64], h: usize, w: usize, inverse: bool) -> Result<Vec<f64>> {
    let g = planes_to_complex(data, h, w);
    let t = if inverse { ifft2c(&g)? } else { fft2c(&g)? };
    Ok(complex_to_planes(&t))
}

fn plane_grid(data: &[f64], c: usize, h: usize, w: usize) -> RealGrid {
    RealGrid::from_vec(h, w, data[c * h * w..(c + 1) * h * w].to_vec()).expect("plane sizes checked by caller")
}

pub(crate) fn tv_forward(data: &[f64], c: usize, h: usize, w: usize) -> f64 {
    (0..c).map(|ch| tv_value(&plane_grid(data, ch, h, w))).sum()
}

pub(crate) fn tv_backward(data: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        out.extend_from_slice(tv_subgrad(&plane_grid(data, ch, h, w)).as_slice());
    }
    out
}

pub(crate) fn wavelet_l1_forward(data: &[f64], c: usize, h: usize, w: usize, levels: usize) -> Result<f64> {
    let mut acc = 0.0;
    for ch in 0..c {
        acc += dwt2(&plane_grid(data, ch, h, w), levels)?.grid.as_slice().iter().map(|v| v.abs()).sum::<f64>();
    }
    Ok(acc)
}

/// `W^T sign(W x)` per channel.
pub(crate) fn wavelet_l1_backward(data: &[f64], c: usize, h: usize, w: usize, levels: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let mut coeffs = dwt2(&plane_grid(data, ch, h, w), levels)?;
        coeffs.grid.as_mut_slice().iter_mut().for_each(|v| *v = sign(*v));
        out.extend_from_slice(idwt2(&coeffs)?.as_slice());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_conv(dims: ConvDims, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let ConvDims { cin, cout, h, w, k } = dims;
        let p = (k / 2) as isize;
        let mut out = vec![0.0; cout * h * w];
        for o in 0..cout {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = bias[o];
                    for c in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let si = i as isize + ky as isize - p;
                                let sj = j as isize + kx as isize - p;
                                if si >= 0 && sj >= 0 && (si as usize) < h && (sj as usize) < w {
                                    acc += weight[((o * cin + c) * k + ky) * k + kx]
                                        * input[(c * h + si as usize) * w + sj as usize];
                                }
                            }
                        }
                    }
                    out[(o * h + i) * w + j] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_six_loop_oracle() {
        use rand::Rng;
        let mut r = crate::testutil::rng(4);
        for &(cin, cout, h, w, k) in &[(2, 3, 5, 7, 3), (1, 1, 6, 6, 5), (3, 2, 4, 9, 1), (16, 16, 8, 8, 3), (2, 16, 5, 6, 3), (16, 2, 7, 4, 3)] {
            let dims = ConvDims { cin, cout, h, w, k };
            let input: Vec<f64> = (0..cin * h * w).map(|_| r.random_range(-1.0..1.0)).collect();
            let weight: Vec<f64> = (0..cout * cin * k * k).map(|_| r.random_range(-1.0..1.0)).collect();
            let bias: Vec<f64> = (0..cout).map(|_| r.random_range(-1.0..1.0)).collect();
            let a = conv2d_forward(dims, &input, &weight, &bias);
            let b = direct_conv(dims, &input, &weight, &bias);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
