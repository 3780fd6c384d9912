//! Centered, orthonormal 2-D DFT on power-of-two grids.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::grid::ComplexGrid;

/// Iterative radix-2 transform of a fixed length.
struct Radix2 {
    len: usize,
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(len: usize, inverse: bool) -> Self {
        let sign = if inverse { 1.0 } else { -1.0 };
        let twiddles = (0..len / 2)
            .map(|k| {
                let theta = sign * 2.0 * PI * k as f64 / len as f64;
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        Self { len, twiddles }
    }

    fn process(&self, buf: &mut [Complex64]) {
        let n = self.len;
        debug_assert_eq!(buf.len(), n);
        if n < 2 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

fn check_pow2(img: &ComplexGrid) -> Result<()> {
    let (h, w) = img.shape();
    if !h.is_power_of_two() || !w.is_power_of_two() {
        bail!(Dimension, "FFT needs power-of-two dimensions, got {h}x{w}");
    }
    Ok(())
}

fn transform(img: &ComplexGrid, inverse: bool) -> Result<ComplexGrid> {
    check_pow2(img)?;
    let (h, w) = img.shape();
    let (hs, ws) = (h / 2, w / 2);
    let src = img.as_slice();

    // ifftshift on the way in (roll by half; identical to fftshift for even sizes)
    let mut buf = Vec::with_capacity(h * w);
    for i in 0..h {
        let si = (i + hs) % h;
        for j in 0..w {
            buf.push(src[si * w + (j + ws) % w]);
        }
    }

    let rows = Radix2::new(w, inverse);
    for row in buf.chunks_exact_mut(w) {
        rows.process(row);
    }
    let cols = Radix2::new(h, inverse);
    let mut col = alloc::vec![Complex64::new(0.0, 0.0); h];
    for j in 0..w {
        for i in 0..h {
            col[i] = buf[i * w + j];
        }
        cols.process(&mut col);
        for i in 0..h {
            buf[i * w + j] = col[i];
        }
    }

    let scale = 1.0 / libm::sqrt((h * w) as f64);
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        let si = (i + hs) % h;
        for j in 0..w {
            out.push(buf[si * w + (j + ws) % w] * scale);
        }
    }
    ComplexGrid::from_vec(h, w, out)
}

/// Centered orthonormal forward DFT; the zero frequency sits at `(H/2, W/2)`.
pub fn fft2c(img: &ComplexGrid) -> Result<ComplexGrid> {
    transform(img, false)
}

/// Exact inverse (and adjoint) of [`fft2c`].
pub fn ifft2c(ksp: &ComplexGrid) -> Result<ComplexGrid> {
    transform(ksp, true)
}
