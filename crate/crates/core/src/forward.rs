//! Single-coil Cartesian acquisition model.

use alloc::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::grid::{ComplexGrid, RealGrid};
use crate::numerics::{fft2c, ifft2c};
use crate::sampling::Mask;

/// Under-sampled k-space `y`; bins outside the mask are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    ksp: ComplexGrid,
    mask: Arc<Mask>,
}

impl Measurements {
    /// Wraps raw k-space, zeroing every unsampled bin.
    pub fn new(mut ksp: ComplexGrid, mask: Arc<Mask>) -> Result<Self> {
        ksp.ensure_same_shape(mask.as_ref(), "k-space vs mask")?;
        for (v, &b) in ksp.as_mut_slice().iter_mut().zip(mask.bits()) {
            if !b {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        Ok(Self { ksp, mask })
    }

    #[inline]
    pub fn ksp(&self) -> &ComplexGrid {
        &self.ksp
    }

    #[inline]
    pub fn mask(&self) -> &Arc<Mask> {
        &self.mask
    }

    pub fn shape(&self) -> (usize, usize) {
        self.ksp.shape()
    }
}

/// `F_Omega x` for a complex image.
pub fn forward_complex(x: &ComplexGrid, mask: &Arc<Mask>) -> Result<Measurements> {
    x.ensure_same_shape(mask.as_ref(), "image vs mask")?;
    Measurements::new(fft2c(x)?, Arc::clone(mask))
}

/// `y = mask * fft2c(x)`.
pub fn forward_model(x: &RealGrid, mask: &Arc<Mask>) -> Result<Measurements> {
    forward_complex(&x.to_complex(), mask)
}

/// `F_Omega^H y`, the zero-filled reconstruction.
pub fn zero_filled(y: &Measurements) -> ComplexGrid {
    ifft2c(&y.ksp).expect("measurement grids are validated at construction")
}

/// Closed-form data-consistency blend of one k-space bin.
#[inline]
pub fn blend(y: Complex64, zhat: Complex64, lambda: f64) -> Complex64 {
    (y + zhat * lambda) / (1.0 + lambda)
}

/// Minimizer of `||F_Omega x - y||^2 + lambda ||z - x||^2`.
pub fn dc_update(z: &ComplexGrid, y: &Measurements, lambda: f64) -> Result<ComplexGrid> {
    z.ensure_same_shape(&y.ksp, "image vs measurements")?;
    let mut zhat = fft2c(z)?;
    for ((v, &m), &b) in zhat.as_mut_slice().iter_mut().zip(y.ksp.as_slice()).zip(y.mask.bits()) {
        if b {
            *v = blend(m, *v, lambda);
        }
    }
    ifft2c(&zhat)
}

/// `||F_Omega x - y||^2`.
pub fn data_residual_sq(x: &ComplexGrid, y: &Measurements) -> Result<f64> {
    x.ensure_same_shape(&y.ksp, "image vs measurements")?;
    let xhat = fft2c(x)?;
    Ok(xhat
        .as_slice()
        .iter()
        .zip(y.ksp.as_slice())
        .zip(y.mask.bits())
        .filter(|(_, &b)| b)
        .map(|((a, m), _)| (a - m).norm_sqr())
        .sum())
}

/// Adds i.i.d. `N(0, sigma^2)` to every pixel.
pub fn add_noise_image(x: &RealGrid, sigma: f64, seed: u64) -> RealGrid {
    if sigma == 0.0 {
        return x.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    x.map(|v| {
        let n: f64 = StandardNormal.sample(&mut rng);
        v + sigma * n
    })
}

/// Adds i.i.d. `N(0, sigma^2)` to the real and imaginary parts of sampled bins.
pub fn add_noise_kspace(y: &Measurements, sigma: f64, seed: u64) -> Measurements {
    if sigma == 0.0 {
        return y.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ksp = y.ksp.clone();
    for (v, &b) in ksp.as_mut_slice().iter_mut().zip(y.mask.bits()) {
        if b {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }
    Measurements { ksp, mask: Arc::clone(&y.mask) }
}
