//! Linear transforms shared by the solvers and the metrics.

mod fft;
mod log;
mod tv;
mod wavelet;

pub use fft::{fft2c, ifft2c};
pub use log::{log_filter, log_kernel, LOG_SIGMA, LOG_SIZE};
pub use tv::{tv_subgrad, tv_value};
pub use wavelet::{dwt2, idwt2, WaveletCoeffs, DEFAULT_LEVELS};

/// Sign with `sign(0) = 0`, the subgradient selection used for every l1 term.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
