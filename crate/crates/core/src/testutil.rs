use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{ComplexGrid, RealGrid};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_real(rng: &mut TestRng, h: usize, w: usize) -> RealGrid {
    RealGrid::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_complex(rng: &mut TestRng, h: usize, w: usize) -> ComplexGrid {
    ComplexGrid::from_fn(h, w, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}
