use std::time::Instant;

use hqsnet_core::Clock;

/// Seconds since construction, from the OS monotonic clock.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock(Instant);

impl MonotonicClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Runs batch samples on the rayon pool; results keep index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonRunner;

impl hqsnet_core::net::BatchRunner for RayonRunner {
    fn run<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
}
