/// Monotonic time source in seconds. The core has no clock of its own; std
/// callers supply one.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Clock that never advances; recorded durations are zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

impl<F: Fn() -> f64> Clock for F {
    fn now(&self) -> f64 {
        self()
    }
}
