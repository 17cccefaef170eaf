//! Wall-clock access for solve reports.
//!
//! The core crate has no notion of time; callers with `std` plug in a real
//! clock, everyone else gets zeros.

/// Source of elapsed wall time, in seconds since some fixed origin.
pub trait Clock {
    fn elapsed_secs(&self) -> f64;
}

/// A clock that never advances.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_secs(&self) -> f64 {
        0.0
    }
}
