//! Virtual time.
//!
//! The simulator clock counts integer nanoseconds so that event ordering and
//! accumulated costs are exact and platform independent. Cost tables are
//! written in milliseconds and converted once, with round-half-up.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// A point on (or a span of) the virtual clock, in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VirtualTime(u64);

impl VirtualTime {
    pub const ZERO: VirtualTime = VirtualTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        VirtualTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        VirtualTime(us * 1_000)
    }

    /// Converts a millisecond quantity, rounding to the nearest nanosecond.
    ///
    /// Negative and NaN inputs clamp to zero; infinite inputs saturate.
    pub fn from_millis_f64(ms: f64) -> Self {
        if ms.is_nan() || ms <= 0.0 {
            return VirtualTime(0);
        }
        let ns = (ms * 1e6).round();
        if ns >= u64::MAX as f64 {
            VirtualTime(u64::MAX)
        } else {
            VirtualTime(ns as u64)
        }
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: VirtualTime) -> VirtualTime {
        VirtualTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for VirtualTime {
    type Output = VirtualTime;
    fn add(self, rhs: VirtualTime) -> VirtualTime {
        VirtualTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for VirtualTime {
    fn add_assign(&mut self, rhs: VirtualTime) {
        *self = *self + rhs;
    }
}

impl Sub for VirtualTime {
    type Output = VirtualTime;
    fn sub(self, rhs: VirtualTime) -> VirtualTime {
        VirtualTime(self.0 - rhs.0)
    }
}

impl fmt::Display for VirtualTime {
    /// Milliseconds with three decimals, e.g. `43.306 ms`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ms", self.as_millis_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn millis_round_trip() {
        assert_eq!(VirtualTime::from_millis_f64(0.67).as_nanos(), 670_000);
        assert_eq!(VirtualTime::from_millis_f64(-1.0), VirtualTime::ZERO);
        assert_eq!(VirtualTime::from_millis_f64(f64::NAN), VirtualTime::ZERO);
        assert_eq!(VirtualTime::from_millis_f64(f64::INFINITY).as_nanos(), u64::MAX);
        assert_eq!(VirtualTime::from_millis_f64(43.30607).to_string(), "43.306 ms");
    }
}
