//! Floating-point operation accounting.
//!
//! One unit per scalar addition, subtraction or multiplication. Comparisons,
//! absolute values, index arithmetic and transcendental calls are free.

use std::fmt;

/// Monotone tally of scalar additions and multiplications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlopCounter {
    count: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, flops: u64) {
        self.count += flops;
    }

    #[inline]
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Flops accumulated since `earlier` was copied off this counter.
    pub fn since(&self, earlier: FlopCounter) -> u64 {
        self.count - earlier.count
    }
}

impl fmt::Display for FlopCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} flops", self.count)
    }
}
