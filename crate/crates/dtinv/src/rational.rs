//! Exact half-integer arithmetic.
//!
//! Split thresholds are midpoints of consecutive integer feature values, so
//! every threshold and every pre-simplification formula bound is a multiple
//! of 1/2. Storing twice the value keeps all comparisons in integers.

use std::fmt;
use std::str::FromStr;

/// A rational number with denominator 1 or 2, stored as twice its value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct HalfInt {
    twice: i64,
}

impl HalfInt {
    pub fn from_int(v: i64) -> Self {
        Self::checked_from_int(v).expect("half-integer out of range")
    }

    /// `from_int` without the panic, for bounds produced by arithmetic on
    /// untrusted input.
    pub fn checked_from_int(v: i64) -> Option<Self> {
        v.checked_mul(2).map(|twice| Self { twice })
    }

    /// The midpoint (a + b) / 2, exact.
    pub fn midpoint(a: i64, b: i64) -> Self {
        Self { twice: a.checked_add(b).expect("half-integer out of range") }
    }

    pub fn twice(self) -> i64 {
        self.twice
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    pub fn floor(self) -> i64 {
        self.twice.div_euclid(2)
    }

    pub fn ceil(self) -> i64 {
        (self.twice + 1).div_euclid(2)
    }

    /// Compares an integer against this half-integer without rounding.
    pub fn cmp_int(self, v: i64) -> std::cmp::Ordering {
        i128::from(self.twice).cmp(&(i128::from(v) * 2))
    }

    /// True when `v <= self` for an integer `v`.
    pub fn admits(self, v: i64) -> bool {
        i128::from(v) * 2 <= i128::from(self.twice)
    }

    pub fn negate(self) -> Self {
        Self { twice: -self.twice }
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.floor())
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for HalfInt {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(num) = s.strip_suffix("/2") {
            let twice: i64 = num.trim().parse().map_err(|_| format!("bad half-integer `{s}`"))?;
            Ok(Self { twice })
        } else {
            let v: i64 = s.trim().parse().map_err(|_| format!("bad half-integer `{s}`"))?;
            Ok(Self::from_int(v))
        }
    }
}
