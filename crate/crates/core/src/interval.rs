//! Extended reals and intervals of the real line with independently open or
//! closed endpoints.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A point of `[-inf, +inf]`.
///
/// Serialized as a JSON number when finite and as the strings `"-inf"` /
/// `"+inf"` otherwise, so reports never lose the distinction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtendedReal::PosInfinity
        } else if x == f64::NEG_INFINITY {
            ExtendedReal::NegInfinity
        } else {
            ExtendedReal::Finite(x)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::NegInfinity => f64::NEG_INFINITY,
            ExtendedReal::Finite(x) => x,
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        ExtendedReal::from_f64(x)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::NegInfinity => f.write_str("-inf"),
            ExtendedReal::PosInfinity => f.write_str("+inf"),
            ExtendedReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(x) => s.serialize_f64(*x),
            ExtendedReal::NegInfinity => s.serialize_str("-inf"),
            ExtendedReal::PosInfinity => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(ExtendedReal::from_f64(x)),
            Repr::Str(s) => match s.as_str() {
                "-inf" => Ok(ExtendedReal::NegInfinity),
                "+inf" | "inf" => Ok(ExtendedReal::PosInfinity),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, \"-inf\" or \"+inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// Interval `lo..hi` of the real line. Infinite endpoints are always open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainInterval {
    pub lo: ExtendedReal,
    pub hi: ExtendedReal,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl DomainInterval {
    /// Builds an interval from `f64` endpoints (infinities allowed). A closed
    /// bound that is infinite is silently opened.
    pub fn new(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Self {
        debug_assert!(lo <= hi, "interval endpoints out of order: {lo} > {hi}");
        DomainInterval {
            lo: lo.into(),
            hi: hi.into(),
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, true, hi, true)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, false, hi, false)
    }

    pub fn real_line() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64()
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64()
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = (self.lo_f64(), self.hi_f64());
        let above = if self.lo_closed { x >= lo } else { x > lo };
        let below = if self.hi_closed { x <= hi } else { x < hi };
        above && below
    }

    pub fn interior_contains(&self, x: f64) -> bool {
        x > self.lo_f64() && x < self.hi_f64()
    }

    pub fn closure_contains(&self, x: f64) -> bool {
        x >= self.lo_f64() && x <= self.hi_f64()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi_f64() - self.lo_f64()
    }
}

impl fmt::Display for DomainInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_closed { '[' } else { '(' };
        let close = if self.hi_closed { ']' } else { ')' };
        write!(f, "{open}{}, {}{close}", self.lo, self.hi)
    }
}
