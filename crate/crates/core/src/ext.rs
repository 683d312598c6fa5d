//! Extended reals `[-inf, +inf]` with explicit sentinels.
//!
//! Penalties live in `[-inf, 0]` and rates in `[0, +inf]`. Both infinities are
//! absorbing under addition of a finite real and neutral under the matching
//! lattice operation (`max(v, -inf) = v`, `min(v, +inf) = v`). Adding two
//! extended values of opposite infinite sign is not defined and is not offered.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

pub use ExtReal::{NegInf, PosInf};

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps IEEE infinities onto the sentinels.
    ///
    /// Panics on NaN: a NaN reaching this point is a bug upstream.
    pub fn from_f64(v: f64) -> Self {
        if v.is_nan() {
            panic!("NaN cannot be represented as an extended real");
        } else if v == f64::INFINITY {
            PosInf
        } else if v == f64::NEG_INFINITY {
            NegInf
        } else {
            ExtReal::Finite(v)
        }
    }

    /// IEEE view, used only at numeric boundaries (log-sum-exp inputs, output).
    pub fn to_f64(self) -> f64 {
        match self {
            NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            PosInf => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// `self - other` as a plain float for gap reporting: equal infinities give 0.
    pub fn gap(self, other: Self) -> f64 {
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => 0.0,
            (a, b) => a.to_f64() - b.to_f64(),
        }
    }

    /// Absolute distance with the same convention as [`ExtReal::gap`].
    pub fn abs_diff(self, other: Self) -> f64 {
        self.gap(other).abs()
    }

    pub fn approx_eq(self, other: Self, tol: f64) -> bool {
        self.abs_diff(other) <= tol
    }
}

impl PartialEq for ExtReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        fn rank(v: &ExtReal) -> u8 {
            match v {
                NegInf => 0,
                ExtReal::Finite(_) => 1,
                PosInf => 2,
            }
        }
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b).unwrap_or_else(|| a.total_cmp(b)),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::from_f64(v)
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: f64) -> ExtReal {
        debug_assert!(rhs.is_finite());
        match self {
            ExtReal::Finite(v) => ExtReal::from_f64(v + rhs),
            inf => inf,
        }
    }
}

impl Add<ExtReal> for f64 {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        rhs + self
    }
}

impl Sub<f64> for ExtReal {
    type Output = ExtReal;

    fn sub(self, rhs: f64) -> ExtReal {
        self + (-rhs)
    }
}

impl Sub<ExtReal> for f64 {
    type Output = ExtReal;

    fn sub(self, rhs: ExtReal) -> ExtReal {
        (-rhs) + self
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;

    fn neg(self) -> ExtReal {
        match self {
            NegInf => PosInf,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            PosInf => NegInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => f.write_str("-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            PosInf => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            NegInf => serializer.serialize_str("-inf"),
            ExtReal::Finite(v) => serializer.serialize_f64(*v),
            PosInf => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtVisitor;

        impl Visitor<'_> for ExtVisitor {
            type Value = ExtReal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or one of \"-inf\", \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtReal, E> {
                if v.is_nan() {
                    return Err(E::custom("NaN is not an extended real"));
                }
                Ok(ExtReal::from_f64(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtReal, E> {
                Ok(ExtReal::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtReal, E> {
                Ok(ExtReal::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtReal, E> {
                match v {
                    "-inf" => Ok(NegInf),
                    "inf" | "+inf" => Ok(PosInf),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(ExtVisitor)
    }
}
