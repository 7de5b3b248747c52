//! Rational lattice arithmetic.
//!
//! Demand atoms, order rates, and inventory levels are integer multiples of
//! a positive rational unit. Mixed-unit computations (a demand lattice and a
//! rational order rate, say) first rescale everything onto the coarsest
//! common refinement so that all dynamics run in `i64` with no rounding.

use crate::{Error, Result};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// Exact rational scalar. Always kept in reduced form by `num_rational`.
pub type Rational = Ratio<i64>;

/// Rational wrapper with `"p/q"` string (de)serialization, so config files
/// and reports stay exact (`"1/3"` instead of `0.3333...`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rat(pub Rational);

impl Rat {
    pub fn new(numer: i64, denom: i64) -> Self {
        Rat(Rational::new(numer, denom))
    }

    pub fn from_int(n: i64) -> Self {
        Rat(Rational::from_integer(n))
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().expect("i64 ratio always fits f64")
    }

    pub fn is_positive(self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    /// Exact conversion of a finite `f64` (every finite float is a dyadic
    /// rational). Fails if the reduced fraction does not fit in `i64`.
    pub fn try_from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::BadParameter(format!("{x} is not a finite number")));
        }
        let mut num = x;
        let mut den = 1i64;
        while num != num.trunc() {
            if den > (1i64 << 52) || num.abs() > 9.0e15 {
                return Err(Error::BadParameter(format!(
                    "{x} has no exact i64 rational representation"
                )));
            }
            num *= 2.0;
            den *= 2;
        }
        if num.abs() > 9.2e18 {
            return Err(Error::BadParameter(format!("{x} overflows i64")));
        }
        Ok(Rat(Rational::new(num as i64, den)))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom() == &1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Rat {
    type Err = Error;

    /// Accepts `"3"`, `"-3"`, `"1/2"`, and finite decimals like `"0.25"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::BadParameter(format!("cannot parse rational from {s:?}"));
        if let Some((num, den)) = s.split_once('/') {
            let n: i64 = num.trim().parse().map_err(|_| bad())?;
            let d: i64 = den.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Rat(Rational::new(n, d)));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = int.trim_start().starts_with('-');
            let whole: i64 = if int == "-" || int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let digits: i64 = frac.parse().map_err(|_| bad())?;
            let scale = 10i64
                .checked_pow(frac.len() as u32)
                .ok_or_else(|| Error::BadParameter(format!("decimal {s:?} has too many digits")))?;
            let frac_part = Rational::new(digits, scale);
            let whole_part = Rational::from_integer(whole.abs());
            let abs = whole_part + frac_part;
            return Ok(Rat(if negative || whole < 0 { -abs } else { abs }));
        }
        let n: i64 = s.parse().map_err(|_| bad())?;
        Ok(Rat(Rational::from_integer(n)))
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RatVisitor;
        impl serde::de::Visitor<'_> for RatVisitor {
            type Value = Rat;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational as \"p/q\" string, integer, or finite float")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Rat, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Rat, E> {
                Ok(Rat::from_int(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Rat, E> {
                i64::try_from(v).map(Rat::from_int).map_err(E::custom)
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<Rat, E> {
                Rat::try_from_f64(v).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(RatVisitor)
    }
}

/// Coarsest unit dividing both `a` and `b`: the rational gcd
/// `gcd(p1 q2, p2 q1) / (q1 q2)`. Both inputs must be positive.
pub fn refine(a: Rat, b: Rat) -> Result<Rat> {
    if !a.is_positive() || !b.is_positive() {
        return Err(Error::LatticeMismatch(format!(
            "cannot refine non-positive units {a} and {b}"
        )));
    }
    let (p1, q1) = (*a.0.numer(), *a.0.denom());
    let (p2, q2) = (*b.0.numer(), *b.0.denom());
    let num = p1
        .checked_mul(q2)
        .zip(p2.checked_mul(q1))
        .map(|(x, y)| x.gcd(&y))
        .ok_or_else(|| Error::LatticeMismatch(format!("unit refinement of {a} and {b} overflows")))?;
    let den = q1
        .checked_mul(q2)
        .ok_or_else(|| Error::LatticeMismatch(format!("unit refinement of {a} and {b} overflows")))?;
    Ok(Rat(Rational::new(num, den)))
}

/// Coarsest unit dividing `b` and every element of `units`.
pub fn refine_all(units: &[Rat], b: Rat) -> Result<Rat> {
    units.iter().try_fold(b, |acc, &u| refine(acc, u))
}

/// How many `unit`s make up `value`, if exactly an integer count.
pub fn multiple_of(value: Rat, unit: Rat) -> Result<i64> {
    if !unit.is_positive() {
        return Err(Error::LatticeMismatch(format!("unit {unit} must be positive")));
    }
    let q = value.0 / unit.0;
    if q.denom() == &1 {
        Ok(*q.numer())
    } else {
        Err(Error::LatticeMismatch(format!(
            "{value} is not an integer multiple of {unit}"
        )))
    }
}
