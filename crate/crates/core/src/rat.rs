//! Exact rational time arithmetic.
//!
//! All lengths are nonnegative integers in a fixed length-unit, and the
//! simulation clock stays exact by representing times as `i64` ratios.
//! Speed factors divide lengths, so serve and completion times are rationals
//! in general; comparisons are exact (cross-multiplication inside `Ratio`).

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

pub type Rat = Ratio<i64>;

/// Integer-valued rational.
pub fn rat(n: i64) -> Rat {
    Ratio::from_integer(n)
}

/// `n / d`, normalized. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rat {
    Ratio::new(n, d)
}

/// `ceil(a / b)` for `b > 0` and `a >= 0`.
pub fn ceil_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0 && a >= 0);
    (a + b - 1) / b
}

/// `floor(a / b)` for `b > 0` and `a >= 0`.
pub fn floor_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0 && a >= 0);
    a / b
}

/// Wire representation of a rational: a plain JSON integer when the value is
/// integral, otherwise the string `"numer/denom"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatRepr {
    Int(i64),
    Str(String),
}

impl From<Rat> for RatRepr {
    fn from(r: Rat) -> Self {
        if r.is_integer() {
            RatRepr::Int(r.to_integer())
        } else {
            RatRepr::Str(format!("{}/{}", r.numer(), r.denom()))
        }
    }
}

impl TryFrom<&RatRepr> for Rat {
    type Error = String;

    fn try_from(repr: &RatRepr) -> Result<Self, Self::Error> {
        match repr {
            RatRepr::Int(n) => Ok(rat(*n)),
            RatRepr::Str(s) => parse_rat(s),
        }
    }
}

/// Parse `"n"` or `"n/d"` into a rational.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    match s.split_once('/') {
        None => i64::from_str(s)
            .map(rat)
            .map_err(|e| format!("bad rational {s:?}: {e}")),
        Some((n, d)) => {
            let n = i64::from_str(n.trim()).map_err(|e| format!("bad numerator {n:?}: {e}"))?;
            let d = i64::from_str(d.trim()).map_err(|e| format!("bad denominator {d:?}: {e}"))?;
            if d == 0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(ratio(n, d))
        }
    }
}

/// Render a rational as `"n"` or `"n/d"`.
pub fn fmt_rat(r: Rat) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
