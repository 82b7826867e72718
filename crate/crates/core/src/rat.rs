//! Exact rational numbers.
//!
//! `Rat` wraps an arbitrary-precision rational in canonical reduced form
//! (positive denominator, coprime parts). Capitals, stakes and weights are
//! all `Rat`; nothing in a capital computation ever goes through floating
//! point. The one place a float appears is [`Rat::to_f64`], used only for
//! the optional plotting column of exported data.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use dashu_base::{DivRem, UnsignedAbs};
use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatError {
    #[error("cannot parse rational {0:?} (expected \"num/den\" or an integer)")]
    Parse(String),
    #[error("zero denominator")]
    ZeroDenominator,
}

/// An exact rational number in canonical form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(RBig);

impl Rat {
    pub fn zero() -> Self {
        Rat(RBig::ZERO)
    }

    pub fn one() -> Self {
        Rat(RBig::ONE)
    }

    pub fn new(numerator: i64, denominator: i64) -> Result<Self, RatError> {
        if denominator == 0 {
            return Err(RatError::ZeroDenominator);
        }
        Ok(Rat(RBig::from_parts_signed(
            IBig::from(numerator),
            IBig::from(denominator),
        )))
    }

    /// Panicking constructor for literals in code and tests.
    pub fn frac(numerator: i64, denominator: i64) -> Self {
        Self::new(numerator, denominator).expect("nonzero denominator")
    }

    pub fn int(value: i64) -> Self {
        Rat(RBig::from(value))
    }

    pub fn from_big(numerator: IBig, denominator: UBig) -> Result<Self, RatError> {
        if denominator == UBig::ZERO {
            return Err(RatError::ZeroDenominator);
        }
        Ok(Rat(RBig::from_parts(numerator, denominator)))
    }

    /// `2^exp` for nonnegative or negative `exp`.
    pub fn pow2(exp: i64) -> Self {
        let p = UBig::ONE << exp.unsigned_abs() as usize;
        if exp >= 0 {
            Rat(RBig::from_parts(IBig::from(p), UBig::ONE))
        } else {
            Rat(RBig::from_parts(IBig::ONE, p))
        }
    }

    pub fn numerator(&self) -> &IBig {
        self.0.numerator()
    }

    pub fn denominator(&self) -> &UBig {
        self.0.denominator()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        *self.0.numerator() > IBig::ZERO
    }

    pub fn is_negative(&self) -> bool {
        *self.0.numerator() < IBig::ZERO
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rat(RBig::ONE / &self.0)
    }

    pub fn pow(&self, exp: usize) -> Self {
        let (n, d) = (self.0.numerator().pow(exp), self.0.denominator().pow(exp));
        Rat(RBig::from_parts(n, d))
    }

    pub fn floor(&self) -> IBig {
        self.0.floor()
    }

    /// Number of bits in numerator plus denominator; a rough size measure.
    pub fn size_bits(&self) -> usize {
        use dashu_base::BitTest;
        self.0.numerator().unsigned_abs().bit_len() + self.0.denominator().bit_len()
    }

    /// Decimal approximation for plotting columns. Never used in capital
    /// arithmetic.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    pub fn min(self, other: Self) -> Self {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Self) -> Self {
        std::cmp::max(self, other)
    }
}

/// Compares `Σ weight_i · value_i` against `bound`, exactly.
///
/// Each product is first bracketed between consecutive multiples of
/// `2^-PRECISION` using integer division only; the full rational sum (which
/// needs big gcds once denominators have thousands of bits) is formed only
/// when the brackets straddle `bound`.
pub fn weighted_sum_cmp<'a, I>(terms: I, bound: &Rat) -> Ordering
where
    I: IntoIterator<Item = (&'a Rat, &'a Rat)>,
    I::IntoIter: Clone,
{
    const PRECISION: usize = 96;
    let terms = terms.into_iter();
    let mut lower = IBig::ZERO;
    let mut count = 0usize;
    let mut all_exact = true;
    for (w, v) in terms.clone() {
        let num = w.numerator() * v.numerator();
        let den = IBig::from(w.denominator() * v.denominator());
        let (q, r) = (num << PRECISION).div_rem(&den);
        // div_rem truncates toward zero; move to the floor for negative terms
        let q = if r < IBig::ZERO { q - IBig::ONE } else { q };
        if r != IBig::ZERO {
            all_exact = false;
        }
        lower += q;
        count += 1;
    }
    // floor(bound · 2^P) and whether it is exact
    let bnum = bound.numerator() << PRECISION;
    let bden = IBig::from(bound.denominator().clone());
    let (bq, br) = bnum.div_rem(&bden);
    let bq = if br < IBig::ZERO { bq - IBig::ONE } else { bq };
    let bound_exact = br == IBig::ZERO;

    if all_exact {
        // the sum is exactly lower · 2^-P
        if bound_exact {
            return lower.cmp(&bq);
        }
        return if lower <= bq { Ordering::Less } else { Ordering::Greater };
    }
    // sum · 2^P lies strictly inside (lower, lower + count); bound · 2^P in [bq, bq + 1)
    if &lower + IBig::from(count) <= bq {
        return Ordering::Less;
    }
    if lower >= &bq + IBig::ONE || (bound_exact && lower >= bq) {
        return Ordering::Greater;
    }
    let sum: Rat = terms.map(|(w, v)| w * v).sum();
    sum.cmp(bound)
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numerator(), self.0.denominator())
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rat {
    type Err = RatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse_int = |t: &str| -> Result<IBig, RatError> {
            IBig::from_str(t.trim()).map_err(|_| RatError::Parse(s.to_string()))
        };
        match s.split_once('/') {
            Some((n, d)) => {
                let n = parse_int(n)?;
                let d = parse_int(d)?;
                if d == IBig::ZERO {
                    return Err(RatError::ZeroDenominator);
                }
                Ok(Rat(RBig::from_parts_signed(n, d)))
            }
            None => Ok(Rat(RBig::from(parse_int(s)?))),
        }
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(Rat::int(i)),
        }
    }
}

impl From<i64> for Rat {
    fn from(value: i64) -> Self {
        Rat::int(value)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat(self.0.$method(&rhs.0))
            }
        }
        impl $trait<Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((&self.0).$method(rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);

impl Div<&Rat> for &Rat {
    type Output = Rat;
    fn div(self, rhs: &Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(&self.0 / &rhs.0)
    }
}

impl Div<Rat> for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        &self / &rhs
    }
}

impl Div<Rat> for &Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        self / &rhs
    }
}

impl Div<&Rat> for Rat {
    type Output = Rat;
    fn div(self, rhs: &Rat) -> Rat {
        &self / rhs
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rat> for Rat {
    fn sum<I: Iterator<Item = &'a Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, x| acc + x)
    }
}
