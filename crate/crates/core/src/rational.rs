//! Canonical arbitrary-precision rationals.
//!
//! Every real quantity handled by the crate is a [`Rational`]. Values are
//! always kept in lowest terms with a positive denominator, and they travel
//! through JSON as the string `"p/q"` (integers as `"p/1"`).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Self {
        Rational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// `2^exp` for any signed exponent.
    pub fn pow2(exp: i64) -> Self {
        let p = BigInt::one() << exp.unsigned_abs();
        if exp >= 0 {
            Rational::from_integer(p)
        } else {
            Rational(BigRational::new_raw(BigInt::one(), p))
        }
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    pub fn pow(&self, exp: u32) -> Self {
        Rational(num_traits::Pow::pow(&self.0, exp))
    }

    /// Largest integer not exceeding `self`.
    pub fn floor_int(&self) -> BigInt {
        self.0.numer().div_floor(self.0.denom())
    }

    /// Multiply by `2^exp` without going through a general multiplication.
    pub fn mul_pow2(&self, exp: i64) -> Self {
        let shift = exp.unsigned_abs();
        if exp >= 0 {
            Rational::new(self.numer() << shift, self.denom().clone())
        } else {
            Rational::new(self.numer().clone(), self.denom() << shift)
        }
    }

    /// `Some(r)` when `self = r^exp` for a rational `r >= 0`.
    pub fn exact_root(&self, exp: u32) -> Option<Self> {
        if self.is_negative() || exp == 0 {
            return None;
        }
        let n = self.numer().nth_root(exp);
        let d = self.denom().nth_root(exp);
        if num_traits::Pow::pow(&n, exp) == *self.numer() && num_traits::Pow::pow(&d, exp) == *self.denom() {
            Some(Rational::new(n, d))
        } else {
            None
        }
    }

    /// Lossy conversion, for diagnostics only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering with `digits` significant digits, rounded half to
    /// even, in scientific notation (`d.ddd…e±x`).
    pub fn to_decimal(&self, digits: usize) -> String {
        assert!(digits >= 1);
        if self.is_zero() {
            return format!("0.{}e0", "0".repeat(digits - 1));
        }
        let sign = if self.is_negative() { "-" } else { "" };
        let n = self.numer().abs();
        let d = self.denom().clone();
        let ten = BigInt::from(10u32);
        // Estimate floor(log10 |x|) from digit counts, then correct.
        let mut e = n.to_string().len() as i64 - d.to_string().len() as i64;
        let scaled = |e: i64| -> (BigInt, BigInt) {
            // |x| * 10^(digits-1-e) as numerator/denominator
            let k = digits as i64 - 1 - e;
            if k >= 0 {
                (&n * num_traits::Pow::pow(&ten, k as u64), d.clone())
            } else {
                (n.clone(), &d * num_traits::Pow::pow(&ten, (-k) as u64))
            }
        };
        let lo = num_traits::Pow::pow(&ten, (digits - 1) as u64);
        let hi = &lo * &ten;
        loop {
            let (sn, sd) = scaled(e);
            let q = sn.div_floor(&sd);
            if q < lo {
                e -= 1;
            } else if q >= hi {
                e += 1;
            } else {
                break;
            }
        }
        let (sn, sd) = scaled(e);
        let (mut q, r) = sn.div_mod_floor(&sd);
        let twice = &r * 2u32;
        match twice.cmp(&sd) {
            Ordering::Greater => q += 1u32,
            Ordering::Equal if q.is_odd() => q += 1u32,
            _ => {}
        }
        if q == hi {
            q = lo.clone();
            e += 1;
        }
        let s = q.to_string();
        let (head, tail) = s.split_at(1);
        if tail.is_empty() {
            format!("{sign}{head}e{e}")
        } else {
            format!("{sign}{head}.{tail}e{e}")
        }
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        Rational(r)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `p/q` or a bare integer `p`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::Parse(format!("not a rational: {s:?}"));
        let s = s.trim();
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (s, "1"),
        };
        let p: BigInt = p.parse().map_err(|_| bad())?;
        let q: BigInt = q.parse().map_err(|_| bad())?;
        if q.sign() == Sign::NoSign {
            return Err(bad());
        }
        Ok(Rational::new(p, q))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        // Archives must be canonical: reject anything not already in lowest terms.
        let r: Rational = s.parse().map_err(serde::de::Error::custom)?;
        if r.to_string() != s {
            return Err(serde::de::Error::custom(format!("non-canonical rational {s:?}")));
        }
        Ok(r)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational($trait::$method(&self.0, &rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational($trait::$method(self.0, rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational($trait::$method(self.0, &rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational($trait::$method(&self.0, rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl std::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

/// Compare `a*b` with `c*d` without normalizing the products.
pub fn cmp_products(a: &Rational, b: &Rational, c: &Rational, d: &Rational) -> Ordering {
    // All denominators are positive, so cross-multiplying preserves order.
    let lhs = a.numer() * b.numer() * c.denom() * d.denom();
    let rhs = c.numer() * d.numer() * a.denom() * b.denom();
    lhs.cmp(&rhs)
}

/// Shorthand used throughout the tests and examples.
pub fn q(numer: i64, denom: i64) -> Rational {
    Rational::new(numer, denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_lowest_terms() {
        assert_eq!(q(6, 8).to_string(), "3/4");
        assert_eq!(q(1, -2).to_string(), "-1/2");
        assert_eq!(Rational::zero().to_string(), "0/1");
        assert_eq!(Rational::from_integer(5).to_string(), "5/1");
    }

    #[test]
    fn parse_forms() {
        assert_eq!("3/4".parse::<Rational>().unwrap(), q(3, 4));
        assert_eq!("-7".parse::<Rational>().unwrap(), q(-7, 1));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("x".parse::<Rational>().is_err());
    }

    #[test]
    fn serde_rejects_non_canonical() {
        let ok: Rational = serde_json::from_str("\"3/4\"").unwrap();
        assert_eq!(ok, q(3, 4));
        assert!(serde_json::from_str::<Rational>("\"6/8\"").is_err());
        assert!(serde_json::from_str::<Rational>("\"3\"").is_err());
        assert_eq!(serde_json::to_string(&q(-1, 2)).unwrap(), "\"-1/2\"");
    }

    #[test]
    fn pow2_and_roots() {
        assert_eq!(Rational::pow2(-3), q(1, 8));
        assert_eq!(Rational::pow2(4), q(16, 1));
        assert_eq!(q(3, 4).mul_pow2(-2), q(3, 16));
        assert_eq!(q(9, 16).exact_root(2), Some(q(3, 4)));
        assert_eq!(q(1, 2).exact_root(2), None);
        assert_eq!(q(-7, 2).floor_int(), BigInt::from(-4));
    }

    #[test]
    fn decimal_rounding() {
        assert_eq!(q(27, 64).to_decimal(20), "4.2187500000000000000e-1");
        assert_eq!(q(1, 3).to_decimal(5), "3.3333e-1");
        assert_eq!(q(2, 3).to_decimal(5), "6.6667e-1");
        // ties go to even
        assert_eq!(q(125, 1000).to_decimal(2), "1.2e-1");
        assert_eq!(q(135, 1000).to_decimal(2), "1.4e-1");
        assert_eq!(q(-999_999, 1).to_decimal(3), "-1.00e6");
        assert_eq!(Rational::zero().to_decimal(3), "0.00e0");
    }

    #[test]
    fn product_comparison() {
        assert_eq!(cmp_products(&q(1, 2), &q(3, 4), &q(3, 8), &q(1, 1)), Ordering::Equal);
        assert_eq!(cmp_products(&q(1, 2), &q(3, 4), &q(1, 3), &q(1, 1)), Ordering::Greater);
    }
}
