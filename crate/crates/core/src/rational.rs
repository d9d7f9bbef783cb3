//! Exact rational numbers with a strict `p/q` text encoding.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An arbitrary-precision rational, always kept in lowest terms with a
/// positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal {0:?}; expected \"p/q\" or \"p\"")]
    Malformed(String),
    #[error("decimal literal {0:?} rejected; use an exact \"p/q\" fraction")]
    Decimal(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

impl Rational {
    /// Panics if `den` is zero.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        Rational(BigRational::new(num, den))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    /// Lossy conversion for display and plotting only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Parses either an exact fraction or a finite decimal such as `0.375`
    /// (converted exactly, so `0.1` becomes `1/10`). Intended for human input
    /// at service boundaries; file formats use the strict [`FromStr`].
    pub fn parse_lenient(s: &str) -> Result<Self, ParseRationalError> {
        let t = s.trim();
        if !t.contains('.') {
            return t.parse();
        }
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int_part, frac_part) = body
            .split_once('.')
            .ok_or_else(|| ParseRationalError::Malformed(s.to_string()))?;
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty())
            || !all_digits(int_part)
            || !all_digits(frac_part)
        {
            return Err(ParseRationalError::Malformed(s.to_string()));
        }
        let digits = format!("{int_part}{frac_part}");
        let num: BigInt = digits
            .parse()
            .map_err(|_| ParseRationalError::Malformed(s.to_string()))?;
        let den = BigInt::from(10u32).pow(frac_part.len() as u32);
        let r = Rational::from_big(num, den);
        Ok(if neg { -r } else { r })
    }

    /// Decimal rendering rounded half away from zero to `places` digits.
    pub fn to_decimal(&self, places: usize) -> String {
        let scale = BigInt::from(10u32).pow(places as u32);
        let scaled = &self.0 * BigRational::from_integer(scale.clone());
        let rounded = scaled.round().to_integer();
        let neg = rounded.is_negative();
        let (int, frac) = rounded.abs().div_rem(&scale);
        let sign = if neg { "-" } else { "" };
        if places == 0 {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{:0>width$}", frac.to_string(), width = places)
        }
    }
}

fn is_integer_literal(s: &str, allow_sign: bool) -> bool {
    let digits = if allow_sign {
        s.strip_prefix('-').unwrap_or(s)
    } else {
        s
    };
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `p/q` or `p` where `p` may carry a leading `-` and `q` is a
    /// positive integer. Decimal and exponent forms are rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        if s.contains(['.', 'e', 'E']) {
            return Err(ParseRationalError::Decimal(s.to_string()));
        }
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        if !is_integer_literal(n, true) || !is_integer_literal(d, false) {
            return Err(ParseRationalError::Malformed(s.to_string()));
        }
        let num: BigInt = n
            .parse()
            .map_err(|_| ParseRationalError::Malformed(s.to_string()))?;
        let den: BigInt = d
            .parse()
            .map_err(|_| ParseRationalError::Malformed(s.to_string()))?;
        if den.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        Ok(Rational(BigRational::new(num, den)))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
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
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
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

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

/// Shorthand for `Rational::new(num, den)`.
pub fn q(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_fractions_and_integers() {
        assert_eq!("3/6".parse::<Rational>().unwrap(), q(1, 2));
        assert_eq!("-7".parse::<Rational>().unwrap(), q(-7, 1));
        assert_eq!("0".parse::<Rational>().unwrap(), Rational::zero());
    }

    #[test]
    fn rejects_decimals_and_junk() {
        assert!(matches!(
            "0.5".parse::<Rational>(),
            Err(ParseRationalError::Decimal(_))
        ));
        assert!(matches!(
            "1e3".parse::<Rational>(),
            Err(ParseRationalError::Decimal(_))
        ));
        assert!(matches!(
            "1/0".parse::<Rational>(),
            Err(ParseRationalError::ZeroDenominator(_))
        ));
        for bad in ["", "/2", "1/", "1/-2", "+1", " 1", "a/b", "1//2"] {
            assert!(bad.parse::<Rational>().is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn lenient_parse_converts_decimals_exactly() {
        assert_eq!(Rational::parse_lenient("0.375").unwrap(), q(3, 8));
        assert_eq!(Rational::parse_lenient("-.5").unwrap(), q(-1, 2));
        assert_eq!(Rational::parse_lenient("2/3").unwrap(), q(2, 3));
        assert!(Rational::parse_lenient(".").is_err());
        assert!(Rational::parse_lenient("1.2.3").is_err());
    }

    #[test]
    fn decimal_rendering_rounds() {
        assert_eq!(q(1, 3).to_decimal(4), "0.3333");
        assert_eq!(q(2, 3).to_decimal(2), "0.67");
        assert_eq!(q(-1, 8).to_decimal(2), "-0.13");
        assert_eq!(q(7, 2).to_decimal(0), "4");
    }

    #[test]
    fn serde_uses_strings() {
        let json = serde_json::to_string(&q(5, 12)).unwrap();
        assert_eq!(json, "\"5/12\"");
        let back: Rational = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q(5, 12));
        assert!(serde_json::from_str::<Rational>("0.5").is_err());
        assert!(serde_json::from_str::<Rational>("\"0.5\"").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(n in -1_000_000i64..1_000_000, d in 1i64..1_000_000) {
            let r = q(n, d);
            let back: Rational = r.to_string().parse().unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
