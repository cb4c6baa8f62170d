//! Exact rationals extended by `+inf`, p-adic valuations on `Q`, and
//! multinomial coefficients.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValuationError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("parts sum to {sum}, expected {q}")]
    PartsMismatch { q: u64, sum: u64 },
    #[error("cannot parse rational {0:?}: expected \"a\" or \"a/b\" with b != 0")]
    BadRational(String),
}

/// A rational number or `+inf`. Ordered with `Infinity` above every finite value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtendedRational {
    Finite(Rational),
    Infinity,
}

impl ExtendedRational {
    pub fn finite(x: Rational) -> Self {
        ExtendedRational::Finite(x)
    }

    pub fn from_int(n: i64) -> Self {
        ExtendedRational::Finite(Rational::from_integer(BigInt::from(n)))
    }

    pub fn from_frac(n: i64, d: i64) -> Self {
        ExtendedRational::Finite(q(n, d))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedRational::Infinity)
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            ExtendedRational::Finite(x) => Some(x),
            ExtendedRational::Infinity => None,
        }
    }

    /// Finite value or panic; for call sites where zero has been excluded.
    pub fn expect_finite(&self) -> Rational {
        self.as_finite().cloned().expect("valuation is infinite")
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Multiply by a finite rational (`inf * c = inf` for c > 0).
    pub fn scale(&self, c: &Rational) -> Self {
        match self {
            ExtendedRational::Finite(x) => ExtendedRational::Finite(x * c),
            ExtendedRational::Infinity => ExtendedRational::Infinity,
        }
    }
}

impl PartialOrd for ExtendedRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedRational {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtendedRational::*;
        match (self, other) {
            (Infinity, Infinity) => Ordering::Equal,
            (Infinity, _) => Ordering::Greater,
            (_, Infinity) => Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl Add for ExtendedRational {
    type Output = ExtendedRational;
    fn add(self, rhs: Self) -> Self {
        use ExtendedRational::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            _ => Infinity,
        }
    }
}

impl Add<&Rational> for ExtendedRational {
    type Output = ExtendedRational;
    fn add(self, rhs: &Rational) -> Self {
        match self {
            ExtendedRational::Finite(a) => ExtendedRational::Finite(a + rhs),
            ExtendedRational::Infinity => ExtendedRational::Infinity,
        }
    }
}

impl From<Rational> for ExtendedRational {
    fn from(x: Rational) -> Self {
        ExtendedRational::Finite(x)
    }
}

impl PartialEq<Rational> for ExtendedRational {
    fn eq(&self, other: &Rational) -> bool {
        matches!(self, ExtendedRational::Finite(x) if x == other)
    }
}

impl PartialOrd<Rational> for ExtendedRational {
    fn partial_cmp(&self, other: &Rational) -> Option<Ordering> {
        Some(self.cmp(&ExtendedRational::Finite(other.clone())))
    }
}

impl fmt::Display for ExtendedRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedRational::Finite(x) => write!(f, "{}", fmt_rational(x)),
            ExtendedRational::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for ExtendedRational {
    type Err = ValuationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t == "inf" || t == "INFINITY" || t == "∞" {
            return Ok(ExtendedRational::Infinity);
        }
        parse_rational(t).map(ExtendedRational::Finite)
    }
}

impl Serialize for ExtendedRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtendedRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for the rational `n/d`.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Format as `"a"` or `"a/b"`.
pub fn fmt_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parse `"a"` or `"a/b"` (optional sign on `a`, `b` nonzero).
pub fn parse_rational(s: &str) -> Result<Rational, ValuationError> {
    let bad = || ValuationError::BadRational(s.chars().take(64).collect());
    let t = s.trim();
    if t.is_empty() || t.len() > 4096 {
        return Err(bad());
    }
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let valid = |x: &str, signed: bool| {
        let body = if signed { x.strip_prefix('-').or_else(|| x.strip_prefix('+')).unwrap_or(x) } else { x };
        !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
    };
    if !valid(n, true) || !valid(d, false) {
        return Err(bad());
    }
    let n = BigInt::from_str(n).map_err(|_| bad())?;
    let d = BigInt::from_str(d).map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// serde adapter: rationals as `"a/b"` strings.
pub mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// serde adapter for `Option<Rational>`.
pub mod opt_rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(x) => s.serialize_some(&fmt_rational(x)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| parse_rational(&s).map_err(serde::de::Error::custom)).transpose()
    }
}

/// serde adapter for `Vec<Rational>`.
pub mod vec_rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(x: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(x.iter().map(fmt_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_rational(s).map_err(serde::de::Error::custom)).collect()
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn check_prime(p: u64) -> Result<(), ValuationError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(ValuationError::NotPrime(p))
    }
}

/// Exponent of `p` in a nonzero integer; `None` for zero.
pub fn vp_int(x: &BigInt, p: u64) -> Option<u64> {
    if x.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut x = x.abs();
    let mut k = 0;
    loop {
        let (quo, rem) = x.div_rem(&pb);
        if !rem.is_zero() {
            return Some(k);
        }
        x = quo;
        k += 1;
    }
}

/// Split a nonzero integer as `p^k * u` with `p` not dividing `u`.
pub fn split_p(x: &BigInt, p: u64) -> (u64, BigInt) {
    let pb = BigInt::from(p);
    let mut x = x.clone();
    let mut k = 0;
    loop {
        let (quo, rem) = x.div_rem(&pb);
        if !rem.is_zero() {
            return (k, x);
        }
        x = quo;
        k += 1;
    }
}

/// Integer-valued p-adic valuation of a nonzero rational.
pub fn vp_rat_int(x: &Rational, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let a = vp_int(x.numer(), p).unwrap() as i64;
    let b = vp_int(x.denom(), p).unwrap() as i64;
    Some(a - b)
}

/// `v_p(x)`, normalized so that `v_p(p) = 1`; `v_p(0) = inf`.
pub fn vp(x: &Rational, p: u64) -> Result<ExtendedRational, ValuationError> {
    check_prime(p)?;
    Ok(match vp_rat_int(x, p) {
        Some(k) => ExtendedRational::from_int(k),
        None => ExtendedRational::Infinity,
    })
}

/// `floor(r)`.
pub fn floor(r: &Rational) -> BigInt {
    r.floor().to_integer()
}

/// Fractional part `r - floor(r)`, in `[0, 1)`.
pub fn frac(r: &Rational) -> Rational {
    r - r.floor()
}

/// Smallest integer `>= r`.
pub fn ceil_i64(r: &Rational) -> i64 {
    r.ceil().to_integer().to_i64().expect("exponent out of range")
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `q! / (r_1! ... r_n!)`.
pub fn multinomial(q: u64, parts: &[u64]) -> Result<BigUint, ValuationError> {
    let sum: u64 = parts.iter().sum();
    if sum != q {
        return Err(ValuationError::PartsMismatch { q, sum });
    }
    // product of binomials avoids the large factorial quotient
    let mut acc = BigUint::one();
    let mut left = q;
    for &r in parts {
        acc *= binomial(left, r);
        left -= r;
    }
    Ok(acc)
}

/// Generalized binomial coefficient `binom(x, k)` for rational `x`.
pub fn binomial_rational(x: &Rational, k: u64) -> Rational {
    let mut acc = Rational::one();
    for i in 0..k {
        acc = acc * (x - Rational::from_integer(BigInt::from(i))) / Rational::from_integer(BigInt::from(i + 1));
    }
    acc
}

/// Signed big-integer binomial for `n >= 0`.
pub fn binomial_int(n: &BigInt, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - BigInt::from(i)) / BigInt::from(i + 1);
    }
    acc
}

pub fn pow_u64(p: u64, e: u32) -> BigInt {
    num_traits::pow(BigInt::from(p), e as usize)
}

impl Neg for ExtendedRational {
    type Output = ExtendedRational;
    fn neg(self) -> Self {
        match self {
            ExtendedRational::Finite(x) => ExtendedRational::Finite(-x),
            ExtendedRational::Infinity => panic!("negating infinity"),
        }
    }
}

impl Sub<&Rational> for ExtendedRational {
    type Output = ExtendedRational;
    fn sub(self, rhs: &Rational) -> Self {
        match self {
            ExtendedRational::Finite(a) => ExtendedRational::Finite(a - rhs),
            ExtendedRational::Infinity => ExtendedRational::Infinity,
        }
    }
}

impl Mul<&Rational> for ExtendedRational {
    type Output = ExtendedRational;
    fn mul(self, rhs: &Rational) -> Self {
        self.scale(rhs)
    }
}
