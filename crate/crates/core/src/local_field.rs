//! Finite-precision elements of `Q_p(pi)` with `pi^N = p`, optionally over the
//! unramified quadratic extension `Q_p(sqrt(D))` (D a non-residue mod p).
//!
//! An element is stored as at most one term `u * pi^j` per residue class of
//! `j` mod `N`, where `u` is a p-adic unit known modulo `p^m`, together with an
//! absolute precision `prec`: the element is the stated value modulo
//! `pi^prec`. Because the classes are distinct, the valuation is exactly the
//! smallest exponent present.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::valuation::{
    binomial_rational, check_prime, fmt_rational, parse_rational, q, vp_int, ExtendedRational, Rational,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocalFieldError {
    #[error("elements belong to different local-field contexts")]
    ContextMismatch,
    #[error("cannot invert zero (known modulo pi^{0})")]
    InvertZero(i64),
    #[error("{0} has no square root modulo p")]
    NoSquareRoot(String),
    #[error("binomial root series diverges: need v(x-1) > {needed}, have {have}")]
    DivergentSeries { needed: String, have: String },
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("malformed element: {0}")]
    Malformed(String),
}

/// Field parameters shared by all elements created under them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalFieldContext {
    p: u64,
    n: i64,
    m: i64,
    nonresidue: Option<BigInt>,
}

pub type Ctx = Arc<LocalFieldContext>;

impl LocalFieldContext {
    pub fn new(p: u64, n: u32, m: u32) -> Result<Ctx, LocalFieldError> {
        check_prime(p).map_err(|e| LocalFieldError::InvalidContext(e.to_string()))?;
        if n == 0 || m == 0 {
            return Err(LocalFieldError::InvalidContext("N and M must be positive".into()));
        }
        Ok(Arc::new(LocalFieldContext { p, n: n as i64, m: m as i64, nonresidue: None }))
    }

    /// Context over `Q_p(sqrt(D))(pi)`; `D` must be a non-residue mod the odd prime `p`.
    pub fn with_quadratic_layer(p: u64, n: u32, m: u32, d: i64) -> Result<Ctx, LocalFieldError> {
        check_prime(p).map_err(|e| LocalFieldError::InvalidContext(e.to_string()))?;
        if p == 2 || n == 0 || m == 0 {
            return Err(LocalFieldError::InvalidContext("need odd p and positive N, M".into()));
        }
        if legendre(&BigInt::from(d), p) != -1 {
            return Err(LocalFieldError::InvalidContext(format!("{d} is not a non-residue mod {p}")));
        }
        Ok(Arc::new(LocalFieldContext { p, n: n as i64, m: m as i64, nonresidue: Some(BigInt::from(d)) }))
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn n(&self) -> i64 {
        self.n
    }
    pub fn m(&self) -> i64 {
        self.m
    }
    pub fn nonresidue(&self) -> Option<&BigInt> {
        self.nonresidue.as_ref()
    }

    fn pb(&self) -> BigInt {
        BigInt::from(self.p)
    }

    fn p_pow(&self, e: i64) -> BigInt {
        num_traits::pow(self.pb(), e.max(0) as usize)
    }

    /// Representatives of the residue field, zero first.
    pub fn residue_digits(&self) -> Vec<Coef> {
        let p = self.p as i64;
        let mut out = Vec::new();
        match self.nonresidue {
            None => (0..p).for_each(|a| out.push(Coef::int(a))),
            Some(_) => {
                for b in 0..p {
                    for a in 0..p {
                        out.push(Coef { a: BigInt::from(a), b: BigInt::from(b) });
                    }
                }
            }
        }
        out
    }
}

/// `a + b * sqrt(D)`; `b = 0` outside the quadratic layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coef {
    pub a: BigInt,
    pub b: BigInt,
}

impl Coef {
    pub fn int(a: i64) -> Coef {
        Coef { a: BigInt::from(a), b: BigInt::zero() }
    }
    pub fn big(a: BigInt) -> Coef {
        Coef { a, b: BigInt::zero() }
    }
    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
    fn add(&self, o: &Coef) -> Coef {
        Coef { a: &self.a + &o.a, b: &self.b + &o.b }
    }
    fn neg(&self) -> Coef {
        Coef { a: -&self.a, b: -&self.b }
    }
    fn mul(&self, o: &Coef, d: Option<&BigInt>) -> Coef {
        let bb = &self.b * &o.b;
        let a = &self.a * &o.a + d.map(|d| d * &bb).unwrap_or_default();
        Coef { a, b: &self.a * &o.b + &self.b * &o.a }
    }
    fn scale(&self, k: &BigInt) -> Coef {
        Coef { a: &self.a * k, b: &self.b * k }
    }
    fn divisible_by(&self, pb: &BigInt) -> bool {
        self.a.is_multiple_of(pb) && self.b.is_multiple_of(pb)
    }
    fn div_exact(&self, pb: &BigInt) -> Coef {
        Coef { a: &self.a / pb, b: &self.b / pb }
    }
    fn reduce(&self, modulus: &BigInt) -> Coef {
        Coef { a: self.a.mod_floor(modulus), b: self.b.mod_floor(modulus) }
    }
    /// Inverse of a unit modulo `modulus = p^k`.
    fn inverse_mod(&self, modulus: &BigInt, d: Option<&BigInt>) -> Coef {
        let norm = &self.a * &self.a - d.map(|d| d * &self.b * &self.b).unwrap_or_default();
        let ninv = mod_inverse(&norm, modulus);
        Coef { a: (&self.a * &ninv).mod_floor(modulus), b: (-&self.b * &ninv).mod_floor(modulus) }
    }
    /// Residue modulo `p`, reduced to `[0, p)`.
    pub fn residue(&self, p: u64) -> Coef {
        self.reduce(&BigInt::from(p))
    }
}

impl fmt::Display for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{}+{}*sqrtD", self.a, self.b)
        }
    }
}

fn mod_inverse(x: &BigInt, m: &BigInt) -> BigInt {
    let e = x.mod_floor(m).extended_gcd(m);
    assert!(e.gcd.is_one(), "not invertible");
    e.x.mod_floor(m)
}

/// Legendre symbol `(x/p)` for odd prime `p`.
pub fn legendre(x: &BigInt, p: u64) -> i32 {
    let pb = BigInt::from(p);
    let r = x.mod_floor(&pb);
    if r.is_zero() {
        return 0;
    }
    let e = BigInt::from((p - 1) / 2);
    if r.modpow(&e, &pb).is_one() {
        1
    } else {
        -1
    }
}

/// Square root of the unit `u` modulo `p^m`, lifting the smallest
/// nonnegative square root modulo `p`.
pub fn hensel_sqrt(u: &BigInt, p: u64, m: u32) -> Result<BigInt, LocalFieldError> {
    if p == 2 || !crate::valuation::is_prime(p) {
        return Err(LocalFieldError::InvalidContext(format!("hensel_sqrt needs an odd prime, got {p}")));
    }
    let pb = BigInt::from(p);
    if u.mod_floor(&pb).is_zero() || legendre(u, p) != 1 {
        return Err(LocalFieldError::NoSquareRoot(u.to_string()));
    }
    let mut r = (1..p).map(BigInt::from).find(|r| (r * r - u).mod_floor(&pb).is_zero()).unwrap();
    let mut k = 1u32;
    while k < m {
        k = (2 * k).min(m);
        let modk = num_traits::pow(pb.clone(), k as usize);
        let inv = mod_inverse(&(BigInt::from(2) * &r), &modk);
        r = (&r - (&r * &r - u) * inv).mod_floor(&modk);
    }
    Ok(r.mod_floor(&num_traits::pow(pb, m as usize)))
}

/// One stored term `unit * pi^exp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub exp: i64,
    pub unit: Coef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalFieldElement {
    ctx: Ctx,
    prec: i64,
    terms: Vec<Term>,
}

impl LocalFieldElement {
    // ----- construction -----

    fn build(ctx: &Ctx, prec: i64, raw: Vec<(i64, Coef)>) -> Self {
        let n = ctx.n;
        let pb = ctx.pb();
        let mut classes: Vec<Vec<(i64, Coef)>> = vec![Vec::new(); n as usize];
        for (e, c) in raw {
            if c.is_zero() || e >= prec {
                continue;
            }
            let cls = e.rem_euclid(n);
            classes[cls as usize].push(((e - cls) / n, c));
        }
        let mut terms = Vec::new();
        for (cls, items) in classes.into_iter().enumerate() {
            if items.is_empty() {
                continue;
            }
            let cls = cls as i64;
            let kmin = items.iter().map(|(k, _)| *k).min().unwrap();
            let mut acc = Coef::int(0);
            for (k, c) in items {
                acc = acc.add(&c.scale(&ctx.p_pow(k - kmin)));
            }
            if acc.is_zero() {
                continue;
            }
            let mut k = kmin;
            while acc.divisible_by(&pb) {
                acc = acc.div_exact(&pb);
                k += 1;
            }
            // class coefficient known modulo p^{ceil((prec - cls)/N)}
            let known = (prec - cls).div_euclid(n) + if (prec - cls).rem_euclid(n) == 0 { 0 } else { 1 };
            let rel = known - k;
            if rel <= 0 {
                continue;
            }
            let unit = acc.reduce(&ctx.p_pow(rel));
            terms.push(Term { exp: cls + n * k, unit });
        }
        terms.sort_by_key(|t| t.exp);
        LocalFieldElement { ctx: ctx.clone(), prec, terms }
    }

    pub fn zero(ctx: &Ctx, prec: i64) -> Self {
        LocalFieldElement { ctx: ctx.clone(), prec, terms: Vec::new() }
    }

    /// `pi^j`, known to relative precision `M`.
    pub fn pi_pow(ctx: &Ctx, j: i64) -> Self {
        Self::build(ctx, j + ctx.n * ctx.m, vec![(j, Coef::int(1))])
    }

    pub fn one(ctx: &Ctx) -> Self {
        Self::pi_pow(ctx, 0)
    }

    /// A single term `u * pi^j` with explicit absolute precision.
    pub fn monomial(ctx: &Ctx, unit: Coef, j: i64, prec: i64) -> Self {
        Self::build(ctx, prec, vec![(j, unit)])
    }

    /// Embed a rational with the default relative precision `M`.
    pub fn from_rational(ctx: &Ctx, x: &Rational) -> Self {
        let v = crate::valuation::vp_rat_int(x, ctx.p).unwrap_or(0);
        Self::from_rational_prec(ctx, x, ctx.n * (v + ctx.m))
    }

    /// Embed a rational known modulo `pi^prec`.
    pub fn from_rational_prec(ctx: &Ctx, x: &Rational, prec: i64) -> Self {
        if x.is_zero() {
            return Self::zero(ctx, prec);
        }
        let pb = ctx.pb();
        let (kn, un) = crate::valuation::split_p(x.numer(), ctx.p);
        let (kd, ud) = crate::valuation::split_p(x.denom(), ctx.p);
        let k = kn as i64 - kd as i64;
        let rel = ((prec - ctx.n * k) + ctx.n - 1).div_euclid(ctx.n).max(1);
        let modulus = num_traits::pow(pb, rel as usize);
        let u = (un * mod_inverse(&ud, &modulus)).mod_floor(&modulus);
        Self::build(ctx, prec, vec![(ctx.n * k, Coef::big(u))])
    }

    pub fn from_int(ctx: &Ctx, x: i64) -> Self {
        Self::from_rational(ctx, &Rational::from_integer(BigInt::from(x)))
    }

    /// `sqrt(D)` in the quadratic layer.
    pub fn sqrt_nonresidue(ctx: &Ctx) -> Option<Self> {
        ctx.nonresidue.as_ref()?;
        Some(Self::build(ctx, ctx.n * ctx.m, vec![(0, Coef { a: BigInt::zero(), b: BigInt::one() })]))
    }

    /// Square root of an integer unit `u`, in `Z_p` when `u` is a residue,
    /// otherwise as `sqrt(u/D) * sqrt(D)` in the quadratic layer.
    pub fn sqrt_integer_unit(ctx: &Ctx, u: i64) -> Result<Self, LocalFieldError> {
        let ub = BigInt::from(u);
        let m = ctx.m as u32;
        if legendre(&ub, ctx.p) == 1 {
            let r = hensel_sqrt(&ub, ctx.p, m)?;
            return Ok(Self::build(ctx, ctx.n * ctx.m, vec![(0, Coef::big(r))]));
        }
        let d = ctx.nonresidue.clone().ok_or_else(|| LocalFieldError::NoSquareRoot(u.to_string()))?;
        let modulus = ctx.p_pow(ctx.m);
        let quotient = (&ub * mod_inverse(&d, &modulus)).mod_floor(&modulus);
        let r = hensel_sqrt(&quotient, ctx.p, m)?;
        Ok(Self::build(ctx, ctx.n * ctx.m, vec![(0, Coef { a: BigInt::zero(), b: r })]))
    }

    // ----- accessors -----

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    /// Absolute precision in units of `v(pi) = 1/N`.
    pub fn prec(&self) -> i64 {
        self.prec
    }

    /// Absolute precision as a valuation.
    pub fn precision(&self) -> Rational {
        q(self.prec, self.ctx.n)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// True when the element is zero modulo its precision.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Valuation (`inf` when zero to the known precision).
    pub fn valuation(&self) -> ExtendedRational {
        match self.terms.first() {
            Some(t) => ExtendedRational::finite(q(t.exp, self.ctx.n)),
            None => ExtendedRational::Infinity,
        }
    }

    /// Valuation in pi-units; for zero, the precision (a lower bound).
    pub fn val_pi_lower(&self) -> i64 {
        self.terms.first().map(|t| t.exp).unwrap_or(self.prec)
    }

    /// Valuation as a lower bound: exact when nonzero, the precision otherwise.
    pub fn valuation_lower(&self) -> Rational {
        q(self.val_pi_lower(), self.ctx.n)
    }

    fn same_ctx(&self, o: &Self) -> Result<(), LocalFieldError> {
        if Arc::ptr_eq(&self.ctx, &o.ctx) || *self.ctx == *o.ctx {
            Ok(())
        } else {
            Err(LocalFieldError::ContextMismatch)
        }
    }

    fn raw(&self) -> impl Iterator<Item = (i64, Coef)> + '_ {
        self.terms.iter().map(|t| (t.exp, t.unit.clone()))
    }

    // ----- arithmetic -----

    pub fn try_add(&self, o: &Self) -> Result<Self, LocalFieldError> {
        self.same_ctx(o)?;
        let prec = self.prec.min(o.prec);
        Ok(Self::build(&self.ctx, prec, self.raw().chain(o.raw()).collect()))
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self, LocalFieldError> {
        self.try_add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        Self::build(&self.ctx, self.prec, self.raw().map(|(e, c)| (e, c.neg())).collect())
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self, LocalFieldError> {
        self.same_ctx(o)?;
        let prec = (self.prec + o.val_pi_lower()).min(o.prec + self.val_pi_lower());
        let d = self.ctx.nonresidue.as_ref();
        let mut raw = Vec::with_capacity(self.terms.len() * o.terms.len());
        for s in &self.terms {
            for t in &o.terms {
                if s.exp + t.exp < prec {
                    raw.push((s.exp + t.exp, s.unit.mul(&t.unit, d)));
                }
            }
        }
        Ok(Self::build(&self.ctx, prec, raw))
    }

    pub fn mul_rational(&self, x: &Rational) -> Self {
        if x.is_zero() {
            return Self::zero(&self.ctx, self.prec.max(self.val_pi_lower()) + self.ctx.n * self.ctx.m);
        }
        let v = crate::valuation::vp_rat_int(x, self.ctx.p).unwrap();
        // rational treated as exact: enough precision not to limit the product
        let r = Self::from_rational_prec(&self.ctx, x, self.ctx.n * v + (self.prec - self.val_pi_lower()) + 1);
        self.try_mul(&r).unwrap()
    }

    /// Multiply by `pi^j` exactly.
    pub fn shift(&self, j: i64) -> Self {
        Self::build(&self.ctx, self.prec + j, self.raw().map(|(e, c)| (e + j, c)).collect())
    }

    /// Reduce to a lower absolute precision.
    pub fn truncate(&self, prec: i64) -> Self {
        Self::build(&self.ctx, prec.min(self.prec), self.raw().collect())
    }

    /// Treat the stored digits as exact and claim precision `prec`.
    pub fn with_exact_digits(&self, prec: i64) -> Self {
        Self::build(&self.ctx, prec, self.raw().collect())
    }

    pub fn try_inverse(&self) -> Result<Self, LocalFieldError> {
        let lead = self.terms.first().ok_or(LocalFieldError::InvertZero(self.prec))?.clone();
        let ctx = &self.ctx;
        let d = ctx.nonresidue.as_ref();
        let v = lead.exp;
        let rel = self.prec - v;
        // u = x / (c0 pi^v), a 1-unit known to relative precision rel
        let modulus = ctx.p_pow(rel / ctx.n + 2);
        let c0inv = lead.unit.inverse_mod(&modulus, d);
        let u = Self::build(
            ctx,
            rel,
            self.raw().map(|(e, c)| (e - v, c.mul(&c0inv, d))).collect(),
        );
        // Newton iteration y <- y + y(1 - u y)
        let one = Self::build(ctx, rel, vec![(0, Coef::int(1))]);
        let mut y = Self::build(ctx, 1.min(rel), vec![(0, Coef::int(1))]);
        let mut k = 1.min(rel);
        while k < rel {
            k = (2 * k).min(rel);
            let yk = y.with_exact_digits(k);
            let e = one.try_sub(&u.truncate(k).try_mul(&yk)?)?;
            y = yk.try_add(&yk.try_mul(&e)?)?.with_exact_digits(k);
        }
        let y = y.with_exact_digits(rel);
        // 1/x = y * c0^{-1} * pi^{-v}
        let scaled = Self::build(ctx, rel, y.raw().map(|(e, c)| (e, c.mul(&c0inv, d))).collect());
        Ok(scaled.shift(-v).truncate(rel - v))
    }

    pub fn try_div(&self, o: &Self) -> Result<Self, LocalFieldError> {
        self.try_mul(&o.try_inverse()?)
    }

    pub fn pow(&self, k: u64) -> Self {
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.try_mul(&base).unwrap(),
                });
            }
            k >>= 1;
            if k > 0 {
                base = base.try_mul(&base).unwrap();
            }
        }
        result.unwrap_or_else(|| Self::one(&self.ctx))
    }

    /// `x == y` modulo `pi^prec` (both must be known that far).
    pub fn congruent(&self, o: &Self, prec: i64) -> bool {
        match self.try_sub(o) {
            Ok(diff) => diff.prec >= prec && diff.val_pi_lower() >= prec,
            Err(_) => false,
        }
    }

    /// Class-`c` coefficient `a_c` in `x = sum_c a_c pi^c`, as `(p^k, unit)`.
    pub fn class_component(&self, c: i64) -> Option<(i64, Coef)> {
        let n = self.ctx.n;
        self.terms.iter().find(|t| t.exp.rem_euclid(n) == c).map(|t| ((t.exp - c).div_euclid(n), t.unit.clone()))
    }

    /// `a_c mod p^t` as a residue pair.
    pub fn class_component_mod(&self, c: i64, t: i64) -> Coef {
        let modulus = self.ctx.p_pow(t);
        match self.class_component(c) {
            Some((k, u)) if k < t => u.scale(&self.ctx.p_pow(k)).reduce(&modulus),
            _ => Coef::int(0),
        }
    }

    /// Balanced representative of a unit residue, for display.
    fn balanced(c: &BigInt, modulus: &BigInt) -> BigInt {
        let r = c.mod_floor(modulus);
        if &r * 2 > *modulus {
            r - modulus
        } else {
            r
        }
    }

    /// Human-readable form, e.g. `6 + 2*5^(6/5) + O(5^(7/5))`.
    pub fn pretty(&self) -> String {
        let ctx = &self.ctx;
        let mut parts = Vec::new();
        for t in &self.terms {
            let cls = t.exp.rem_euclid(ctx.n);
            let known = (self.prec - cls + ctx.n - 1).div_euclid(ctx.n);
            let modulus = ctx.p_pow(known - (t.exp - cls) / ctx.n);
            let a = Self::balanced(&t.unit.a, &modulus);
            let unit = if t.unit.b.is_zero() {
                a.to_string()
            } else {
                format!("({}+{}*sqrtD)", a, Self::balanced(&t.unit.b, &modulus))
            };
            let e = q(t.exp, ctx.n);
            if t.exp == 0 {
                parts.push(unit);
            } else {
                parts.push(format!("{}*{}^({})", unit, ctx.p, fmt_rational(&e)));
            }
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        format!("{} + O({}^({}))", parts.join(" + "), ctx.p, fmt_rational(&q(self.prec, ctx.n)))
    }

    /// If the element lies in `Q_p`-coordinates only in class 0 and has no
    /// quadratic part, return its integer residue modulo `p^t` scaled.
    pub fn to_json(&self) -> ElementJson {
        let ctx = &self.ctx;
        ElementJson {
            p: ctx.p,
            n: ctx.n as u32,
            m: ctx.m as u32,
            nonresidue: ctx.nonresidue.as_ref().map(|d| d.to_string()),
            precision: fmt_rational(&q(self.prec, ctx.n)),
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let cls = t.exp.rem_euclid(ctx.n);
                    let known = (self.prec - cls + ctx.n - 1).div_euclid(ctx.n);
                    TermJson {
                        exponent: fmt_rational(&q(t.exp, ctx.n)),
                        unit: t.unit.a.to_string(),
                        unit_sqrt: if t.unit.b.is_zero() { None } else { Some(t.unit.b.to_string()) },
                        modulus: format!("{}^{}", ctx.p, known - (t.exp - cls) / ctx.n),
                    }
                })
                .collect(),
        }
    }

    /// Rebuild from the JSON form, validating every field.
    pub fn from_json(j: &ElementJson) -> Result<Self, LocalFieldError> {
        let bad = |s: &str| LocalFieldError::Malformed(s.to_string());
        if j.n > 4096 || j.m > 4096 || j.p > 1_000_000 {
            return Err(bad("context parameters too large"));
        }
        let ctx = match &j.nonresidue {
            None => LocalFieldContext::new(j.p, j.n, j.m)?,
            Some(d) => {
                let d: i64 = d.parse().map_err(|_| bad("nonresidue"))?;
                LocalFieldContext::with_quadratic_layer(j.p, j.n, j.m, d)?
            }
        };
        let to_pi = |s: &str| -> Result<i64, LocalFieldError> {
            let r = parse_rational(s).map_err(|e| bad(&e.to_string()))?;
            let x = r * Rational::from_integer(BigInt::from(ctx.n));
            if !x.is_integer() {
                return Err(bad("exponent not in (1/N)Z"));
            }
            let v = x.to_integer().to_i64().ok_or_else(|| bad("exponent out of range"))?;
            if v.abs() > 1 << 24 {
                return Err(bad("exponent out of range"));
            }
            Ok(v)
        };
        let prec = to_pi(&j.precision)?;
        let mut raw = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for t in &j.terms {
            let e = to_pi(&t.exponent)?;
            if !seen.insert(e.rem_euclid(ctx.n)) {
                return Err(bad("two terms in one exponent class"));
            }
            if t.unit.len() > 2048 || t.unit_sqrt.as_ref().is_some_and(|s| s.len() > 2048) {
                return Err(bad("unit too long"));
            }
            let a: BigInt = t.unit.parse().map_err(|_| bad("unit"))?;
            let b: BigInt = match &t.unit_sqrt {
                Some(s) => s.parse().map_err(|_| bad("unit_sqrt"))?,
                None => BigInt::zero(),
            };
            if !b.is_zero() && ctx.nonresidue.is_none() {
                return Err(bad("sqrt part without quadratic layer"));
            }
            let c = Coef { a, b };
            if c.divisible_by(&ctx.pb()) {
                return Err(bad("unit divisible by p"));
            }
            raw.push((e, c));
        }
        Ok(Self::build(&ctx, prec, raw))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub exponent: String,
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_sqrt: Option<String>,
    pub modulus: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementJson {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonresidue: Option<String>,
    pub precision: String,
    pub terms: Vec<TermJson>,
}

impl fmt::Display for LocalFieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pretty())
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl std::ops::$tr<&LocalFieldElement> for &LocalFieldElement {
            type Output = LocalFieldElement;
            /// Panics on context mismatch; use the `try_` form to handle it.
            fn $m(self, rhs: &LocalFieldElement) -> LocalFieldElement {
                self.$f(rhs).expect("local-field operation")
            }
        }
        impl std::ops::$tr<LocalFieldElement> for LocalFieldElement {
            type Output = LocalFieldElement;
            fn $m(self, rhs: LocalFieldElement) -> LocalFieldElement {
                (&self).$f(&rhs).expect("local-field operation")
            }
        }
    };
}
binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);
binop!(Div, div, try_div);

impl std::ops::Neg for &LocalFieldElement {
    type Output = LocalFieldElement;
    fn neg(self) -> LocalFieldElement {
        LocalFieldElement::neg(self)
    }
}

// ----- roots -----

/// `x^(1/p^a)` by the binomial series; needs `v(x - 1) > a + 1/(p-1)`.
pub fn pnth_root_binomial(x: &LocalFieldElement, a: u32) -> Result<LocalFieldElement, LocalFieldError> {
    if a == 0 {
        return Ok(x.clone());
    }
    let ctx = x.ctx().clone();
    let p = ctx.p;
    let n = ctx.n;
    let one = LocalFieldElement::build(&ctx, x.prec, vec![(0, Coef::int(1))]);
    let z = x.try_sub(&one)?;
    let threshold = q(a as i64, 1) + q(1, p as i64 - 1);
    let vz = z.valuation_lower();
    if vz <= threshold {
        return Err(LocalFieldError::DivergentSeries {
            needed: format!("> {}", fmt_rational(&threshold)),
            have: fmt_rational(&vz),
        });
    }
    let target = x.prec - n * a as i64;
    let exponent = Rational::new(BigInt::one(), num_traits::pow(BigInt::from(p), a as usize));
    let mut sum = LocalFieldElement::build(&ctx, target, vec![(0, Coef::int(1))]);
    let mut zk = LocalFieldElement::build(&ctx, target.max(1), vec![(0, Coef::int(1))]);
    let target_v = q(target, n);
    let mut k = 1u64;
    loop {
        // v(binom(1/p^a, j) z^j) >= j (v(z) - a) - v(j!) >= j (v(z) - a - 1/(p-1)) + 1/(p-1),
        // increasing in j, so all remaining terms vanish once this passes the target.
        let tail = q(k as i64, 1) * (&vz - &threshold) + q(1, p as i64 - 1);
        let exact = q(k as i64, 1) * (&vz - q(a as i64, 1)) - vfact(k, p);
        if tail >= target_v && exact >= target_v {
            break;
        }
        zk = zk.try_mul(&z)?;
        let coeff = binomial_rational(&exponent, k);
        let term = zk.mul_rational(&coeff);
        sum = sum.try_add(&term.truncate(target))?;
        k += 1;
        if k > 100_000 {
            break;
        }
    }
    Ok(sum.truncate(target))
}

/// `v_p(k!)` by Legendre's formula.
fn vfact(k: u64, p: u64) -> Rational {
    let mut s = 0u64;
    let mut pk = p;
    while pk <= k {
        s += k / pk;
        pk = pk.saturating_mul(p);
    }
    q(s as i64, 1)
}

/// Outcome of a `k`-th power test, `k = p^a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PowerTest {
    Yes { root: LocalFieldElement },
    No(PowerCertificate),
    Undecidable { needed_prec: i64, have_prec: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PowerCertificate {
    /// `N v(x)` is not divisible by `k`.
    Valuation { valuation: Rational, k: u64 },
    /// The digit system for the unit part has no solution.
    Congruence(CongruenceCertificate),
    /// Exhaustive search emptied the candidate set at `level`.
    Exhaustive { level: i64, window: (i64, i64), candidates_checked: usize },
}

/// Congruence contradiction: digits forced level by level, then a class
/// component that cannot match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CongruenceCertificate {
    /// Digits `d_0, d_1, ...` of the would-be root (residues mod `pi`).
    pub forced_digits: Vec<Coef>,
    /// Exponent (pi-units, within the unit part) whose coefficient forced the last digit.
    pub forcing_exponent: i64,
    /// Lowest exponent where `eps^k` and the target disagree.
    pub mismatch_exponent: i64,
    pub class: i64,
    /// Modulus `p^t` for the class component comparison.
    pub modulus: BigInt,
    pub power_component: Coef,
    pub target_component: Coef,
}

fn f_step(l: i64, n: i64, p: i64) -> i64 {
    (l + n).min(p * l)
}

/// Exponent to which `eps^(p^a)` is determined by `eps mod pi^l`.
fn window_top(l: i64, n: i64, p: i64, a: u32) -> i64 {
    (0..a).fold(l, |acc, _| f_step(acc, n, p))
}

fn digits_to_element(ctx: &Ctx, digits: &[Coef], prec: i64) -> LocalFieldElement {
    LocalFieldElement::build(ctx, prec, digits.iter().enumerate().map(|(i, d)| (i as i64, d.clone())).collect())
}

/// Decide whether `x` is a `k`-th power (`k = p^a`) in the context's field.
///
/// Searches the unit part digit by digit: the candidate roots modulo
/// `pi^L` are those whose `k`-th power matches the target modulo the
/// exponent determined by `L`. Once a candidate is close enough, the binomial
/// series finishes the root.
pub fn is_pth_power(x: &LocalFieldElement, k: u64) -> PowerTest {
    let ctx = x.ctx().clone();
    let p = ctx.p;
    let n = ctx.n;
    let a = {
        let mut a = 0u32;
        let mut kk = k;
        while kk > 1 && kk.is_multiple_of(p) {
            kk /= p;
            a += 1;
        }
        assert!(kk == 1 && a >= 1, "k must be a positive power of p");
        a
    };
    let j = match x.terms.first() {
        Some(t) => t.exp,
        None => return PowerTest::Undecidable { needed_prec: x.prec + 1, have_prec: x.prec },
    };
    if j.rem_euclid(k as i64) != 0 {
        return PowerTest::No(PowerCertificate::Valuation { valuation: q(j, n), k });
    }
    let w = x.shift(-j);
    let wprec = w.prec;
    let threshold = q(a as i64, 1) + q(1, p as i64 - 1);
    let digits = ctx.residue_digits();
    let mut candidates: Vec<Vec<Coef>> = vec![Vec::new()];
    let mut level = 0i64;
    loop {
        // Yes check on current candidates
        for cand in &candidates {
            if cand.is_empty() || cand[0].is_zero() {
                continue;
            }
            let eps = digits_to_element(&ctx, cand, wprec);
            let epk = eps.pow(k);
            let t = match w.try_div(&epk) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let one = LocalFieldElement::build(&ctx, t.prec, vec![(0, Coef::int(1))]);
            let diff = t.try_sub(&one).unwrap();
            if diff.valuation_lower() > threshold {
                if let Ok(r) = pnth_root_binomial(&t, a) {
                    let root = eps.try_mul(&r).unwrap().shift(j / k as i64);
                    return PowerTest::Yes { root };
                }
            }
        }
        level += 1;
        let top = window_top(level, n, p as i64, a);
        if top > wprec {
            return PowerTest::Undecidable { needed_prec: top + j, have_prec: x.prec };
        }
        let mut next = Vec::new();
        for cand in &candidates {
            for d in &digits {
                if cand.is_empty() && d.is_zero() {
                    continue;
                }
                let mut c = cand.clone();
                c.push(d.clone());
                let eps = digits_to_element(&ctx, &c, top);
                let diff = eps.pow(k).try_sub(&w.truncate(top)).unwrap();
                if diff.is_zero() {
                    next.push(c);
                }
            }
        }
        if next.is_empty() {
            let bottom = window_top(level - 1, n, p as i64, a);
            return PowerTest::No(build_certificate(&ctx, &w, &candidates, &digits, k, level, bottom, top));
        }
        candidates = next;
    }
}

/// Best approximate `k`-th root: a candidate `eps` maximising `v(eps^k - x)`,
/// returned with that valuation (absolute, in pi-units). Exact roots come back
/// with the precision of `x`.
pub fn approx_pth_root(x: &LocalFieldElement, k: u64) -> Option<(LocalFieldElement, i64)> {
    if let PowerTest::Yes { root } = is_pth_power(x, k) {
        return Some((root, x.prec));
    }
    let ctx = x.ctx().clone();
    let (p, n) = (ctx.p as i64, ctx.n);
    let mut a = 0u32;
    let mut kk = k;
    while kk > 1 && kk.is_multiple_of(ctx.p) {
        kk /= ctx.p;
        a += 1;
    }
    if kk != 1 || a == 0 {
        return None;
    }
    let j = x.terms.first()?.exp;
    if j.rem_euclid(k as i64) != 0 {
        return None;
    }
    let w = x.shift(-j);
    let digits = ctx.residue_digits();
    let mut candidates: Vec<Vec<Coef>> = vec![Vec::new()];
    let mut level = 0i64;
    loop {
        let top = window_top(level + 1, n, p, a);
        if top > w.prec {
            break;
        }
        let mut next = Vec::new();
        for cand in &candidates {
            for d in &digits {
                if cand.is_empty() && d.is_zero() {
                    continue;
                }
                let mut c = cand.clone();
                c.push(d.clone());
                let eps = digits_to_element(&ctx, &c, top);
                if eps.pow(k).try_sub(&w.truncate(top)).map(|z| z.is_zero()).unwrap_or(false) {
                    next.push(c);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        candidates = next;
        level += 1;
    }
    candidates
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let eps = digits_to_element(&ctx, c, w.prec);
            let agree = eps.pow(k).try_sub(&w).map(|z| z.val_pi_lower()).unwrap_or(0);
            (eps.shift(j / k as i64), agree.min(w.prec) + j)
        })
        .max_by_key(|(_, v)| *v)
}

#[allow(clippy::too_many_arguments)]
fn build_certificate(
    ctx: &Ctx,
    w: &LocalFieldElement,
    survivors: &[Vec<Coef>],
    digits: &[Coef],
    k: u64,
    level: i64,
    bottom: i64,
    top: i64,
) -> PowerCertificate {
    let n = ctx.n;
    let exhaustive = PowerCertificate::Exhaustive {
        level,
        window: (bottom, top),
        candidates_checked: survivors.len() * digits.len(),
    };
    if survivors.len() != 1 {
        return exhaustive;
    }
    let prefix = &survivors[0];
    let target = w.truncate(top);
    // class components of eps^k - w for each candidate digit
    let trial: Vec<(Coef, LocalFieldElement)> = digits
        .iter()
        .filter(|d| !(prefix.is_empty() && d.is_zero()))
        .map(|d| {
            let mut c = prefix.clone();
            c.push(d.clone());
            let eps = digits_to_element(ctx, &c, top);
            (d.clone(), eps.pow(k))
        })
        .collect();
    let admits = |pow: &LocalFieldElement, e: i64| -> bool {
        let cls = e.rem_euclid(n);
        let t = (e - cls) / n + 1;
        pow.class_component_mod(cls, t) == target.class_component_mod(cls, t)
    };
    let mut forcing = None;
    for e in (bottom..top).rev() {
        let ok: Vec<&Coef> = trial.iter().filter(|(_, pw)| admits(pw, e)).map(|(d, _)| d).collect();
        if ok.len() == 1 {
            forcing = Some((e, ok[0].clone()));
            break;
        }
    }
    let Some((forcing_exponent, digit)) = forcing else { return exhaustive };
    let pow = &trial.iter().find(|(d, _)| *d == digit).unwrap().1;
    let Some(mismatch) = (0..top).find(|&e| !admits(pow, e)) else { return exhaustive };
    let cls = mismatch.rem_euclid(n);
    let t = (mismatch - cls) / n + 1;
    let mut forced_digits = prefix.clone();
    forced_digits.push(digit);
    PowerCertificate::Congruence(CongruenceCertificate {
        forced_digits,
        forcing_exponent,
        mismatch_exponent: mismatch,
        class: cls,
        modulus: ctx.p_pow(t),
        power_component: pow.class_component_mod(cls, t),
        target_component: target.class_component_mod(cls, t),
    })
}

/// Integer valuation helper for unit checks.
pub fn is_unit_mod_p(x: &BigInt, p: u64) -> bool {
    vp_int(x, p) == Some(0)
}

/// Teichmuller representative of the integer unit `u` modulo `p^m`.
pub fn teichmuller(u: &BigInt, p: u64, m: u32) -> BigInt {
    let modulus = num_traits::pow(BigInt::from(p), m as usize);
    let mut t = u.mod_floor(&BigInt::from(p));
    for _ in 0..m + 1 {
        t = t.modpow(&BigInt::from(p), &modulus);
    }
    t
}

impl LocalFieldElement {
    /// Sign-insensitive magnitude check used by tests: absolute value of the
    /// class-0 unit residue.
    pub fn leading_unit(&self) -> Option<&Coef> {
        self.terms.first().map(|t| &t.unit)
    }

    pub fn is_negative_unit_hint(&self) -> bool {
        self.terms.first().map(|t| t.unit.a.is_negative()).unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::qi;

    fn ctx(p: u64, n: u32, m: u32) -> Ctx {
        LocalFieldContext::new(p, n, m).unwrap()
    }

    #[test]
    fn arithmetic_examples() {
        let c = ctx(5, 5, 8);
        let pi = LocalFieldElement::pi_pow(&c, 1);
        let x = &pi.mul_rational(&qi(2)) + &LocalFieldElement::from_int(&c, 15);
        assert_eq!(x.valuation(), ExtendedRational::from_frac(1, 5));
        let one = LocalFieldElement::one(&c);
        let y = &(&one + &LocalFieldElement::pi_pow(&c, 6)) - &one;
        assert_eq!(y.valuation(), ExtendedRational::from_frac(6, 5));
        let z = &pi * &LocalFieldElement::pi_pow(&c, 4);
        assert_eq!(z.valuation(), ExtendedRational::from_int(1));
        assert!(z.congruent(&LocalFieldElement::from_int(&c, 5), z.prec()));
    }

    #[test]
    fn inverse_roundtrip() {
        let c = ctx(5, 5, 6);
        let x = &LocalFieldElement::from_int(&c, 7) + &LocalFieldElement::pi_pow(&c, 3);
        let y = x.try_inverse().unwrap();
        let prod = &x * &y;
        let one = LocalFieldElement::one(&c);
        assert!(prod.congruent(&one, prod.prec()));
        assert!(prod.prec() >= 25);
        let pi = LocalFieldElement::pi_pow(&c, 2);
        let inv = pi.try_inverse().unwrap();
        assert_eq!(inv.valuation(), ExtendedRational::from_frac(-2, 5));
        assert!(matches!(LocalFieldElement::zero(&c, 5).try_inverse(), Err(LocalFieldError::InvertZero(5))));
    }

    #[test]
    fn context_mismatch() {
        let a = LocalFieldElement::one(&ctx(5, 5, 4));
        let b = LocalFieldElement::one(&ctx(5, 10, 4));
        assert_eq!(a.try_add(&b), Err(LocalFieldError::ContextMismatch));
    }

    #[test]
    fn hensel_examples() {
        assert_eq!(hensel_sqrt(&BigInt::from(-1), 5, 3).unwrap(), BigInt::from(57));
        assert_eq!(hensel_sqrt(&BigInt::from(1), 7, 5).unwrap(), BigInt::from(1));
        assert_eq!(hensel_sqrt(&BigInt::from(4), 5, 4).unwrap(), BigInt::from(2));
        assert!(matches!(hensel_sqrt(&BigInt::from(2), 5, 3), Err(LocalFieldError::NoSquareRoot(_))));
    }

    #[test]
    fn binomial_root_examples() {
        let c = ctx(5, 1, 8);
        let x = LocalFieldElement::from_int(&c, 126);
        let y = pnth_root_binomial(&x, 1).unwrap();
        // 1 + 25 - 1250 + ... : 1 + (1/5) 125 + binom(1/5, 2) 125^2 ...
        assert!(y.congruent(&LocalFieldElement::from_int(&c, 1 + 25 - 1250), 5));
        assert!(y.pow(5).congruent(&x, y.prec()));
        assert_eq!(pnth_root_binomial(&x, 0).unwrap(), x);
        let c7 = ctx(7, 1, 8);
        let x7 = LocalFieldElement::from_int(&c7, 1 + 343 * 3);
        let y7 = pnth_root_binomial(&x7, 1).unwrap();
        let one = LocalFieldElement::one(&c7);
        assert_eq!((&y7 - &one).valuation(), ExtendedRational::from_int(2));
        assert!(matches!(
            pnth_root_binomial(&LocalFieldElement::from_int(&c, 6), 1),
            Err(LocalFieldError::DivergentSeries { .. })
        ));
    }

    #[test]
    fn power_test_examples() {
        let c = ctx(5, 5, 8);
        match is_pth_power(&LocalFieldElement::from_int(&c, 32), 5) {
            PowerTest::Yes { root } => assert!(root.congruent(&LocalFieldElement::from_int(&c, 2), 20)),
            other => panic!("{other:?}"),
        }
        let x = LocalFieldElement::pi_pow(&c, 1).mul_rational(&qi(6));
        assert!(matches!(is_pth_power(&x, 5), PowerTest::No(PowerCertificate::Valuation { .. })));
        // 19 + 3 * 5^(6/5) known modulo pi^7
        let delta = LocalFieldElement::build(&c, 7, vec![(0, Coef::int(19)), (6, Coef::int(3))]);
        match is_pth_power(&delta, 5) {
            PowerTest::No(PowerCertificate::Congruence(cert)) => {
                assert_eq!(cert.forced_digits, vec![Coef::int(4), Coef::int(3)]);
                assert_eq!(cert.modulus, BigInt::from(25));
                assert_eq!(cert.power_component, Coef::int(14));
                assert_eq!(cert.target_component, Coef::int(19));
                assert_eq!(cert.class, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quadratic_layer_sqrt_minus_one() {
        let c = LocalFieldContext::with_quadratic_layer(7, 12, 6, -1).unwrap();
        let i = LocalFieldElement::sqrt_integer_unit(&c, -1).unwrap();
        let sq = &i * &i;
        assert!(sq.congruent(&LocalFieldElement::from_int(&c, -1), sq.prec()));
        let inv = i.try_inverse().unwrap();
        assert!((&inv * &i).congruent(&LocalFieldElement::one(&c), 40));
    }

    #[test]
    fn json_roundtrip() {
        let c = ctx(5, 5, 4);
        let x = &LocalFieldElement::from_rational(&c, &q(19, 3)) + &LocalFieldElement::pi_pow(&c, 6);
        let j = x.to_json();
        assert_eq!(LocalFieldElement::from_json(&j).unwrap(), x);
    }
}
