//! Truncated power series for the cover functions
//! `g(z) = ((z+1)/(z-1))^r ((z+b)/(z-b))^s`, `b = sqrt(1-a)`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::local_field::{LocalFieldElement, LocalFieldError};
use crate::valuation::{binomial_rational, check_prime, fmt_rational, parse_rational, q, qi, vp, ExtendedRational, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("degenerate cover parameters: {0}")]
    DegenerateCover(String),
    #[error("input series too short: need order {required:?}, have {have}")]
    TruncationUnderflow { required: Option<usize>, have: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("pole or zero of a factor lies in the disk")]
    PoleInDisk,
    #[error(transparent)]
    Field(#[from] LocalFieldError),
}

/// A coefficient valuation: exact, a lower bound (zero to known precision), or infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValBound {
    Exact(Rational),
    AtLeast(Rational),
    Infinite,
}

impl ValBound {
    pub fn exact(&self) -> Option<&Rational> {
        match self {
            ValBound::Exact(v) => Some(v),
            _ => None,
        }
    }

    /// The best known lower bound.
    pub fn lower(&self) -> ExtendedRational {
        match self {
            ValBound::Exact(v) | ValBound::AtLeast(v) => ExtendedRational::finite(v.clone()),
            ValBound::Infinite => ExtendedRational::Infinity,
        }
    }

    /// True when the value is certainly greater than `t`.
    pub fn certainly_gt(&self, t: &Rational) -> bool {
        match self {
            ValBound::Exact(v) => v > t,
            ValBound::AtLeast(v) => v > t,
            ValBound::Infinite => true,
        }
    }

    pub fn shift(&self, by: &Rational) -> ValBound {
        match self {
            ValBound::Exact(v) => ValBound::Exact(v + by),
            ValBound::AtLeast(v) => ValBound::AtLeast(v + by),
            ValBound::Infinite => ValBound::Infinite,
        }
    }
}

impl fmt::Display for ValBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValBound::Exact(v) => write!(f, "{}", fmt_rational(v)),
            ValBound::AtLeast(v) => write!(f, ">={}", fmt_rational(v)),
            ValBound::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ValBound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl std::str::FromStr for ValBound {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "inf" {
            return Ok(ValBound::Infinite);
        }
        match s.strip_prefix(">=") {
            Some(rest) => parse_rational(rest).map(ValBound::AtLeast).map_err(|e| e.to_string()),
            None => parse_rational(s).map(ValBound::Exact).map_err(|e| e.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for ValBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ring operations needed by the series code.
pub trait Coeff: Clone + fmt::Debug {
    fn c_add(&self, o: &Self) -> Self;
    fn c_sub(&self, o: &Self) -> Self;
    fn c_mul(&self, o: &Self) -> Self;
    fn c_mul_q(&self, x: &Rational) -> Self;
    fn c_inv(&self) -> Result<Self, SeriesError>;
    /// A rational constant in the same ring as `self`.
    fn c_lift(&self, x: &Rational) -> Self;
    fn c_val(&self, p: u64) -> ValBound;
    fn c_is_zero(&self) -> bool;
}

impl Coeff for Rational {
    fn c_add(&self, o: &Self) -> Self {
        self + o
    }
    fn c_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn c_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn c_mul_q(&self, x: &Rational) -> Self {
        self * x
    }
    fn c_inv(&self) -> Result<Self, SeriesError> {
        if self.is_zero() {
            Err(SeriesError::Field(LocalFieldError::InvertZero(0)))
        } else {
            Ok(self.recip())
        }
    }
    fn c_lift(&self, x: &Rational) -> Self {
        x.clone()
    }
    fn c_val(&self, p: u64) -> ValBound {
        match vp(self, p).expect("prime") {
            ExtendedRational::Finite(v) => ValBound::Exact(v),
            ExtendedRational::Infinity => ValBound::Infinite,
        }
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
}

impl Coeff for LocalFieldElement {
    fn c_add(&self, o: &Self) -> Self {
        self + o
    }
    fn c_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn c_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn c_mul_q(&self, x: &Rational) -> Self {
        self.mul_rational(x)
    }
    fn c_inv(&self) -> Result<Self, SeriesError> {
        Ok(self.try_inverse()?)
    }
    fn c_lift(&self, x: &Rational) -> Self {
        let ctx = self.ctx();
        let v = crate::valuation::vp_rat_int(x, ctx.p()).unwrap_or(0);
        let prec = (ctx.n() * (v + ctx.m())).max(self.prec());
        LocalFieldElement::from_rational_prec(ctx, x, prec)
    }
    fn c_val(&self, _p: u64) -> ValBound {
        match self.valuation() {
            ExtendedRational::Finite(v) => ValBound::Exact(v),
            ExtendedRational::Infinity => ValBound::AtLeast(self.precision()),
        }
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
}

/// `v(c_i) >= offset - slope * i` for every index `i`, including those past the truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailBound {
    pub offset: Rational,
    pub slope: Rational,
}

#[derive(Debug, Clone)]
pub struct TruncatedSeries<C> {
    coeffs: Vec<C>,
    tail: Option<TailBound>,
}

impl<C: Coeff> TruncatedSeries<C> {
    pub fn new(coeffs: Vec<C>, tail: Option<TailBound>) -> Self {
        assert!(!coeffs.is_empty(), "series needs a constant term");
        TruncatedSeries { coeffs, tail }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &C {
        &self.coeffs[i]
    }

    pub fn tail(&self) -> Option<&TailBound> {
        self.tail.as_ref()
    }

    pub fn truncate(&self, order: usize) -> Self {
        TruncatedSeries { coeffs: self.coeffs[..=order.min(self.order())].to_vec(), tail: self.tail.clone() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let t = self.order().min(o.order());
        let coeffs = (0..=t)
            .map(|k| {
                let mut acc = self.coeffs[0].c_mul(&o.coeffs[k]);
                for i in 1..=k {
                    acc = acc.c_add(&self.coeffs[i].c_mul(&o.coeffs[k - i]));
                }
                acc
            })
            .collect();
        let tail = match (&self.tail, &o.tail) {
            (Some(a), Some(b)) => Some(TailBound {
                offset: &a.offset + &b.offset,
                slope: a.slope.clone().max(b.slope.clone()),
            }),
            _ => None,
        };
        TruncatedSeries { coeffs, tail }
    }

    pub fn add(&self, o: &Self) -> Self {
        let t = self.order().min(o.order());
        let coeffs = (0..=t).map(|k| self.coeffs[k].c_add(&o.coeffs[k])).collect();
        let tail = match (&self.tail, &o.tail) {
            (Some(a), Some(b)) => Some(TailBound {
                offset: a.offset.clone().min(b.offset.clone()),
                slope: a.slope.clone().max(b.slope.clone()),
            }),
            _ => None,
        };
        TruncatedSeries { coeffs, tail }
    }

    /// Multiply every coefficient by the constant `c`.
    pub fn scale(&self, c: &C, c_val: &Rational) -> Self {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(|x| x.c_mul(c)).collect(),
            tail: self.tail.as_ref().map(|t| TailBound { offset: &t.offset + c_val, slope: t.slope.clone() }),
        }
    }

    /// Divide by the constant term, giving a series `1 + c_1 t + ...`.
    pub fn normalized(&self, p: u64) -> Result<Self, SeriesError> {
        let inv = self.coeffs[0].c_inv()?;
        let v = match inv.c_val(p) {
            ValBound::Exact(v) => v,
            _ => return Err(SeriesError::PoleInDisk),
        };
        Ok(self.scale(&inv, &v))
    }

    /// `v(c_i)` for `i = 1..=T`.
    pub fn coefficient_valuations(&self, p: u64) -> Vec<ValBound> {
        self.coeffs[1..].iter().map(|c| c.c_val(p)).collect()
    }

    /// `v(c_i)` for `i = 0..=T`.
    pub fn all_valuations(&self, p: u64) -> Vec<ValBound> {
        self.coeffs.iter().map(|c| c.c_val(p)).collect()
    }
}

impl TruncatedSeries<Rational> {
    pub fn to_local(&self, ctx: &crate::local_field::Ctx) -> TruncatedSeries<LocalFieldElement> {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(|c| LocalFieldElement::from_rational(ctx, c)).collect(),
            tail: self.tail.clone(),
        }
    }
}

/// Coefficients of `((1+u)/(1-u))^s` in `u`, through order `t`.
pub fn unit_ratio_power(s: i64, t: usize) -> Vec<Rational> {
    let sq = qi(s);
    let plus: Vec<Rational> = (0..=t as u64).map(|k| binomial_rational(&sq, k)).collect();
    let minus: Vec<Rational> = (0..=t as u64)
        .map(|m| {
            let b = binomial_rational(&(-&sq), m);
            if m % 2 == 1 {
                -b
            } else {
                b
            }
        })
        .collect();
    (0..=t).map(|i| (0..=i).map(|k| &plus[k] * &minus[i - k]).sum()).collect()
}

/// `((z+b)/(z-b))^s = (-1)^s ((1+z/b)/(1-z/b))^s` as a series in `z`.
pub fn ratio_power<C: Coeff>(b: &C, s: i64, t: usize, p: u64) -> Result<TruncatedSeries<C>, SeriesError> {
    if b.c_is_zero() {
        return Err(SeriesError::DegenerateCover("factor centred at z = 0".into()));
    }
    let binv = b.c_inv()?;
    let sign = if s.rem_euclid(2) == 1 { -Rational::one() } else { Rational::one() };
    let base = unit_ratio_power(s, t);
    let mut coeffs = Vec::with_capacity(t + 1);
    let mut pw = b.c_lift(&Rational::one());
    for c in base.iter() {
        coeffs.push(pw.c_mul_q(&(c * &sign)));
        pw = pw.c_mul(&binv);
    }
    let vb = match b.c_val(p) {
        ValBound::Exact(v) => v,
        _ => return Err(SeriesError::PoleInDisk),
    };
    let slope = vb.max(Rational::zero());
    Ok(TruncatedSeries::new(coeffs, Some(TailBound { offset: Rational::zero(), slope })))
}

/// `prod_j ((z+b_j)/(z-b_j))^{s_j}` as a series in `z`.
pub fn ratio_power_product<C: Coeff>(
    factors: &[(C, i64)],
    t: usize,
    p: u64,
) -> Result<TruncatedSeries<C>, SeriesError> {
    let mut acc: Option<TruncatedSeries<C>> = None;
    for (b, s) in factors {
        let f = ratio_power(b, *s, t, p)?;
        acc = Some(match acc {
            None => f,
            Some(a) => a.mul(&f),
        });
    }
    acc.ok_or_else(|| SeriesError::InvalidParams("no factors".into()))
}

/// `g(z)` for an arbitrary value `b` of `sqrt(1-a)` in the coefficient ring.
pub fn g_series<C: Coeff>(b: &C, r: i64, s: i64, t: usize, p: u64) -> Result<TruncatedSeries<C>, SeriesError> {
    let one = b.c_lift(&Rational::one());
    ratio_power_product(&[(one, r), (b.clone(), s)], t, p)
}

/// Parameters of the cover `y^{p^nu} = g(z)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverParams {
    pub p: u64,
    pub nu: u32,
    pub r: i64,
    pub s: i64,
    pub sqrt1ma: Rational,
    pub a: Rational,
}

impl CoverParams {
    pub fn new(p: u64, nu: u32, r: i64, s: i64, sqrt1ma: Rational) -> Result<Self, SeriesError> {
        check_prime(p).map_err(|e| SeriesError::InvalidParams(e.to_string()))?;
        if nu == 0 || nu > 30 {
            return Err(SeriesError::InvalidParams("nu must be in 1..=30".into()));
        }
        let bound = BigInt::from(p).pow(nu);
        if r <= 0 || s <= 0 || BigInt::from(r) >= bound || BigInt::from(s) >= bound {
            return Err(SeriesError::InvalidParams(format!("need 0 < r, s < {p}^{nu}")));
        }
        let a = Rational::one() - &sqrt1ma * &sqrt1ma;
        Ok(CoverParams { p, nu, r, s, sqrt1ma, a })
    }

    /// The branch `sqrt(1-a) = -s/r`, i.e. `a = 1 - s^2/r^2`.
    pub fn forced_branch(p: u64, nu: u32, r: i64, s: i64) -> Result<Self, SeriesError> {
        Self::new(p, nu, r, s, q(-s, r))
    }

    pub fn default_order(&self) -> usize {
        3 * self.p as usize + 2
    }
}

/// Exact Maclaurin coefficients of `g` through order `t`.
pub fn maclaurin_g(params: &CoverParams, t: usize) -> Result<TruncatedSeries<Rational>, SeriesError> {
    if t == 0 {
        return Err(SeriesError::InvalidParams("truncation order must be >= 1".into()));
    }
    let b = &params.sqrt1ma;
    if b.is_zero() {
        return Err(SeriesError::DegenerateCover("sqrt(1-a) = 0".into()));
    }
    if *b == -Rational::one() && params.r == params.s {
        return Err(SeriesError::DegenerateCover("g is constant".into()));
    }
    g_series(b, params.r, params.s, t, params.p)
}

fn val_exact<C: Coeff>(c: &C, p: u64) -> Result<Rational, SeriesError> {
    match c.c_val(p) {
        ValBound::Exact(v) => Ok(v),
        _ => Err(SeriesError::PoleInDisk),
    }
}

/// `g(d + e t)` from a series in `z`, keeping only coefficients that are
/// honest modulo `pi^target` (absolute precision in pi-units of `d`'s context).
pub fn rescale(
    series: &TruncatedSeries<LocalFieldElement>,
    d: &LocalFieldElement,
    e: &LocalFieldElement,
    t_out: usize,
    target: i64,
) -> Result<TruncatedSeries<LocalFieldElement>, SeriesError> {
    let ctx = d.ctx().clone();
    let p = ctx.p();
    let n = ctx.n();
    let ve = val_exact(e, p)?;
    let t_in = series.order();
    let target_v = q(target, n);
    let mut epow = vec![LocalFieldElement::one(&ctx)];
    for j in 1..=t_out {
        epow.push(&epow[j - 1] * e);
    }
    if d.is_zero() {
        if t_out > t_in {
            return Err(SeriesError::TruncationUnderflow { required: Some(t_out), have: t_in });
        }
        let coeffs = (0..=t_out).map(|j| (series.coeff(j) * &epow[j]).truncate(target)).collect();
        let tail = series.tail().map(|tb| TailBound { offset: tb.offset.clone(), slope: &tb.slope - &ve });
        return Ok(TruncatedSeries::new(coeffs, tail));
    }
    let vd = val_exact(d, p)?;
    let tb = series.tail().ok_or(SeriesError::TruncationUnderflow { required: None, have: t_in })?;
    let growth = vd.clone().min(ve.clone()) - &tb.slope;
    if growth <= Rational::zero() {
        return Err(SeriesError::TruncationUnderflow { required: None, have: t_in });
    }
    // smallest I >= t_out with every dropped term (index > I) beyond the target
    let bound = |i: usize| -> Rational {
        let i_q = qi(i as i64);
        let jmax = i.min(t_out) as i64;
        let jterm = (qi(jmax) * (&ve - &vd)).min(Rational::zero());
        &tb.offset + &i_q * (&vd - &tb.slope) + jterm
    };
    let mut required = t_out;
    while bound(required + 1) < target_v {
        required += 1;
        if required > 100_000 {
            return Err(SeriesError::TruncationUnderflow { required: None, have: t_in });
        }
    }
    if required > t_in {
        return Err(SeriesError::TruncationUnderflow { required: Some(required), have: t_in });
    }
    let mut dpow = vec![LocalFieldElement::one(&ctx)];
    for k in 1..=required {
        dpow.push(&dpow[k - 1] * d);
    }
    let mut coeffs = Vec::with_capacity(t_out + 1);
    for j in 0..=t_out {
        let mut acc = LocalFieldElement::zero(&ctx, target);
        for i in j..=required {
            let b = Rational::from_integer(BigInt::from(crate::valuation::binomial(i as u64, j as u64)));
            let term = (series.coeff(i) * &dpow[i - j]).mul_rational(&b);
            acc = &acc + &term.truncate(target);
        }
        coeffs.push((&acc * &epow[j]).truncate(target));
    }
    let tail = Some(TailBound { offset: tb.offset.clone(), slope: &tb.slope - &ve });
    Ok(TruncatedSeries::new(coeffs, tail))
}

/// `unit * prod_j (d + e t + c_j)^{k_j}` expanded directly in `t`.
///
/// Exact to the element precision; needs `v(e) > v(d + c_j)` for negative `k_j`.
pub fn linear_factors_at<C: Coeff>(
    unit: &C,
    factors: &[(C, i64)],
    d: &C,
    e: &C,
    t: usize,
    p: u64,
) -> Result<TruncatedSeries<C>, SeriesError> {
    let ve = val_exact(e, p)?;
    let mut acc: TruncatedSeries<C> = TruncatedSeries::new(
        std::iter::once(unit.clone()).chain((1..=t).map(|_| unit.c_lift(&Rational::zero()))).collect(),
        Some(TailBound { offset: val_exact(unit, p)?, slope: Rational::zero() }),
    );
    let mut zero_count = 0;
    for (c, k) in factors {
        let base = d.c_add(c);
        if base.c_is_zero() {
            if *k < 0 {
                return Err(SeriesError::PoleInDisk);
            }
            // (e t)^k
            let mut coeffs: Vec<C> = (0..=t).map(|_| e.c_lift(&Rational::zero())).collect();
            let kk = *k as usize;
            if kk <= t {
                let mut pw = e.c_lift(&Rational::one());
                for _ in 0..kk {
                    pw = pw.c_mul(e);
                }
                coeffs[kk] = pw;
            }
            zero_count += 1;
            acc = acc.mul(&TruncatedSeries::new(coeffs, None));
            continue;
        }
        let vb = val_exact(&base, p)?;
        if *k < 0 && ve <= vb {
            return Err(SeriesError::PoleInDisk);
        }
        let u = e.c_mul(&base.c_inv()?);
        let mut head = base.c_lift(&Rational::one());
        let (mut bp, kabs) = (base.clone(), k.unsigned_abs());
        // base^k
        let mut e2 = kabs;
        while e2 > 0 {
            if e2 & 1 == 1 {
                head = head.c_mul(&bp);
            }
            e2 >>= 1;
            if e2 > 0 {
                bp = bp.c_mul(&bp);
            }
        }
        if *k < 0 {
            head = head.c_inv()?;
        }
        let kq = qi(*k);
        let mut coeffs = Vec::with_capacity(t + 1);
        let mut up = head.clone();
        for m in 0..=t as u64 {
            coeffs.push(up.c_mul_q(&binomial_rational(&kq, m)));
            up = up.c_mul(&u);
        }
        let vu = &ve - &vb;
        let tail = TailBound { offset: qi(*k) * &vb, slope: (-vu).max(Rational::zero()) };
        acc = acc.mul(&TruncatedSeries::new(coeffs, Some(tail)));
    }
    if zero_count > 0 {
        acc.tail = None;
    }
    Ok(acc)
}

/// `g(d + e t)` computed directly from the factored form.
pub fn g_at<C: Coeff>(b: &C, r: i64, s: i64, d: &C, e: &C, t: usize, p: u64) -> Result<TruncatedSeries<C>, SeriesError> {
    let one = b.c_lift(&Rational::one());
    let factors = [(one.clone(), r), (one.c_mul_q(&-Rational::one()), -r), (b.clone(), s), (b.c_mul_q(&-Rational::one()), -s)];
    linear_factors_at(&one, &factors, d, e, t, p)
}

/// Sign `(-1)^k` as a rational.
pub fn sign_q(k: i64) -> Rational {
    if k.rem_euclid(2) == 1 {
        -Rational::one()
    } else {
        Rational::one()
    }
}

/// True when `x` is a nonnegative integer-valued rational.
pub fn is_natural(x: &Rational) -> bool {
    x.is_integer() && !x.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_field::LocalFieldContext;
    use crate::valuation::binomial;

    #[test]
    fn maclaurin_low_coefficients() {
        let params = CoverParams::new(7, 1, 2, 3, q(1, 2)).unwrap();
        let g = maclaurin_g(&params, 5).unwrap();
        assert_eq!(g.coeff(0), &sign_q(5));
        // (-1)^{r+s} (2r + 2s/b)
        assert_eq!(g.coeff(1), &(sign_q(5) * (qi(4) + qi(12))));
        let forced = CoverParams::forced_branch(7, 1, 3, 1).unwrap();
        let g = maclaurin_g(&forced, 5).unwrap();
        assert!(g.coeff(1).is_zero());
        assert!(g.coeff(2).is_zero());
    }

    #[test]
    fn coefficient_five_congruence() {
        // r=2, s=5 with v(a) > 0: c_5 = (-1)^{r+s} 32 binom(7,5) modulo valuation v(a)
        for (r, s) in [(2i64, 3i64), (3, 2), (1, 4), (7, 18)] {
            let params = CoverParams::forced_branch(5, 2, r, s).unwrap();
            let va = vp(&params.a, 5).unwrap().expect_finite();
            let g = maclaurin_g(&params, 6).unwrap();
            let target = sign_q(r + s) * qi(32) * Rational::from_integer(BigInt::from(binomial((r + s) as u64, 5)));
            let diff = g.coeff(5) - target;
            assert!(vp(&diff, 5).unwrap() >= ExtendedRational::finite(va), "r={r} s={s}");
        }
    }

    #[test]
    fn degenerate() {
        let params = CoverParams::new(5, 1, 2, 2, qi(-1)).unwrap();
        assert!(matches!(maclaurin_g(&params, 3), Err(SeriesError::DegenerateCover(_))));
    }

    #[test]
    fn direct_matches_maclaurin() {
        let ctx = LocalFieldContext::new(5, 5, 12).unwrap();
        let params = CoverParams::forced_branch(5, 2, 1, 5).unwrap();
        let g = maclaurin_g(&params, 40).unwrap().to_local(&ctx);
        let d = LocalFieldElement::pi_pow(&ctx, 7).mul_rational(&qi(2));
        let e = LocalFieldElement::pi_pow(&ctx, 8);
        let target = 30;
        let r1 = rescale(&g, &d, &e, 4, target).unwrap();
        let b = LocalFieldElement::from_rational(&ctx, &params.sqrt1ma);
        let r2 = g_at(&b, 1, 5, &d, &e, 4, 5).unwrap();
        for j in 0..=4 {
            assert!(r1.coeff(j).congruent(r2.coeff(j), target.min(r2.coeff(j).prec())), "j={j}");
        }
        assert!(matches!(
            rescale(&g.truncate(3), &d, &e, 4, target),
            Err(SeriesError::TruncationUnderflow { .. })
        ));
    }

    #[test]
    fn rescale_identity() {
        let ctx = LocalFieldContext::new(7, 1, 6).unwrap();
        let params = CoverParams::new(7, 1, 2, 3, q(1, 2)).unwrap();
        let g = maclaurin_g(&params, 6).unwrap().to_local(&ctx);
        let r = rescale(&g, &LocalFieldElement::zero(&ctx, 100), &LocalFieldElement::one(&ctx), 6, 6).unwrap();
        for j in 0..=6 {
            assert!(r.coeff(j).congruent(g.coeff(j), r.coeff(j).prec()));
        }
    }
}
