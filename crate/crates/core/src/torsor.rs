//! Splitting criteria for `mu_{p^n}`-torsors `y^{p^n} = 1 + sum c_i t^i`,
//! new-tail centres and radii, and the catalog of new inseparable tails.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::local_field::{approx_pth_root, is_pth_power, Ctx, LocalFieldContext, LocalFieldElement, LocalFieldError, PowerTest};
use crate::series::{g_at, linear_factors_at, maclaurin_g, CoverParams, SeriesError, TruncatedSeries, ValBound};
use crate::valuation::{binomial, fmt_rational, is_prime, q, qi, vp, vp_int, ExtendedRational, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TorsorError {
    #[error("need coefficients up to index {need}, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("parameters do not match the requested case: {0}")]
    CaseMismatch(String),
    #[error("inadmissible valuation: {0}")]
    InadmissibleValuation(String),
    #[error("root not available in the working field: {0}")]
    RootNotInField(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Field(#[from] LocalFieldError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "sigma")]
pub enum SplitKind {
    ObstructedByConditionI,
    ObstructedByConditionII,
    SplitsWithConductor(u64),
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEvidence {
    /// `n + 1/(p-1)`.
    #[serde(with = "crate::valuation::rational_str")]
    pub threshold: Rational,
    /// Index witnessing the verdict, if any.
    pub index: Option<usize>,
    /// `v(c_i)` for `i = 1..=T`.
    pub valuations: Vec<ValBound>,
    /// `v(c_1^p - c'_p p^{(p-1)n+1})` when condition (ii) was evaluated.
    pub root_comparison: Option<ValBound>,
    /// Valuations after normalising by `(1 + eta t)^{p^n}`.
    pub normalized: Option<Vec<ValBound>>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitVerdict {
    pub kind: SplitKind,
    pub evidence: SplitEvidence,
}

fn threshold(p: u64, n: u32) -> Rational {
    qi(n as i64) + q(1, p as i64 - 1)
}

fn verdict(kind: SplitKind, th: &Rational, index: Option<usize>, vals: &[ValBound], note: &str) -> SplitVerdict {
    SplitVerdict {
        kind,
        evidence: SplitEvidence {
            threshold: th.clone(),
            index,
            valuations: vals.to_vec(),
            root_comparison: None,
            normalized: None,
            note: note.to_string(),
        },
    }
}

/// Unique index `sigma` with `v(c_sigma) = threshold`, `p` not dividing `sigma`, all others larger.
fn positive_read_off(vals: &[ValBound], p: u64, th: &Rational) -> Option<usize> {
    let mut found = None;
    for (k, v) in vals.iter().enumerate() {
        let i = k + 1;
        match v.exact() {
            Some(x) if x == th => {
                if found.is_some() || (i as u64).is_multiple_of(p) {
                    return None;
                }
                found = Some(i);
            }
            _ => {
                if !v.certainly_gt(th) {
                    return None;
                }
            }
        }
    }
    found
}

enum Stage {
    Done(SplitVerdict),
    /// Condition (ii) applies; element data needed.
    NeedsRootComparison,
    Positive,
}

fn common_checks(vals: &[ValBound], p: u64, n: u32) -> Result<Stage, TorsorError> {
    let pu = p as usize;
    if vals.len() < pu {
        return Err(TorsorError::InsufficientData { need: pu, have: vals.len() });
    }
    let th = threshold(p, n);
    for i in (2 * pu..=vals.len()).step_by(pu) {
        if !vals[i - 1].certainly_gt(&th) {
            return Ok(Stage::Done(verdict(
                SplitKind::Inconclusive,
                &th,
                Some(i),
                vals,
                "hypothesis v(c_i) > n + 1/(p-1) for p | i, i > p fails",
            )));
        }
    }
    let cp = &vals[pu - 1];
    let bound = match cp.lower() {
        ExtendedRational::Finite(x) => x.min(th.clone()),
        ExtendedRational::Infinity => th.clone(),
    };
    for (k, v) in vals.iter().enumerate() {
        if let Some(x) = v.exact() {
            if *x < bound {
                return Ok(Stage::Done(verdict(SplitKind::ObstructedByConditionI, &th, Some(k + 1), vals, "condition (i)")));
            }
        }
    }
    if cp.certainly_gt(&th) {
        return Ok(Stage::Positive);
    }
    let premise = qi(n as i64) - q(p as i64 - 2, 2 * (p as i64 - 1));
    match cp.exact() {
        Some(x) if *x > premise => Ok(Stage::NeedsRootComparison),
        Some(_) => Ok(Stage::Positive),
        None => Ok(Stage::Done(verdict(SplitKind::Inconclusive, &th, Some(pu), vals, "v(c_p) not known precisely enough"))),
    }
}

fn positive_stage(vals: &[ValBound], p: u64, n: u32, note: &str) -> SplitVerdict {
    let th = threshold(p, n);
    match positive_read_off(vals, p, &th) {
        Some(s) => verdict(SplitKind::SplitsWithConductor(s as u64), &th, Some(s), vals, note),
        None => verdict(SplitKind::Inconclusive, &th, None, vals, "no unique minimal prime-to-p index at the threshold"),
    }
}

/// Verdict from coefficient valuations alone (`vals[i-1] = v(c_i)`).
///
/// Condition (ii) needs element data; when it would apply, the verdict is
/// `Inconclusive` with a note.
pub fn splitting_obstruction(vals: &[ValBound], p: u64, n: u32) -> Result<SplitVerdict, TorsorError> {
    match common_checks(vals, p, n)? {
        Stage::Done(v) => Ok(v),
        Stage::Positive => Ok(positive_stage(vals, p, n, "positive criterion")),
        Stage::NeedsRootComparison => Ok(verdict(
            SplitKind::Inconclusive,
            &threshold(p, n),
            Some(p as usize),
            vals,
            "condition (ii) applies; element data required",
        )),
    }
}

/// Full verdict from coefficient elements `c_1..c_T` (the series is `1 + sum c_i t^i`).
pub fn splitting_obstruction_elements(
    coeffs: &[LocalFieldElement],
    p: u64,
    n: u32,
    cp_candidate: Option<&LocalFieldElement>,
) -> Result<SplitVerdict, TorsorError> {
    let vals: Vec<ValBound> = coeffs.iter().map(|c| crate::series::Coeff::c_val(c, p)).collect();
    let th = threshold(p, n);
    match common_checks(&vals, p, n)? {
        Stage::Done(v) => return Ok(v),
        Stage::Positive => return Ok(positive_stage(&vals, p, n, "positive criterion")),
        Stage::NeedsRootComparison => {}
    }
    let pu = p as usize;
    let ctx = coeffs[0].ctx().clone();
    let cp = &coeffs[pu - 1];
    let cpp = match cp_candidate {
        Some(c) => {
            let diff = c.try_sub(cp)?;
            if !crate::series::Coeff::c_val(&diff, p).certainly_gt(&th) {
                return Err(TorsorError::PreconditionViolated("candidate c'_p is not within n + 1/(p-1) of c_p".into()));
            }
            c.clone()
        }
        None => cp.clone(),
    };
    let vcp = cpp.valuation().expect_finite();
    let c1 = &coeffs[0];
    let shift = (p as i64 - 1) * n as i64 + 1;
    let pw = LocalFieldElement::pi_pow(&ctx, ctx.n() * shift).with_exact_digits(c1.prec().max(cpp.prec()) * p as i64 + ctx.n() * shift);
    let x = c1.pow(p).try_sub(&cpp.try_mul(&pw)?)?;
    let dval = crate::series::Coeff::c_val(&x, p);
    let pt = qi(p as i64) * &th;
    let mut ev = SplitEvidence {
        threshold: th.clone(),
        index: Some(1),
        valuations: vals.clone(),
        root_comparison: Some(dval.clone()),
        normalized: None,
        note: String::new(),
    };
    match &dval {
        ValBound::Exact(d) if *d < pt => {
            ev.note = "condition (ii)".into();
            return Ok(SplitVerdict { kind: SplitKind::ObstructedByConditionII, evidence: ev });
        }
        ValBound::AtLeast(d) if *d <= pt => {
            ev.note = "root comparison not decidable at this precision".into();
            return Ok(SplitVerdict { kind: SplitKind::Inconclusive, evidence: ev });
        }
        _ => {}
    }
    // normalise by (1 + eta t)^{p^n}, eta^p = -c'_p / p^{n-1}
    let v_eta = (&vcp - qi(n as i64) + Rational::one()) / qi(p as i64);
    let v_root = (qi(shift) + &vcp) / qi(p as i64);
    let pn = p.pow(n);
    let mut norm = Vec::with_capacity(coeffs.len());
    norm.push(match &dval {
        ValBound::Exact(d) if *d == pt => ValBound::Exact(th.clone()),
        other => {
            let dl = other.lower().as_finite().cloned().unwrap_or_else(|| pt.clone() + Rational::one());
            ValBound::AtLeast((dl / qi(p as i64)).min(&v_root + q(1, p as i64 - 1)))
        }
    });
    let one = LocalFieldElement::one(&ctx);
    let ratio = cpp.mul_rational(&(-Rational::new(BigInt::one(), BigInt::from(p).pow(n - 1))));
    let val_of = |i: usize| -> Rational {
        if i == 0 {
            Rational::zero()
        } else {
            match vals[i - 1].lower() {
                ExtendedRational::Finite(x) => x,
                ExtendedRational::Infinity => &th + qi(1000),
            }
        }
    };
    for i in 2..=coeffs.len() {
        let mut exact = coeffs[i - 1].clone();
        let mut m = 1usize;
        let mut ratio_pow = ratio.clone();
        while p as usize * m <= i {
            let k = p as usize * m;
            let b = Rational::from_integer(BigInt::from(binomial(pn, k as u64)));
            let prev = if i == k { one.clone() } else { coeffs[i - k - 1].clone() };
            exact = exact.try_add(&ratio_pow.try_mul(&prev)?.mul_rational(&b))?;
            ratio_pow = ratio_pow.try_mul(&ratio)?;
            m += 1;
        }
        let mut bound: Option<Rational> = None;
        for k in 1..=i {
            if (k as u64).is_multiple_of(p) || k as u64 > pn {
                continue;
            }
            let vk = vp_int(&BigInt::from(k), p).unwrap() as i64;
            let b = qi(n as i64 - vk) + qi(k as i64) * &v_eta + val_of(i - k);
            bound = Some(match bound {
                None => b,
                Some(x) => x.min(b),
            });
        }
        let ev_exact = crate::series::Coeff::c_val(&exact, p);
        let vb = match (ev_exact, bound) {
            (ValBound::Exact(x), Some(b)) if x < b => ValBound::Exact(x),
            (ValBound::Exact(x), None) => ValBound::Exact(x),
            (other, Some(b)) => ValBound::AtLeast(match other.lower() {
                ExtendedRational::Finite(x) => x.min(b),
                ExtendedRational::Infinity => b,
            }),
            (other, None) => other,
        };
        norm.push(vb);
    }
    ev.normalized = Some(norm.clone());
    match positive_read_off(&norm, p, &th) {
        Some(s) => {
            ev.index = Some(s);
            ev.note = "positive criterion after normalisation".into();
            Ok(SplitVerdict { kind: SplitKind::SplitsWithConductor(s as u64), evidence: ev })
        }
        None => {
            ev.note = "normalised series has no unique minimal index".into();
            Ok(SplitVerdict { kind: SplitKind::Inconclusive, evidence: ev })
        }
    }
}

// ----- centres and radii -----

/// `a0 = 1 - (beta/alpha)^2` and the guaranteed `v(a - a0) = v(c) + 2 v(beta)`.
pub fn center_from_constraint(
    alpha: &Rational,
    beta: &Rational,
    c_valuation: &Rational,
    p: u64,
) -> Result<(Rational, ExtendedRational), TorsorError> {
    let va = vp(alpha, p).map_err(|e| TorsorError::PreconditionViolated(e.to_string()))?;
    if va != ExtendedRational::from_int(0) {
        return Err(TorsorError::PreconditionViolated("v(alpha) must be 0".into()));
    }
    if *c_valuation <= Rational::zero() {
        return Err(TorsorError::PreconditionViolated("v(c) must be positive".into()));
    }
    let ratio = beta / alpha;
    let a0 = Rational::one() - &ratio * &ratio;
    let vb = vp(beta, p).unwrap();
    Ok((a0, vb.scale(&qi(2)) + c_valuation))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailCase {
    Generic,
    #[serde(rename = "a0")]
    AZero,
    #[serde(rename = "a1")]
    AOne,
}

impl std::str::FromStr for TailCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "generic" => Ok(TailCase::Generic),
            "a0" | "a=0" | "a-zero" => Ok(TailCase::AZero),
            "a1" | "a=1" | "a-one" => Ok(TailCase::AOne),
            _ => Err(format!("unknown case {s:?} (expected generic, a0, a1)")),
        }
    }
}

/// `(v(rho), v(e))` for the new etale tail; `extra` is `v(a)` (case a0) or `v(1-a)` (case a1).
pub fn tail_radius(p: u64, nu: u32, case: TailCase, extra: Option<&Rational>) -> Result<(Rational, Rational), TorsorError> {
    if p < 3 || !is_prime(p) || nu == 0 {
        return Err(TorsorError::PreconditionViolated(format!("need an odd prime p and nu >= 1, got p = {p}, nu = {nu}")));
    }
    let d0 = threshold(p, nu);
    let two_thirds = q(2, 3);
    match (case, extra) {
        (TailCase::Generic, None) => Ok((&two_thirds * &d0, &d0 / qi(3))),
        (TailCase::AZero, Some(va)) if va.is_positive() => {
            let rho = &two_thirds * &d0 + va / qi(3);
            let e = (&rho - va) / qi(2);
            Ok((rho, e))
        }
        (TailCase::AOne, Some(v1a)) if v1a.is_positive() => {
            let rho = &two_thirds * (&d0 + v1a);
            let e = &rho / qi(2);
            Ok((rho, e))
        }
        (TailCase::Generic, Some(_)) => Err(TorsorError::PreconditionViolated("generic case takes no extra valuation".into())),
        _ => Err(TorsorError::PreconditionViolated("cases a0/a1 need a positive extra valuation".into())),
    }
}

fn vpi(x: i64, p: u64) -> Option<u64> {
    vp_int(&BigInt::from(x), p)
}

/// A new-tail centre: rational, or in a ramified extension for the `p = 5` exceptional cases.
#[derive(Debug, Clone)]
pub enum CenterValue {
    Rational(Rational),
    Ramified(LocalFieldElement),
}

impl CenterValue {
    pub fn describe(&self) -> String {
        match self {
            CenterValue::Rational(x) => fmt_rational(x),
            CenterValue::Ramified(x) => x.pretty(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TailCenter {
    pub case: TailCase,
    pub exceptional: bool,
    pub a0: CenterValue,
    pub sqrt1ma: CenterValue,
    /// The fifth root `theta` in the exceptional cases.
    pub root: Option<LocalFieldElement>,
    /// `v(theta^5 - 5^{4 nu + 1} binom)`, which is finite when `theta` is approximate.
    pub root_agreement: Option<Rational>,
    /// `v(e)` for the disk around `z = 0`.
    pub v_e: Rational,
}

/// Case-(ii) exceptions: `p = 5` and `v(r+s) = nu - 1` (a0) or `v(s) = nu - 1` (a1).
fn validate_case(p: u64, nu: u32, r: i64, s: i64, case: TailCase) -> Result<(bool, Rational), TorsorError> {
    let bad = |m: String| TorsorError::CaseMismatch(m);
    CoverParams::forced_branch(p, nu, r, s)?;
    if vpi(r, p) != Some(0) {
        return Err(bad("r must be prime to p".into()));
    }
    let nu_i = nu as u64;
    match case {
        TailCase::Generic => {
            if r == s {
                return Err(bad("r = s gives a = 0, the branch point x = 0".into()));
            }
            let pi = p as i64;
            if s % pi == 0 || (r - s) % pi == 0 || (r + s) % pi == 0 {
                return Err(bad("generic case needs s, r - s, r + s prime to p".into()));
            }
            let (_, ve) = tail_radius(p, nu, case, None)?;
            Ok((false, ve))
        }
        TailCase::AZero => {
            if vpi(s, p) != Some(0) {
                return Err(bad("case a0 needs s prime to p".into()));
            }
            let v = vpi(r + s, p).unwrap();
            if v == 0 || v > nu_i - 1 {
                return Err(bad(format!("case a0 needs 1 <= v(r+s) <= nu-1, got {v}")));
            }
            let (_, ve) = tail_radius(p, nu, case, Some(&qi(v as i64)))?;
            Ok((p == 5 && v == nu_i - 1, ve))
        }
        TailCase::AOne => {
            let v = vpi(s, p).unwrap();
            if v == 0 || v > nu_i - 1 {
                return Err(bad(format!("case a1 needs 1 <= v(s) <= nu-1, got {v}")));
            }
            let (_, ve) = tail_radius(p, nu, case, Some(&qi(2 * v as i64)))?;
            Ok((p == 5 && v == nu_i - 1, ve))
        }
    }
}

/// Context used for the exceptional centres (valuations in `(1/60) Z`).
pub fn exceptional_context(m: u32) -> Ctx {
    LocalFieldContext::new(5, 60, m).expect("valid context")
}

/// `p^a`-th root of the integer unit `u` in `Z_p` modulo `p^m`, if it exists.
pub fn unit_root_zp(u: &BigInt, p: u64, a: u32, m: u32) -> Option<BigInt> {
    let ctx = LocalFieldContext::new(p, 1, m + a + 1).ok()?;
    let x = LocalFieldElement::from_rational(&ctx, &Rational::from_integer(u.clone()));
    match is_pth_power(&x, p.pow(a)) {
        PowerTest::Yes { root } => {
            let (k, c) = root.class_component(0)?;
            if k != 0 {
                return None;
            }
            Some(c.a.mod_floor(&BigInt::from(p).pow(m)))
        }
        _ => None,
    }
}

/// `theta = (5^{4 nu + 1} binom(m, 5))^{1/5}` in `ctx` (needs `5 | N`).
/// An exact root when one exists in the field; otherwise the best approximation.
/// Also returns `v(theta^5 - 5^{4 nu + 1} binom(m, 5))` (the precision of the
/// target when exact).
pub fn exceptional_root(ctx: &Ctx, nu: u32, m: i64) -> Result<(LocalFieldElement, Rational), TorsorError> {
    let b = BigInt::from(binomial(m as u64, 5));
    let x = BigInt::from(5).pow(4 * nu + 1) * &b;
    let k = vp_int(&x, 5).unwrap() as i64;
    if k % 5 != 4 {
        return Err(TorsorError::CaseMismatch(format!("v(5^(4nu+1) binom) = {k} is not 5nu - 1")));
    }
    let el = LocalFieldElement::from_rational_prec(ctx, &Rational::from_integer(x.clone()), ctx.n() * (ctx.m() + k));
    let (root, agree) = approx_pth_root(&el, 5)
        .ok_or_else(|| TorsorError::RootNotInField(format!("5^(4nu+1) binom({m}, 5) has no approximate 5th root")))?;
    Ok((root, q(agree, ctx.n())))
}

/// Centre of the new etale tail, with the branch `sqrt(1-a) = -(s - theta)/r`.
pub fn tail_center(p: u64, nu: u32, r: i64, s: i64, case: TailCase, m: u32) -> Result<TailCenter, TorsorError> {
    let (exceptional, v_e) = validate_case(p, nu, r, s, case)?;
    if !exceptional {
        let b = q(-s, r);
        return Ok(TailCenter {
            case,
            exceptional,
            a0: CenterValue::Rational(Rational::one() - &b * &b),
            sqrt1ma: CenterValue::Rational(b),
            root: None,
            root_agreement: None,
            v_e,
        });
    }
    let ctx = exceptional_context(m);
    let mm = match case {
        TailCase::AZero => r + s,
        _ => s,
    };
    let (theta, agreement) = exceptional_root(&ctx, nu, mm)?;
    let s_el = LocalFieldElement::from_rational_prec(&ctx, &qi(s), ctx.n() * ctx.m() * 2);
    let b = s_el.try_sub(&theta)?.mul_rational(&q(-1, r));
    let one = LocalFieldElement::from_rational_prec(&ctx, &qi(1), b.prec());
    let a0 = one.try_sub(&b.try_mul(&b)?)?;
    Ok(TailCenter { case, exceptional, a0: CenterValue::Ramified(a0), sqrt1ma: CenterValue::Ramified(b), root: Some(theta), root_agreement: Some(agreement), v_e })
}

/// Splitting verdict for the torsor on the new-tail disk around `z = 0`.
///
/// `with_root = false` drops the fifth-root term from the exceptional centres.
pub fn center_split_check(
    p: u64,
    nu: u32,
    r: i64,
    s: i64,
    case: TailCase,
    t: usize,
    with_root: bool,
    m: u32,
) -> Result<SplitVerdict, TorsorError> {
    let center = tail_center(p, nu, r, s, case, m)?;
    if !center.exceptional {
        let params = CoverParams::forced_branch(p, nu, r, s)?;
        let g = maclaurin_g(&params, t)?;
        let c0 = g.coeff(0).clone();
        let vals: Vec<ValBound> = (1..=t)
            .map(|i| crate::series::Coeff::c_val(&(g.coeff(i) / &c0), p).shift(&(qi(i as i64) * &center.v_e)))
            .collect();
        return splitting_obstruction(&vals, p, nu);
    }
    let CenterValue::Ramified(b) = &center.sqrt1ma else { unreachable!() };
    let ctx = b.ctx().clone();
    let beta = if with_root { b.clone() } else { LocalFieldElement::from_rational(&ctx, &q(-s, r)) };
    let e_pi = (&center.v_e * qi(ctx.n())).to_integer().to_i64().unwrap();
    let e = LocalFieldElement::pi_pow(&ctx, e_pi);
    let zero = LocalFieldElement::zero(&ctx, ctx.n() * ctx.m() * 2);
    let series = g_at(&beta, r, s, &zero, &e, t, p)?.normalized(p)?;
    splitting_obstruction_elements(&series.coeffs()[1..], p, nu, None)
}

// ----- inseparable tails -----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailDescriptor {
    pub case: TailCase,
    /// Inseparable `p^j`-tail.
    pub j: u32,
    /// Centre in the `x`-line.
    pub center: String,
    /// `v(d)` for centres of the form `a/(1-d^2)`.
    #[serde(with = "crate::valuation::opt_rational_str")]
    pub d_valuation: Option<Rational>,
    #[serde(with = "crate::valuation::rational_str")]
    pub radius_valuation: Rational,
    /// Centre and radius of the disks above, in the `z`-line.
    pub z_center: String,
    /// The `z`-centre as displayed in the location statement, when it differs.
    pub displayed_z_center: Option<String>,
    #[serde(with = "crate::valuation::rational_str")]
    pub z_radius_valuation: Rational,
    #[serde(with = "crate::valuation::rational_str")]
    pub sigma: Rational,
    /// Upper bound on `j`.
    pub j_bound: u32,
    /// Which item of the location result this is: 1, 2 or 3.
    pub item: u8,
}

/// All new inseparable tails; `extra` is `v(a)` (a0) or `v(sqrt(1-a))` (a1).
pub fn insep_tail_catalog(p: u64, nu: u32, case: TailCase, extra: Option<&Rational>) -> Result<Vec<TailDescriptor>, TorsorError> {
    let bad = |m: &str| TorsorError::InadmissibleValuation(m.to_string());
    let inv = q(1, p as i64 - 1);
    let mut out = Vec::new();
    match case {
        TailCase::Generic => {
            if extra.is_some() {
                return Err(bad("generic case takes no extra valuation"));
            }
        }
        TailCase::AZero => {
            let va = extra.ok_or_else(|| bad("case a0 needs v(a)"))?;
            if !va.is_integer() || *va < qi(1) || *va > qi(nu as i64 - 1) {
                return Err(bad("need v(a) integral with 1 <= v(a) <= nu - 1"));
            }
            let v = va.to_integer().to_u32().unwrap();
            out.push(TailDescriptor {
                case,
                j: nu - v,
                center: "a/2".into(),
                d_valuation: None,
                radius_valuation: va + &inv,
                z_center: "+-sqrt(-1)".into(),
                displayed_z_center: None,
                z_radius_valuation: q(1, 2 * (p as i64 - 1)),
                sigma: qi(2),
                j_bound: nu - v,
                item: 1,
            });
            if p == 5 && v < nu - 1 {
                out.push(TailDescriptor {
                    case,
                    j: nu - v - 1,
                    center: "a/(1-d^2)".into(),
                    d_valuation: Some(q(2, 5)),
                    radius_valuation: va + q(17, 20),
                    z_center: "d^5 = +-X^2/(8 sqrt 2), X = 5^(v(a)+1)/(r+s)".into(),
                    displayed_z_center: Some("d = +-(5^(v(a)+1)/(r+s))^(2/5)".into()),
                    z_radius_valuation: q(17, 40),
                    sigma: qi(2),
                    j_bound: nu - v,
                    item: 2,
                });
            }
        }
        TailCase::AOne => {
            let vs = extra.ok_or_else(|| bad("case a1 needs v(sqrt(1-a))"))?;
            if !vs.is_integer() || *vs < qi(1) || *vs > qi(nu as i64 - 1) {
                return Err(bad("need v(sqrt(1-a)) integral with 1 <= v <= nu - 1"));
            }
            let v = vs.to_integer().to_u32().unwrap();
            if p == 5 && v < nu - 1 {
                out.push(TailDescriptor {
                    case,
                    j: nu - v - 1,
                    center: "a/(1-d^2)".into(),
                    d_valuation: Some(vs + q(2, 5)),
                    radius_valuation: qi(2) * vs + q(17, 20),
                    z_center: "d^5 = +-(s/r)^5 X^2/4, X = 5^(v+1)/s".into(),
                    displayed_z_center: Some("d = +-2(s/r)(5^(v+1)/s)^(2/5)".into()),
                    z_radius_valuation: vs + q(17, 40),
                    sigma: qi(2),
                    j_bound: nu - v - 1,
                    item: 3,
                });
            }
        }
    }
    Ok(out)
}

/// Strict lower bound for `v(rho')` of the component separating a new inseparable
/// `p^j`-tail; `extra` as in [`tail_radius`].
pub fn newinsep_radius_bound(p: u64, nu: u32, j: u32, case: TailCase, extra: Option<&Rational>) -> Rational {
    let base = qi(nu as i64 - j as i64) + q(1, p as i64 - 1);
    match case {
        TailCase::Generic => q(2, 3) * base,
        TailCase::AZero => q(2, 3) * base + extra.cloned().unwrap_or_default() / qi(3),
        TailCase::AOne => q(2, 3) * (base + extra.cloned().unwrap_or_default()),
    }
}

/// Result of the conductor-2 check on one inseparable-tail disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InsepCheck {
    pub item: u8,
    pub sign: i8,
    pub n: u32,
    /// The `z`-centre used.
    pub centre: String,
    pub verdict: SplitVerdict,
}

/// `z`-centre `d` and the disk parameters for item 1, 2 or 3, for concrete `r, s`.
fn insep_disk(p: u64, nu: u32, r: i64, s: i64, item: u8, sign: i8, m: u32) -> Result<(Ctx, LocalFieldElement, LocalFieldElement, u32), TorsorError> {
    let sgn = qi(sign as i64);
    match item {
        1 => {
            let va = vpi(r + s, p).unwrap_or(0) as u32;
            if va == 0 || va > nu - 1 || vpi(s, p) != Some(0) || vpi(r, p) != Some(0) {
                return Err(TorsorError::CaseMismatch("item 1 needs case a0".into()));
            }
            let n = 2 * (p as u32 - 1);
            let ctx = if p % 4 == 1 {
                LocalFieldContext::new(p, n, m)?
            } else {
                LocalFieldContext::with_quadratic_layer(p, n, m, -1)?
            };
            let d = LocalFieldElement::sqrt_integer_unit(&ctx, -1)?.mul_rational(&sgn);
            let e = LocalFieldElement::pi_pow(&ctx, 1);
            Ok((ctx, d, e, va))
        }
        2 | 3 => {
            if p != 5 {
                return Err(TorsorError::CaseMismatch("items 2 and 3 need p = 5".into()));
            }
            let ctx = LocalFieldContext::new(5, 40, m)?;
            let v = item_valuation(nu, r, s, item)?;
            // d^5 = X^2 (item 2) or 32 (s/r)^5 X^2 (item 3), X = 5^{v+1} / m
            let mm = if item == 2 { r + s } else { s };
            let x = Rational::from_integer(BigInt::from(5).pow(v + 1)) / qi(mm);
            let mut target = &x * &x;
            if item == 3 {
                target *= qi(32) * num_traits::pow(q(s, r), 5);
            }
            let rel = ctx.n() * ctx.m();
            let vt = vp(&target, 5).unwrap().expect_finite().to_integer().to_i64().unwrap();
            let el = LocalFieldElement::from_rational_prec(&ctx, &target, rel + 40 * vt);
            let d = match is_pth_power(&el, 5) {
                PowerTest::Yes { root } => root,
                _ => return Err(TorsorError::RootNotInField(format!("{} has no 5th root in the working field", fmt_rational(&target)))),
            };
            let e_pi = 17 + if item == 3 { 40 * v as i64 } else { 0 };
            let d = d.mul_rational(&sgn);
            let e = LocalFieldElement::pi_pow(&ctx, e_pi);
            Ok((ctx, d, e, v + 1))
        }
        _ => Err(TorsorError::PreconditionViolated("item must be 1, 2 or 3".into())),
    }
}


/// How the `z`-centre of an item-2/3 disk is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsepCentre {
    /// `d` exactly as in the location statement.
    Displayed,
    /// `d` solved from the leading coefficients of the actual series.
    Solved,
}

fn g_series_at(
    ctx: &Ctx,
    r: i64,
    s: i64,
    item: u8,
    d: &LocalFieldElement,
    e: &LocalFieldElement,
    t: usize,
    p: u64,
) -> Result<TruncatedSeries<LocalFieldElement>, TorsorError> {
    let beta = LocalFieldElement::from_rational_prec(ctx, &q(-s, r), ctx.n() * ctx.m() * 2);
    let series = if item == 1 {
        // h(z) = ((z+b)/(z+1))^s ((z-1)/(z-b))^s
        let one = LocalFieldElement::one(ctx);
        let factors = [
            (beta.clone(), s),
            (one.clone(), -s),
            (one.mul_rational(&qi(-1)), s),
            (beta.mul_rational(&qi(-1)), -s),
        ];
        linear_factors_at(&one, &factors, d, e, t, p)?
    } else {
        g_at(&beta, r, s, d, e, t, p)?
    };
    Ok(series.normalized(p)?)
}

/// `K` with `d^10 = K` balancing `c_1^5` against `c_5 5^{4v+5}` at leading order:
/// `c_1 ~ A d^2 e`, `c_5 ~ B e^5` with `A = 2r(1 - r^2/s^2)`, `B = (2r/5)(1 - r^4/s^4)`.
pub fn insep_balance_constant(r: i64, s: i64, v: u32) -> Rational {
    let (rq, sq) = (qi(r), qi(s));
    let a = qi(2) * &rq * (Rational::one() - &rq * &rq / (&sq * &sq));
    let b = qi(2) * &rq / qi(5) * (Rational::one() - num_traits::pow(&rq / &sq, 4));
    b * Rational::from_integer(BigInt::from(5).pow(4 * v + 5)) / num_traits::pow(a, 5)
}

/// Solved centre `d = c0 pi^k (1 + x pi)`: `c0^10` matches the residue of `K`,
/// the digit `x` is chosen so the root comparison exceeds `p T`.
fn solved_disk(nu: u32, r: i64, s: i64, item: u8, sign: i8, t: usize, m: u32) -> Result<(Ctx, LocalFieldElement, LocalFieldElement, u32), TorsorError> {
    let v = item_valuation(nu, r, s, item)?;
    let k = insep_balance_constant(r, s, v);
    let vk = vp(&k, 5).unwrap().expect_finite().to_integer().to_i64().unwrap();
    let unit = &k / Rational::from_integer(BigInt::from(5).pow(vk as u32));
    let plain = LocalFieldContext::new(5, 40, m)?;
    let layered = LocalFieldContext::with_quadratic_layer(5, 40, m, 2)?;
    let e_pi = 17 + if item == 3 { 40 * v as i64 } else { 0 };
    let n = v + 1;
    let th = threshold(5, n);
    let pt = qi(5) * &th;
    for ctx in [plain, layered] {
        let ku = LocalFieldElement::from_rational(&ctx, &unit);
        let digits = ctx.residue_digits();
        let Some(c0) = digits.iter().filter(|c| !c.is_zero()).find(|c| {
            let x = LocalFieldElement::monomial(&ctx, (*c).clone(), 0, 1);
            x.pow(10).try_sub(&ku.truncate(1)).map(|d| d.is_zero()).unwrap_or(false)
        }) else {
            continue;
        };
        let rel = ctx.n() * ctx.m();
        let lead = LocalFieldElement::monomial(&ctx, c0.clone(), 0, rel).mul_rational(&qi(sign as i64));
        let e = LocalFieldElement::pi_pow(&ctx, e_pi);
        for x in &digits {
            let corr = LocalFieldElement::one(&ctx).with_exact_digits(rel).try_add(&LocalFieldElement::monomial(&ctx, x.clone(), 1, rel))?;
            let d = lead.try_mul(&corr)?.shift(4 * vk);
            let series = g_series_at(&ctx, r, s, item, &d, &e, t.max(6), 5)?;
            let c1 = series.coeff(1);
            let c5 = series.coeff(5);
            let pw = LocalFieldElement::pi_pow(&ctx, 40 * (4 * n as i64 + 1)).with_exact_digits(c5.prec() + 40 * (4 * n as i64 + 1));
            let diff = c1.pow(5).try_sub(&c5.try_mul(&pw)?)?;
            if crate::series::Coeff::c_val(&diff, 5).certainly_gt(&pt) {
                return Ok((ctx.clone(), d, e, n));
            }
        }
    }
    Err(TorsorError::RootNotInField(format!("no centre d with residue c0^10 = K found for item {item}")))
}

fn item_valuation(nu: u32, r: i64, s: i64, item: u8) -> Result<u32, TorsorError> {
    let (v, ok) = if item == 2 {
        let v = vpi(r + s, 5).unwrap_or(0) as u32;
        (v, vpi(s, 5) == Some(0))
    } else {
        let v = vpi(s, 5).unwrap_or(0) as u32;
        (v, vpi(r, 5) == Some(0))
    };
    if v == 0 || v + 1 >= nu || !ok {
        return Err(TorsorError::CaseMismatch(format!("item {item} needs v = {v} in [1, nu - 2] with the other parameter a unit")));
    }
    Ok(v)
}

/// Rescaled torsor on an inseparable-tail disk, normalised to constant term 1.
#[allow(clippy::too_many_arguments)]
pub fn insep_series(
    p: u64,
    nu: u32,
    r: i64,
    s: i64,
    item: u8,
    sign: i8,
    centre: InsepCentre,
    t: usize,
    m: u32,
) -> Result<(TruncatedSeries<LocalFieldElement>, LocalFieldElement, u32), TorsorError> {
    let (ctx, d, e, n) = if item != 1 && centre == InsepCentre::Solved {
        solved_disk(nu, r, s, item, sign, t, m)?
    } else {
        insep_disk(p, nu, r, s, item, sign, m)?
    };
    Ok((g_series_at(&ctx, r, s, item, &d, &e, t, p)?, d, n))
}

/// Conductor-2 check for one catalog entry on concrete parameters.
#[allow(clippy::too_many_arguments)]
pub fn insep_split_check(
    p: u64,
    nu: u32,
    r: i64,
    s: i64,
    item: u8,
    sign: i8,
    centre: InsepCentre,
    t: usize,
    m: u32,
) -> Result<InsepCheck, TorsorError> {
    let (series, d, n) = insep_series(p, nu, r, s, item, sign, centre, t, m)?;
    let verdict = splitting_obstruction_elements(&series.coeffs()[1..], p, n, None)?;
    Ok(InsepCheck { item, sign, n, centre: d.pretty(), verdict })
}

/// Achieved `epsilon` in the expansion of the item-2/3 torsor: the normalised series
/// minus `A d^2 e t + A d e^2 t^2 + B e^5 t^5` (constants as in
/// [`insep_balance_constant`]) vanishes modulo `5^{v + 5/4 + epsilon}`.
#[allow(clippy::too_many_arguments)]
pub fn insep_expansion_epsilon(nu: u32, r: i64, s: i64, item: u8, sign: i8, centre: InsepCentre, t: usize, m: u32) -> Result<Rational, TorsorError> {
    if item == 1 {
        return Err(TorsorError::PreconditionViolated("expansion epsilon is defined for items 2 and 3".into()));
    }
    let v = item_valuation(nu, r, s, item)?;
    let (ctx, d, e, _) = if centre == InsepCentre::Solved {
        solved_disk(nu, r, s, item, sign, t, m)?
    } else {
        insep_disk(5, nu, r, s, item, sign, m)?
    };
    let series = g_series_at(&ctx, r, s, item, &d, &e, t, 5)?;
    let (rq, sq) = (qi(r), qi(s));
    let a = qi(2) * &rq * (Rational::one() - &rq * &rq / (&sq * &sq));
    let b = qi(2) * &rq / qi(5) * (Rational::one() - num_traits::pow(&rq / &sq, 4));
    let bound = qi(v as i64) + q(5, 4);
    let mut worst: Option<Rational> = None;
    for i in 1..=t {
        let display = match i {
            1 => d.try_mul(&d)?.try_mul(&e)?.mul_rational(&a),
            2 => d.try_mul(&e.pow(2))?.mul_rational(&a),
            5 => e.pow(5).mul_rational(&b),
            _ => LocalFieldElement::zero(&ctx, series.coeff(i).prec()),
        };
        let diff = series.coeff(i).try_sub(&display)?;
        let val = match crate::series::Coeff::c_val(&diff, 5) {
            ValBound::Exact(x) => x,
            ValBound::AtLeast(x) => x,
            ValBound::Infinite => continue,
        };
        worst = Some(match worst {
            None => val,
            Some(w) => w.min(val),
        });
    }
    Ok(worst.map(|w| w - bound).unwrap_or_else(|| qi(1)))
}

/// Displayed-form identity for item 2: `c5/e^5 - (c1/e)^5 / 5^{4v+5}` with
/// `c1/e = 2(r+s) d^2`, `c5/e^5 = 32(r+s)/5` and `d^5 = +-(5^{v+1}/(r+s))^2`.
/// Returns the difference divided by `e^5` (exactly zero).
pub fn insep_identity_item2(r: i64, s: i64, sign: i8) -> Rational {
    let m = qi(r + s);
    let v = vp(&m, 5).unwrap().expect_finite().to_integer().to_u32().unwrap();
    let x = Rational::from_integer(BigInt::from(5).pow(v + 1)) / &m;
    let d5 = qi(sign as i64) * &x * &x;
    // (c1/e)^5 = 32 (r+s)^5 d^10
    let c1_5 = qi(32) * num_traits::pow(m.clone(), 5) * &d5 * &d5;
    let c5 = qi(32) * &m / qi(5);
    c5 - c1_5 / Rational::from_integer(BigInt::from(5).pow(4 * v + 5))
}

/// Displayed-form residual for item 3 divided by `e^5`, and its expected value
/// `(2^25 - 2^5) r^5 / (5 s^4)`.
pub fn insep_residual_item3(r: i64, s: i64, sign: i8) -> (Rational, Rational) {
    let sq = qi(s);
    let rq = qi(r);
    let v = vp(&sq, 5).unwrap().expect_finite().to_integer().to_u32().unwrap();
    let x = Rational::from_integer(BigInt::from(5).pow(v + 1)) / &sq;
    // d = +-2 (s/r) X^{2/5}: d^5 = +-32 (s/r)^5 X^2
    let d5 = qi(sign as i64) * qi(32) * num_traits::pow(&sq / &rq, 5) * &x * &x;
    let c1 = qi(-8) * num_traits::pow(rq.clone(), 3) / (&sq * &sq); // times d^2
    let c1_5 = num_traits::pow(c1, 5) * &d5 * &d5;
    let c5 = qi(-32) * num_traits::pow(rq.clone(), 5) / (qi(5) * num_traits::pow(sq.clone(), 4));
    let residual = c5 - c1_5 / Rational::from_integer(BigInt::from(5).pow(4 * v + 5));
    let expected = (qi(1 << 25) - qi(32)) * num_traits::pow(rq, 5) / (qi(5) * num_traits::pow(sq, 4));
    (residual, expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inf_vals(t: usize) -> Vec<ValBound> {
        vec![ValBound::Infinite; t]
    }

    #[test]
    fn condition_one_example() {
        let mut vals = inf_vals(5);
        vals[0] = ValBound::Exact(qi(1));
        let v = splitting_obstruction(&vals, 5, 2).unwrap();
        assert_eq!(v.kind, SplitKind::ObstructedByConditionI);
        assert_eq!(v.evidence.index, Some(1));
        assert!(matches!(splitting_obstruction(&inf_vals(3), 5, 2), Err(TorsorError::InsufficientData { .. })));
    }

    #[test]
    fn generic_conductor_three() {
        let v = center_split_check(7, 1, 3, 1, TailCase::Generic, 23, true, 8).unwrap();
        assert_eq!(v.kind, SplitKind::SplitsWithConductor(3));
        assert_eq!(v.evidence.valuations[2], ValBound::Exact(q(7, 6)));
    }

    #[test]
    fn centre_examples() {
        let (a0, v) = center_from_constraint(&qi(6), &qi(2), &qi(1), 7).unwrap();
        assert_eq!(a0, q(8, 9));
        assert_eq!(v, ExtendedRational::from_int(1));
        let (a0, v) = center_from_constraint(&qi(3), &qi(0), &qi(1), 5).unwrap();
        assert_eq!(a0, qi(1));
        assert!(v.is_infinite());
        let (a0, v) = center_from_constraint(&qi(3), &qi(1), &qi(2), 5).unwrap();
        assert_eq!((a0, v), (q(8, 9), ExtendedRational::from_int(2)));
        assert!(center_from_constraint(&qi(5), &qi(1), &qi(2), 5).is_err());
        let c = tail_center(7, 1, 3, 1, TailCase::Generic, 8).unwrap();
        assert!(matches!(c.a0, CenterValue::Rational(ref x) if *x == q(8, 9)));
        assert!(matches!(tail_center(7, 1, 3, 3, TailCase::Generic, 8), Err(TorsorError::CaseMismatch(_))));
    }

    #[test]
    fn radius_examples() {
        assert_eq!(tail_radius(7, 2, TailCase::Generic, None).unwrap(), (q(13, 9), q(13, 18)));
        assert_eq!(tail_radius(5, 2, TailCase::AZero, Some(&qi(1))).unwrap().0, q(11, 6));
        assert_eq!(tail_radius(5, 1, TailCase::Generic, None).unwrap().0, q(5, 6));
    }

    #[test]
    fn catalog_examples() {
        assert!(insep_tail_catalog(7, 3, TailCase::Generic, None).unwrap().is_empty());
        let c = insep_tail_catalog(7, 3, TailCase::AZero, Some(&qi(1))).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].j, c[0].radius_valuation.clone()), (2, q(7, 6)));
        let c = insep_tail_catalog(5, 3, TailCase::AZero, Some(&qi(1))).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].j, 1);
        assert_eq!(c[1].d_valuation, Some(q(2, 5)));
        assert_eq!(c[1].radius_valuation, q(37, 20));
        assert!(matches!(
            insep_tail_catalog(5, 3, TailCase::AZero, Some(&qi(3))),
            Err(TorsorError::InadmissibleValuation(_))
        ));
    }

    #[test]
    fn displayed_identities() {
        for sign in [1i8, -1] {
            assert!(insep_identity_item2(1, 4, sign).is_zero());
            let (res, exp) = insep_residual_item3(2, 5, sign);
            assert_eq!(res, exp);
        }
    }
}
