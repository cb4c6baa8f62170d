//! Upper-numbering ramification filtrations: Herbrand transforms, quotients,
//! compositum conductors and the closed-form conductors of the two tower shapes.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::valuation::{fmt_rational, is_prime, q, qi, rational_str, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiltrationError {
    #[error("malformed filtration: {0}")]
    Malformed(String),
    #[error("invalid quotient: {0}")]
    InvalidQuotient(String),
    #[error("empty conductor list")]
    Empty,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("negative argument {0}")]
    Negative(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Break {
    #[serde(with = "rational_str")]
    pub jump: Rational,
    pub order: u64,
}

/// `|G^u| = breaks[i].order` for `breaks[i-1].jump < u <= breaks[i].jump`,
/// `|G^0| = order`, and `G^u` is trivial beyond the last jump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filtration {
    pub breaks: Vec<Break>,
    pub order: u64,
}

impl Filtration {
    pub fn new(breaks: Vec<Break>, order: u64) -> Result<Self, FiltrationError> {
        let f = Filtration { breaks, order };
        f.validate()?;
        Ok(f)
    }

    pub fn trivial() -> Self {
        Filtration { breaks: Vec::new(), order: 1 }
    }

    pub fn from_json(s: &str) -> Result<Self, FiltrationError> {
        let f: Filtration = serde_json::from_str(s).map_err(|e| FiltrationError::Malformed(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<(), FiltrationError> {
        if self.order == 0 {
            return Err(FiltrationError::Malformed("group order 0".into()));
        }
        if self.breaks.len() > 4096 {
            return Err(FiltrationError::Malformed("too many breaks".into()));
        }
        let mut prev_jump: Option<&Rational> = None;
        let mut prev_order = self.order;
        for b in &self.breaks {
            if b.jump.is_negative() {
                return Err(FiltrationError::Malformed(format!("negative jump {}", fmt_rational(&b.jump))));
            }
            if prev_jump.is_some_and(|j| *j >= b.jump) {
                return Err(FiltrationError::Malformed("jumps must increase strictly".into()));
            }
            if b.order == 0 || !prev_order.is_multiple_of(b.order) {
                return Err(FiltrationError::Malformed(format!("order {} does not divide {}", b.order, prev_order)));
            }
            prev_jump = Some(&b.jump);
            prev_order = b.order;
        }
        Ok(())
    }

    /// Greatest `u` with `|G^u| > 1`; zero for a trivial filtration.
    pub fn conductor(&self) -> Rational {
        self.breaks.iter().rev().find(|b| b.order > 1).map(|b| b.jump.clone()).unwrap_or_else(Rational::zero)
    }

    /// Order of `G^u` for `u >= 0`.
    pub fn order_at(&self, u: &Rational) -> u64 {
        if u.is_zero() {
            return self.order;
        }
        self.breaks.iter().find(|b| *u <= b.jump).map(|b| b.order).unwrap_or(1)
    }

    /// Pieces `(start, end, |G^w|)` of the upper numbering; the last piece is unbounded.
    fn pieces(&self) -> Vec<(Rational, Rational, u64)> {
        let mut out = Vec::new();
        let mut start = Rational::zero();
        for b in &self.breaks {
            if b.jump > start {
                out.push((start.clone(), b.jump.clone(), b.order));
            }
            start = b.jump.clone();
        }
        out
    }

    /// `psi(u) = int_0^u [G^0 : G^w] dw`.
    pub fn psi(&self, u: &Rational) -> Result<Rational, FiltrationError> {
        if u.is_negative() {
            return Err(FiltrationError::Negative(fmt_rational(u)));
        }
        let n = qi(self.order as i64);
        let mut acc = Rational::zero();
        let mut reached = Rational::zero();
        for (a, b, ord) in self.pieces() {
            if *u <= a {
                break;
            }
            let end = if *u < b { u.clone() } else { b.clone() };
            acc += (&end - &a) * &n / qi(ord as i64);
            reached = end;
        }
        if *u > reached {
            acc += (u - &reached) * &n;
        }
        Ok(acc)
    }

    /// `phi = psi^{-1}`.
    pub fn phi(&self, x: &Rational) -> Result<Rational, FiltrationError> {
        if x.is_negative() {
            return Err(FiltrationError::Negative(fmt_rational(x)));
        }
        let n = qi(self.order as i64);
        let mut lower = Rational::zero();
        let mut upper = Rational::zero();
        for (a, b, ord) in self.pieces() {
            let slope = qi(ord as i64) / &n;
            let len = (&b - &a) / &slope;
            if *x <= &lower + &len {
                return Ok(upper + (x - lower) * slope);
            }
            lower += len;
            upper = b;
        }
        Ok(upper + (x - lower) / n)
    }

    /// Lower-numbering jumps `psi(u_i)`.
    pub fn lower_jumps(&self) -> Vec<Rational> {
        self.breaks.iter().map(|b| self.psi(&b.jump).expect("jumps are nonnegative")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Phi,
    Psi,
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "phi" => Ok(Direction::Phi),
            "psi" => Ok(Direction::Psi),
            _ => Err(format!("unknown direction {s:?} (phi|psi)")),
        }
    }
}

pub fn herbrand(f: &Filtration, dir: Direction, x: &Rational) -> Result<Rational, FiltrationError> {
    match dir {
        Direction::Phi => f.phi(x),
        Direction::Psi => f.psi(x),
    }
}

/// Filtration of a quotient: same jumps, the image orders given per break.
pub fn quotient_filtration(f: &Filtration, total: u64, orders: &[u64]) -> Result<Filtration, FiltrationError> {
    if orders.len() != f.breaks.len() {
        return Err(FiltrationError::InvalidQuotient(format!("{} orders for {} breaks", orders.len(), f.breaks.len())));
    }
    if total == 0 || !f.order.is_multiple_of(total) {
        return Err(FiltrationError::InvalidQuotient(format!("{} does not divide {}", total, f.order)));
    }
    for (b, &o) in f.breaks.iter().zip(orders) {
        if o == 0 || b.order % o != 0 {
            return Err(FiltrationError::InvalidQuotient(format!("{} does not divide {} at jump {}", o, b.order, fmt_rational(&b.jump))));
        }
    }
    let breaks = f.breaks.iter().zip(orders).map(|(b, &o)| Break { jump: b.jump.clone(), order: o }).collect();
    Filtration::new(breaks, total).map_err(|e| FiltrationError::InvalidQuotient(e.to_string()))
}

/// The upper conductor of a compositum is the maximum of the conductors.
pub fn compositum_conductor(conductors: &[Rational]) -> Result<Rational, FiltrationError> {
    conductors.iter().max().cloned().ok_or(FiltrationError::Empty)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TowerShape {
    /// Tame extension of `K_nu = K_0(zeta_{p^nu})`.
    TameOverCyclotomic,
    /// `K_nu` composed with a `p`-th root Kummer step over `K_1`.
    KummerTower,
}

impl std::str::FromStr for TowerShape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tame-over-cyclotomic" | "i" => Ok(TowerShape::TameOverCyclotomic),
            "kummer-tower" | "ii" => Ok(TowerShape::KummerTower),
            _ => Err(format!("unknown shape {s:?} (tame-over-cyclotomic|kummer-tower)")),
        }
    }
}

/// Upper conductor of `K_0(zeta_{p^nu}) / K_0`.
pub fn cyclotomic_conductor(nu: u32) -> Rational {
    qi(nu as i64 - 1)
}

/// Conductor of the `p`-th root Kummer step over `K_1`, measured over `K_1`.
/// Taken as an input bound, not derived here.
pub fn kummer_step_conductor(p: u64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

/// Conductor of the tower: `nu - 1` for a tame extension of the cyclotomic
/// field (tame base change keeps it), and for the Kummer tower the maximum of
/// `nu - 1` and the Kummer step pushed down the tame layer `K_1 / K_0`
/// (ramification index `p - 1`), i.e. `p/(p-1)`.
pub fn conductor_case(p: u64, nu: u32, shape: TowerShape) -> Result<Rational, FiltrationError> {
    if !is_prime(p) || p < 3 {
        return Err(FiltrationError::PreconditionViolated(format!("p = {p} must be an odd prime")));
    }
    match shape {
        TowerShape::TameOverCyclotomic => {
            if nu < 1 {
                return Err(FiltrationError::PreconditionViolated("nu >= 1 required".into()));
            }
            Ok(cyclotomic_conductor(nu))
        }
        TowerShape::KummerTower => {
            if nu <= 1 {
                return Err(FiltrationError::PreconditionViolated("nu > 1 required".into()));
            }
            let tame = Filtration::new(vec![Break { jump: Rational::zero(), order: p - 1 }], p - 1)?;
            let pushed = tame.phi(&kummer_step_conductor(p))?;
            compositum_conductor(&[cyclotomic_conductor(nu), pushed])
        }
    }
}

/// `p/(p-1)`, the pushed-down Kummer step conductor.
pub fn kummer_pushdown(p: u64) -> Rational {
    q(p as i64, p as i64 - 1)
}
