mod props;

use num_traits::{One, Zero};
use proptest::prelude::*;

use srt_core::filtration::{conductor_case, quotient_filtration, TowerShape};
use srt_core::local_field::{is_pth_power, LocalFieldContext, LocalFieldElement, PowerTest};
use srt_core::series::{maclaurin_g, Coeff, CoverParams, TruncatedSeries, ValBound};
use srt_core::torsor::{splitting_obstruction, tail_radius, SplitKind, TailCase};
use srt_core::valuation::{q, qi, vp, ExtendedRational, Rational};

fn suite(f: fn() -> Result<(), String>) {
    if let Err(e) = f() {
        panic!("{e}");
    }
}

#[test]
fn valuation_axioms() {
    suite(props::valuation_axioms);
}

#[test]
fn multinomial_valuation_bound() {
    suite(props::binom_coeffs);
}

#[test]
fn binomial_prime_power_congruence() {
    suite(props::binom_congruence);
}

#[test]
fn prime_power_root_round_trip() {
    suite(props::pnth_root_round_trip);
}

#[test]
fn hensel_square_root_round_trip() {
    suite(props::hensel_round_trip);
}

#[test]
fn herbrand_functions_are_inverse() {
    suite(props::herbrand_inverse);
}

#[test]
fn compositum_conductor_algebra() {
    suite(props::compositum_algebra);
}

#[test]
fn effective_weights_sum_to_one() {
    suite(props::weight_sum);
}

#[test]
fn solved_differents_are_monotone() {
    suite(props::delta_monotonicity);
}

fn vint(x: i64, p: u64) -> u32 {
    let (mut x, mut k) = (x, 0);
    while x % p as i64 == 0 {
        x /= p as i64;
        k += 1;
    }
    k
}

fn element(ctx: &srt_core::local_field::Ctx, num: i64, den: i64, shift: i64) -> LocalFieldElement {
    LocalFieldElement::from_rational(ctx, &q(num, den)).shift(shift)
}

fn fin(x: &ExtendedRational) -> Rational {
    x.expect_finite()
}

/// `(1 + p w(z))^(p^nu)` with `w` an integer polynomial.
fn kummer_factor(p: u64, nu: u32, w: &[i64], t: usize) -> TruncatedSeries<Rational> {
    let mut base = vec![Rational::zero(); t + 1];
    base[0] = Rational::one();
    for (i, c) in w.iter().enumerate() {
        if i < t {
            base[i + 1] = qi(p as i64 * c);
        }
    }
    let base = TruncatedSeries::new(base, None);
    let mut acc = TruncatedSeries::new(
        std::iter::once(Rational::one()).chain(std::iter::repeat_n(Rational::zero(), t)).collect(),
        None,
    );
    let mut sq = base;
    let mut e = p.pow(nu);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc.mul(&sq);
        }
        sq = sq.mul(&sq);
        e >>= 1;
    }
    acc
}

fn scaled_vals(g: &TruncatedSeries<Rational>, p: u64, ve: &Rational) -> Vec<ValBound> {
    let c0 = g.coeff(0).clone();
    (1..=g.order()).map(|i| (g.coeff(i) / &c0).c_val(p).shift(&(qi(i as i64) * ve))).collect()
}

/// `(p, nu, v)` with `1 <= v <= nu - 1`.
fn small_case() -> impl Strategy<Value = (u64, u32, u32)> {
    (prop::sample::select(vec![3u64, 5, 7, 11]), 2u32..=3).prop_flat_map(|(p, nu)| (Just(p), Just(nu), 1..nu))
}

/// A unit modulo `p` in `1..bound`.
fn unit_below(x: i64, p: u64, bound: i64) -> i64 {
    let pi = p as i64;
    let units = bound - bound / pi;
    let k = x.rem_euclid(units);
    k / (pi - 1) * pi + k % (pi - 1) + 1
}

/// Parameters `(r, s, case, v_e)` with a valid tail disk.
fn disk_params() -> impl Strategy<Value = (u64, u32, i64, i64, TailCase, Rational)> {
    (prop::sample::select(vec![5u64, 7, 11]), 1u32..=3, 0u8..3, 1i64..1000, 1i64..1000).prop_filter_map(
        "case constraints",
        |(p, nu, c, r0, s0)| {
            let bound = (p as i64).pow(nu);
            let (r, s) = (r0 % bound, s0 % bound);
            let pi = p as i64;
            if r == 0 || s == 0 || r % pi == 0 {
                return None;
            }
            let (case, extra) = match c {
                0 if s % pi != 0 && (r + s) % pi != 0 && (r - s) % pi != 0 => (TailCase::Generic, None),
                1 if s % pi != 0 && (r + s) % pi == 0 && (r + s) % bound != 0 => (TailCase::AZero, Some(qi(vint(r + s, p) as i64))),
                2 if s % pi == 0 => (TailCase::AOne, Some(qi(2 * vint(s, p) as i64))),
                _ => return None,
            };
            let (_, ve) = tail_radius(p, nu, case, extra.as_ref()).ok()?;
            Some((p, nu, r, s, case, ve))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn local_field_valuation_is_additive(
        p in prop::sample::select(vec![3u64, 5, 7]),
        n in prop::sample::select(vec![1u32, 2, 5]),
        a in (1i64..5000, 1i64..5000, 0i64..20),
        b in (1i64..5000, 1i64..5000, 0i64..20),
        c in (1i64..5000, 1i64..5000, 0i64..20),
    ) {
        let ctx = LocalFieldContext::new(p, n, 8).unwrap();
        let x = &element(&ctx, a.0, a.1, a.2) + &element(&ctx, b.0, b.1, b.2 + 1);
        let y = element(&ctx, c.0, c.1, c.2);
        let (vx, vy) = (x.valuation(), y.valuation());
        prop_assume!(!vx.is_infinite() && !vy.is_infinite());
        prop_assert_eq!(fin(&(&x * &y).valuation()), fin(&vx) + fin(&vy));
        let s = &x + &y;
        prop_assert!(s.valuation() >= vx.clone().min(vy.clone()));
        if vx != vy {
            prop_assert_eq!(s.valuation(), vx.min(vy));
        }
    }

    #[test]
    fn pth_powers_are_recognised(
        p in prop::sample::select(vec![3u64, 5, 7]),
        n in prop::sample::select(vec![1u32, 2, 5]),
        num in 1i64..5000,
        den in 1i64..5000,
        shift in -6i64..6,
    ) {
        let ctx = LocalFieldContext::new(p, n, 8).unwrap();
        let y = element(&ctx, num, den, shift);
        prop_assume!(!y.valuation().is_infinite());
        let x = y.pow(p);
        let verdict = is_pth_power(&x, p);
        prop_assert!(matches!(verdict, PowerTest::Yes { .. }), "{:?}", verdict);
    }

    #[test]
    fn coefficient_bound_when_a_is_small((p, nu, v) in small_case(), r0 in 0i64..10_000, k0 in 0i64..10_000) {
        let (bound, pi) = ((p as i64).pow(nu), p as i64);
        let r = unit_below(r0, p, bound);
        let s = (unit_below(k0, p, bound) * pi.pow(v) - r).rem_euclid(bound);
        prop_assume!(s > 0);
        let params = CoverParams::forced_branch(p, nu, r, s).unwrap();
        let va = fin(&vp(&params.a, p).unwrap());
        prop_assert_eq!(va.clone(), qi(v as i64));
        let g = maclaurin_g(&params, params.default_order()).unwrap();
        for i in 1..=g.order() {
            let lower = &va - qi(vint(i as i64, p) as i64);
            prop_assert!(!matches!(g.coeff(i).c_val(p), ValBound::Exact(ref x) if *x < lower), "i={} r={} s={}", i, r, s);
        }
    }

    #[test]
    fn coefficient_bound_when_one_minus_a_is_small((p, nu, v) in small_case(), r0 in 0i64..10_000, u0 in 0i64..10_000) {
        let (bound, pi) = ((p as i64).pow(nu), p as i64);
        let r = unit_below(r0, p, bound);
        let s = unit_below(u0, p, bound / pi.pow(v)) * pi.pow(v);
        let params = CoverParams::forced_branch(p, nu, r, s).unwrap();
        let vb = qi(v as i64);
        prop_assert_eq!(fin(&vp(&(qi(1) - &params.a), p).unwrap()), qi(2) * &vb);
        let g = maclaurin_g(&params, params.default_order()).unwrap();
        for i in 1..=g.order() {
            let lower = (qi(1) - qi(i as i64)) * &vb - qi(vint(i as i64, p) as i64);
            prop_assert!(!matches!(g.coeff(i).c_val(p), ValBound::Exact(ref x) if *x < lower), "i={} r={} s={}", i, r, s);
        }
    }

    #[test]
    fn kummer_class_leaves_verdicts_unchanged(
        (p, nu, r, s, _case, ve) in disk_params(),
        w in prop::collection::vec(-5i64..=5, 1..4),
    ) {
        let params = CoverParams::forced_branch(p, nu, r, s).unwrap();
        let t = params.default_order();
        let g = maclaurin_g(&params, t).unwrap();
        let before = splitting_obstruction(&scaled_vals(&g, p, &ve), p, nu).unwrap();
        let twisted = g.mul(&kummer_factor(p, nu, &w, t));
        let after = splitting_obstruction(&scaled_vals(&twisted, p, &ve), p, nu).unwrap();
        prop_assert_eq!(before.kind, after.kind);
    }

    #[test]
    fn quotients_keep_jumps(f in props::filtration(), k in 0usize..6) {
        let m = [1u64, 2, 3, 5, 6, 10][k];
        prop_assume!(f.order % m == 0);
        let gcd = |mut a: u64, mut b: u64| { while b != 0 { (a, b) = (b, a % b); } a };
        let orders: Vec<u64> = f.breaks.iter().map(|b| gcd(b.order, m)).collect();
        let quotient = quotient_filtration(&f, m, &orders).unwrap();
        let jumps: Vec<_> = quotient.breaks.iter().map(|b| b.jump.clone()).collect();
        let original: Vec<_> = f.breaks.iter().map(|b| b.jump.clone()).collect();
        prop_assert_eq!(jumps, original);
    }
}

#[test]
fn only_the_documented_coefficients_reach_the_threshold() {
    // i > 3: v(c_i) > nu + 1/(p-1) unless p = i = 5 and the case valuation is nu - 1
    for p in [5u64, 7, 11] {
        for nu in 1..=3u32 {
            let bound = (p as i64).pow(nu);
            let pi = p as i64;
            let th = qi(nu as i64) + q(1, pi - 1);
            let mut seen = 0;
            let mut used = [0usize; 3];
            for r in 1..bound.min(40) {
                for s in 1..bound {
                    if r % pi == 0 {
                        continue;
                    }
                    let (case, extra, v) = if s % pi != 0 && (r + s) % pi != 0 && (r - s) % pi != 0 {
                        (TailCase::Generic, None, 0)
                    } else if s % pi != 0 && (r + s) % pi == 0 {
                        let v = vint(r + s, p);
                        if v >= nu {
                            continue;
                        }
                        (TailCase::AZero, Some(qi(v as i64)), v)
                    } else if s % pi == 0 {
                        let v = vint(s, p);
                        (TailCase::AOne, Some(qi(2 * v as i64)), v)
                    } else {
                        continue;
                    };
                    seen += 1;
                    let slot = &mut used[case as usize];
                    if seen % 7 != 0 || *slot >= 40 {
                        continue;
                    }
                    *slot += 1;
                    let (_, ve) = tail_radius(p, nu, case, extra.as_ref()).unwrap();
                    let params = CoverParams::forced_branch(p, nu, r, s).unwrap();
                    let g = maclaurin_g(&params, params.default_order()).unwrap();
                    let vals = scaled_vals(&g, p, &ve);
                    let exceptional = p == 5 && case != TailCase::Generic && v == nu - 1;
                    for (k, val) in vals.iter().enumerate().skip(3) {
                        let i = k + 1;
                        if exceptional && i == 5 {
                            assert!(!val.certainly_gt(&th), "p={p} nu={nu} r={r} s={s}: exception did not occur");
                        } else {
                            assert!(val.certainly_gt(&th), "p={p} nu={nu} r={r} s={s} i={i}: {val}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn tower_conductors_stay_below_nu() {
    for p in [3u64, 5, 7, 11, 13, 17, 101] {
        for nu in 1..=8u32 {
            let c = conductor_case(p, nu, TowerShape::TameOverCyclotomic).unwrap();
            assert!(c < qi(nu as i64));
            if nu >= 2 {
                let c = conductor_case(p, nu, TowerShape::KummerTower).unwrap();
                assert!(c < qi(nu as i64), "p={p} nu={nu}");
            }
        }
    }
}

#[test]
fn verdicts_at_generic_disks() {
    let ve = q(13, 18);
    let params = CoverParams::forced_branch(7, 2, 1, 3).unwrap();
    let g = maclaurin_g(&params, 23).unwrap();
    let v = splitting_obstruction(&scaled_vals(&g, 7, &ve), 7, 2).unwrap();
    assert_eq!(v.kind, SplitKind::SplitsWithConductor(3));
}
