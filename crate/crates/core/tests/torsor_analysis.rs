use num_traits::{One, Zero};
use srt_core::local_field::{LocalFieldContext, LocalFieldElement};
use srt_core::series::{g_at, Coeff, ValBound};
use srt_core::torsor::*;
use srt_core::valuation::{q, qi, vp, ExtendedRational, Rational};

fn vint(x: i64, p: u64) -> u32 {
    let mut x = x;
    let mut k = 0;
    while x % p as i64 == 0 {
        x /= p as i64;
        k += 1;
    }
    k
}

/// Parameters `(r, s)` for a case and extra valuation, scanning small values.
fn pick(p: u64, nu: u32, case: TailCase, v: u32) -> Option<(i64, i64)> {
    let bound = (p as i64).pow(nu);
    for r in 1..bound.min(60) {
        for s in 1..bound {
            let ok = match case {
                TailCase::Generic => {
                    let pi = p as i64;
                    r % pi != 0 && s % pi != 0 && (r + s) % pi != 0 && (r - s) % pi != 0
                }
                TailCase::AZero => r % p as i64 != 0 && s % p as i64 != 0 && vint(r + s, p) == v,
                TailCase::AOne => r % p as i64 != 0 && vint(s, p) == v,
            };
            if ok {
                return Some((r, s));
            }
        }
    }
    None
}

#[test]
fn non_exceptional_centres_give_conductor_three() {
    for p in [5u64, 7, 11, 13] {
        for nu in 1..=3u32 {
            let mut runs = vec![(TailCase::Generic, 0u32)];
            for v in 1..nu {
                runs.push((TailCase::AZero, v));
                runs.push((TailCase::AOne, v));
            }
            for (case, v) in runs {
                if p == 5 && case != TailCase::Generic && v == nu - 1 {
                    continue;
                }
                let (r, s) = pick(p, nu, case, v).unwrap();
                let verdict = center_split_check(p, nu, r, s, case, 3 * p as usize + 2, true, 8).unwrap();
                assert_eq!(verdict.kind, SplitKind::SplitsWithConductor(3), "p={p} nu={nu} {case:?} r={r} s={s}");
            }
        }
    }
}

#[test]
fn exceptional_centres_need_the_fifth_root() {
    for (nu, r, s, case) in [
        (2u32, 1i64, 4i64, TailCase::AZero),
        (2, 2, 3, TailCase::AZero),
        (3, 1, 24, TailCase::AZero),
        (2, 1, 5, TailCase::AOne),
        (3, 2, 25, TailCase::AOne),
    ] {
        let with = center_split_check(5, nu, r, s, case, 17, true, 16).unwrap();
        assert_eq!(with.kind, SplitKind::SplitsWithConductor(3), "nu={nu} r={r} s={s}");
        let d = with.evidence.root_comparison.clone().unwrap();
        let pt = qi(5) * (qi(nu as i64) + q(1, 4));
        assert!(d.certainly_gt(&pt));
        assert_eq!(d, ValBound::Exact(pt.clone() + q(5, 6)));
        let without = center_split_check(5, nu, r, s, case, 17, false, 16).unwrap();
        assert_eq!(without.kind, SplitKind::ObstructedByConditionII, "nu={nu} r={r} s={s}");
        assert_eq!(without.evidence.root_comparison, Some(ValBound::Exact(qi(5 * nu as i64) + q(13, 12))));
    }
}

#[test]
fn exceptional_roots_exact_or_approximate() {
    assert!(matches!(tail_center(5, 3, 1, 9, TailCase::AZero, 8), Ok(TailCenter { exceptional: false, .. })));
    // 5^9 binom(5, 5) = 5^9: exact root 5^{9/5}
    let c = tail_center(5, 2, 1, 4, TailCase::AZero, 8).unwrap();
    let theta = c.root.unwrap();
    assert_eq!(theta.valuation(), ExtendedRational::Finite(q(9, 5)));
    let target = LocalFieldElement::from_rational(theta.ctx(), &Rational::from_integer(5.into()).pow(9));
    assert!(theta.pow(5).congruent(&target, theta.pow(5).prec()));
    // units of 5^{4nu+1} binom(r+s, 5) not 1 mod 25 after the fourth power: approximate roots
    for (nu, r, s, case) in [
        (2u32, 1i64, 9i64, TailCase::AZero),
        (2, 3, 7, TailCase::AZero),
        (3, 1, 49, TailCase::AZero),
        (2, 1, 10, TailCase::AOne),
        (3, 1, 50, TailCase::AOne),
    ] {
        let c = tail_center(5, nu, r, s, case, 16).unwrap();
        assert!(c.exceptional);
        let agreement = c.root_agreement.unwrap();
        assert!(agreement > qi(5 * nu as i64 - 1) + qi(1), "nu={nu} r={r} s={s}");
        let v = center_split_check(5, nu, r, s, case, 17, true, 16).unwrap();
        assert_eq!(v.kind, SplitKind::SplitsWithConductor(3), "nu={nu} r={r} s={s}");
        let w = center_split_check(5, nu, r, s, case, 17, false, 16).unwrap();
        assert_eq!(w.kind, SplitKind::ObstructedByConditionII, "nu={nu} r={r} s={s}");
    }
}

#[test]
fn centre_constraint_matches_explicit_difference() {
    // a = 1 - (beta / (alpha - c))^2, a0 - a = beta^2 (2 c alpha - c^2) / (alpha^2 (alpha - c)^2)
    for (alpha, beta, p) in [(3i64, 1i64, 5u64), (6, 2, 7), (2, 15, 5), (4, 3, 11)] {
        for k in 1..6i64 {
            for u in [1i64, 2, 3, 4, 6] {
                let c = qi(u) * Rational::from_integer((p as i64).pow(k as u32).into());
                let (a0, guaranteed) = center_from_constraint(&qi(alpha), &qi(beta), &qi(k), p).unwrap();
                let b = qi(beta);
                let al = qi(alpha);
                let a = Rational::one() - (&b / (&al - &c)) * (&b / (&al - &c));
                let explicit = &b * &b * (qi(2) * &c * &al - &c * &c) / (&al * &al * (&al - &c) * (&al - &c));
                assert_eq!(&a0 - &a, explicit);
                assert_eq!(vp(&explicit, p).unwrap(), guaranteed);
            }
        }
    }
}

#[test]
fn catalog_shapes() {
    for p in [5u64, 7, 11] {
        assert!(insep_tail_catalog(p, 1, TailCase::Generic, None).unwrap().is_empty());
        for nu in 2..=4u32 {
            for v in 1..nu {
                let c0 = insep_tail_catalog(p, nu, TailCase::AZero, Some(&qi(v as i64))).unwrap();
                let expected = if p == 5 && v < nu - 1 { 2 } else { 1 };
                assert_eq!(c0.len(), expected);
                assert_eq!(c0[0].j, nu - v);
                let c1 = insep_tail_catalog(p, nu, TailCase::AOne, Some(&qi(v as i64))).unwrap();
                assert_eq!(c1.len(), usize::from(p == 5 && v < nu - 1));
                for d in c0.iter().chain(c1.iter()) {
                    assert_eq!(d.sigma, qi(2));
                    assert!(d.j <= d.j_bound);
                    let extra = match d.case {
                        TailCase::AOne => qi(2 * v as i64),
                        _ => qi(v as i64),
                    };
                    let bound = newinsep_radius_bound(p, nu, d.j, d.case, Some(&extra));
                    assert!(d.radius_valuation > bound, "{d:?}");
                }
            }
            assert!(matches!(
                insep_tail_catalog(p, nu, TailCase::AZero, Some(&qi(nu as i64))),
                Err(TorsorError::InadmissibleValuation(_))
            ));
        }
    }
}

#[test]
fn inseparable_case_one_conductor_two() {
    for p in [5u64, 7, 11] {
        for nu in 2..=3u32 {
            for v in 1..nu {
                let (r, s) = pick(p, nu, TailCase::AZero, v).unwrap();
                for sign in [1i8, -1] {
                    let c = insep_split_check(p, nu, r, s, 1, sign, InsepCentre::Displayed, 3 * p as usize + 2, 10).unwrap();
                    assert_eq!(c.verdict.kind, SplitKind::SplitsWithConductor(2), "p={p} nu={nu} r={r} s={s}");
                    assert_eq!(c.verdict.evidence.valuations[1], ValBound::Exact(qi(v as i64) + q(1, p as i64 - 1)));
                }
            }
        }
    }
}

#[test]
fn inseparable_p5_cases_at_solved_centres() {
    for (nu, r, s, item) in [(3u32, 1i64, 4i64, 2u8), (3, 2, 33, 2), (4, 1, 24, 2), (3, 2, 5, 3), (3, 1, 35, 3), (4, 3, 25, 3)] {
        for sign in [1i8, -1] {
            let solved = insep_split_check(5, nu, r, s, item, sign, InsepCentre::Solved, 17, 12).unwrap();
            assert_eq!(solved.verdict.kind, SplitKind::SplitsWithConductor(2), "nu={nu} r={r} s={s} item={item}");
            let shown = insep_split_check(5, nu, r, s, item, sign, InsepCentre::Displayed, 17, 12).unwrap();
            assert_eq!(shown.verdict.kind, SplitKind::ObstructedByConditionII, "nu={nu} r={r} s={s} item={item}");
        }
        let eps = insep_expansion_epsilon(nu, r, s, item, 1, InsepCentre::Solved, 17, 12).unwrap();
        assert_eq!(eps, q(1, 40));
    }
}

#[test]
fn displayed_forms_are_exact() {
    for (r, s) in [(1i64, 4i64), (2, 3), (2, 23), (1, 124)] {
        for sign in [1i8, -1] {
            assert!(insep_identity_item2(r, s, sign).is_zero());
        }
    }
    for (r, s, v) in [(2i64, 5i64, 1i64), (1, 35, 1), (3, 25, 2)] {
        for sign in [1i8, -1] {
            let (res, expected) = insep_residual_item3(r, s, sign);
            assert_eq!(res, expected);
            // with v(e'') = v + 17/40 the residual times e''^5 has valuation v + 25/8
            let shifted = vp(&res, 5).unwrap().expect_finite() + qi(5) * (qi(v) + q(17, 40));
            assert_eq!(shifted, qi(v) + q(25, 8));
        }
    }
}

#[test]
fn rescaled_t_coefficient_case_three() {
    // p = 5, a = 1 - 25/r^2, d = 2 * 5^{7/5} / r, v(e'') = 1 + 17/40
    let ctx = LocalFieldContext::new(5, 40, 12).unwrap();
    for r in [2i64, 3, 7] {
        let s = 5i64;
        let d = LocalFieldElement::pi_pow(&ctx, 56).mul_rational(&q(2, r));
        let e = LocalFieldElement::pi_pow(&ctx, 57);
        let beta = LocalFieldElement::from_rational(&ctx, &q(-s, r));
        let g = g_at(&beta, r, s, &d, &e, 6, 5).unwrap();
        let sign = if (r + s) % 2 == 0 { 1 } else { -1 };
        let d2e = d.try_mul(&d).unwrap().try_mul(&e).unwrap();
        let (rq, sq) = (qi(r), qi(s));
        let corrected = qi(sign) * qi(2) * &rq * (Rational::one() - &rq * &rq / (&sq * &sq));
        let displayed = qi(sign) * qi(-8) * &rq * &rq * &rq / (&sq * &sq);
        let bound = qi(1) + q(5, 4);
        let diff = g.coeff(1).try_sub(&d2e.mul_rational(&corrected)).unwrap();
        assert!(diff.c_val(5).certainly_gt(&bound));
        let off = g.coeff(1).try_sub(&d2e.mul_rational(&displayed)).unwrap();
        assert_eq!(off.c_val(5), ValBound::Exact(qi(1) + q(49, 40)));
    }
}

#[test]
fn radius_formulas() {
    assert_eq!(tail_radius(7, 2, TailCase::Generic, None).unwrap(), (q(13, 9), q(13, 18)));
    let (rho, e) = tail_radius(5, 2, TailCase::AZero, Some(&qi(1))).unwrap();
    assert_eq!((rho, e), (q(11, 6), q(5, 12)));
    let (rho, e) = tail_radius(5, 3, TailCase::AOne, Some(&qi(2))).unwrap();
    assert_eq!(rho, q(2, 3) * (qi(3) + q(1, 4) + qi(2)));
    assert_eq!(e, q(1, 3) * (qi(3) + q(1, 4) + qi(2)));
    assert!(tail_radius(5, 2, TailCase::AZero, None).is_err());
}
