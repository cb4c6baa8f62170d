//! Randomized property suites shared by the core property tests and the
//! acceptance run. Each suite runs `CASES` cases from a fixed seed and
//! returns the first counterexample as an error string.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use srt_core::filtration::{compositum_conductor, Break, Filtration};
use srt_core::graph::{effective_weights, propagate_differents, Edge, ReductionTree, TailKind, Vertex};
use srt_core::local_field::{hensel_sqrt, pnth_root_binomial, LocalFieldContext, LocalFieldElement};
use srt_core::valuation::{binomial, factorial, multinomial, q, qi, vp, ExtendedRational, Rational};

pub const CASES: u32 = 256;

pub const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

fn runner() -> TestRunner {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner().run(&s, f).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(PRIMES.to_vec())
}

fn nonzero_rational() -> impl Strategy<Value = Rational> {
    (-1_000_000i64..1_000_000, 1i64..1_000_000).prop_filter_map("nonzero", |(n, d)| (n != 0).then(|| q(n, d)))
}

fn val(x: &Rational, p: u64) -> ExtendedRational {
    vp(x, p).expect("p is prime")
}

/// Ultrametric inequality, equality off the diagonal, multiplicativity.
pub fn valuation_axioms() -> Result<(), String> {
    run((nonzero_rational(), nonzero_rational(), prime()), |(x, y, p)| {
        let (vx, vy) = (val(&x, p), val(&y, p));
        let vs = val(&(&x + &y), p);
        let m = vx.clone().min(vy.clone());
        ensure(vs >= m, || format!("v(x+y) < min at {x} {y} p={p}"))?;
        if vx != vy {
            ensure(vs == m, || format!("v(x+y) != min at {x} {y} p={p}"))?;
        }
        let prod = val(&(&x * &y), p).expect_finite();
        ensure(prod == vx.expect_finite() + vy.expect_finite(), || format!("v(xy) at {x} {y} p={p}"))
    })
}

fn composition(q: u64, k: usize) -> impl Strategy<Value = Vec<u64>> {
    let cuts = (k - 1).min(q as usize - 1);
    prop::sample::subsequence((1..q).collect::<Vec<_>>(), cuts).prop_map(move |cuts| {
        let mut parts = Vec::with_capacity(cuts.len() + 1);
        let mut prev = 0;
        for c in cuts.into_iter().chain(std::iter::once(q)) {
            parts.push(c - prev);
            prev = c;
        }
        parts
    })
}

/// `v_p(q! / prod r_i!) >= v_p(q) - min_i v_p(r_i)`, with the multinomial
/// checked against the factorial quotient.
pub fn binom_coeffs() -> Result<(), String> {
    let s = (2u64..=200, 2usize..=4, prime()).prop_flat_map(|(q, k, p)| (Just(q), composition(q, k), Just(p)));
    run(s, |(q, parts, p)| {
        let m = multinomial(q, &parts).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let oracle = parts.iter().fold(factorial(q), |acc, &r| acc / factorial(r));
        ensure(m == oracle, || format!("multinomial({q}, {parts:?})"))?;
        let vm = val(&Rational::from_integer(BigInt::from(m)), p).expect_finite();
        let vq = val(&qi(q as i64), p).expect_finite();
        let vmin = parts.iter().map(|&r| val(&qi(r as i64), p).expect_finite()).min().unwrap();
        ensure(vm >= &vq - &vmin, || format!("bound fails at q={q} parts={parts:?} p={p}"))
    })
}

/// `binom(p^n, p) = p^{n-1} mod p^n`.
pub fn binom_congruence() -> Result<(), String> {
    if binomial(25, 5) != 53130u32.into() {
        return Err("binom(25, 5) != 53130".into());
    }
    run((prime(), 1u32..=5), |(p, n)| {
        let pn = BigInt::from(p).pow(n);
        let b = BigInt::from(binomial(p.pow(n), p));
        let expected = BigInt::from(p).pow(n - 1) % &pn;
        ensure(b % &pn == expected, || format!("p={p} n={n}"))
    })
}

/// `pnth_root_binomial(x, a)^(p^a) = x` to the root's precision.
pub fn pnth_root_round_trip() -> Result<(), String> {
    let pa = prop::sample::select(vec![(5u64, 1u32), (5, 2), (7, 1), (7, 2)]);
    let s = (pa, prop::sample::select(vec![1u32, 2, 4]), 0i64..4, 1i64..10_000, 1i64..10_000);
    run(s, |((p, a), n, j, num, den)| {
        let ctx = LocalFieldContext::new(p, n, 10).unwrap();
        let pi = p as i64;
        if num % pi == 0 || den % pi == 0 {
            return Ok(());
        }
        let shift = n as i64 * (a as i64 + 1) + j;
        let one = LocalFieldElement::one(&ctx);
        let x = &one + &LocalFieldElement::from_rational(&ctx, &q(num, den)).shift(shift);
        let y = pnth_root_binomial(&x, a).map_err(|e| TestCaseError::fail(e.to_string()))?;
        ensure(y.prec() > shift, || format!("root precision {} too small", y.prec()))?;
        ensure(y.pow(p.pow(a)).congruent(&x, y.prec()), || format!("p={p} a={a} N={n} x={}", x.pretty()))
    })
}

/// `hensel_sqrt(u)^2 = u mod p^M` for quadratic residues `u`.
pub fn hensel_round_trip() -> Result<(), String> {
    let s = (prop::sample::select(vec![3u64, 5, 7, 11, 13]), 1u32..=6, 1i64..10_000, -10_000i64..10_000);
    run(s, |(p, m, k, t)| {
        let pi = p as i64;
        if k % pi == 0 {
            return Ok(());
        }
        let u = BigInt::from(k * k + pi * t);
        let r = hensel_sqrt(&u, p, m).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let pm = BigInt::from(p).pow(m);
        let diff = (&r * &r - &u) % &pm;
        ensure(diff.is_zero(), || format!("p={p} M={m} u={u} r={r}"))
    })
}

/// Random filtration: decreasing orders dividing each other, increasing jumps.
pub fn filtration() -> impl Strategy<Value = Filtration> {
    let step = (1i64..12, 1i64..5, prop::sample::select(vec![1u64, 2, 3, 5]));
    prop::collection::vec(step, 1..5).prop_map(|steps| {
        let total: u64 = steps.iter().map(|s| s.2).product::<u64>() * 2;
        let mut order = total;
        let mut jump = Rational::zero();
        let mut breaks = Vec::new();
        for (i, (num, den, f)) in steps.iter().enumerate() {
            if i > 0 {
                jump += q(*num, *den);
            }
            order /= if i == 0 { 1 } else { *f };
            breaks.push(Break { jump: jump.clone(), order });
        }
        Filtration::new(breaks, total).expect("valid filtration")
    })
}

fn nonneg_rational() -> impl Strategy<Value = Rational> {
    (0i64..5_000, 1i64..60).prop_map(|(n, d)| q(n, d))
}

/// `phi(psi(x)) = x = psi(phi(x))`.
pub fn herbrand_inverse() -> Result<(), String> {
    run((filtration(), nonneg_rational()), |(f, x)| {
        let a = f.phi(&f.psi(&x).unwrap()).unwrap();
        let b = f.psi(&f.phi(&x).unwrap()).unwrap();
        ensure(a == x && b == x, || format!("{f:?} at {x}"))
    })
}

/// Idempotent, commutative and monotone.
pub fn compositum_algebra() -> Result<(), String> {
    let list = prop::collection::vec(nonneg_rational(), 1..8);
    run((list, nonneg_rational(), any::<prop::sample::Index>()), |(xs, extra, idx)| {
        let c = compositum_conductor(&xs).unwrap();
        let doubled: Vec<Rational> = xs.iter().chain(xs.iter()).cloned().collect();
        ensure(compositum_conductor(&doubled).unwrap() == c, || "not idempotent".into())?;
        let mut rotated = xs.clone();
        rotated.rotate_left(idx.index(xs.len()));
        rotated.reverse();
        ensure(compositum_conductor(&rotated).unwrap() == c, || "not commutative".into())?;
        let mut grown = xs.clone();
        grown.push(extra.clone());
        let g = compositum_conductor(&grown).unwrap();
        ensure(g >= c && g >= extra, || "not monotone".into())?;
        ensure(compositum_conductor(std::slice::from_ref(&c)).unwrap() == c, || "singleton".into())
    })
}

/// The weights of the effective invariant sum to 1.
pub fn weight_sum() -> Result<(), String> {
    run((1usize..=10, prime()), |(r, p)| {
        let w = effective_weights(r, p);
        let s: Rational = w.iter().sum();
        ensure(w.len() == r && s.is_one(), || format!("r={r} p={p}: sum {s}"))
    })
}

/// A labelled tree whose differents decrease strictly outward, with
/// `delta = 0` on etale tails; only the root different is given.
pub fn labelled_tree() -> impl Strategy<Value = (ReductionTree, Vec<Rational>)> {
    let inner = prop::collection::vec((any::<prop::sample::Index>(), 0u32..3, 1i64..20), 0..6);
    let tails = prop::collection::vec((any::<prop::sample::Index>(), any::<bool>(), 1i64..6, 1i64..20), 0..6);
    (1u32..4, 1i64..40, inner, tails).prop_map(|(root_inertia, root_delta, inner, tails)| {
        // vertex data: (parent, inertia, delta)
        let mut data: Vec<(Option<usize>, u32, Rational)> = vec![(None, root_inertia, q(root_delta, 2))];
        for (idx, drop, frac) in inner {
            let par = idx.index(data.len());
            let inertia = data[par].1.saturating_sub(drop).max(1);
            let delta = &data[par].2 * q(frac, 21);
            data.push((Some(par), inertia, delta));
        }
        let internal = data.len();
        let mut has_child = vec![false; internal];
        for &(par, ..) in &data[1..] {
            has_child[par.unwrap()] = true;
        }
        let mut tail_specs: Vec<(usize, bool, i64, i64)> =
            tails.into_iter().map(|(idx, etale, sg, frac)| (idx.index(internal), etale, sg, frac)).collect();
        for (i, hc) in has_child.iter().enumerate() {
            if !hc && !tail_specs.iter().any(|t| t.0 == i) {
                tail_specs.push((i, true, 3, 1));
            }
        }
        let mut vertices: Vec<Vertex> = data
            .iter()
            .enumerate()
            .map(|(i, (_, inertia, _))| {
                let mut v = Vertex::new(&format!("V{i}"), *inertia, TailKind::None);
                if i == 0 {
                    v.delta = Some(data[0].2.clone());
                }
                v
            })
            .collect();
        let mut deltas: Vec<Rational> = data.iter().map(|d| d.2.clone()).collect();
        let mut edges: Vec<Edge> = Vec::new();
        for (i, (par, _, delta)) in data.iter().enumerate().skip(1) {
            let par = par.unwrap();
            let diff = &data[par].2 - delta;
            let mut e = Edge::new(&format!("V{par}"), &format!("V{i}"));
            let eps = &diff / qi(1 + (i as i64 % 3));
            e.sigma_eff = Some(&diff / &eps);
            e.epaisseur = Some(eps);
            edges.push(e);
        }
        for (k, (par, etale, sg, frac)) in tail_specs.into_iter().enumerate() {
            let (inertia, kind, delta) = if etale || data[par].1 == 1 {
                (0, TailKind::NewEtale, Rational::zero())
            } else {
                (data[par].1 - 1, TailKind::NewInseparable, &data[par].2 * q(frac, 21))
            };
            let sigma = q(sg, 2) + if kind == TailKind::NewEtale { qi(1) } else { Rational::zero() };
            let id = format!("T{k}");
            let mut v = Vertex::new(&id, inertia, kind);
            v.sigma = Some(sigma.clone());
            vertices.push(v);
            let mut e = Edge::new(&format!("V{par}"), &id);
            e.epaisseur = Some((&data[par].2 - &delta) / &sigma);
            e.sigma_eff = Some(sigma);
            edges.push(e);
            deltas.push(delta);
        }
        (ReductionTree::new(vertices, edges).expect("generator builds valid trees"), deltas)
    })
}

/// Solved differents match the construction and never increase outward.
pub fn delta_monotonicity() -> Result<(), String> {
    run(labelled_tree(), |(tree, deltas)| {
        let sol = propagate_differents(&tree, 5, None).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for (v, d) in sol.tree.vertices.iter().zip(&deltas) {
            ensure(v.delta.as_ref() == Some(d), || format!("delta({}) = {:?}, built {d}", v.id, v.delta))?;
        }
        for e in &sol.tree.edges {
            let top = sol.tree.vertex(&e.parent).unwrap().delta.clone().unwrap();
            let bottom = sol.tree.vertex(&e.child).unwrap().delta.clone().unwrap();
            ensure(top >= bottom, || format!("delta increases on {}->{}", e.parent, e.child))?;
        }
        Ok(())
    })
}

/// The nine suites in a fixed order.
pub type Suite = fn() -> Result<(), String>;

pub fn all() -> Vec<(&'static str, Suite)> {
    vec![
        ("valuation axioms", valuation_axioms),
        ("multinomial valuation bound", binom_coeffs),
        ("binom(p^n, p) = p^(n-1) mod p^n", binom_congruence),
        ("p^a-th root round trip", pnth_root_round_trip),
        ("Hensel square-root round trip", hensel_round_trip),
        ("Herbrand phi/psi inverse", herbrand_inverse),
        ("compositum conductor algebra", compositum_algebra),
        ("effective invariant weight sum", weight_sum),
        ("effective different monotonicity", delta_monotonicity),
    ]
}

/// Independent search for tail invariants with `m_G = 2`: multisets of
/// primitive `sigma` in `{1/2, 1, ..., 2p}` and new `sigma` in `{3/2, ..., 2p}`,
/// at most two etale tails, satisfying `sum_new (sigma - 1) + sum_prim sigma = 1`.
/// Returned as sorted `(prim, new)` pairs.
pub fn brute_force_tail_configs(tau: usize, p: u64) -> Vec<(Vec<Rational>, Vec<Rational>)> {
    let top = 4 * p as i64;
    let halves: Vec<Rational> = (1..=top).map(|k| q(k, 2)).collect();
    fn multisets(pool: &[Rational], k: usize, from: usize, cur: &mut Vec<Rational>, out: &mut Vec<Vec<Rational>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in from..pool.len() {
            cur.push(pool[i].clone());
            multisets(pool, k, i, cur, out);
            cur.pop();
        }
    }
    let new_pool: Vec<Rational> = halves.iter().filter(|s| **s > qi(1)).cloned().collect();
    let mut out = Vec::new();
    for k in 0..=2usize.saturating_sub(tau) {
        if tau + k > 2 {
            break;
        }
        let (mut prims, mut news) = (Vec::new(), Vec::new());
        multisets(&halves, tau, 0, &mut Vec::new(), &mut prims);
        multisets(&new_pool, k, 0, &mut Vec::new(), &mut news);
        for pr in &prims {
            for nw in &news {
                let total: Rational = pr.iter().sum::<Rational>() + nw.iter().map(|s| s - qi(1)).sum::<Rational>();
                if total.is_one() {
                    out.push((pr.clone(), nw.clone()));
                }
            }
        }
    }
    out.sort();
    out
}
