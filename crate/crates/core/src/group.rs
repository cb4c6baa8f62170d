//! `SL2(F_q)` arithmetic: element orders, the trace system for the
//! three-point generators, generation checks and Sylow data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::valuation::is_prime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("q = {0} must be an odd prime below 65536")]
    BadField(u64),
    #[error("matrix does not have determinant 1")]
    NotSpecial,
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("resource limit: closure needs {required} elements, budget is {budget}")]
    ResourceLimit { required: u64, budget: u64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Element `[[a, b], [c, d]]` of `SL2(F_q)`, entries reduced to `0..q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mat {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sl2 {
    pub q: u32,
}

impl Sl2 {
    pub fn new(q: u64) -> Result<Self, GroupError> {
        if !(3..1 << 16).contains(&q) || !is_prime(q) {
            return Err(GroupError::BadField(q));
        }
        Ok(Sl2 { q: q as u32 })
    }

    /// `q (q^2 - 1)`.
    pub fn order(&self) -> u64 {
        let q = self.q as u64;
        q * (q * q - 1)
    }

    fn red(&self, x: i64) -> u32 {
        x.rem_euclid(self.q as i64) as u32
    }

    pub fn mat(&self, a: i64, b: i64, c: i64, d: i64) -> Result<Mat, GroupError> {
        let m = Mat { a: self.red(a), b: self.red(b), c: self.red(c), d: self.red(d) };
        if self.det(&m) != 1 {
            return Err(GroupError::NotSpecial);
        }
        Ok(m)
    }

    pub fn det(&self, m: &Mat) -> u32 {
        let q = self.q as u64;
        let ad = m.a as u64 * m.d as u64 % q;
        let bc = m.b as u64 * m.c as u64 % q;
        ((ad + q - bc) % q) as u32
    }

    pub fn identity(&self) -> Mat {
        Mat { a: 1, b: 0, c: 0, d: 1 }
    }

    pub fn minus_identity(&self) -> Mat {
        Mat { a: self.q - 1, b: 0, c: 0, d: self.q - 1 }
    }

    pub fn mul(&self, x: &Mat, y: &Mat) -> Mat {
        let q = self.q as u64;
        let f = |p: u32, r: u32, s: u32, t: u32| ((p as u64 * r as u64 + s as u64 * t as u64) % q) as u32;
        Mat { a: f(x.a, y.a, x.b, y.c), b: f(x.a, y.b, x.b, y.d), c: f(x.c, y.a, x.d, y.c), d: f(x.c, y.b, x.d, y.d) }
    }

    pub fn inv(&self, m: &Mat) -> Mat {
        let n = |x: u32| (self.q - x) % self.q;
        Mat { a: m.d, b: n(m.b), c: n(m.c), d: m.a }
    }

    pub fn pow(&self, m: &Mat, mut e: u64) -> Mat {
        let mut base = *m;
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn trace(&self, m: &Mat) -> u32 {
        (m.a + m.d) % self.q
    }

    pub fn inverse_mod(&self, x: u32) -> Option<u32> {
        if x.is_multiple_of(self.q) {
            return None;
        }
        let q = self.q as u64;
        let mut acc = 1u64;
        let mut base = x as u64 % q;
        let mut e = q - 2;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % q;
            }
            base = base * base % q;
            e >>= 1;
        }
        Some(acc as u32)
    }

    /// Multiplicative order; at most `2(q+1)` or `2q` for `SL2(q)`.
    pub fn element_order(&self, m: &Mat) -> u64 {
        let id = self.identity();
        let mut x = *m;
        let mut k = 1u64;
        while x != id {
            x = self.mul(&x, m);
            k += 1;
        }
        k
    }

    /// Dense index in `0..|SL2(q)|`: `c != 0` determines `b` from `(a, c, d)`,
    /// `c = 0` forces `d = a^{-1}`.
    pub fn index(&self, m: &Mat) -> u64 {
        let q = self.q as u64;
        if m.c != 0 {
            ((m.c as u64 - 1) * q + m.a as u64) * q + m.d as u64
        } else {
            (q - 1) * q * q + (m.a as u64 - 1) * q + m.b as u64
        }
    }

    /// Order of the class of `[[0, -1], [1, t]]`; elements with trace
    /// `t != +-2` have this order.
    pub fn order_of_trace(&self, t: u32) -> u64 {
        let m = Mat { a: 0, b: self.q - 1, c: 1, d: t % self.q };
        self.element_order(&m)
    }

    /// Every element, in index order.
    pub fn elements(&self) -> Vec<Mat> {
        let q = self.q;
        let mut out = Vec::with_capacity(self.order() as usize);
        for c in 1..q {
            let ci = self.inverse_mod(c).unwrap() as u64;
            for a in 0..q {
                for d in 0..q {
                    let ad1 = (a as u64 * d as u64 + q as u64 - 1) % q as u64;
                    out.push(Mat { a, b: (ad1 * ci % q as u64) as u32, c, d });
                }
            }
        }
        for a in 1..q {
            let d = self.inverse_mod(a).unwrap();
            for b in 0..q {
                out.push(Mat { a, b, c: 0, d });
            }
        }
        out
    }
}

/// `alpha = [[1, 1], [0, 1]]`.
pub fn alpha(_g: &Sl2) -> Mat {
    Mat { a: 1, b: 1, c: 0, d: 1 }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSolution {
    pub q: u32,
    pub tau: u32,
    pub rho: u32,
    pub alpha: Mat,
    pub beta: Mat,
    pub alpha_beta: Mat,
    pub orders: [u64; 3],
}

/// Solves `a + d = tau`, `a + c + d = rho`, `ad - bc = 1` with `a = 0`,
/// `c = rho - tau`, `b = -1/c`, `d = tau`.
pub fn solve_trace_system(g: &Sl2, tau: u32, rho: u32) -> Result<TraceSolution, GroupError> {
    let q = g.q;
    let (tau, rho) = (tau % q, rho % q);
    let vals = [tau, rho, 2, q - 2];
    for i in 0..4 {
        for j in i + 1..4 {
            if vals[i] == vals[j] {
                return Err(GroupError::NoSolution("tau, rho, 2, -2 must be pairwise distinct".into()));
            }
        }
    }
    let c = (rho + q - tau) % q;
    let ci = g.inverse_mod(c).ok_or_else(|| GroupError::NoSolution("c = 0".into()))?;
    let beta = Mat { a: 0, b: (q - ci) % q, c, d: tau };
    debug_assert_eq!(g.det(&beta), 1);
    let a = alpha(g);
    let ab = g.mul(&a, &beta);
    let orders = [g.element_order(&a), g.element_order(&beta), g.element_order(&ab)];
    Ok(TraceSolution { q, tau, rho, alpha: a, beta, alpha_beta: ab, orders })
}

/// Smallest traces `(tau, rho)` whose classes have the requested orders.
pub fn find_traces(g: &Sl2, beta_order: u64, product_order: u64) -> Result<(u32, u32), GroupError> {
    let q = g.q;
    let pick = |ord: u64, skip: Option<u32>| {
        (0..q).find(|&t| t != 2 && t != q - 2 && Some(t) != skip && g.order_of_trace(t) == ord)
    };
    let tau = pick(beta_order, None).ok_or_else(|| GroupError::NoSolution(format!("no trace of order {beta_order}")))?;
    let rho = pick(product_order, Some(tau)).ok_or_else(|| GroupError::NoSolution(format!("no trace of order {product_order}")))?;
    Ok((tau, rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "order", rename_all = "snake_case")]
pub enum Generation {
    Generates,
    ProperSubgroup(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    Criterion,
    Bfs,
}

impl std::str::FromStr for GenMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "criterion" => Ok(GenMode::Criterion),
            "bfs" => Ok(GenMode::Bfs),
            _ => Err(format!("unknown mode {s:?} (criterion|bfs)")),
        }
    }
}

/// Default BFS budget in group elements.
pub const DEFAULT_BFS_BUDGET: u64 = 1 << 28;

/// Size of the subgroup generated by `gens`, by breadth-first closure with a
/// bitset over the dense index.
pub fn closure_size(g: &Sl2, gens: &[Mat], budget: u64) -> Result<u64, GroupError> {
    for m in gens {
        if g.det(m) != 1 {
            return Err(GroupError::NotSpecial);
        }
    }
    let total = g.order();
    if total > budget {
        return Err(GroupError::ResourceLimit { required: total, budget });
    }
    let mut seen = vec![0u64; (total as usize).div_ceil(64)];
    let mut mark = |m: &Mat| {
        let i = g.index(m) as usize;
        let (w, b) = (i / 64, 1u64 << (i % 64));
        let fresh = seen[w] & b == 0;
        seen[w] |= b;
        fresh
    };
    let id = g.identity();
    mark(&id);
    let mut queue = vec![id];
    let mut head = 0;
    while head < queue.len() {
        let x = queue[head];
        head += 1;
        for s in gens {
            let y = g.mul(&x, s);
            if mark(&y) {
                queue.push(y);
            }
        }
    }
    Ok(queue.len() as u64)
}

fn cyclic(g: &Sl2, m: &Mat) -> Vec<Mat> {
    let mut out = vec![g.identity()];
    let mut x = *m;
    while x != g.identity() {
        out.push(x);
        x = g.mul(&x, m);
    }
    out
}

/// Generation test. `Bfs` computes the closure exactly. `Criterion` needs a
/// generator `u` of order `q`: a subgroup containing `u` either normalizes
/// `<u>` or maps onto `PSL2(q)`; in the second case `-I` in the subgroup
/// forces all of `SL2(q)`.
pub fn generation_check(g: &Sl2, gens: &[Mat], mode: GenMode, budget: u64) -> Result<Generation, GroupError> {
    let verdict = |size: u64| if size == g.order() { Generation::Generates } else { Generation::ProperSubgroup(size) };
    match mode {
        GenMode::Bfs => closure_size(g, gens, budget).map(verdict),
        GenMode::Criterion => {
            for m in gens {
                if g.det(m) != 1 {
                    return Err(GroupError::NotSpecial);
                }
            }
            let q = g.q as u64;
            let u = gens
                .iter()
                .find(|m| g.element_order(m) == q)
                .ok_or_else(|| GroupError::Unsupported("criterion mode needs a generator of order q".into()))?;
            let su = cyclic(g, u);
            let normalizes = |x: &Mat| su.contains(&g.mul(&g.mul(x, u), &g.inv(x)));
            if gens.iter().all(normalizes) {
                // Inside the normalizer of <u>, of order q(q-1).
                return small_closure(g, gens).map(verdict);
            }
            let minus = g.minus_identity();
            if gens.iter().any(|m| g.element_order(m).is_multiple_of(2) && g.pow(m, g.element_order(m) / 2) == minus) {
                Ok(Generation::Generates)
            } else {
                small_closure(g, gens).map(verdict)
            }
        }
    }
}

fn small_closure(g: &Sl2, gens: &[Mat]) -> Result<u64, GroupError> {
    let mut seen = std::collections::HashSet::new();
    let id = g.identity();
    seen.insert(id);
    let mut queue = vec![id];
    let mut head = 0;
    while head < queue.len() {
        let x = queue[head];
        head += 1;
        for s in gens {
            let y = g.mul(&x, s);
            if seen.insert(y) {
                queue.push(y);
                if queue.len() as u64 > DEFAULT_BFS_BUDGET {
                    return Err(GroupError::ResourceLimit { required: g.order(), budget: DEFAULT_BFS_BUDGET });
                }
            }
        }
    }
    Ok(queue.len() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SylowData {
    pub order: u64,
    pub cyclic: bool,
    pub m_g: u64,
}

fn p_part(mut n: u64, p: u64) -> u64 {
    let mut out = 1;
    while n.is_multiple_of(p) {
        n /= p;
        out *= p;
    }
    out
}

/// `p`-Sylow of `SL2(q)` (equivalently `PSL2(q)`) for odd `p | q^2 - 1`:
/// it sits in a cyclic torus of order `q -+ 1`, whose normalizer has index 2
/// over the centralizer.
pub fn sylow_data(q: u64, p: u64) -> Result<SylowData, GroupError> {
    Sl2::new(q)?;
    if p == 2 {
        return Err(GroupError::Unsupported("p = 2".into()));
    }
    if !is_prime(p) || q.is_multiple_of(p) || !(q * q - 1).is_multiple_of(p) {
        return Err(GroupError::Unsupported(format!("need an odd prime p dividing q^2 - 1, got p = {p}")));
    }
    Ok(SylowData { order: p_part(q * q - 1, p), cyclic: true, m_g: 2 })
}

/// Exhaustive version of [`sylow_data`] over all of `SL2(q)`; only for small `q`.
pub fn sylow_data_bruteforce(q: u64, p: u64) -> Result<SylowData, GroupError> {
    let g = Sl2::new(q)?;
    if g.order() > 200_000 {
        return Err(GroupError::ResourceLimit { required: g.order(), budget: 200_000 });
    }
    if p == 2 || !is_prime(p) || g.order() % p != 0 {
        return Err(GroupError::Unsupported(format!("p = {p}")));
    }
    let elems = g.elements();
    let order = p_part(g.order(), p);
    let x = elems
        .iter()
        .copied()
        .max_by_key(|m| p_part(g.element_order(m), p))
        .expect("nonempty group");
    let exponent = p_part(g.element_order(&x), p);
    let x = g.pow(&x, g.element_order(&x) / exponent);
    let px = cyclic(&g, &x);
    let mut central = 0u64;
    let mut normal = 0u64;
    for m in &elems {
        let conj = g.mul(&g.mul(m, &x), &g.inv(m));
        if conj == x {
            central += 1;
        }
        if px.contains(&conj) {
            normal += 1;
        }
    }
    Ok(SylowData { order, cyclic: exponent == order, m_g: normal / central })
}
