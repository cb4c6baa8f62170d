//! Reduction trees: dual graphs of the stable reduction with inertia labels,
//! tails, branch-point specializations and edge thicknesses, plus the numeric
//! laws relating effective differents, effective invariants and thicknesses.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::torsor::TailCase;
use crate::valuation::{fmt_rational, opt_rational_str, q, qi, vec_rational_str, rational_str, Rational};

/// Hard cap on tree size accepted from JSON.
pub const MAX_VERTICES: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("contradiction on edges {edges:?}: {detail}")]
    Contradiction { edges: Vec<String>, detail: String },
    #[error("underdetermined: {0:?}")]
    Unsolved(Vec<String>),
    #[error("missing label: {0}")]
    MissingLabel(String),
    #[error("invalid deformation profile: {0}")]
    InvalidProfile(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    Primitive,
    NewEtale,
    NewInseparable,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub id: String,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub inertia: u32,
    #[serde(default)]
    pub tail: TailKind,
    #[serde(default)]
    pub branch_points: Vec<BranchPoint>,
    /// Effective ramification invariant `sigma_b` of a tail.
    #[serde(default, with = "opt_rational_str", skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Rational>,
    /// Effective different.
    #[serde(default, with = "opt_rational_str", skip_serializing_if = "Option::is_none")]
    pub delta: Option<Rational>,
}

impl Vertex {
    pub fn new(id: &str, inertia: u32, tail: TailKind) -> Self {
        Vertex { id: id.to_string(), inertia, tail, branch_points: Vec::new(), sigma: None, delta: None }
    }

    pub fn is_tail(&self) -> bool {
        self.tail != TailKind::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: String,
    pub child: String,
    #[serde(default, with = "opt_rational_str", skip_serializing_if = "Option::is_none")]
    pub epaisseur: Option<Rational>,
    #[serde(default, with = "opt_rational_str", skip_serializing_if = "Option::is_none")]
    pub sigma_eff: Option<Rational>,
}

impl Edge {
    pub fn new(parent: &str, child: &str) -> Self {
        Edge { parent: parent.to_string(), child: child.to_string(), epaisseur: None, sigma_eff: None }
    }

    fn name(&self) -> String {
        format!("{}->{}", self.parent, self.child)
    }
}

/// Rooted tree of components. Construct through [`ReductionTree::new`] or
/// [`ReductionTree::from_json`], both of which validate the structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionTree {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

/// Vertex of the augmented graph: a wild branch point hanging off a component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedVertex {
    pub id: String,
    pub attached_to: String,
    pub index: u64,
}

#[derive(Debug, Clone)]
struct Shape {
    root: usize,
    index: HashMap<String, usize>,
    parent_edge: Vec<Option<usize>>,
    child_edges: Vec<Vec<usize>>,
    edge_ends: Vec<(usize, usize)>,
    /// Vertices in breadth-first order from the root.
    order: Vec<usize>,
}

impl ReductionTree {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let t = ReductionTree { vertices, edges };
        t.shape()?;
        Ok(t)
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let t: ReductionTree = serde_json::from_str(s).map_err(|e| GraphError::Malformed(e.to_string()))?;
        ReductionTree::new(t.vertices, t.edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serializes")
    }

    fn shape(&self) -> Result<Shape, GraphError> {
        let n = self.vertices.len();
        if n == 0 {
            return Err(GraphError::Malformed("no vertices".into()));
        }
        if n > MAX_VERTICES {
            return Err(GraphError::Malformed(format!("more than {MAX_VERTICES} vertices")));
        }
        if self.edges.len() != n - 1 {
            return Err(GraphError::Malformed(format!("{} vertices need {} edges, got {}", n, n - 1, self.edges.len())));
        }
        let mut index = HashMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if index.insert(v.id.clone(), i).is_some() {
                return Err(GraphError::Malformed(format!("duplicate vertex id {:?}", v.id)));
            }
        }
        let mut parent_edge = vec![None; n];
        let mut child_edges = vec![Vec::new(); n];
        let mut edge_ends = Vec::with_capacity(n);
        for (k, e) in self.edges.iter().enumerate() {
            let look = |id: &str| index.get(id).copied().ok_or_else(|| GraphError::Malformed(format!("unknown vertex {id:?}")));
            let (a, b) = (look(&e.parent)?, look(&e.child)?);
            if parent_edge[b].is_some() {
                return Err(GraphError::Malformed(format!("vertex {:?} has two parents", e.child)));
            }
            parent_edge[b] = Some(k);
            child_edges[a].push(k);
            edge_ends.push((a, b));
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent_edge[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(GraphError::Malformed(format!("expected one root, found {}", roots.len())));
        }
        let root = roots[0];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &k in &child_edges[v] {
                queue.push_back(edge_ends[k].1);
            }
        }
        if order.len() != n {
            return Err(GraphError::Malformed("graph is not connected to the root".into()));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if i != root && v.inertia == 0 && !v.is_tail() {
                return Err(GraphError::InvalidLabel(format!("etale component {:?} is not a tail", v.id)));
            }
            if v.is_tail() {
                if i == root {
                    return Err(GraphError::InvalidLabel(format!("root {:?} cannot be a tail", v.id)));
                }
                if !child_edges[i].is_empty() {
                    return Err(GraphError::InvalidLabel(format!("tail {:?} has children", v.id)));
                }
                let parent = &self.vertices[edge_ends[parent_edge[i].unwrap()].0];
                if parent.inertia <= v.inertia {
                    return Err(GraphError::InvalidLabel(format!(
                        "tail {:?} (p^{}) hangs off {:?} (p^{})",
                        v.id, v.inertia, parent.id, parent.inertia
                    )));
                }
            }
            let etale_tail = matches!(v.tail, TailKind::Primitive | TailKind::NewEtale);
            if etale_tail && v.inertia != 0 {
                return Err(GraphError::InvalidLabel(format!("etale tail {:?} has inertia p^{}", v.id, v.inertia)));
            }
            if v.tail == TailKind::NewInseparable && v.inertia == 0 {
                return Err(GraphError::InvalidLabel(format!("inseparable tail {:?} has inertia 1", v.id)));
            }
            if let Some(s) = &v.sigma {
                if !s.is_positive() {
                    return Err(GraphError::InvalidLabel(format!("sigma of {:?} must be positive", v.id)));
                }
            }
            if let Some(d) = &v.delta {
                if d.is_negative() || (v.inertia == 0 && !d.is_zero()) {
                    return Err(GraphError::InvalidLabel(format!("bad effective different on {:?}", v.id)));
                }
            }
        }
        for e in &self.edges {
            if let Some(x) = &e.epaisseur {
                if !x.is_positive() {
                    return Err(GraphError::InvalidLabel(format!("epaisseur of {} must be positive", e.name())));
                }
            }
        }
        Ok(Shape { root, index, parent_edge, child_edges, edge_ends, order })
    }

    pub fn root(&self) -> &Vertex {
        let s = self.shape().expect("validated");
        &self.vertices[s.root]
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    /// Checks that each branch point of index `p^a s` (p not dividing s)
    /// lies on a `p^a`-component.
    pub fn check_specializations(&self, p: u64) -> Result<(), GraphError> {
        for v in &self.vertices {
            for b in &v.branch_points {
                if b.index == 0 {
                    return Err(GraphError::InvalidLabel(format!("branch point {:?} has index 0", b.id)));
                }
                let a = vp_u64(b.index, p);
                if a != v.inertia {
                    return Err(GraphError::InvalidLabel(format!(
                        "branch point {:?} of index {} must lie on a p^{} component, found p^{} ({:?})",
                        b.id, b.index, a, v.inertia, v.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Augmented vertices: one per branch point with index divisible by `p`.
    pub fn augmented(&self, p: u64) -> Vec<AugmentedVertex> {
        self.vertices
            .iter()
            .flat_map(|v| {
                v.branch_points.iter().filter(|b| b.index % p == 0).map(|b| AugmentedVertex {
                    id: b.id.clone(),
                    attached_to: v.id.clone(),
                    index: b.index,
                })
            })
            .collect()
    }

    fn subtree(&self, s: &Shape, top: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            out.push(v);
            for &k in &s.child_edges[v] {
                stack.push(s.edge_ends[k].1);
            }
        }
        out
    }

    fn find_edge(&self, s: &Shape, parent: &str, child: &str) -> Result<usize, GraphError> {
        let c = *s.index.get(child).ok_or_else(|| GraphError::Malformed(format!("unknown vertex {child:?}")))?;
        match s.parent_edge[c] {
            Some(k) if self.edges[k].parent == parent => Ok(k),
            _ => Err(GraphError::Malformed(format!("no edge {parent}->{child}"))),
        }
    }
}

fn vp_u64(mut n: u64, p: u64) -> u32 {
    let mut a = 0;
    while n > 0 && n.is_multiple_of(p) {
        n /= p;
        a += 1;
    }
    a
}

/// Per-level deformation data at a marked point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationProfile {
    #[serde(with = "vec_rational_str")]
    pub sigmas: Vec<Rational>,
    #[serde(with = "vec_rational_str")]
    pub deltas: Vec<Rational>,
}

impl DeformationProfile {
    pub fn etale() -> Self {
        DeformationProfile { sigmas: Vec::new(), deltas: Vec::new() }
    }

    pub fn multiplicative(levels: usize) -> Self {
        DeformationProfile { sigmas: Vec::new(), deltas: vec![Rational::one(); levels] }
    }

    /// Levels with `delta_i = 1`.
    pub fn multiplicative_levels(&self) -> Vec<bool> {
        self.deltas.iter().map(|d| d.is_one()).collect()
    }
}

/// `delta^eff = sum_{i<r} delta_i + p/(p-1) delta_r`; zero for etale components.
pub fn effective_different(profile: &DeformationProfile, p: u64) -> Result<Rational, GraphError> {
    if p < 2 {
        return Err(GraphError::InvalidProfile(format!("p = {p}")));
    }
    let Some((last, rest)) = profile.deltas.split_last() else {
        return Ok(Rational::zero());
    };
    for d in &profile.deltas {
        if !d.is_positive() || *d > Rational::one() {
            return Err(GraphError::InvalidProfile(format!("delta {} outside (0, 1]", fmt_rational(d))));
        }
    }
    let pi = p as i64;
    let head: Rational = rest.iter().sum();
    Ok(head + q(pi, pi - 1) * last)
}

/// Weights `(p-1)/p^i` for `i < r` and `1/p^{r-1}` for the last level.
pub fn effective_weights(r: usize, p: u64) -> Vec<Rational> {
    let pb = BigInt::from(p);
    let mut w = Vec::with_capacity(r);
    for i in 1..=r {
        if i < r {
            w.push(Rational::new(&pb - 1, pb.pow(i as u32)));
        } else {
            w.push(Rational::new(BigInt::one(), pb.pow(i as u32 - 1)));
        }
    }
    w
}

/// Weighted average `sigma^eff` of the per-level invariants.
pub fn effective_invariant(sigmas: &[Rational], p: u64) -> Result<Rational, GraphError> {
    if sigmas.is_empty() {
        return Err(GraphError::InvalidProfile("no levels".into()));
    }
    if p < 2 {
        return Err(GraphError::InvalidProfile(format!("p = {p}")));
    }
    Ok(effective_weights(sigmas.len(), p).iter().zip(sigmas).map(|(w, s)| w * s).sum())
}

/// `sigma^eff_e = 1 + sum_{b outward} (sigma_b - 1) - |Pi_e|`, where `Pi_e`
/// counts wild branch points (index divisible by `p`) outward of `e`.
pub fn effective_invariant_from_tails(tree: &ReductionTree, parent: &str, child: &str, p: u64) -> Result<Rational, GraphError> {
    let s = tree.shape()?;
    let k = tree.find_edge(&s, parent, child)?;
    from_tails(tree, &s, k, p)
}

fn from_tails(tree: &ReductionTree, s: &Shape, k: usize, p: u64) -> Result<Rational, GraphError> {
    let mut acc = Rational::one();
    for v in tree.subtree(s, s.edge_ends[k].1) {
        let vx = &tree.vertices[v];
        if vx.is_tail() {
            let sb = vx.sigma.as_ref().ok_or_else(|| GraphError::MissingLabel(format!("sigma of tail {:?}", vx.id)))?;
            acc += sb - Rational::one();
        }
        acc -= qi(vx.branch_points.iter().filter(|b| b.index % p == 0).count() as i64);
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CycleVerdict {
    Holds {
        #[serde(with = "rational_str")]
        value: Rational,
    },
    Violated {
        #[serde(with = "rational_str")]
        lhs: Rational,
        #[serde(with = "rational_str")]
        rhs: Rational,
    },
}

impl CycleVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, CycleVerdict::Holds { .. })
    }
}

fn verdict(lhs: Rational, rhs: Rational) -> CycleVerdict {
    if lhs == rhs {
        CycleVerdict::Holds { value: lhs }
    } else {
        CycleVerdict::Violated { lhs, rhs }
    }
}

/// `sum_{new} (sigma_b - 1) + sum_{prim} sigma_b = 1`.
pub fn check_vanishing_cycles(new: &[Rational], prim: &[Rational]) -> CycleVerdict {
    let lhs: Rational = new.iter().map(|s| s - Rational::one()).sum::<Rational>() + prim.iter().sum::<Rational>();
    verdict(lhs, Rational::one())
}

/// Level form: `sum_alpha (sigma_alpha - 1) = |Pi_{j+1}| - 2`.
pub fn check_vanishing_cycles_level(pi_count: usize, sigmas: &[Rational]) -> CycleVerdict {
    let lhs: Rational = sigmas.iter().map(|s| s - Rational::one()).sum();
    verdict(lhs, qi(pi_count as i64) - qi(2))
}

/// Vanishing-cycles check over the etale tails of a tree.
pub fn check_vanishing_cycles_tree(tree: &ReductionTree) -> Result<CycleVerdict, GraphError> {
    let (mut new, mut prim) = (Vec::new(), Vec::new());
    for v in &tree.vertices {
        let bucket = match v.tail {
            TailKind::NewEtale => &mut new,
            TailKind::Primitive => &mut prim,
            _ => continue,
        };
        bucket.push(v.sigma.clone().ok_or_else(|| GraphError::MissingLabel(format!("sigma of tail {:?}", v.id)))?);
    }
    Ok(check_vanishing_cycles(&new, &prim))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "path", rename_all = "snake_case")]
pub enum Monotonicity {
    Monotonic,
    Violation(Vec<String>),
}

/// Generic inertia must not increase moving away from the root.
pub fn check_monotonic(tree: &ReductionTree) -> Result<Monotonicity, GraphError> {
    let s = tree.shape()?;
    for &v in &s.order {
        for &k in &s.child_edges[v] {
            let c = s.edge_ends[k].1;
            if tree.vertices[c].inertia > tree.vertices[v].inertia {
                let mut path = vec![tree.vertices[c].id.clone()];
                let mut cur = c;
                while let Some(e) = s.parent_edge[cur] {
                    cur = s.edge_ends[e].0;
                    path.push(tree.vertices[cur].id.clone());
                }
                path.reverse();
                return Ok(Monotonicity::Violation(path));
            }
        }
    }
    Ok(Monotonicity::Monotonic)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRef {
    pub parent: String,
    pub child: String,
}

/// `sum_i weights_i * epaisseur_i = value` along a chain whose inner
/// differents are unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSum {
    pub edges: Vec<EdgeRef>,
    #[serde(with = "vec_rational_str")]
    pub weights: Vec<Rational>,
    #[serde(with = "rational_str")]
    pub value: Rational,
    /// `sum_i epaisseur_i` when all weights agree.
    #[serde(default, with = "opt_rational_str", skip_serializing_if = "Option::is_none")]
    pub epaisseur_sum: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub tree: ReductionTree,
    pub chain_sums: Vec<ChainSum>,
    /// Variables fixed only through a chain sum.
    pub underdetermined: Vec<String>,
}

fn contradiction(tree: &ReductionTree, edges: &[usize], detail: String) -> GraphError {
    GraphError::Contradiction { edges: edges.iter().map(|&k| tree.edges[k].name()).collect(), detail }
}

/// Solves `delta(s) - delta(t) = sigma_eff * epaisseur` on every edge.
///
/// Known values come from labels, the convention `delta = 0` on etale
/// components, `sigma_eff = sigma_b` on tail edges, and the tail formula
/// for `sigma_eff` when every outward tail is labelled. Propagation is
/// local per edge, then along chains of unknown inner differents.
pub fn propagate_differents(tree: &ReductionTree, p: u64, root_delta: Option<&Rational>) -> Result<Solution, GraphError> {
    let s = tree.shape()?;
    let n = tree.vertices.len();
    let m = tree.edges.len();
    let mut delta: Vec<Option<Rational>> = tree.vertices.iter().map(|v| v.delta.clone()).collect();
    for (i, v) in tree.vertices.iter().enumerate() {
        if v.inertia == 0 {
            delta[i] = Some(Rational::zero());
        }
    }
    if let Some(d) = root_delta {
        if let Some(old) = &delta[s.root] {
            if old != d {
                return Err(GraphError::Contradiction { edges: vec![], detail: "root effective different given twice".into() });
            }
        }
        delta[s.root] = Some(d.clone());
    }
    if delta[s.root].is_none() {
        return Err(GraphError::MissingLabel("effective different of the root".into()));
    }
    let mut eps: Vec<Option<Rational>> = tree.edges.iter().map(|e| e.epaisseur.clone()).collect();
    let mut sig: Vec<Option<Rational>> = Vec::with_capacity(m);
    for k in 0..m {
        let child = &tree.vertices[s.edge_ends[k].1];
        let label = tree.edges[k].sigma_eff.clone();
        let boundary = if child.is_tail() { child.sigma.clone() } else { None };
        let value = match (label, boundary) {
            (Some(a), Some(b)) if a != b => {
                return Err(contradiction(tree, &[k], format!("sigma_eff {} differs from tail sigma {}", fmt_rational(&a), fmt_rational(&b))));
            }
            (Some(a), _) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => from_tails(tree, &s, k, p).ok(),
        };
        sig.push(value);
    }

    let mut chain_sums: Vec<ChainSum> = Vec::new();
    loop {
        let mut changed = true;
        while changed {
            changed = false;
            for k in 0..m {
                let (a, b) = s.edge_ends[k];
                let st = (delta[a].clone(), delta[b].clone(), sig[k].clone(), eps[k].clone());
                match st {
                    (Some(da), Some(db), Some(sg), Some(ep)) => {
                        if &da - &db != &sg * &ep {
                            return Err(contradiction(
                                tree,
                                &[k],
                                format!(
                                    "delta difference {} but sigma_eff * epaisseur = {}",
                                    fmt_rational(&(&da - &db)),
                                    fmt_rational(&(&sg * &ep))
                                ),
                            ));
                        }
                    }
                    (Some(da), Some(db), Some(sg), None) => {
                        let diff = &da - &db;
                        if sg.is_zero() {
                            if !diff.is_zero() {
                                return Err(contradiction(tree, &[k], format!("sigma_eff = 0 but delta difference {}", fmt_rational(&diff))));
                            }
                        } else {
                            let ep = diff / sg;
                            if !ep.is_positive() {
                                return Err(contradiction(tree, &[k], format!("epaisseur would be {}", fmt_rational(&ep))));
                            }
                            eps[k] = Some(ep);
                            changed = true;
                        }
                    }
                    (Some(da), Some(db), None, Some(ep)) => {
                        sig[k] = Some((da - db) / ep);
                        changed = true;
                    }
                    (Some(da), None, Some(sg), Some(ep)) => {
                        delta[b] = Some(da - sg * ep);
                        changed = true;
                    }
                    (None, Some(db), Some(sg), Some(ep)) => {
                        delta[a] = Some(db + sg * ep);
                        changed = true;
                    }
                    _ => {}
                }
            }
        }
        chain_sums.clear();
        let mut progressed = false;
        for u in 0..n {
            let Some(du) = delta[u].clone() else { continue };
            for chain in unknown_chains(&s, &delta, u) {
                let w = *chain.last().unwrap();
                let dw = delta[s.edge_ends[w].1].clone().unwrap();
                if chain.iter().any(|&k| sig[k].is_none()) {
                    continue;
                }
                let mut rem = &du - &dw;
                let mut open = Vec::new();
                for &k in &chain {
                    match &eps[k] {
                        Some(ep) => rem -= sig[k].as_ref().unwrap() * ep,
                        None => open.push(k),
                    }
                }
                match open.as_slice() {
                    [] => {
                        if !rem.is_zero() {
                            return Err(contradiction(tree, &chain, format!("chain residual {}", fmt_rational(&rem))));
                        }
                    }
                    [k] if !sig[*k].as_ref().unwrap().is_zero() => {
                        let ep = &rem / sig[*k].as_ref().unwrap();
                        if !ep.is_positive() {
                            return Err(contradiction(tree, &chain, format!("epaisseur would be {}", fmt_rational(&ep))));
                        }
                        eps[*k] = Some(ep);
                        progressed = true;
                    }
                    _ => {
                        let weights: Vec<Rational> = open.iter().map(|&k| sig[k].clone().unwrap()).collect();
                        if weights.iter().all(|w| !w.is_positive()) && rem.is_positive() {
                            return Err(contradiction(tree, &chain, "no positive epaisseurs fit the chain".into()));
                        }
                        let uniform = weights.iter().all(|x| *x == weights[0]) && !weights[0].is_zero();
                        chain_sums.push(ChainSum {
                            edges: open.iter().map(|&k| EdgeRef { parent: tree.edges[k].parent.clone(), child: tree.edges[k].child.clone() }).collect(),
                            epaisseur_sum: uniform.then(|| &rem / &weights[0]),
                            weights,
                            value: rem,
                        });
                    }
                }
            }
        }
        if !progressed {
            break;
        }
    }

    for k in 0..m {
        let (a, b) = s.edge_ends[k];
        if let (Some(da), Some(db)) = (&delta[a], &delta[b]) {
            if da < db {
                return Err(contradiction(tree, &[k], "effective different increases outward".into()));
            }
        }
    }

    let mut covered: BTreeSet<String> = BTreeSet::new();
    for c in &chain_sums {
        for e in &c.edges {
            covered.insert(format!("epaisseur({}->{})", e.parent, e.child));
            covered.insert(format!("delta({})", e.child));
        }
    }
    let mut unknown = Vec::new();
    for (i, d) in delta.iter().enumerate() {
        if d.is_none() {
            unknown.push(format!("delta({})", tree.vertices[i].id));
        }
    }
    for k in 0..m {
        if sig[k].is_none() {
            unknown.push(format!("sigma_eff({})", tree.edges[k].name()));
        }
        if eps[k].is_none() {
            unknown.push(format!("epaisseur({})", tree.edges[k].name()));
        }
    }
    let loose: Vec<String> = unknown.iter().filter(|x| !covered.contains(*x)).cloned().collect();
    if !loose.is_empty() {
        return Err(GraphError::Unsolved(loose));
    }

    let mut out = tree.clone();
    for (i, v) in out.vertices.iter_mut().enumerate() {
        v.delta = delta[i].clone();
    }
    for (k, e) in out.edges.iter_mut().enumerate() {
        e.epaisseur = eps[k].clone();
        e.sigma_eff = sig[k].clone();
    }
    Ok(Solution { tree: out, chain_sums, underdetermined: unknown })
}

/// Edge paths from `u` down to the nearest descendants with known `delta`
/// through vertices whose `delta` is unknown; each path has length >= 2.
fn unknown_chains(s: &Shape, delta: &[Option<Rational>], u: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = s.child_edges[u]
        .iter()
        .filter(|&&k| delta[s.edge_ends[k].1].is_none())
        .map(|&k| vec![k])
        .collect();
    while let Some(path) = stack.pop() {
        let end = s.edge_ends[*path.last().unwrap()].1;
        for &k in &s.child_edges[end] {
            let mut next = path.clone();
            next.push(k);
            if delta[s.edge_ends[k].1].is_some() {
                out.push(next);
            } else {
                stack.push(next);
            }
        }
    }
    out.sort();
    out
}

impl Solution {
    /// Total thickness between two vertices on one root path, using chain sums
    /// for edges whose individual thickness is not determined.
    pub fn path_epaisseur(&self, top: &str, bottom: &str) -> Result<Rational, GraphError> {
        let mut path = Vec::new();
        let mut cur = bottom.to_string();
        while cur != top {
            let e = self
                .tree
                .edges
                .iter()
                .find(|e| e.child == cur)
                .ok_or_else(|| GraphError::Malformed(format!("{top:?} is not above {bottom:?}")))?;
            path.push(e.clone());
            cur = e.parent.clone();
        }
        let mut total = Rational::zero();
        let mut open: BTreeSet<(String, String)> = BTreeSet::new();
        for e in &path {
            match &e.epaisseur {
                Some(x) => total += x,
                None => {
                    open.insert((e.parent.clone(), e.child.clone()));
                }
            }
        }
        for c in &self.chain_sums {
            let keys: BTreeSet<(String, String)> = c.edges.iter().map(|e| (e.parent.clone(), e.child.clone())).collect();
            if let Some(sum) = &c.epaisseur_sum {
                if keys.is_subset(&open) {
                    total += sum;
                    open = open.difference(&keys).cloned().collect();
                }
            }
        }
        if open.is_empty() {
            Ok(total)
        } else {
            Err(GraphError::Unsolved(open.into_iter().map(|(a, b)| format!("epaisseur({a}->{b})")).collect()))
        }
    }
}

/// Tail-invariant configuration `{prim, new}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailConfig {
    #[serde(default, with = "vec_rational_str", skip_serializing_if = "Vec::is_empty")]
    pub prim: Vec<Rational>,
    #[serde(default, with = "vec_rational_str", skip_serializing_if = "Vec::is_empty")]
    pub new: Vec<Rational>,
    /// Some invariant is at least `p/2`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged_impossible: bool,
}

/// Admissible tail invariants for `tau` primitive tails and `m_G = 2`:
/// `sigma` in `(1/2)Z_{>0}`, new sigmas `> 1`, at most two etale tails,
/// and the vanishing-cycles formula. Ordered by number of new tails, then
/// lexicographically.
pub fn enumerate_tail_configs(tau: u32, m_g: u32, p: Option<u64>) -> Result<Vec<TailConfig>, GraphError> {
    if m_g != 2 {
        return Err(GraphError::Unsupported(format!("m_G = {m_g}; only m_G = 2 is modelled")));
    }
    if tau > 3 {
        return Err(GraphError::Unsupported(format!("tau = {tau} exceeds 3")));
    }
    let tau = tau as usize;
    let mut out = Vec::new();
    if tau > 2 {
        return Ok(out);
    }
    // In half-units: prim sigma = a/2 (a >= 1), new sigma = 1 + b/2 (b >= 1), sum a + sum b = 2.
    for k in 0..=(2 - tau) {
        let mut found: Vec<TailConfig> = Vec::new();
        for parts in compositions(2, tau + k) {
            let (a, b) = parts.split_at(tau);
            let mut prim: Vec<Rational> = a.iter().map(|&x| q(x as i64, 2)).collect();
            let mut new: Vec<Rational> = b.iter().map(|&x| qi(1) + q(x as i64, 2)).collect();
            prim.sort();
            new.sort();
            let flagged = p.is_some_and(|p| prim.iter().chain(&new).any(|s| *s >= q(p as i64, 2)));
            let c = TailConfig { prim, new, flagged_impossible: flagged };
            if !found.contains(&c) {
                found.push(c);
            }
        }
        found.sort_by(|x, y| (&x.prim, &x.new).cmp(&(&y.prim, &y.new)));
        out.extend(found);
    }
    Ok(out)
}

/// Ordered tuples of `len` positive integers summing to `total`.
fn compositions(total: u32, len: usize) -> Vec<Vec<u32>> {
    if len == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..=total {
        for mut rest in compositions(total - first, len - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lint {
    pub code: String,
    pub vertex: Option<String>,
    pub message: String,
}

fn lint(code: &str, vertex: Option<&str>, message: String) -> Lint {
    Lint { code: code.into(), vertex: vertex.map(str::to_string), message }
}

/// Soft checks that rely on external bounds.
pub fn lints(tree: &ReductionTree, p: u64, m_g: Option<u32>) -> Result<Vec<Lint>, GraphError> {
    let s = tree.shape()?;
    let mut out = Vec::new();
    let in_grid = |x: &Rational, m: u32| (x * qi(m as i64)).denom().is_one();
    for (i, v) in tree.vertices.iter().enumerate() {
        if let (Some(sg), Some(m)) = (&v.sigma, m_g) {
            if !in_grid(sg, m) {
                out.push(lint("sigma-denominator", Some(&v.id), format!("sigma {} is not in (1/{m})Z", fmt_rational(sg))));
            }
        }
        match (v.tail, &v.sigma) {
            (TailKind::NewEtale, Some(sg)) if *sg <= Rational::one() => {
                out.push(lint("new-etale-sigma", Some(&v.id), format!("new etale tail needs sigma > 1, has {}", fmt_rational(sg))));
            }
            (TailKind::NewInseparable, Some(sg)) if *sg < qi(2) => {
                out.push(lint("new-inseparable-sigma", Some(&v.id), format!("new inseparable tail needs sigma >= 2, has {}", fmt_rational(sg))));
            }
            _ => {}
        }
        if i != s.root {
            let parent = &tree.vertices[s.edge_ends[s.parent_edge[i].unwrap()].0];
            for b in &v.branch_points {
                let r = vp_u64(b.index, p);
                if r >= 1 && parent.inertia <= r {
                    out.push(lint(
                        "wild-specialization",
                        Some(&v.id),
                        format!("branch point {:?} with p^{r} | index sits below a p^{} component", b.id, parent.inertia),
                    ));
                }
            }
        }
    }
    for k in 0..tree.edges.len() {
        if let (Some(sg), Some(m)) = (&tree.edges[k].sigma_eff, m_g) {
            if !in_grid(sg, m) {
                out.push(lint("sigma-denominator", None, format!("sigma_eff {} on {} is not in (1/{m})Z", fmt_rational(sg), tree.edges[k].name())));
            }
        }
    }
    out.push(lint("node-inertia", None, "inertia groups at nodes are not modelled".into()));
    Ok(out)
}

/// Path model for the radius of the new etale tail: root with
/// `delta = nu + 1/(p-1)`, then the case-specific edges down to the tail.
pub fn radius_path_tree(p: u64, nu: u32, case: TailCase, extra: Option<&Rational>) -> Result<ReductionTree, GraphError> {
    if nu == 0 {
        return Err(GraphError::InvalidLabel("nu must be positive".into()));
    }
    let root_delta = qi(nu as i64) + q(1, p as i64 - 1);
    let mut root = Vertex::new("X0", nu, TailKind::None);
    root.delta = Some(root_delta);
    let mut tail = Vertex::new("Xb", 0, TailKind::NewEtale);
    tail.sigma = Some(q(3, 2));
    let need = |x: Option<&Rational>| -> Result<Rational, GraphError> {
        match x {
            Some(x) if x.is_positive() => Ok(x.clone()),
            _ => Err(GraphError::MissingLabel("positive case valuation".into())),
        }
    };
    match case {
        TailCase::Generic => {
            let mid = Vertex::new("W", nu, TailKind::None);
            ReductionTree::new(vec![root, mid, tail], vec![Edge::new("X0", "W"), Edge::new("W", "Xb")])
        }
        TailCase::AZero => {
            let mid = Vertex::new("W", nu, TailKind::None);
            let mut prim = Vertex::new("Xb'", 0, TailKind::Primitive);
            prim.sigma = Some(q(1, 2));
            let mut e = Edge::new("X0", "W");
            e.epaisseur = Some(need(extra)?);
            ReductionTree::new(vec![root, mid, tail, prim], vec![e, Edge::new("W", "Xb"), Edge::new("W", "Xb'")])
        }
        TailCase::AOne => {
            let mid = Vertex::new("W", nu, TailKind::None);
            let mut e = Edge::new("X0", "W");
            e.epaisseur = Some(need(extra)?);
            e.sigma_eff = Some(q(1, 2));
            ReductionTree::new(vec![root, mid, tail], vec![e, Edge::new("W", "Xb")])
        }
    }
}

/// Radius valuation of the new etale tail obtained by solving the path model.
pub fn tail_radius_by_propagation(p: u64, nu: u32, case: TailCase, extra: Option<&Rational>) -> Result<Rational, GraphError> {
    let tree = radius_path_tree(p, nu, case, extra)?;
    let sol = propagate_differents(&tree, p, None)?;
    sol.path_epaisseur("X0", "Xb")
}

/// Parses a tail case name; thin wrapper for callers outside the torsor module.
pub fn parse_case(s: &str) -> Result<TailCase, GraphError> {
    s.parse().map_err(GraphError::InvalidLabel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differents_and_invariants() {
        let p = DeformationProfile::multiplicative(2);
        assert_eq!(effective_different(&p, 5).unwrap(), q(9, 4));
        assert_eq!(effective_different(&DeformationProfile::multiplicative(1), 7).unwrap(), q(7, 6));
        let p = DeformationProfile { sigmas: vec![], deltas: vec![qi(1), q(1, 2)] };
        assert_eq!(effective_different(&p, 5).unwrap(), q(13, 8));
        assert_eq!(effective_different(&DeformationProfile::etale(), 5).unwrap(), qi(0));
        let bad = DeformationProfile { sigmas: vec![], deltas: vec![q(3, 2)] };
        assert!(matches!(effective_different(&bad, 5), Err(GraphError::InvalidProfile(_))));
        assert_eq!(effective_invariant(&[qi(1), qi(2)], 5).unwrap(), q(6, 5));
        assert_eq!(effective_invariant(&[q(3, 2)], 5).unwrap(), q(3, 2));
    }

    #[test]
    fn two_edge_path_gives_chain_sum() {
        let tree = radius_path_tree(5, 2, TailCase::Generic, None).unwrap();
        let sol = propagate_differents(&tree, 5, None).unwrap();
        assert_eq!(sol.chain_sums.len(), 1);
        assert_eq!(sol.chain_sums[0].epaisseur_sum, Some(q(3, 2)));
    }

    #[test]
    fn zero_sigma_contradiction() {
        let mut root = Vertex::new("A", 1, TailKind::None);
        root.delta = Some(q(5, 4));
        let mut e = Edge::new("A", "B");
        e.sigma_eff = Some(qi(0));
        let mut b = Vertex::new("B", 0, TailKind::NewEtale);
        b.sigma = None;
        let tree = ReductionTree::new(vec![root, b], vec![e]).unwrap();
        assert!(matches!(propagate_differents(&tree, 5, None), Err(GraphError::Contradiction { .. })));
    }

    #[test]
    fn enumeration_examples() {
        assert!(enumerate_tail_configs(3, 2, Some(5)).unwrap().is_empty());
        let two = enumerate_tail_configs(2, 2, Some(5)).unwrap();
        assert_eq!(two, vec![TailConfig { prim: vec![q(1, 2), q(1, 2)], new: vec![], flagged_impossible: false }]);
        let one = enumerate_tail_configs(1, 2, Some(5)).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(one[0].prim, vec![qi(1)]);
        assert_eq!((one[1].prim.clone(), one[1].new.clone()), (vec![q(1, 2)], vec![q(3, 2)]));
        assert!(matches!(enumerate_tail_configs(1, 3, None), Err(GraphError::Unsupported(_))));
    }
}
