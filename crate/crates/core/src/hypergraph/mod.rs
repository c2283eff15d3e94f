//! Query hypergraphs and their exact fractional edge covers and packings.

mod exact;
mod lp;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::relcore::{Attr, JoinQuery};

pub use exact::{iroot_ceil, iroot_ceil_u64, iroot_floor, RationalPowerProduct};
pub use lp::{solve as solve_lp, Cmp, Constraint, Solution};

pub type Rational = num_rational::BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// A nonempty set of attributes, kept sorted.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(Vec<Attr>);

impl Edge {
    pub fn new(attrs: impl IntoIterator<Item = Attr>) -> Self {
        let mut v: Vec<Attr> = attrs.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Edge(v)
    }

    pub fn pair(a: Attr, b: Attr) -> Self {
        Self::new([a, b])
    }

    pub fn attrs(&self) -> &[Attr] {
        &self.0
    }

    pub fn contains(&self, a: Attr) -> bool {
        self.0.binary_search(&a).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The endpoint other than `a` of a binary edge.
    pub fn other(&self, a: Attr) -> Option<Attr> {
        match self.0[..] {
            [x, y] if x == a => Some(y),
            [x, y] if y == a => Some(x),
            _ => None,
        }
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.0).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Hypergraph {
    vertices: Vec<Attr>,
    edges: Vec<Edge>,
}

impl Hypergraph {
    /// Every vertex must lie on an edge and every edge inside the vertex set.
    pub fn new(vertices: impl IntoIterator<Item = Attr>, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let vertices: BTreeSet<Attr> = vertices.into_iter().collect();
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        let mut covered = BTreeSet::new();
        for e in &edges {
            if e.is_empty() {
                return Err(Error::domain("empty edge"));
            }
            for &a in e.attrs() {
                if !vertices.contains(&a) {
                    return Err(Error::UnknownAttribute(a));
                }
                covered.insert(a);
            }
        }
        if let Some(&a) = vertices.difference(&covered).next() {
            return Err(Error::domain(format!("vertex {a:?} lies on no edge")));
        }
        Ok(Hypergraph {
            vertices: vertices.into_iter().collect(),
            edges: edges.into_iter().collect(),
        })
    }

    /// The hypergraph whose vertices are exactly the attributes on `edges`.
    pub fn from_edges(edges: impl IntoIterator<Item = Edge>) -> Self {
        let edges: Vec<Edge> = edges.into_iter().collect();
        let vertices: Vec<Attr> = edges.iter().flat_map(|e| e.attrs().iter().copied()).collect();
        Self::new(vertices, edges).expect("vertices derived from edges")
    }

    pub fn vertices(&self) -> &[Attr] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_vertex(&self, a: Attr) -> bool {
        self.vertices.binary_search(&a).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.edges.iter().all(|e| e.len() == 2)
    }

    pub fn incident(&self, a: Attr) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.contains(a))
    }

    /// Vertices adjacent to `a` through a binary edge.
    pub fn neighbors(&self, a: Attr) -> Vec<Attr> {
        self.incident(a).filter_map(|e| e.other(a)).collect()
    }

    /// `G∖U`: remove `u` from every edge and drop edges that become empty.
    pub fn without(&self, u: &[Attr]) -> Hypergraph {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.attrs().iter().copied().filter(|a| !u.contains(a))))
            .filter(|e| !e.is_empty());
        Hypergraph::from_edges(edges)
    }
}

/// The hypergraph of a simple query: one vertex per attribute, one edge per
/// relation scheme.
pub fn build_hypergraph(q: &JoinQuery) -> Hypergraph {
    Hypergraph::new(
        q.attset(),
        q.relations().iter().map(|r| Edge::new(r.scheme().iter().copied())),
    )
    .expect("a simple query has distinct schemes covering attset")
}

/// The subgraph induced by `u`: edges intersected with `u`, empties dropped,
/// duplicates merged.
pub fn induced_subgraph(g: &Hypergraph, u: &[Attr]) -> Result<Hypergraph> {
    if let Some(&a) = u.iter().find(|a| !g.has_vertex(**a)) {
        return Err(Error::UnknownAttribute(a));
    }
    let edges = g
        .edges
        .iter()
        .map(|e| Edge::new(e.attrs().iter().copied().filter(|a| u.contains(a))))
        .filter(|e| !e.is_empty());
    Hypergraph::new(u.iter().copied(), edges)
}

/// Edge weights in `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightFn(BTreeMap<Edge, Rational>);

impl WeightFn {
    pub fn zero(g: &Hypergraph) -> Self {
        WeightFn(g.edges.iter().map(|e| (e.clone(), Rational::zero())).collect())
    }

    /// Checks the range and that `g`'s edges are exactly the keys.
    pub fn new(g: &Hypergraph, weights: impl IntoIterator<Item = (Edge, Rational)>) -> Result<Self> {
        let map: BTreeMap<Edge, Rational> = weights.into_iter().collect();
        for (e, w) in &map {
            if !g.edges.contains(e) {
                return Err(Error::domain(format!("weight on non-edge {e:?}")));
            }
            if *w < Rational::zero() || *w > Rational::one() {
                return Err(Error::domain(format!("weight {w} of {e:?} outside [0, 1]")));
            }
        }
        if map.len() != g.edges.len() {
            return Err(Error::domain("some edge has no weight"));
        }
        Ok(WeightFn(map))
    }

    pub fn get(&self, e: &Edge) -> Rational {
        self.0.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Edge, &Rational)> {
        self.0.iter()
    }

    pub fn total(&self) -> Rational {
        self.0.values().sum()
    }
}

/// Sum of the weights of the edges on `x`.
pub fn vertex_weight(g: &Hypergraph, w: &WeightFn, x: Attr) -> Result<Rational> {
    if !g.has_vertex(x) {
        return Err(Error::UnknownAttribute(x));
    }
    Ok(g.incident(x).map(|e| w.get(e)).sum())
}

pub fn is_cover(g: &Hypergraph, w: &WeightFn) -> bool {
    g.vertices
        .iter()
        .all(|&x| vertex_weight(g, w, x).unwrap() >= Rational::one())
}

pub fn is_packing(g: &Hypergraph, w: &WeightFn) -> bool {
    g.vertices
        .iter()
        .all(|&x| vertex_weight(g, w, x).unwrap() <= Rational::one())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpResult {
    pub optimum: Rational,
    pub weights: WeightFn,
    /// Canonical packings: the vertices of weight 0. Quasi-packings: the
    /// removed set `U` attaining the maximum.
    pub zero_set: Option<Vec<Attr>>,
}

fn vertex_rows(g: &Hypergraph, cmp: Cmp) -> Vec<Constraint> {
    g.vertices
        .iter()
        .map(|&x| Constraint {
            coeffs: g
                .edges
                .iter()
                .map(|e| if e.contains(x) { Rational::one() } else { Rational::zero() })
                .collect(),
            cmp,
            rhs: Rational::one(),
        })
        .collect()
}

fn weights_of(g: &Hypergraph, x: Vec<Rational>) -> WeightFn {
    WeightFn(g.edges.iter().cloned().zip(x).collect())
}

/// `ρ(G)`: minimum total weight with every vertex weight at least 1.
pub fn edge_cover_lp(g: &Hypergraph) -> Result<LpResult> {
    let c = vec![Rational::one(); g.edges.len()];
    let s = lp::solve(&c, &vertex_rows(g, Cmp::Ge), false)?;
    let weights = weights_of(g, s.x);
    debug_assert!(is_cover(g, &weights));
    Ok(LpResult {
        optimum: s.objective,
        weights,
        zero_set: None,
    })
}

/// `τ(G)`: maximum total weight with every vertex weight at most 1.
pub fn edge_packing_lp(g: &Hypergraph) -> Result<LpResult> {
    let c = vec![Rational::one(); g.edges.len()];
    let s = lp::solve(&c, &vertex_rows(g, Cmp::Le), true)?;
    Ok(LpResult {
        optimum: s.objective,
        weights: weights_of(g, s.x),
        zero_set: None,
    })
}

/// Vertices of weight 0, or `None` if some vertex weight is neither 0 nor 1.
fn zero_one_vertices(g: &Hypergraph, w: &WeightFn) -> Option<Vec<Attr>> {
    let mut z = Vec::new();
    for &x in &g.vertices {
        let v = vertex_weight(g, w, x).unwrap();
        if v.is_zero() {
            z.push(x);
        } else if !v.is_one() {
            return None;
        }
    }
    Some(z)
}

/// A maximum fractional edge packing of a binary graph in which every vertex
/// has weight 0 or 1; `zero_set` lists the weight-0 vertices.
///
/// Ties are broken towards covering low attribute ids, so the exposed
/// vertices are the highest-numbered ones possible.
pub fn canonical_packing(g: &Hypergraph) -> Result<LpResult> {
    if !g.is_binary() {
        return Err(Error::NotBinary(
            "canonical packing needs a binary graph".into(),
            g.edges.iter().map(Edge::len).find(|&l| l != 2).unwrap_or(0),
        ));
    }
    let tau = edge_packing_lp(g)?.optimum;
    let k = g.vertices.len() as u32;
    // Vertex priorities 2^(k-1-rank), scaled so the total perturbation stays
    // below 1/4; optimal packings differ by multiples of 1/2.
    let delta = Rational::new(BigUint::one().into(), (BigUint::one() << (k + 2) as usize).into());
    let prio = |a: Attr| -> Rational {
        let rank = g.vertices.binary_search(&a).unwrap() as u32;
        Rational::from_integer((BigUint::one() << (k - 1 - rank) as usize).into())
    };
    let c: Vec<Rational> = g
        .edges
        .iter()
        .map(|e| Rational::one() + &delta * (prio(e.attrs()[0]) + prio(e.attrs()[1])))
        .collect();
    let s = lp::solve(&c, &vertex_rows(g, Cmp::Le), true)?;
    let mut weights = weights_of(g, s.x);
    let mut zero = zero_one_vertices(g, &weights);
    if zero.is_none() || weights.total() != tau {
        weights = matching_packing(g);
        zero = zero_one_vertices(g, &weights);
    }
    let zero = zero.ok_or_else(|| Error::domain("packing repair failed"))?;
    if weights.total() != tau || !is_packing(g, &weights) {
        return Err(Error::domain("packing repair failed"));
    }
    Ok(LpResult {
        optimum: tau,
        weights,
        zero_set: Some(zero),
    })
}

/// A half-integral maximum packing with 0/1 vertex weights built from a
/// maximum matching of the bipartite double cover.
pub fn matching_packing(g: &Hypergraph) -> WeightFn {
    let idx: HashMap<Attr, usize> = g.vertices.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let n = g.vertices.len();
    let mut adj = vec![Vec::new(); n];
    for e in &g.edges {
        let (u, v) = (idx[&e.attrs()[0]], idx[&e.attrs()[1]]);
        adj[u].push(v);
        adj[v].push(u);
    }
    // Kuhn's augmenting paths: left copy u matched to right copy succ[u].
    let mut pred: Vec<Option<usize>> = vec![None; n];
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], pred: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if pred[v].is_none_or(|w| augment(w, adj, seen, pred)) {
                pred[v] = Some(u);
                return true;
            }
        }
        false
    }
    for u in 0..n {
        let mut seen = vec![false; n];
        augment(u, &adj, &mut seen, &mut pred);
    }
    let mut succ: Vec<Option<usize>> = vec![None; n];
    for (v, p) in pred.iter().enumerate() {
        if let Some(u) = *p {
            succ[u] = Some(v);
        }
    }
    // The arcs u → succ[u] form vertex-disjoint directed paths and cycles.
    let mut w = WeightFn::zero(g);
    let mut set = |a: usize, b: usize, val: Rational| {
        w.0.insert(Edge::pair(g.vertices[a], g.vertices[b]), val);
    };
    let mut done = vec![false; n];
    let starts: Vec<usize> = (0..n)
        .filter(|&u| pred[u].is_none())
        .chain(0..n)
        .collect();
    for s in starts {
        if done[s] {
            continue;
        }
        let mut walk = vec![s];
        done[s] = true;
        let mut cur = s;
        let mut cycle = false;
        while let Some(nx) = succ[cur] {
            if nx == s {
                cycle = true;
                break;
            }
            walk.push(nx);
            done[nx] = true;
            cur = nx;
        }
        let len = walk.len();
        if cycle && len > 2 && len % 2 == 1 {
            for i in 0..len {
                set(walk[i], walk[(i + 1) % len], rat(1, 2));
            }
        } else {
            for i in (0..len.saturating_sub(1)).step_by(2) {
                set(walk[i], walk[i + 1], Rational::one());
            }
        }
    }
    w
}

/// `ψ(G) = max_U τ(G∖U)`; `zero_set` holds the first maximizing `U` in
/// subset order.
pub fn quasi_packing_number(g: &Hypergraph) -> Result<LpResult> {
    const LIMIT: usize = 20;
    let k = g.vertices.len();
    if k > LIMIT {
        return Err(Error::TooLarge {
            what: "vertices for quasi-packing enumeration",
            size: k,
            limit: LIMIT,
        });
    }
    let mut memo: HashMap<Vec<Edge>, LpResult> = HashMap::new();
    let mut best: Option<(LpResult, Vec<Attr>)> = None;
    for mask in 0u32..(1 << k) {
        let u: Vec<Attr> = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| g.vertices[i]).collect();
        let rest = g.without(&u);
        let r = match memo.get(rest.edges()) {
            Some(r) => r.clone(),
            None => {
                let r = edge_packing_lp(&rest)?;
                memo.insert(rest.edges.clone(), r.clone());
                r
            }
        };
        if best.as_ref().is_none_or(|(b, _)| r.optimum > b.optimum) {
            best = Some((r, u));
        }
    }
    let (r, u) = best.expect("at least the empty subset");
    Ok(LpResult {
        optimum: r.optimum,
        weights: r.weights,
        zero_set: Some(u),
    })
}

/// `∏_e |R_e|^{W(e)}`, held exactly, plus an outward-rounded rational value.
#[derive(Clone, Debug)]
pub struct AgmBound {
    pub exact: RationalPowerProduct,
    /// At least the true bound and within `2^-AGM_PRECISION_BITS` of it.
    pub value: Rational,
}

pub const AGM_PRECISION_BITS: u32 = 32;

impl AgmBound {
    /// `n ≤ bound`, decided in integer arithmetic.
    pub fn admits(&self, n: &BigUint) -> bool {
        self.exact.admits(n)
    }
}

/// The AGM bound for a fractional edge covering `w`.
pub fn agm_bound(g: &Hypergraph, w: &WeightFn, sizes: &BTreeMap<Edge, u64>) -> Result<AgmBound> {
    if !is_cover(g, w) {
        return Err(Error::domain("AGM bound needs a fractional edge covering"));
    }
    let mut factors = Vec::with_capacity(g.edges.len());
    for e in &g.edges {
        let n = *sizes
            .get(e)
            .ok_or_else(|| Error::domain(format!("no size for edge {e:?}")))?;
        factors.push((n as u128, w.get(e)));
    }
    let exact = RationalPowerProduct::new(factors.iter().map(|(n, w)| (*n, w)));
    let value = exact.upper(AGM_PRECISION_BITS);
    Ok(AgmBound { exact, value })
}

/// Edges of the twelve-attribute showcase query, attributes `A..L` as ids
/// `0..12`.
pub const SHOWCASE_EDGES: [(u32, u32); 18] = [
    (0, 1),   // AB
    (0, 2),   // AC
    (1, 2),   // BC
    (8, 9),   // IJ
    (3, 10),  // DK
    (0, 3),   // AD
    (0, 4),   // AE
    (3, 6),   // DG
    (5, 6),   // FG
    (4, 7),   // EH
    (4, 11),  // EL
    (1, 4),   // BE
    (1, 5),   // BF
    (2, 5),   // CF
    (2, 10),  // CK
    (8, 3),   // ID
    (8, 10),  // IK
    (6, 10),  // GK
];

pub fn showcase() -> Hypergraph {
    Hypergraph::from_edges(SHOWCASE_EDGES.iter().map(|&(a, b)| Edge::pair(Attr(a), Attr(b))))
}

/// An optimal covering of the showcase graph: weight 1 on FG, DK, IJ, EH, EL
/// and 1/2 on AB, AC, BC.
pub fn showcase_cover(g: &Hypergraph) -> WeightFn {
    let one: [(u32, u32); 5] = [(5, 6), (3, 10), (8, 9), (4, 7), (4, 11)];
    let half: [(u32, u32); 3] = [(0, 1), (0, 2), (1, 2)];
    let mut w = WeightFn::zero(g);
    for (a, b) in one {
        w.0.insert(Edge::pair(Attr(a), Attr(b)), Rational::one());
    }
    for (a, b) in half {
        w.0.insert(Edge::pair(Attr(a), Attr(b)), rat(1, 2));
    }
    w
}
