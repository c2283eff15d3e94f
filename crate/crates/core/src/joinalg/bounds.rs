//! Exact checks of the inequalities behind the algorithm's load analysis.
//!
//! Every check reports an integer `lhs` and `⌊rhs⌋`; `holds` is decided in
//! exact arithmetic and, for integer left sides, equals `lhs ≤ ⌊rhs⌋`.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::reduce::{factorization_holds, reduce, ReducedQuery, Split};
use crate::error::{Error, Result};
use crate::par;
use crate::hypergraph::{
    agm_bound, build_hypergraph, canonical_packing, edge_cover_lp, edge_packing_lp, is_cover, is_packing,
    iroot_floor, vertex_weight, Edge, Hypergraph, Rational, RationalPowerProduct, WeightFn,
};
use crate::relcore::{count_join, count_join_ordered, Attr, JoinQuery, Relation};
use crate::taxonomy::{
    attr_subsets, classify, decompose_check, enumerate_configs, Configuration, HeavyLightIndex, ResidualQuery,
    Residualizer,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundCheck {
    pub check: &'static str,
    pub h: Vec<Attr>,
    pub j: Vec<Attr>,
    /// The packing `W` used, if the check depends on one.
    pub packing: Option<&'static str>,
    pub lhs: BigUint,
    pub rhs: BigUint,
    pub holds: bool,
}

impl BoundCheck {
    fn integral(check: &'static str, h: &[Attr], j: &[Attr], lhs: BigUint, rhs: BigUint) -> Self {
        BoundCheck {
            check,
            h: h.to_vec(),
            j: j.to_vec(),
            packing: None,
            holds: lhs <= rhs,
            lhs,
            rhs,
        }
    }
}

/// `⌊λ^e · m^j⌋` for a rational exponent `e` of either sign.
pub fn floor_power_product(lambda: u64, e: &Rational, m: u64, j: u32) -> BigUint {
    let d = e.denom().to_u32().expect("small denominator");
    let a = e.numer().abs().to_u32().expect("small numerator");
    let lam = BigUint::from(lambda).pow(a);
    let mj = BigUint::from(m).pow(j * d);
    let n = if e.is_negative() { mj / lam } else { mj * lam };
    iroot_floor(&n, d)
}

/// `x ≤ y` for two exact power products.
fn le(x: &RationalPowerProduct, y: &RationalPowerProduct) -> bool {
    x.radicand.pow(y.degree) <= y.radicand.pow(x.degree)
}

fn floor_of(x: &RationalPowerProduct) -> BigUint {
    iroot_floor(&x.radicand, x.degree)
}

/// Everything the checks of one `H` need.
pub struct HReduction {
    pub split: Split,
    pub configs: Vec<Configuration>,
    pub residuals: Vec<ResidualQuery>,
    pub reduced: Vec<ReducedQuery>,
}

impl HReduction {
    pub fn new(q: &JoinQuery, res: &Residualizer, h: &[Attr]) -> Result<Self> {
        let split = Split::new(q, h);
        let configs = enumerate_configs(q, h, res.index())?;
        let residuals: Vec<ResidualQuery> = configs.iter().map(|c| res.residual(c)).collect();
        let reduced = residuals.iter().map(|rq| reduce(&split, q, rq)).collect();
        Ok(HReduction {
            split,
            configs,
            residuals,
            reduced,
        })
    }

    /// `Σ_η ∏_{X∈J} |R''_X(η)|`.
    pub fn isolated_sum(&self, j: &[Attr]) -> BigUint {
        self.reduced.iter().map(|r| BigUint::from(r.isolated_count(j))).sum()
    }
}

/// Named packings of the query graph tried by the suite.
pub struct Packings(pub Vec<(&'static str, WeightFn)>);

impl Packings {
    pub fn standard(g: &Hypergraph) -> Result<Self> {
        Ok(Packings(vec![
            ("zero", WeightFn::zero(g)),
            ("canonical", canonical_packing(g)?.weights),
            ("optimal", edge_packing_lp(g)?.weights),
        ]))
    }
}

/// All bound checks for one query and heavy parameter.
pub struct BoundSuite<'a> {
    pub q: &'a JoinQuery,
    pub g: Hypergraph,
    pub idx: HeavyLightIndex,
    pub rho: Rational,
    pub rho_cover: WeightFn,
    pub packings: Packings,
}

impl<'a> BoundSuite<'a> {
    pub fn new(q: &'a JoinQuery, lambda: u64) -> Result<Self> {
        q.require_binary()?;
        let g = build_hypergraph(q);
        let cover = edge_cover_lp(&g)?;
        Ok(BoundSuite {
            q,
            idx: classify(q, lambda)?,
            rho: cover.optimum,
            rho_cover: cover.weights,
            packings: Packings::standard(&g)?,
            g,
        })
    }

    fn m(&self) -> u64 {
        self.q.input_size() as u64
    }

    fn lambda(&self) -> u64 {
        self.idx.lambda
    }

    /// Every check for every `H` with at least one configuration, plus the
    /// whole-query checks.
    pub fn run_all(&self) -> Result<Vec<BoundCheck>> {
        let mut out = vec![self.agm_check()?, self.decomposition_check()?];
        let res = Residualizer::new(self.q, &self.idx);
        let subsets = attr_subsets(&self.q.attset());
        let per_h = par::map_collect(true, &subsets, |h| -> Result<Vec<BoundCheck>> {
            let red = HReduction::new(self.q, &res, h)?;
            if red.configs.is_empty() {
                return Ok(Vec::new());
            }
            self.checks_for(h, &red)
        });
        for checks in per_h {
            out.extend(checks?);
        }
        Ok(out)
    }

    pub fn checks_for(&self, h: &[Attr], red: &HReduction) -> Result<Vec<BoundCheck>> {
        let mut out = vec![self.residual_size_check(h, red), self.factorization_check(h, red)];
        let iso = red.split.isolated.clone();
        for mask in 1u32..1 << iso.len() {
            let j: Vec<Attr> = (0..iso.len()).filter(|i| mask >> i & 1 == 1).map(|i| iso[i]).collect();
            for (name, w) in &self.packings.0 {
                let mut c = self.isolated_check(h, red, w, &j)?;
                c.packing = Some(name);
                out.push(c);
            }
            out.push(self.weak_check(h, red, &j)?);
        }
        for (name, w) in &self.packings.0 {
            for mut c in self.qstar_checks(h, red, w)? {
                c.packing = Some(name);
                out.push(c);
            }
        }
        Ok(out)
    }

    /// `|Join(Q)| ≤ AGM(Q, W)` for an optimal covering `W`.
    pub fn agm_check(&self) -> Result<BoundCheck> {
        self.agm_check_for(count_join(self.q))
    }

    /// The AGM bound against a result size computed elsewhere.
    pub fn agm_check_for(&self, n: impl Into<BigUint>) -> Result<BoundCheck> {
        let n = n.into();
        let sizes: BTreeMap<Edge, u64> = self
            .q
            .relations()
            .iter()
            .map(|r| (Edge::new(r.scheme().iter().copied()), r.len() as u64))
            .collect();
        let agm = agm_bound(&self.g, &self.rho_cover, &sizes)?;
        Ok(BoundCheck {
            check: "agm",
            h: Vec::new(),
            j: Vec::new(),
            packing: None,
            holds: agm.admits(&n),
            lhs: n,
            rhs: floor_of(&agm.exact),
        })
    }

    /// `Join(Q)` is the disjoint union of its pieces; `lhs` is the total
    /// piece size, `rhs` the join size.
    pub fn decomposition_check(&self) -> Result<BoundCheck> {
        let rep = decompose_check(self.q, &self.idx)?;
        Ok(BoundCheck {
            check: "decomposition",
            h: Vec::new(),
            j: Vec::new(),
            packing: None,
            holds: rep.holds(),
            lhs: rep.pieces_size.into(),
            rhs: rep.join_size.into(),
        })
    }

    /// `Σ_η m_η ≤ m · λ^{k−2}`.
    pub fn residual_size_check(&self, h: &[Attr], red: &HReduction) -> BoundCheck {
        let lhs: BigUint = red.residuals.iter().map(|r| BigUint::from(r.m_eta())).sum();
        let k = self.g.vertices().len() as u32;
        let rhs = BigUint::from(self.m()) * BigUint::from(self.lambda()).pow(k.saturating_sub(2));
        BoundCheck::integral("residual-size", h, &[], lhs, rhs)
    }

    /// Configurations whose `Join(Q'(η))` differs from
    /// `Join(Q''_isolated(η)) × Join(Q''_light(η))`; must be none.
    pub fn factorization_check(&self, h: &[Attr], red: &HReduction) -> BoundCheck {
        let bad = red
            .residuals
            .iter()
            .zip(&red.reduced)
            .filter(|(rq, rd)| !factorization_holds(rq, rd))
            .count();
        BoundCheck::integral("factorization", h, &[], bad.into(), BigUint::zero())
    }

    fn w_of(&self, w: &WeightFn, j: &[Attr]) -> Result<Rational> {
        let mut s = Rational::zero();
        for &y in j {
            s += vertex_weight(&self.g, w, y)?;
        }
        Ok(s)
    }

    fn require_isolated(red: &HReduction, j: &[Attr]) -> Result<()> {
        if j.is_empty() || j.iter().any(|y| red.split.isolated.binary_search(y).is_err()) {
            return Err(Error::domain(format!("{j:?} is not a nonempty subset of the isolated attributes")));
        }
        Ok(())
    }

    /// `Σ_η |Join(Q''_J(η))| ≤ λ^{|H|−W_J} · m^{|J|}`.
    pub fn isolated_check(&self, h: &[Attr], red: &HReduction, w: &WeightFn, j: &[Attr]) -> Result<BoundCheck> {
        Self::require_isolated(red, j)?;
        if !is_packing(&self.g, w) {
            return Err(Error::domain("weights are not a fractional edge packing"));
        }
        let e = Rational::from_integer(BigInt::from(h.len())) - self.w_of(w, j)?;
        let lhs = red.isolated_sum(j);
        let rhs = floor_power_product(self.lambda(), &e, self.m(), j.len() as u32);
        Ok(BoundCheck::integral("isolated", h, j, lhs, rhs))
    }

    /// `Σ_η |Join(Q''_J(η))| ≤ λ^{2ρ−|J|−|L|} · m^{|J|}`.
    pub fn weak_check(&self, h: &[Attr], red: &HReduction, j: &[Attr]) -> Result<BoundCheck> {
        Self::require_isolated(red, j)?;
        let e = &self.rho * Rational::from_integer(2.into())
            - Rational::from_integer(BigInt::from(j.len() + red.split.l.len()));
        let lhs = red.isolated_sum(j);
        let rhs = floor_power_product(self.lambda(), &e, self.m(), j.len() as u32);
        Ok(BoundCheck::integral("weak", h, j, lhs, rhs))
    }

    /// `Q*`: cross edges at isolated attributes, the heavy values of each
    /// `X ∈ H`, and all values of each isolated `Y`.
    pub fn qstar(&self, red: &HReduction) -> JoinQuery {
        build_qstar_from(self.q, &red.split, &self.idx)
    }

    /// The chain `Σ_η |Join(Q''_I(η))| ≤ |Join(Q*)| ≤ AGM(Q*, W*) ≤
    /// λ^{|H|−W_I} m^{|I|}`, plus validation of `W*`.
    pub fn qstar_checks(&self, h: &[Attr], red: &HReduction, w: &WeightFn) -> Result<Vec<BoundCheck>> {
        if !is_packing(&self.g, w) {
            return Err(Error::domain("weights are not a fractional edge packing"));
        }
        let split = &red.split;
        let qs = self.qstar(red);
        let gs = build_hypergraph(&qs);
        let order: Vec<Attr> = split.h.iter().chain(&split.isolated).copied().collect();
        let joined = count_join_ordered(&qs, &order)?;
        let lhs = red.isolated_sum(&split.isolated);
        let mut out = vec![BoundCheck::integral("qstar-containment", h, &split.isolated, lhs, joined.clone())];

        let ws = qstar_weights(&self.g, &gs, w)?;
        let w_i = self.w_of(w, &split.isolated)?;
        let unary_h: Rational = split.h.iter().map(|&x| ws.get(&Edge::new([x]))).sum();
        let tight = gs
            .vertices()
            .iter()
            .filter(|&&x| !vertex_weight(&gs, &ws, x).is_ok_and(|v| v.is_one()))
            .count();
        let negative = ws.iter().filter(|(_, v)| v.is_negative()).count();
        let sum_ok = unary_h == Rational::from_integer(BigInt::from(split.h.len())) - &w_i;
        let bad = tight + negative + usize::from(!sum_ok);
        out.push(BoundCheck::integral("qstar-cover", h, &split.isolated, bad.into(), BigUint::zero()));
        if bad > 0 || !is_cover(&gs, &ws) {
            return Ok(out);
        }

        let sizes: BTreeMap<Edge, u64> = qs
            .relations()
            .iter()
            .map(|r| (Edge::new(r.scheme().iter().copied()), r.len() as u64))
            .collect();
        let agm = agm_bound(&gs, &ws, &sizes)?;
        out.push(BoundCheck {
            check: "qstar-agm",
            h: h.to_vec(),
            j: split.isolated.clone(),
            packing: None,
            holds: agm.admits(&joined),
            lhs: joined,
            rhs: floor_of(&agm.exact),
        });
        let e = Rational::from_integer(BigInt::from(split.h.len())) - &w_i;
        let iso = Rational::from_integer(BigInt::from(split.isolated.len()));
        let target = RationalPowerProduct::new([(self.lambda() as u128, &e), (self.m() as u128, &iso)]);
        out.push(BoundCheck {
            check: "qstar-rhs",
            h: h.to_vec(),
            j: split.isolated.clone(),
            packing: None,
            holds: le(&agm.exact, &target),
            lhs: floor_of(&agm.exact),
            rhs: floor_of(&target),
        });
        Ok(out)
    }
}

fn build_qstar_from(q: &JoinQuery, split: &Split, idx: &HeavyLightIndex) -> JoinQuery {
    let mut rels: Vec<Relation> = Vec::new();
    for &y in &split.isolated {
        for &ri in &split.cross_at[&y] {
            rels.push(q.relations()[ri].clone());
        }
    }
    for &x in &split.h {
        rels.push(Relation::unary(x, idx.heavy_on(x).iter().copied()));
    }
    for &y in &split.isolated {
        let mut vals = std::collections::BTreeSet::new();
        for r in q.relations().iter().filter(|r| r.column(y).is_some()) {
            vals.extend(r.values_on(y).expect("column exists"));
        }
        rels.push(Relation::unary(y, vals));
    }
    JoinQuery::new(rels).expect("distinct schemes")
}

/// `Q*` for `H` under heavy parameter `idx.lambda`.
pub fn build_qstar(q: &JoinQuery, h: &[Attr], idx: &HeavyLightIndex) -> JoinQuery {
    build_qstar_from(q, &Split::new(q, h), idx)
}

/// `W*`: `W` on the binary edges of `Q*`, and on each unary `{X}` one minus
/// the binary weight at `X`.
pub fn qstar_weights(g: &Hypergraph, gs: &Hypergraph, w: &WeightFn) -> Result<WeightFn> {
    let mut binary: BTreeMap<Attr, Rational> = BTreeMap::new();
    let mut weights = Vec::new();
    for e in gs.edges().iter().filter(|e| e.len() == 2) {
        let we = w.get(e);
        for &x in e.attrs() {
            *binary.entry(x).or_insert_with(Rational::zero) += &we;
        }
        weights.push((e.clone(), we));
    }
    for e in gs.edges().iter().filter(|e| e.len() == 1) {
        let x = e.attrs()[0];
        let b = binary.get(&x).cloned().unwrap_or_else(Rational::zero);
        weights.push((e.clone(), Rational::one() - b));
    }
    debug_assert!(gs.edges().iter().filter(|e| e.len() == 2).all(|e| g.edges().contains(e)));
    WeightFn::new(gs, weights)
}

/// Standalone form of the isolated check for one `(H, J, W)`.
pub fn isolated_bound_check(q: &JoinQuery, h: &[Attr], w: &WeightFn, j: &[Attr], lambda: u64) -> Result<BoundCheck> {
    let suite = BoundSuite::new(q, lambda)?;
    let res = Residualizer::new(q, &suite.idx);
    let red = HReduction::new(q, &res, h)?;
    suite.isolated_check(h, &red, w, j)
}

/// Standalone form of the weak check for one `(H, J)`.
pub fn weak_bound_check(q: &JoinQuery, h: &[Attr], j: &[Attr], lambda: u64) -> Result<BoundCheck> {
    let suite = BoundSuite::new(q, lambda)?;
    let res = Residualizer::new(q, &suite.idx);
    let red = HReduction::new(q, &res, h)?;
    suite.weak_check(h, &red, j)
}
