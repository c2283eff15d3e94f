//! Heavy and light values, configurations and residual queries.
//!
//! A value `x` is heavy on attribute `X` when some relation over `X` holds at
//! least `m/λ` tuples carrying `x` on `X`; otherwise it is light on `X`. Each
//! attribute therefore has at most `λ` heavy values. Every result tuple `u`
//! falls into exactly one piece: `H = {X : u(X) heavy on X}` and `η = u[H]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::relcore::{join_oracle, Attr, JoinQuery, Relation, Tuple, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeavyLightIndex {
    pub lambda: u64,
    pub m: u64,
    /// Values heavy on at least one attribute.
    pub heavy_set: BTreeSet<Value>,
    /// Heavy values of each attribute of the query, sorted; every attribute
    /// has an entry.
    pub per_attribute_heavy: BTreeMap<Attr, Vec<Value>>,
}

impl HeavyLightIndex {
    pub fn heavy_on(&self, x: Attr) -> &[Value] {
        self.per_attribute_heavy.get(&x).map_or(&[], Vec::as_slice)
    }

    pub fn is_heavy_on(&self, x: Attr, v: Value) -> bool {
        self.heavy_on(x).binary_search(&v).is_ok()
    }

    /// `cnt ≥ m/λ`, compared without division.
    pub fn meets_threshold(&self, cnt: u64) -> bool {
        cnt as u128 * self.lambda as u128 >= self.m as u128
    }
}

/// Exact frequency counting for every (relation, attribute, value).
pub fn classify(q: &JoinQuery, lambda: u64) -> Result<HeavyLightIndex> {
    let m = q.input_size() as u64;
    if lambda == 0 || lambda > m.max(1) {
        return Err(Error::domain(format!("heavy parameter {lambda} outside [1, {}]", m.max(1))));
    }
    let mut idx = HeavyLightIndex {
        lambda,
        m,
        heavy_set: BTreeSet::new(),
        per_attribute_heavy: q.attset().into_iter().map(|a| (a, Vec::new())).collect(),
    };
    let mut per_attr: BTreeMap<Attr, BTreeSet<Value>> = BTreeMap::new();
    for r in q.relations() {
        for &x in r.scheme() {
            for (v, cnt) in r.frequencies(x)? {
                if idx.meets_threshold(cnt as u64) {
                    per_attr.entry(x).or_default().insert(v);
                    idx.heavy_set.insert(v);
                }
            }
        }
    }
    for (x, vs) in per_attr {
        idx.per_attribute_heavy.insert(x, vs.into_iter().collect());
    }
    Ok(idx)
}

/// A tuple of heavy values over an attribute set `h` (sorted).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub h: Vec<Attr>,
    pub eta: Vec<Value>,
}

impl Configuration {
    pub fn empty() -> Self {
        Configuration {
            h: Vec::new(),
            eta: Vec::new(),
        }
    }

    pub fn get(&self, x: Attr) -> Option<Value> {
        self.h.binary_search(&x).ok().map(|i| self.eta[i])
    }

    pub fn tuple(&self) -> Tuple {
        Tuple::new(self.h.iter().copied().zip(self.eta.iter().copied())).expect("sorted distinct attributes")
    }
}

/// Every subset of `attrs` (sorted), in bitmask order.
pub fn attr_subsets(attrs: &[Attr]) -> Vec<Vec<Attr>> {
    assert!(attrs.len() < 32, "too many attributes to enumerate subsets");
    (0u32..1 << attrs.len())
        .map(|mask| subset_of(attrs, mask))
        .collect()
}

pub fn subset_of(attrs: &[Attr], mask: u32) -> Vec<Attr> {
    (0..attrs.len()).filter(|i| mask >> i & 1 == 1).map(|i| attrs[i]).collect()
}

/// `config(Q, H)` in lexicographic order of `η`.
pub fn enumerate_configs(q: &JoinQuery, h: &[Attr], idx: &HeavyLightIndex) -> Result<Vec<Configuration>> {
    let attset = q.attset();
    let mut h = h.to_vec();
    h.sort_unstable();
    h.dedup();
    if let Some(&x) = h.iter().find(|x| attset.binary_search(x).is_err()) {
        return Err(Error::UnknownAttribute(x));
    }
    let mut out = vec![Configuration {
        h: h.clone(),
        eta: Vec::new(),
    }];
    for &x in &h {
        let vals = idx.heavy_on(x);
        out = out
            .into_iter()
            .flat_map(|c| {
                vals.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.eta.push(v);
                    c
                })
            })
            .collect();
    }
    Ok(out)
}

/// `R'_e(η)` for one active edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualRelation {
    /// Position of `R_e` in the query.
    pub edge: usize,
    pub relation: Relation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualQuery {
    pub origin: Configuration,
    /// One entry per active edge, in query order.
    pub relations: Vec<ResidualRelation>,
    /// False iff some inactive edge `e ⊆ H` has `η[e] ∉ R_e`.
    pub feasible: bool,
}

impl ResidualQuery {
    /// `m_η`: total size of the residual relations.
    pub fn m_eta(&self) -> usize {
        self.relations.iter().map(|r| r.relation.len()).sum()
    }

    /// `Q'(η)` as a simple query: residuals sharing a scheme (several cross
    /// edges meeting at one light attribute) are intersected.
    pub fn query(&self) -> JoinQuery {
        let mut by_scheme: BTreeMap<Vec<Attr>, Relation> = BTreeMap::new();
        for r in &self.relations {
            by_scheme
                .entry(r.relation.scheme().to_vec())
                .and_modify(|acc| {
                    let other = &r.relation;
                    *acc = acc.filter(|row| other.contains_row(row));
                })
                .or_insert_with(|| r.relation.clone());
        }
        JoinQuery::new(by_scheme.into_values().collect()).expect("schemes are distinct")
    }

    pub fn relation_for(&self, edge: usize) -> Option<&Relation> {
        self.relations.iter().find(|r| r.edge == edge).map(|r| &r.relation)
    }
}

/// Builds residual queries quickly by indexing every relation column.
pub struct Residualizer<'a> {
    q: &'a JoinQuery,
    idx: &'a HeavyLightIndex,
    /// `by_value[r][c][v]`: rows of relation `r` with value `v` in column `c`.
    by_value: Vec<Vec<HashMap<Value, Vec<usize>>>>,
    /// Rows of each relation whose values are all light.
    light_rows: Vec<Relation>,
}

impl<'a> Residualizer<'a> {
    pub fn new(q: &'a JoinQuery, idx: &'a HeavyLightIndex) -> Self {
        let by_value = q
            .relations()
            .iter()
            .map(|r| {
                (0..r.arity())
                    .map(|c| {
                        let mut m: HashMap<Value, Vec<usize>> = HashMap::new();
                        for (i, row) in r.rows().iter().enumerate() {
                            m.entry(row[c]).or_default().push(i);
                        }
                        m
                    })
                    .collect()
            })
            .collect();
        let light_rows = q
            .relations()
            .iter()
            .map(|r| {
                let scheme = r.scheme().to_vec();
                r.filter(|row| scheme.iter().zip(row).all(|(&x, &v)| !idx.is_heavy_on(x, v)))
            })
            .collect();
        Residualizer {
            q,
            idx,
            by_value,
            light_rows,
        }
    }

    pub fn index(&self) -> &HeavyLightIndex {
        self.idx
    }

    pub fn query(&self) -> &JoinQuery {
        self.q
    }

    /// `R'_e(η)` for relation `ri`, or `None` if the edge is inactive.
    pub fn residual_relation(&self, ri: usize, cfg: &Configuration) -> Option<Relation> {
        let r = &self.q.relations()[ri];
        let scheme = r.scheme();
        let bound: Vec<(usize, Value)> = scheme
            .iter()
            .enumerate()
            .filter_map(|(c, &x)| cfg.get(x).map(|v| (c, v)))
            .collect();
        if bound.len() == scheme.len() {
            return None;
        }
        let free: Vec<Attr> = scheme.iter().copied().filter(|&x| cfg.get(x).is_none()).collect();
        if bound.is_empty() {
            return Some(self.light_rows[ri].clone());
        }
        let (c0, v0) = bound[0];
        let rows = self.by_value[ri][c0].get(&v0).map_or(&[][..], Vec::as_slice);
        let out = rows.iter().filter_map(|&i| {
            let row = &r.rows()[i];
            let ok = bound.iter().all(|&(c, v)| row[c] == v)
                && scheme
                    .iter()
                    .zip(row)
                    .all(|(&x, &v)| cfg.get(x).is_some() || !self.idx.is_heavy_on(x, v));
            ok.then(|| {
                scheme
                    .iter()
                    .zip(row)
                    .filter(|(x, _)| cfg.get(**x).is_none())
                    .map(|(_, &v)| v)
                    .collect::<Vec<Value>>()
            })
        });
        Some(Relation::new(free, out.collect::<Vec<_>>()).expect("projection fits scheme"))
    }

    /// Whether relation `ri` (inactive under `cfg`) contains `η[e]`.
    pub fn witnessed(&self, ri: usize, cfg: &Configuration) -> bool {
        let r = &self.q.relations()[ri];
        let row: Vec<Value> = r.scheme().iter().map(|&x| cfg.get(x).unwrap()).collect();
        r.contains_row(&row)
    }

    pub fn residual(&self, cfg: &Configuration) -> ResidualQuery {
        let mut relations = Vec::new();
        let mut feasible = true;
        for ri in 0..self.q.len() {
            match self.residual_relation(ri, cfg) {
                Some(relation) => relations.push(ResidualRelation { edge: ri, relation }),
                None => feasible &= self.witnessed(ri, cfg),
            }
        }
        ResidualQuery {
            origin: cfg.clone(),
            relations,
            feasible,
        }
    }
}

pub fn residual_query(q: &JoinQuery, cfg: &Configuration, idx: &HeavyLightIndex) -> ResidualQuery {
    Residualizer::new(q, idx).residual(cfg)
}

/// Lifts a tuple of `Join(Q'(η))` (over `scheme`) to a tuple over `attset`.
pub fn extend_with(attset: &[Attr], scheme: &[Attr], row: &[Value], cfg: &Configuration) -> Vec<Value> {
    attset
        .iter()
        .map(|&x| match cfg.get(x) {
            Some(v) => v,
            None => row[scheme.binary_search(&x).expect("attribute in residual scheme")],
        })
        .collect()
}

/// Outcome of checking `Join(Q) = ⋃_H ⋃_η Join(Q'(η)) × {η}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompositionReport {
    pub join_size: usize,
    /// Total size of all pieces, counting repeats.
    pub pieces_size: usize,
    pub nonempty_pieces: usize,
    pub disjoint: bool,
    pub equal: bool,
    pub counterexample: Option<String>,
}

impl DecompositionReport {
    pub fn holds(&self) -> bool {
        self.disjoint && self.equal
    }
}

/// Evaluates every piece with the oracle and compares the union against
/// `Join(Q)`.
pub fn decompose_check(q: &JoinQuery, idx: &HeavyLightIndex) -> Result<DecompositionReport> {
    let attset = q.attset();
    let res = Residualizer::new(q, idx);
    let mut seen: BTreeMap<Vec<Value>, Configuration> = BTreeMap::new();
    let mut pieces_size = 0;
    let mut nonempty_pieces = 0;
    let mut counterexample = None;
    let mut disjoint = true;
    for h in attr_subsets(&attset) {
        for cfg in enumerate_configs(q, &h, idx)? {
            let rq = res.residual(&cfg);
            if !rq.feasible || rq.relations.iter().any(|r| r.relation.is_empty()) {
                continue;
            }
            let j = join_oracle(&rq.query());
            if !j.is_empty() {
                nonempty_pieces += 1;
            }
            for row in j.rows() {
                pieces_size += 1;
                let full = extend_with(&attset, j.scheme(), row, &cfg);
                if let Some(prev) = seen.insert(full.clone(), cfg.clone()) {
                    disjoint = false;
                    counterexample.get_or_insert_with(|| {
                        format!("{full:?} produced under both {prev:?} and {cfg:?}")
                    });
                }
            }
        }
    }
    let truth = join_oracle(q);
    let union: Vec<Vec<Value>> = seen.into_keys().collect();
    let equal = union.as_slice() == truth.rows();
    if !equal && counterexample.is_none() {
        let u: BTreeSet<&Vec<Value>> = union.iter().collect();
        let t: BTreeSet<&Vec<Value>> = truth.rows().iter().collect();
        counterexample = Some(match t.difference(&u).next() {
            Some(missing) => format!("{missing:?} is in Join(Q) but in no piece"),
            None => format!("{:?} is in a piece but not in Join(Q)", u.difference(&t).next().unwrap()),
        });
    }
    Ok(DecompositionReport {
        join_size: truth.len(),
        pieces_size,
        nonempty_pieces,
        disjoint,
        equal,
        counterexample,
    })
}

#[cfg(test)]
mod tests;
