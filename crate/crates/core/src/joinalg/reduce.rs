use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::relcore::{cartesian_oracle, join_oracle, Attr, JoinQuery, Relation, Value};
use crate::taxonomy::{Configuration, ResidualQuery};

/// How a choice of heavy attributes `H` splits the query.
///
/// `L` is the rest of the attributes. A light edge has both endpoints in
/// `L`, a cross edge exactly one, an inactive edge none. Border attributes
/// are the attributes of `L` on some cross edge; isolated ones are border
/// attributes with no light edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub h: Vec<Attr>,
    pub l: Vec<Attr>,
    /// Relation indices, in query order.
    pub cross: Vec<usize>,
    pub light: Vec<usize>,
    pub inactive: Vec<usize>,
    pub border: Vec<Attr>,
    pub isolated: Vec<Attr>,
    /// Cross edges at each border attribute.
    pub cross_at: BTreeMap<Attr, Vec<usize>>,
}

impl Split {
    pub fn new(q: &JoinQuery, h: &[Attr]) -> Self {
        let h: BTreeSet<Attr> = h.iter().copied().collect();
        let l: Vec<Attr> = q.attset().into_iter().filter(|x| !h.contains(x)).collect();
        let mut s = Split {
            h: h.iter().copied().collect(),
            l,
            cross: Vec::new(),
            light: Vec::new(),
            inactive: Vec::new(),
            border: Vec::new(),
            isolated: Vec::new(),
            cross_at: BTreeMap::new(),
        };
        let mut on_light = BTreeSet::new();
        for (ri, r) in q.relations().iter().enumerate() {
            let free: Vec<Attr> = r.scheme().iter().copied().filter(|x| !h.contains(x)).collect();
            if free.is_empty() {
                s.inactive.push(ri);
            } else if free.len() == r.arity() {
                s.light.push(ri);
                on_light.extend(free);
            } else {
                s.cross.push(ri);
                for y in free {
                    s.cross_at.entry(y).or_default().push(ri);
                }
            }
        }
        s.border = s.cross_at.keys().copied().collect();
        s.isolated = s.border.iter().copied().filter(|y| !on_light.contains(y)).collect();
        s
    }

    /// `L ∖ I`.
    pub fn light_attrs(&self) -> Vec<Attr> {
        self.l.iter().copied().filter(|y| self.isolated.binary_search(y).is_err()).collect()
    }

    pub fn is_border(&self, y: Attr) -> bool {
        self.cross_at.contains_key(&y)
    }

    /// The free attribute of cross edge `ri`.
    pub fn cross_attr(&self, q: &JoinQuery, ri: usize) -> Attr {
        *q.relations()[ri]
            .scheme()
            .iter()
            .find(|x| self.h.binary_search(x).is_err())
            .expect("cross edge has a light endpoint")
    }
}

/// `Q''(η)`: the residual query after the semi-join reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedQuery {
    pub origin: Configuration,
    /// `R''_X(η)` for every isolated `X`.
    pub isolated: BTreeMap<Attr, Relation>,
    /// `R''_e(η)` for every light edge, keyed by relation index.
    pub light_rels: BTreeMap<usize, Relation>,
    pub l_set: Vec<Attr>,
    pub i_set: Vec<Attr>,
}

impl ReducedQuery {
    pub fn isolated_query(&self) -> JoinQuery {
        JoinQuery::new(self.isolated.values().cloned().collect()).expect("distinct unary schemes")
    }

    pub fn light_query(&self) -> JoinQuery {
        JoinQuery::new(self.light_rels.values().cloned().collect()).expect("distinct schemes")
    }

    /// `∏_{X ∈ J} |R''_X(η)|`.
    pub fn isolated_count(&self, j: &[Attr]) -> u128 {
        j.iter().map(|x| self.isolated[x].len() as u128).product()
    }

    /// `Join(Q''(η))`, computed as `Join(Q''_isolated) × Join(Q''_light)`.
    pub fn join(&self) -> Relation {
        let iso = cartesian_oracle(&self.isolated.values().cloned().collect::<Vec<_>>()).expect("disjoint");
        let light = join_oracle(&self.light_query());
        product(iso, light)
    }
}

/// `a × b` for disjoint schemes, either of which may be empty.
fn product(a: Relation, b: Relation) -> Relation {
    let unit = |r: &Relation, other: Relation| {
        if r.is_empty() {
            Relation::empty(other.scheme().to_vec()).expect("valid scheme")
        } else {
            other
        }
    };
    match (a.arity(), b.arity()) {
        (0, _) => unit(&a, b),
        (_, 0) => unit(&b, a),
        _ => cartesian_oracle(&[a, b]).expect("I and L ∖ I are disjoint"),
    }
}

/// `R''_X(η)` for every border attribute.
fn border_values(split: &Split, q: &JoinQuery, rq: &ResidualQuery) -> BTreeMap<Attr, BTreeSet<Value>> {
    let mut out = BTreeMap::new();
    for (&y, edges) in &split.cross_at {
        let mut acc: Option<BTreeSet<Value>> = None;
        for &ri in edges {
            let vals: BTreeSet<Value> = rq
                .relation_for(ri)
                .expect("cross edges are active")
                .rows()
                .iter()
                .map(|r| r[0])
                .collect();
            acc = Some(match acc {
                None => vals,
                Some(a) => a.intersection(&vals).copied().collect(),
            });
        }
        debug_assert!(edges.iter().all(|&ri| split.cross_attr(q, ri) == y));
        out.insert(y, acc.unwrap_or_default());
    }
    out
}

/// The semi-join reduction, applied whether or not `rq` is feasible.
pub(crate) fn reduce(split: &Split, q: &JoinQuery, rq: &ResidualQuery) -> ReducedQuery {
    let border = border_values(split, q, rq);
    let isolated = split
        .isolated
        .iter()
        .map(|&y| (y, Relation::unary(y, border[&y].iter().copied())))
        .collect();
    let light_rels = split
        .light
        .iter()
        .map(|&ri| {
            let r = rq.relation_for(ri).expect("light edges are active");
            let scheme = r.scheme().to_vec();
            let kept = r.filter(|row| {
                scheme
                    .iter()
                    .zip(row)
                    .all(|(y, v)| border.get(y).is_none_or(|s| s.contains(v)))
            });
            (ri, kept)
        })
        .collect();
    ReducedQuery {
        origin: rq.origin.clone(),
        isolated,
        light_rels,
        l_set: split.l.clone(),
        i_set: split.isolated.clone(),
    }
}

/// Builds `Q''(η)` from a feasible residual query.
pub fn semijoin_reduce(q: &JoinQuery, rq: &ResidualQuery) -> Result<ReducedQuery> {
    if !rq.feasible {
        return Err(Error::domain("semi-join reduction of an infeasible configuration"));
    }
    Ok(reduce(&Split::new(q, &rq.origin.h), q, rq))
}

/// Whether `Join(Q'(η)) = Join(Q''_isolated(η)) × Join(Q''_light(η))`,
/// both sides by the oracle.
pub fn factorization_holds(rq: &ResidualQuery, reduced: &ReducedQuery) -> bool {
    let lhs = join_oracle(&rq.query());
    let rhs = reduced.join();
    lhs.scheme() == rhs.scheme() && lhs.rows() == rhs.rows()
}
