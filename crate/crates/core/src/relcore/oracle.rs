//! Desk-scale ground truth: a backtracking join over per-relation prefix
//! indexes, plus cartesian products and semi-join filters.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::relation::{Attr, JoinQuery, Relation, Value};
use crate::error::{Error, Result};

/// Per-relation index: for each level (attribute position in the global
/// order), maps the values of the earlier attributes to the sorted candidate
/// values of this one.
struct PrefixIndex {
    /// Positions of this relation's attributes in the global order, ascending.
    positions: Vec<usize>,
    levels: Vec<HashMap<Vec<Value>, Vec<Value>>>,
}

impl PrefixIndex {
    fn build(rel: &Relation, pos_of: &HashMap<Attr, usize>) -> Self {
        let mut cols: Vec<(usize, usize)> = rel
            .scheme()
            .iter()
            .enumerate()
            .map(|(c, a)| (pos_of[a], c))
            .collect();
        cols.sort_unstable();
        let positions = cols.iter().map(|&(p, _)| p).collect();
        let mut rows: Vec<Vec<Value>> = rel
            .rows()
            .iter()
            .map(|r| cols.iter().map(|&(_, c)| r[c]).collect())
            .collect();
        rows.sort_unstable();
        let mut levels: Vec<HashMap<Vec<Value>, Vec<Value>>> =
            (0..cols.len()).map(|_| HashMap::new()).collect();
        for row in &rows {
            for (j, level) in levels.iter_mut().enumerate() {
                let list = level.entry(row[..j].to_vec()).or_default();
                if list.last() != Some(&row[j]) {
                    list.push(row[j]);
                }
            }
        }
        PrefixIndex { positions, levels }
    }

    fn candidates(&self, level: usize, bound: &[Value]) -> Option<&Vec<Value>> {
        let prefix: Vec<Value> = self.positions[..level].iter().map(|&p| bound[p]).collect();
        self.levels[level].get(&prefix)
    }
}

struct Plan {
    order: Vec<Attr>,
    indexes: Vec<PrefixIndex>,
    /// For each depth, the (relation, level) pairs that constrain that attribute.
    at_depth: Vec<Vec<(usize, usize)>>,
    /// `independent[d]`: no relation has two attributes at positions >= d.
    independent: Vec<bool>,
}

impl Plan {
    fn new(q: &JoinQuery, order: Vec<Attr>) -> Self {
        let pos_of: HashMap<Attr, usize> = order.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let indexes: Vec<PrefixIndex> = q
            .relations()
            .iter()
            .map(|r| PrefixIndex::build(r, &pos_of))
            .collect();
        let mut at_depth = vec![Vec::new(); order.len()];
        for (ri, ix) in indexes.iter().enumerate() {
            for (level, &p) in ix.positions.iter().enumerate() {
                at_depth[p].push((ri, level));
            }
        }
        let independent = (0..=order.len())
            .map(|d| {
                indexes
                    .iter()
                    .all(|ix| ix.positions.iter().filter(|&&p| p >= d).count() <= 1)
            })
            .collect();
        Plan {
            order,
            indexes,
            at_depth,
            independent,
        }
    }

    /// Candidate values for the attribute at `depth` given the bound prefix.
    fn candidates(&self, depth: usize, bound: &[Value]) -> Vec<Value> {
        let mut lists: Vec<&Vec<Value>> = Vec::with_capacity(self.at_depth[depth].len());
        for &(ri, level) in &self.at_depth[depth] {
            match self.indexes[ri].candidates(level, bound) {
                Some(l) => lists.push(l),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let Some((first, rest)) = lists.split_first() else {
            return Vec::new();
        };
        first
            .iter()
            .copied()
            .filter(|v| rest.iter().all(|l| l.binary_search(v).is_ok()))
            .collect()
    }

    fn enumerate(&self, depth: usize, bound: &mut Vec<Value>, out: &mut Vec<Vec<Value>>) {
        if depth == self.order.len() {
            out.push(bound.clone());
            return;
        }
        for v in self.candidates(depth, bound) {
            bound[depth] = v;
            self.enumerate(depth + 1, bound, out);
        }
    }

    fn count(&self, depth: usize, bound: &mut Vec<Value>) -> BigUint {
        if depth == self.order.len() {
            return BigUint::one();
        }
        if self.independent[depth] {
            let mut prod = BigUint::one();
            for d in depth..self.order.len() {
                let n = self.candidates(d, bound).len();
                if n == 0 {
                    return BigUint::zero();
                }
                prod *= n;
            }
            return prod;
        }
        let mut total = BigUint::zero();
        for v in self.candidates(depth, bound) {
            bound[depth] = v;
            total += self.count(depth + 1, bound);
        }
        total
    }
}

/// A greedy attribute order: start at the highest-degree attribute and keep
/// picking the attribute sharing the most relations with those already chosen.
pub fn join_order(q: &JoinQuery) -> Vec<Attr> {
    let attrs = q.attset();
    let degree = |a: Attr| q.relations().iter().filter(|r| r.scheme().contains(&a)).count();
    let mut chosen: Vec<Attr> = Vec::with_capacity(attrs.len());
    let mut left: BTreeSet<Attr> = attrs.iter().copied().collect();
    while !left.is_empty() {
        let best = *left
            .iter()
            .max_by_key(|&&a| {
                let links = q
                    .relations()
                    .iter()
                    .filter(|r| r.scheme().contains(&a))
                    .filter(|r| r.scheme().iter().any(|b| chosen.contains(b)))
                    .count();
                // Prefer connectivity, then degree, then the smallest id.
                (links, degree(a), std::cmp::Reverse(a))
            })
            .unwrap();
        left.remove(&best);
        chosen.push(best);
    }
    chosen
}

fn check_order(q: &JoinQuery, order: &[Attr]) -> Result<()> {
    let mut a = order.to_vec();
    a.sort_unstable();
    if a != q.attset() {
        return Err(Error::domain("join order must be a permutation of attset(Q)"));
    }
    Ok(())
}

/// `Join(Q)`: every tuple over `attset(Q)` whose projection onto each scheme
/// lies in the corresponding relation. The empty query joins to the single
/// empty tuple.
pub fn join_oracle(q: &JoinQuery) -> Relation {
    join_oracle_ordered(q, &join_order(q)).expect("greedy order is a permutation")
}

pub fn join_oracle_ordered(q: &JoinQuery, order: &[Attr]) -> Result<Relation> {
    check_order(q, order)?;
    let plan = Plan::new(q, order.to_vec());
    let mut out = Vec::new();
    if q.relations().iter().all(|r| !r.is_empty()) {
        let mut bound = vec![0; order.len()];
        plan.enumerate(0, &mut bound, &mut out);
    }
    // Re-align from join order to the sorted scheme.
    let scheme = q.attset();
    let perm: Vec<usize> = scheme
        .iter()
        .map(|a| order.iter().position(|b| b == a).unwrap())
        .collect();
    let rows = out
        .into_iter()
        .map(|r| perm.iter().map(|&i| r[i]).collect())
        .collect();
    Ok(Relation::from_rows(scheme, rows))
}

/// `|Join(Q)|` without materializing the result once the remaining
/// attributes are mutually unconstrained.
pub fn count_join(q: &JoinQuery) -> BigUint {
    count_join_ordered(q, &join_order(q)).expect("greedy order is a permutation")
}

pub fn count_join_ordered(q: &JoinQuery, order: &[Attr]) -> Result<BigUint> {
    check_order(q, order)?;
    if q.relations().iter().any(Relation::is_empty) {
        return Ok(BigUint::zero());
    }
    let plan = Plan::new(q, order.to_vec());
    let mut bound = vec![0; order.len()];
    Ok(plan.count(0, &mut bound))
}

/// `R_1 × ... × R_t` for pairwise disjoint schemes.
pub fn cartesian_oracle(rs: &[Relation]) -> Result<Relation> {
    let mut seen = BTreeSet::new();
    for r in rs {
        for &a in r.scheme() {
            if !seen.insert(a) {
                return Err(Error::domain(format!(
                    "cartesian product of overlapping schemes (attribute {a:?})"
                )));
            }
        }
    }
    let q = JoinQuery::new(rs.to_vec())?;
    Ok(join_oracle(&q))
}

/// The tuples of `r` whose value on `x` lies in `allowed`.
pub fn semijoin_filter(r: &Relation, x: Attr, allowed: &BTreeSet<Value>) -> Result<Relation> {
    let c = r.column(x).ok_or(Error::UnknownAttribute(x))?;
    Ok(r.filter(|row| allowed.contains(&row[c])))
}
