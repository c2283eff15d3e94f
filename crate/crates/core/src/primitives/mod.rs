//! One-round building blocks: the deterministic grid cartesian product, the
//! composition of two one-round algorithms, and the share-based hypercube
//! join for skew-free inputs.
//!
//! Each block is a [`Placement`]: a rule mapping an input tuple to the set of
//! machines that must receive it. Executing a placement is one round of
//! routing followed by a local join of whatever each machine received.

mod grid;
mod hypercube;

use crate::error::{Error, Result};
use crate::mpcsim::{input_tag, Cluster, Tag};
use crate::relcore::{join_oracle, Attr, JoinQuery, Relation, Value};

pub use grid::{plan_grid, GridPlan};
pub use hypercube::{check_skew_free, HypercubePlan, ShareVector};

/// Where tuples go.
pub trait Placement: Sync {
    /// Size of the machine slice the placement addresses.
    fn machines(&self) -> usize;

    /// Appends to `out` every machine in `0..machines()` that must receive
    /// `tuple`, the tuple with id `id` of input relation `input`.
    fn place(&self, input: usize, id: u64, tuple: &[Value], out: &mut Vec<usize>);
}

impl<P: Placement + ?Sized> Placement for &P {
    fn machines(&self) -> usize {
        (**self).machines()
    }

    fn place(&self, input: usize, id: u64, tuple: &[Value], out: &mut Vec<usize>) {
        (**self).place(input, id, tuple, out)
    }
}

/// Runs `a` on every row and `b` on every column of a `b.machines()` by
/// `a.machines()` matrix. Inputs `0..split` belong to `a`, the rest to `b`.
/// Machine `(row j, column i)` has index `j * a.machines() + i`.
pub struct Composed<A, B> {
    pub a: A,
    pub b: B,
    pub split: usize,
}

impl<A: Placement, B: Placement> Composed<A, B> {
    pub fn new(a: A, b: B, split: usize) -> Self {
        Composed { a, b, split }
    }
}

impl<A: Placement, B: Placement> Placement for Composed<A, B> {
    fn machines(&self) -> usize {
        self.a.machines() * self.b.machines()
    }

    fn place(&self, input: usize, id: u64, tuple: &[Value], out: &mut Vec<usize>) {
        let (p1, p2) = (self.a.machines(), self.b.machines());
        let mut inner = Vec::new();
        if input < self.split {
            // Every row runs the same instance of `a`.
            self.a.place(input, id, tuple, &mut inner);
            for j in 0..p2 {
                out.extend(inner.iter().map(|&i| j * p1 + i));
            }
        } else {
            self.b.place(input - self.split, id, tuple, &mut inner);
            for &j in &inner {
                out.extend((0..p1).map(|i| j * p1 + i));
            }
        }
    }
}

/// Appends every machine of a mixed-radix grid whose coordinates agree with
/// `fixed` where it is `Some`. Axis 0 varies fastest.
pub(crate) fn grid_cells(radix: &[usize], fixed: &[Option<usize>], out: &mut Vec<usize>) {
    fn rec(d: usize, base: usize, stride: usize, radix: &[usize], fixed: &[Option<usize>], out: &mut Vec<usize>) {
        if d == radix.len() {
            out.push(base);
            return;
        }
        match fixed[d] {
            Some(x) => rec(d + 1, base + x * stride, stride * radix[d], radix, fixed, out),
            None => {
                for x in 0..radix[d] {
                    rec(d + 1, base + x * stride, stride * radix[d], radix, fixed, out);
                }
            }
        }
    }
    rec(0, 0, 1, radix, fixed, out);
}

/// Joins fragments received by one machine. Fragment `i` holds the
/// concatenated rows of a relation over `schemes[i]`.
pub fn join_fragments(schemes: &[Vec<Attr>], words: &[&[Value]]) -> Result<Relation> {
    let mut rels = Vec::with_capacity(schemes.len());
    for (s, w) in schemes.iter().zip(words) {
        let k = s.len().max(1);
        rels.push(Relation::new(s.clone(), w.chunks(k).map(<[Value]>::to_vec))?);
    }
    Ok(join_oracle(&JoinQuery::new(rels)?))
}

/// Stream used by the standalone drivers below; `scope` is the input index.
pub const ROUTE_STREAM: u32 = 10;

/// Id of the `rank`-th row of a relation whose rows start at global position
/// `base` of the round-robin input order, as stored on `machine`.
pub fn round_robin_id(machine: usize, p: usize, base: usize, rank: usize) -> u64 {
    let first = base + (machine + p - base % p) % p;
    (first + rank * p - base) as u64
}

/// One routing round under `placement` over machines `0..placement.machines()`,
/// then a local join on every machine. The input must be laid out by
/// [`Cluster::init`] from `q`; results are emitted over `attset(q)`.
pub fn one_round_join<P: Placement>(c: &mut Cluster, label: &str, q: &JoinQuery, placement: &P) -> Result<Vec<u64>> {
    let received = route_round(c, label, q, placement)?;
    let schemes: Vec<Vec<Attr>> = q.relations().iter().map(|r| r.scheme().to_vec()).collect();
    let failed = std::sync::Mutex::new(None);
    c.compute_local(|ctx| {
        let words: Vec<Vec<Value>> = (0..schemes.len())
            .map(|ri| ctx.take(&Tag::new(ROUTE_STREAM, ri as u64, 0)))
            .collect();
        if words.iter().any(Vec::is_empty) {
            return;
        }
        let refs: Vec<&[Value]> = words.iter().map(Vec::as_slice).collect();
        match join_fragments(&schemes, &refs) {
            Ok(j) => j.rows().iter().for_each(|r| ctx.emit(r.clone())),
            Err(e) => *failed.lock().unwrap() = Some(e),
        }
    });
    match failed.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(received),
    }
}

/// The routing round of [`one_round_join`] alone. Fragment `i` is left under
/// `Tag::new(ROUTE_STREAM, i, 0)` on every machine.
pub fn route_round<P: Placement>(c: &mut Cluster, label: &str, q: &JoinQuery, placement: &P) -> Result<Vec<u64>> {
    if placement.machines() > c.p() {
        return Err(Error::domain(format!(
            "placement needs {} machines, cluster has {}",
            placement.machines(),
            c.p()
        )));
    }
    let schemes: Vec<Vec<Attr>> = q.relations().iter().map(|r| r.scheme().to_vec()).collect();
    let mut bases = Vec::with_capacity(schemes.len());
    let mut acc = 0;
    for r in q.relations() {
        bases.push(acc);
        acc += r.len();
    }
    let received = c.run_round(label, |ctx, out| {
        let mut dests = Vec::new();
        for (ri, s) in schemes.iter().enumerate() {
            let words = ctx.take(&input_tag(ri));
            for (rank, row) in words.chunks(s.len()).enumerate() {
                let id = round_robin_id(ctx.id, ctx.p, bases[ri], rank);
                dests.clear();
                placement.place(ri, id, row, &mut dests);
                for &d in &dests {
                    out.send(d, Tag::new(ROUTE_STREAM, ri as u64, 0), row);
                }
            }
        }
    })?;
    Ok(received)
}

/// `R_1 × ... × R_t` with the grid of [`plan_grid`] over all `p` machines.
/// Tuple ids follow the round-robin input order.
pub fn grid_cartesian(c: &mut Cluster, rels: &[Relation]) -> Result<GridPlan> {
    let q = JoinQuery::new(rels.to_vec())?;
    let attrs = q.attset();
    if attrs.len() != rels.iter().map(Relation::arity).sum::<usize>() {
        return Err(Error::domain("cartesian product needs disjoint schemes"));
    }
    let plan = plan_grid(&rels.iter().map(|r| r.len() as u64).collect::<Vec<_>>(), c.p())?;
    one_round_join(c, "grid", &q, &plan)?;
    Ok(plan)
}

/// The share-based hypercube join over all machines; `∏ shares` must equal
/// the cluster size.
pub fn hypercube_join(c: &mut Cluster, q: &JoinQuery, shares: &ShareVector, seed: u64) -> Result<HypercubePlan> {
    let plan = HypercubePlan::new(q, shares, seed)?;
    if plan.machines() != c.p() {
        return Err(Error::domain(format!(
            "shares address {} machines, cluster has {}",
            plan.machines(),
            c.p()
        )));
    }
    one_round_join(c, "hypercube", q, &plan)?;
    Ok(plan)
}

/// `Join(q1) × Join(q2)` by running `a` for `q1` on rows and `b` for `q2` on
/// columns. The cluster must hold `q1`'s relations followed by `q2`'s and
/// have exactly `a.machines() * b.machines()` machines.
pub fn compose_products<A: Placement, B: Placement>(
    c: &mut Cluster,
    q1: &JoinQuery,
    a: A,
    q2: &JoinQuery,
    b: B,
) -> Result<()> {
    let composed = Composed::new(a, b, q1.len());
    if composed.machines() != c.p() {
        return Err(Error::domain(format!(
            "composition needs {} machines, cluster has {}",
            composed.machines(),
            c.p()
        )));
    }
    let all: Vec<Relation> = q1.relations().iter().chain(q2.relations()).cloned().collect();
    let q = JoinQuery::new(all)?;
    one_round_join(c, "compose", &q, &composed)?;
    Ok(())
}

#[cfg(test)]
mod tests;
