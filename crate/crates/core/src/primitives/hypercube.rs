use std::collections::BTreeMap;

use super::{grid_cells, Placement};
use crate::error::{Error, Result};
use crate::mpcsim::bucket;
use crate::relcore::{Attr, JoinQuery, Value};

/// Number of machines along each attribute's axis.
pub type ShareVector = BTreeMap<Attr, usize>;

/// A grid with one axis per attribute; attribute `X` hashes its values into
/// `share(X)` buckets with an independent seeded hash.
#[derive(Clone, Debug)]
pub struct HypercubePlan {
    pub attrs: Vec<Attr>,
    pub shares: Vec<usize>,
    pub seed: u64,
    /// Axis of each column of each input relation.
    axes: Vec<Vec<usize>>,
}

impl HypercubePlan {
    pub fn new(q: &JoinQuery, shares: &ShareVector, seed: u64) -> Result<Self> {
        let schemes: Vec<Vec<Attr>> = q.relations().iter().map(|r| r.scheme().to_vec()).collect();
        Self::for_schemes(&schemes, shares, seed)
    }

    pub fn for_schemes(schemes: &[Vec<Attr>], shares: &ShareVector, seed: u64) -> Result<Self> {
        let attrs: Vec<Attr> = shares.keys().copied().collect();
        if shares.values().any(|&s| s == 0) {
            return Err(Error::domain("shares must be positive"));
        }
        let mut axes = Vec::with_capacity(schemes.len());
        for s in schemes {
            let mut row = Vec::with_capacity(s.len());
            for a in s {
                row.push(attrs.binary_search(a).map_err(|_| Error::UnknownAttribute(*a))?);
            }
            axes.push(row);
        }
        Ok(HypercubePlan {
            shares: shares.values().copied().collect(),
            attrs,
            seed,
            axes,
        })
    }

    pub fn coordinate(&self, axis: usize, v: Value) -> usize {
        bucket(self.seed, self.attrs[axis].0 as u64, v, self.shares[axis])
    }
}

impl Placement for HypercubePlan {
    fn machines(&self) -> usize {
        self.shares.iter().product()
    }

    fn place(&self, input: usize, _id: u64, tuple: &[Value], out: &mut Vec<usize>) {
        let mut fixed = vec![None; self.shares.len()];
        for (&axis, &v) in self.axes[input].iter().zip(tuple) {
            fixed[axis] = Some(self.coordinate(axis, v));
        }
        grid_cells(&self.shares, &fixed, out);
    }
}

/// Whether every value of every attribute `X` occurs in at most
/// `c_factor · m / share(X)` tuples of each relation, `m` the input size.
pub fn check_skew_free(q: &JoinQuery, shares: &ShareVector, c_factor: u64) -> bool {
    let m = q.input_size() as u128;
    q.relations().iter().all(|r| {
        r.scheme().iter().all(|&x| {
            let share = shares.get(&x).copied().unwrap_or(1) as u128;
            r.frequencies(x)
                .unwrap()
                .values()
                .all(|&f| f as u128 * share <= c_factor as u128 * m)
        })
    })
}
