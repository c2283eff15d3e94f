//! Two-phase primal simplex over exact rationals with Bland's rule.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

type Q = BigRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Q>,
    pub cmp: Cmp,
    pub rhs: Q,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub objective: Q,
    pub x: Vec<Q>,
}

/// Optimizes `c·x` subject to `constraints` and `x ≥ 0`.
pub fn solve(c: &[Q], constraints: &[Constraint], maximize: bool) -> Result<Solution> {
    let n = c.len();
    let m = constraints.len();
    // Column layout: originals, then one slack/surplus per inequality, then
    // one artificial per row that needs it.
    let mut slack_of = vec![None; m];
    let mut n_slack = 0;
    for (i, k) in constraints.iter().enumerate() {
        if k.coeffs.len() != n {
            return Err(Error::domain("constraint width differs from objective"));
        }
        if k.cmp != Cmp::Eq {
            slack_of[i] = Some(n + n_slack);
            n_slack += 1;
        }
    }
    let first_art = n + n_slack;
    let mut rows: Vec<Vec<Q>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut n_art = 0;
    for (i, k) in constraints.iter().enumerate() {
        let flip = k.rhs.is_negative();
        let sign = |q: &Q| if flip { -q.clone() } else { q.clone() };
        let mut row = vec![Q::zero(); first_art];
        for (j, a) in k.coeffs.iter().enumerate() {
            row[j] = sign(a);
        }
        let mut cmp = k.cmp;
        if flip {
            cmp = match cmp {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
        if let Some(s) = slack_of[i] {
            row[s] = if k.cmp == Cmp::Le { Q::one() } else { -Q::one() };
            if flip {
                row[s] = -row[s].clone();
            }
        }
        row.push(sign(&k.rhs));
        match cmp {
            Cmp::Le => basis.push(slack_of[i].unwrap()),
            _ => {
                basis.push(first_art + n_art);
                n_art += 1;
            }
        }
        rows.push(row);
    }
    let width = first_art + n_art;
    // Insert artificial columns before the rhs.
    let mut art = 0;
    for (i, row) in rows.iter_mut().enumerate() {
        let rhs = row.pop().unwrap();
        row.resize(width, Q::zero());
        if basis[i] >= first_art {
            row[first_art + art] = Q::one();
            art += 1;
        }
        row.push(rhs);
    }
    let mut t = Tableau { rows, basis, width };

    if n_art > 0 {
        let mut phase1 = vec![Q::zero(); width];
        for v in phase1.iter_mut().skip(first_art) {
            *v = Q::one();
        }
        t.optimize(&phase1, width)?;
        if !t.objective(&phase1).is_zero() {
            return Err(Error::Infeasible);
        }
        t.drive_out_artificials(first_art);
    }

    let mut cost = vec![Q::zero(); width];
    for (j, cj) in c.iter().enumerate() {
        cost[j] = if maximize { -cj.clone() } else { cj.clone() };
    }
    t.optimize(&cost, first_art)?;
    let mut x = vec![Q::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rows[i][width].clone();
        }
    }
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(Solution { objective, x })
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn objective(&self, cost: &[Q]) -> Q {
        self.basis
            .iter()
            .zip(&self.rows)
            .map(|(&b, r)| &cost[b] * &r[self.width])
            .sum()
    }

    fn reduced_cost(&self, cost: &[Q], j: usize) -> Q {
        let mut d = cost[j].clone();
        for (&b, r) in self.basis.iter().zip(&self.rows) {
            if !r[j].is_zero() && !cost[b].is_zero() {
                d -= &cost[b] * &r[j];
            }
        }
        d
    }

    /// Minimizes `cost` using only columns `< limit` as entering candidates.
    fn optimize(&mut self, cost: &[Q], limit: usize) -> Result<()> {
        loop {
            let Some(enter) = (0..limit)
                .filter(|j| !self.basis.contains(j))
                .find(|&j| self.reduced_cost(cost, j).is_negative())
            else {
                return Ok(());
            };
            let mut leave: Option<(usize, Q)> = None;
            for (i, r) in self.rows.iter().enumerate() {
                if !r[enter].is_positive() {
                    continue;
                }
                let ratio = &r[self.width] / &r[enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, enter);
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col].clone();
        for v in self.rows[row].iter_mut() {
            *v = &*v / &p;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row || r[col].is_zero() {
                continue;
            }
            let f = r[col].clone();
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Pivots zero-valued artificials out of the basis; rows where that is
    /// impossible are redundant and dropped.
    fn drive_out_artificials(&mut self, first_art: usize) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= first_art {
                match (0..first_art).find(|&j| !self.rows[i][j].is_zero()) {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}
