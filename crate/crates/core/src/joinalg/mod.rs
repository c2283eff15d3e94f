//! The heavy/light join algorithm and checkers for the bounds its load
//! analysis rests on.
//!
//! For every subset `H` of attributes and every configuration `η` of heavy
//! values on `H`, the residual query `Q'(η)` is reduced by semi-joins to a
//! cartesian product of unary relations on the isolated attributes times a
//! skew-free join on the remaining light attributes. All `2^k` subsets run
//! side by side on the same machines. The rounds are:
//!
//! 1. `preprocess`: histogram replication, charged rather than simulated.
//! 2. `step1`: each tuple goes to a random machine of every configuration it
//!    belongs to.
//! 3. `step2-intersect`, `step2-reply`: hash-partitioned intersection of the
//!    unary residuals and filtering of the light edges.
//! 4. `count-broadcast`: sizes of the isolated relations, for allocation.
//! 5. `step3`: grid cartesian product composed with a hypercube join.

mod allocate;
pub mod bounds;
mod distributed;
mod histogram;
mod reduce;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

pub use allocate::{allocate_machines, fit_shares, fit_to_budget, step1_machines, step3_machines, AllocationPlan, Step3Stats};
pub use bounds::{build_qstar, isolated_bound_check, qstar_weights, weak_bound_check, BoundCheck, BoundSuite, HReduction};
pub use distributed::SolveFlags;
pub use histogram::{build_histogram, frequent, Histogram, Record};
pub use reduce::{factorization_holds, semijoin_reduce, ReducedQuery, Split};

use crate::error::{Error, Result};
use crate::hypergraph::{build_hypergraph, edge_cover_lp, iroot_ceil, Rational};
use crate::mpcsim::{Cluster, Execution, LoadReport};
use crate::relcore::{JoinQuery, Relation};

/// The smallest `λ ≥ 1` with `λ ≥ c · p^{1/(2ρ)}`.
pub fn choose_lambda_scaled(p: usize, rho: &Rational, c: u64) -> u64 {
    // With ρ = a/b: λ^{2a} ≥ c^{2a} · p^b.
    let a = rho.numer().to_u32().expect("small ρ");
    let b = rho.denom().to_u32().expect("small ρ");
    let n = BigUint::from(c).pow(2 * a) * BigUint::from(p).pow(b);
    iroot_ceil(&n, 2 * a).to_u64().unwrap_or(u64::MAX).max(1)
}

/// `max(1, ⌈p^{1/(2ρ)}⌉)`.
pub fn choose_lambda(p: usize, rho: &Rational) -> u64 {
    choose_lambda_scaled(p, rho, 1)
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub p: usize,
    pub seed: u64,
    /// Fixed heavy parameter; must lie in `[1, max(m, 1)]`.
    pub lambda: Option<u64>,
    /// Constant factor `c` in `λ = ⌈c · p^{1/(2ρ)}⌉`.
    pub lambda_factor: u64,
    pub execution: Execution,
}

impl SolveOptions {
    pub fn new(p: usize, seed: u64) -> Self {
        SolveOptions {
            p,
            seed,
            lambda: None,
            lambda_factor: 1,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    /// `Join(Q)` over `attset(Q)`.
    pub result: Relation,
    pub report: LoadReport,
    pub lambda: u64,
    pub rho: Rational,
    /// Tuples emitted over all machines; equals `|result|` because every
    /// result tuple is produced exactly once.
    pub emitted: usize,
    pub live_configurations: usize,
    pub solved_configurations: usize,
    pub flags: SolveFlags,
}

impl SolveOutput {
    /// `m / p^{1/ρ}`, the target load, as a float for reporting.
    pub fn target_load(&self, m: usize, p: usize) -> f64 {
        let inv = self.rho.denom().to_f64().unwrap() / self.rho.numer().to_f64().unwrap();
        m as f64 / (p as f64).powf(inv)
    }
}

/// Evaluates `Join(q)` on a simulated cluster of `opts.p` machines.
pub fn solve_join(q: &JoinQuery, opts: &SolveOptions) -> Result<SolveOutput> {
    q.require_binary()?;
    if q.is_empty() {
        return Err(Error::domain("query has no relations"));
    }
    let p = opts.p;
    let m = q.input_size() as u64;
    let rho = edge_cover_lp(&build_hypergraph(q))?.optimum;
    let mut flags = SolveFlags::default();
    let lambda = match opts.lambda {
        Some(l) if l == 0 || l > m.max(1) => {
            return Err(Error::domain(format!("heavy parameter {l} outside [1, {}]", m.max(1))));
        }
        Some(l) => l,
        None => {
            let l = choose_lambda_scaled(p.max(1), &rho, opts.lambda_factor.max(1));
            if l > m.max(1) {
                flags.lambda_clamped = true;
            }
            l.min(m.max(1))
        }
    };
    let mut cluster = Cluster::init(p, q, opts.seed)?;
    cluster.set_execution(opts.execution.clone());
    let hist = build_histogram(q, p, &rho, lambda);
    let per_machine = m.div_ceil(p as u64) + hist.words();
    cluster.charge_round("preprocess", vec![per_machine; p])?;

    let mut run = distributed::Run::new(q, p, opts.seed, rho.clone(), &hist)?;
    run.step1(&mut cluster)?;
    run.step2_intersect(&mut cluster)?;
    run.step2_reply(&mut cluster)?;
    run.count_broadcast(&mut cluster)?;
    run.plan_step3(&cluster)?;
    run.step3(&mut cluster)?;
    run.finish(&mut cluster)?;
    log::debug!(
        "solve_join: m={m} p={p} λ={lambda} ρ={rho} live={} flags={:?}",
        run.live_configurations(),
        run.flags
    );

    let rows = cluster.collect_output();
    let flags = SolveFlags {
        lambda_clamped: flags.lambda_clamped,
        ..run.flags.clone()
    };
    Ok(SolveOutput {
        result: Relation::new(q.attset(), rows)?,
        report: cluster.load_report().clone(),
        lambda,
        rho,
        emitted: cluster.emitted_count(),
        live_configurations: run.live_configurations(),
        solved_configurations: run.solved_configurations(),
        flags,
    })
}

#[cfg(test)]
mod tests;
