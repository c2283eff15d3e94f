use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::hypergraph::Rational;

/// Machine counts for the configurations of one `H`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationPlan {
    /// `p'_η` per configuration, after fitting.
    pub step1: Vec<usize>,
    /// `p''_η` per configuration, after fitting; 0 for configurations that
    /// need no step-3 machines.
    pub step3: Vec<usize>,
    pub lambda: u64,
    pub rho: Rational,
    pub k: usize,
    /// Whether the unfitted counts exceeded `p` and were scaled down.
    pub step1_rescaled: bool,
    pub step3_rescaled: bool,
}

impl AllocationPlan {
    /// Whether the fitted slices still overlap, i.e. more configurations
    /// than machines.
    pub fn overflows(&self, p: usize) -> bool {
        self.step1.iter().sum::<usize>() > p || self.step3.iter().sum::<usize>() > p
    }
}

fn ceil_ratio(n: &BigUint, d: &BigUint) -> usize {
    n.div_ceil(d).to_usize().unwrap_or(usize::MAX)
}

/// `⌈p · m_η / (m · λ^{k−2})⌉`, at least 1.
pub fn step1_machines(m_eta: u64, m: u64, p: usize, lambda: u64, k: usize) -> usize {
    if m == 0 {
        return 1;
    }
    let num = BigUint::from(p) * m_eta;
    let den = BigUint::from(m) * BigUint::from(lambda).pow(k.saturating_sub(2) as u32);
    ceil_ratio(&num, &den).max(1)
}

/// `⌈λ^{|L|} + p · Σ_J ∏_{X∈J} n_X / (λ^{2ρ−|J|−|L|} · m^{|J|})⌉` over the
/// nonempty `J ⊆ I`, `n_X = |R''_X(η)|`. `two_rho` is `2ρ`, an integer for
/// binary queries.
pub fn step3_machines(iso_counts: &[u64], l_size: usize, p: usize, lambda: u64, two_rho: i64, m: u64) -> usize {
    let lam = BigInt::from(lambda);
    let mut total = Rational::from_integer(lam.pow(l_size as u32));
    if m > 0 {
        for mask in 1u32..1 << iso_counts.len() {
            let j: Vec<u64> = (0..iso_counts.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| iso_counts[i])
                .collect();
            let prod: BigInt = j.iter().map(|&n| BigInt::from(n)).product();
            if prod.is_zero() {
                continue;
            }
            // λ^{|J|+|L|−2ρ} may have either sign of exponent.
            let e = j.len() as i64 + l_size as i64 - two_rho;
            let lam_pow = Rational::from_integer(lam.pow(e.unsigned_abs() as u32));
            let lam_pow = if e >= 0 { lam_pow } else { lam_pow.recip() };
            let m_pow = BigInt::from(m).pow(j.len() as u32);
            total += Rational::new(BigInt::from(p) * prod, m_pow) * lam_pow;
        }
    }
    total.ceil().to_integer().to_usize().unwrap_or(usize::MAX).max(1)
}

/// Scales `raw` down proportionally when it sums to more than `p`; nonzero
/// entries stay at least 1. Returns whether scaling happened.
pub fn fit_to_budget(raw: &[usize], p: usize) -> (Vec<usize>, bool) {
    let sum: u128 = raw.iter().map(|&x| x as u128).sum();
    if sum <= p as u128 {
        return (raw.to_vec(), false);
    }
    let fitted = raw
        .iter()
        .map(|&x| {
            if x == 0 {
                0
            } else {
                ((x as u128 * p as u128 / sum) as usize).max(1)
            }
        })
        .collect();
    (fitted, true)
}

/// Step-3 statistics of one configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step3Stats {
    /// Whether the configuration gets step-3 machines at all: it is feasible
    /// and no isolated relation is empty.
    pub live: bool,
    /// `|R''_X(η)|` for the isolated attributes in order.
    pub iso_counts: Vec<u64>,
}

/// Both allocations for the configurations of one `H`.
#[allow(clippy::too_many_arguments)]
pub fn allocate_machines(
    m_etas: &[u64],
    stats: &[Step3Stats],
    p: usize,
    m: u64,
    lambda: u64,
    rho: &Rational,
    k: usize,
    l_size: usize,
) -> AllocationPlan {
    let raw1: Vec<usize> = m_etas.iter().map(|&x| step1_machines(x, m, p, lambda, k)).collect();
    let two_rho = (rho * Rational::from_integer(2.into())).to_integer().to_i64().expect("small ρ");
    debug_assert!((rho * Rational::from_integer(2.into())).is_integer());
    let raw3: Vec<usize> = stats
        .iter()
        .map(|s| if s.live { step3_machines(&s.iso_counts, l_size, p, lambda, two_rho, m) } else { 0 })
        .collect();
    let (step1, step1_rescaled) = fit_to_budget(&raw1, p);
    let (step3, step3_rescaled) = fit_to_budget(&raw3, p);
    AllocationPlan {
        step1,
        step3,
        lambda,
        rho: rho.clone(),
        k,
        step1_rescaled,
        step3_rescaled,
    }
}

/// Shares of `λ` per attribute, lowered one at a time (largest first, ties to
/// the lowest attribute) until their product fits in `budget`. Returns
/// whether any share was lowered.
pub fn fit_shares(n_attrs: usize, lambda: u64, budget: usize) -> (Vec<usize>, bool) {
    let mut shares = vec![lambda as usize; n_attrs];
    let mut reduced = false;
    let product = |s: &[usize]| s.iter().fold(1usize, |a, &b| a.saturating_mul(b));
    while product(&shares) > budget.max(1) {
        let (i, _) = shares
            .iter()
            .enumerate()
            .max_by_key(|&(i, &s)| (s, std::cmp::Reverse(i)))
            .expect("nonempty while product exceeds budget");
        shares[i] -= 1;
        reduced = true;
    }
    debug_assert!(shares.iter().all(|&s| s >= 1) || n_attrs == 0);
    (shares, reduced)
}
