use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;

use crate::hypergraph::Rational;
use crate::relcore::{Attr, JoinQuery, Value};
use crate::taxonomy::HeavyLightIndex;

/// `(R, X, x, cnt)`; `attr` and `value` are `None` for the size record
/// `(R, ∅, nil, |R|)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Record {
    pub relation: usize,
    pub attr: Option<Attr>,
    pub value: Option<Value>,
    pub cnt: u64,
}

/// Frequency statistics replicated to every machine before the join starts.
///
/// Besides the frequent-value records, it carries the counts needed to know
/// every residual size exactly: for each heavy value on one attribute of a
/// relation, how many of its tuples are light on the other attribute
/// (`light_complement`), and how many tuples of each relation are light on
/// both attributes (`all_light`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub m: u64,
    pub lambda: u64,
    pub records: BTreeSet<Record>,
    pub light_complement: BTreeMap<(usize, Attr, Value), u64>,
    pub all_light: Vec<u64>,
}

/// Whether `cnt ≥ m / p^{1/ρ}`, decided as `cnt^a · p^b ≥ m^a` for
/// `1/ρ = b/a`.
pub fn frequent(cnt: u64, m: u64, p: usize, rho: &Rational) -> bool {
    let (a, b) = exponent_parts(&rho.recip());
    let lhs = BigUint::from(cnt).pow(a) * BigUint::from(p).pow(b);
    lhs >= BigUint::from(m).pow(a)
}

/// Denominator and numerator of a positive rational as `u32`.
fn exponent_parts(r: &Rational) -> (u32, u32) {
    let num = u32::try_from(r.numer()).expect("small exponent");
    let den = u32::try_from(r.denom()).expect("small exponent");
    (den, num)
}

/// Exact histogram for `q` on `p` machines with heavy parameter `lambda`.
/// Records include every value heavy under `lambda` even when `lambda`
/// exceeds `p^{1/(2ρ)}`.
pub fn build_histogram(q: &JoinQuery, p: usize, rho: &Rational, lambda: u64) -> Histogram {
    let m = q.input_size() as u64;
    let mut records = BTreeSet::new();
    let mut heavy: BTreeMap<Attr, BTreeSet<Value>> = BTreeMap::new();
    for (ri, r) in q.relations().iter().enumerate() {
        records.insert(Record {
            relation: ri,
            attr: None,
            value: None,
            cnt: r.len() as u64,
        });
        for &x in r.scheme() {
            for (v, cnt) in r.frequencies(x).expect("attribute of own scheme") {
                let cnt = cnt as u64;
                let is_heavy = cnt as u128 * lambda as u128 >= m as u128;
                if is_heavy {
                    heavy.entry(x).or_default().insert(v);
                }
                if is_heavy || frequent(cnt, m, p, rho) {
                    records.insert(Record {
                        relation: ri,
                        attr: Some(x),
                        value: Some(v),
                        cnt,
                    });
                }
            }
        }
    }
    let is_heavy = |x: Attr, v: Value| heavy.get(&x).is_some_and(|s| s.contains(&v));
    let mut light_complement = BTreeMap::new();
    let mut all_light = Vec::with_capacity(q.len());
    for (ri, r) in q.relations().iter().enumerate() {
        let s = r.scheme();
        let mut light = 0;
        for row in r.rows() {
            let hx: Vec<bool> = s.iter().zip(row).map(|(&x, &v)| is_heavy(x, v)).collect();
            match hx.iter().filter(|&&h| h).count() {
                0 => light += 1,
                1 if s.len() == 2 => {
                    let c = if hx[0] { 0 } else { 1 };
                    *light_complement.entry((ri, s[c], row[c])).or_insert(0) += 1;
                }
                _ => {}
            }
        }
        all_light.push(light);
    }
    Histogram {
        m,
        lambda,
        records,
        light_complement,
        all_light,
    }
}

impl Histogram {
    /// Words needed to replicate the histogram: four per record or count.
    pub fn words(&self) -> u64 {
        4 * (self.records.len() + self.light_complement.len() + self.all_light.len()) as u64
    }

    /// The heavy/light split read off the records; equals `classify`.
    pub fn heavy_index(&self, attset: &[Attr]) -> HeavyLightIndex {
        let mut per: BTreeMap<Attr, BTreeSet<Value>> = attset.iter().map(|&a| (a, BTreeSet::new())).collect();
        let mut heavy_set = BTreeSet::new();
        for r in &self.records {
            if let (Some(x), Some(v)) = (r.attr, r.value) {
                if r.cnt as u128 * self.lambda as u128 >= self.m as u128 {
                    per.entry(x).or_default().insert(v);
                    heavy_set.insert(v);
                }
            }
        }
        HeavyLightIndex {
            lambda: self.lambda,
            m: self.m,
            heavy_set,
            per_attribute_heavy: per.into_iter().map(|(x, s)| (x, s.into_iter().collect())).collect(),
        }
    }

    /// `|R'_e(η)|` for relation `ri` over `scheme` when `bound` lists the
    /// positions of the scheme fixed by `η` together with their values.
    /// Only meaningful for active edges.
    pub fn residual_size(&self, ri: usize, scheme: &[Attr], bound: &[(usize, Value)]) -> u64 {
        match bound {
            [] => self.all_light[ri],
            [(c, v)] => self.light_complement.get(&(ri, scheme[*c], *v)).copied().unwrap_or(0),
            _ => 0,
        }
    }
}
