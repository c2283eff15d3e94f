//! Reproducible synthetic instances.
//!
//! A query of shape `S` with input size `m` splits `m` evenly over the
//! relations of `S`; each relation draws distinct pairs from a domain of
//! `d = max(⌈√(2·m_r)⌉, m_r / 2)` values per attribute, so uniform data has
//! small average degree and joins stay small. The same `(shape, m, dist,
//! seed)` always yields the same relations.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};
use crate::hypergraph::SHOWCASE_EDGES;
use crate::mpcsim::mix64;
use crate::relcore::{Attr, Catalog, JoinQuery, Relation, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shape {
    Edge,
    Path3,
    Triangle,
    Cycle4,
    Clique4,
    Showcase,
}

impl Shape {
    pub const ALL: [Shape; 6] = [
        Shape::Edge,
        Shape::Path3,
        Shape::Triangle,
        Shape::Cycle4,
        Shape::Clique4,
        Shape::Showcase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Edge => "edge",
            Shape::Path3 => "path3",
            Shape::Triangle => "triangle",
            Shape::Cycle4 => "cycle4",
            Shape::Clique4 => "clique4",
            Shape::Showcase => "showcase",
        }
    }

    /// Edges over attribute ids `0..vertices()`.
    pub fn edges(self) -> Vec<(u32, u32)> {
        match self {
            Shape::Edge => vec![(0, 1)],
            Shape::Path3 => vec![(0, 1), (1, 2)],
            Shape::Triangle => vec![(0, 1), (1, 2), (0, 2)],
            Shape::Cycle4 => vec![(0, 1), (1, 2), (2, 3), (0, 3)],
            Shape::Clique4 => vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            Shape::Showcase => SHOWCASE_EDGES.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect(),
        }
    }

    pub fn vertices(self) -> usize {
        self.edges().iter().map(|&(a, b)| a.max(b) as usize + 1).max().unwrap_or(0)
    }

    /// Attribute names `A`, `B`, ... for this shape.
    pub fn catalog(self) -> Catalog {
        Catalog::letters(self.vertices())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Shape::ALL.iter().map(|x| x.name()).collect();
            Error::domain(format!("unknown shape `{s}`; available: {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dist {
    Uniform,
    /// Both coordinates Zipf-distributed with exponent `s`.
    Zipf(f64),
    /// Uniform, except that one value occurs exactly `⌈f·m⌉` times on
    /// `attr` (default: the first attribute) in one relation.
    Planted { f: f64, attr: Option<String> },
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Uniform => f.write_str("uniform"),
            Dist::Zipf(s) => write!(f, "zipf:{s}"),
            Dist::Planted { f: x, attr: None } => write!(f, "planted:{x}"),
            Dist::Planted { f: x, attr: Some(a) } => write!(f, "planted:{x}:{a}"),
        }
    }
}

impl FromStr for Dist {
    type Err = Error;

    /// `uniform`, `zipf:<s>` or `planted:<f>[:<attribute>]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("bad distribution `{s}`; expected uniform, zipf:<s> or planted:<f>[:<attr>]"));
        let mut parts = s.split(':');
        match parts.next() {
            Some("uniform") if parts.next().is_none() => Ok(Dist::Uniform),
            Some("zipf") => {
                let x: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if parts.next().is_some() || x.is_nan() || x <= 0.0 {
                    return Err(bad());
                }
                Ok(Dist::Zipf(x))
            }
            Some("planted") => {
                let f: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let attr = parts.next().map(str::to_string);
                if parts.next().is_some() || !(f > 0.0 && f <= 1.0) {
                    return Err(bad());
                }
                Ok(Dist::Planted { f, attr })
            }
            _ => Err(bad()),
        }
    }
}

fn domain_for(m_r: usize) -> u64 {
    let root = ((2 * m_r) as f64).sqrt().ceil() as u64;
    root.max(m_r as u64 / 2).max(2)
}

/// Distinct pairs from `sample` until `n` are found; falls back to uniform
/// pairs once heavy skew stops producing new ones.
fn draw_pairs(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: u64,
    mut sample: impl FnMut(&mut ChaCha8Rng) -> (Value, Value),
    exclude_first: Option<Value>,
) -> BTreeSet<(Value, Value)> {
    let mut out = BTreeSet::new();
    let budget = 50 * n + 100;
    let ok = |u: Value| exclude_first != Some(u);
    for _ in 0..budget {
        if out.len() == n {
            return out;
        }
        let (u, v) = sample(rng);
        if ok(u) {
            out.insert((u, v));
        }
    }
    while out.len() < n {
        let (u, v) = (rng.random_range(0..d), rng.random_range(0..d));
        if ok(u) {
            out.insert((u, v));
        }
    }
    out
}

/// One instance of `shape` with total input size `m`.
pub fn generate(shape: Shape, m: usize, dist: &Dist, seed: u64) -> Result<JoinQuery> {
    if m == 0 {
        return Err(Error::domain("input size must be at least 1"));
    }
    let edges = shape.edges();
    let catalog = shape.catalog();
    let planted = match dist {
        Dist::Planted { f, attr } => {
            let x = match attr {
                None => Attr(0),
                Some(name) => catalog
                    .lookup(name)
                    .ok_or_else(|| Error::domain(format!("shape {shape} has no attribute `{name}`")))?,
            };
            let ri = edges.iter().position(|&(a, b)| a == x.0 || b == x.0).expect("every attribute is covered");
            Some((ri, x, (f * m as f64).ceil() as usize))
        }
        _ => None,
    };
    let mut sizes = vec![m / edges.len(); edges.len()];
    for s in sizes.iter_mut().take(m % edges.len()) {
        *s += 1;
    }
    if let Some((ri, _, count)) = planted {
        let rest = m.saturating_sub(count);
        sizes = vec![rest / edges.len(); edges.len()];
        for s in sizes.iter_mut().take(rest % edges.len()) {
            *s += 1;
        }
        sizes[ri] += count.min(m);
    }
    let mut rels = Vec::with_capacity(edges.len());
    for (ri, &(a, b)) in edges.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(ri as u64 + 1)));
        let n = sizes[ri];
        let d = domain_for(m / edges.len());
        let rows: BTreeSet<(Value, Value)> = match (dist, planted) {
            (Dist::Zipf(s), _) => {
                let z = Zipf::new(d as f64, *s).map_err(|e| Error::domain(format!("zipf: {e}")))?;
                let n = n.min((d * d) as usize);
                draw_pairs(&mut rng, n, d, |r| (z.sample(r) as u64 - 1, z.sample(r) as u64 - 1), None)
            }
            (_, Some((pri, x, count))) if pri == ri => {
                let count = count.min(m);
                let hot: Value = rng.random_range(0..d);
                let mut partners: Vec<Value> = (0..d.max(count as u64)).collect();
                partners.shuffle(&mut rng);
                // Planted tuples carry `hot` in the column of `x`.
                let first_is_x = a == x.0;
                let mut rows: BTreeSet<(Value, Value)> = partners[..count]
                    .iter()
                    .map(|&v| if first_is_x { (hot, v) } else { (v, hot) })
                    .collect();
                let rest = n - count;
                let others = draw_uniform_excluding(&mut rng, rest, d, hot, first_is_x);
                rows.extend(others);
                rows
            }
            _ => {
                let n = n.min((d * d) as usize);
                draw_pairs(&mut rng, n, d, |r| (r.random_range(0..d), r.random_range(0..d)), None)
            }
        };
        rels.push(Relation::binary(Attr(a), Attr(b), rows)?);
    }
    JoinQuery::binary(rels)
}

/// Uniform distinct pairs that never carry `hot` in the planted column.
fn draw_uniform_excluding(rng: &mut ChaCha8Rng, n: usize, d: u64, hot: Value, first: bool) -> BTreeSet<(Value, Value)> {
    let sample = |r: &mut ChaCha8Rng| {
        let (u, v) = (r.random_range(0..d), r.random_range(0..d));
        if first {
            (u, v)
        } else {
            (v, u)
        }
    };
    let pairs = draw_pairs(rng, n, d, sample, Some(hot));
    if first {
        pairs
    } else {
        pairs.into_iter().map(|(u, v)| (v, u)).collect()
    }
}
