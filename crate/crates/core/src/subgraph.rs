//! Subgraph enumeration by reduction to a simple binary join.
//!
//! Every pattern vertex becomes an attribute and every pattern edge a relation
//! holding the data graph's edges in both orientations. A join tuple is then
//! a homomorphism from the pattern into the data graph.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::joinalg::{solve_join, SolveOptions, SolveOutput};
use crate::relcore::{Attr, JoinQuery, Relation, Value};

/// Largest supported pattern; automorphisms are found by brute force.
pub const MAX_PATTERN_VERTICES: usize = 6;

/// A small connected pattern on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl PatternGraph {
    /// Validates and normalises the edge list (each edge as `(lo, hi)`).
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n > MAX_PATTERN_VERTICES {
            return Err(Error::TooLarge {
                what: "pattern",
                size: n,
                limit: MAX_PATTERN_VERTICES,
            });
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::domain(format!("pattern edge {u}-{v} leaves 0..{n}")));
            }
            if u == v {
                return Err(Error::domain(format!("pattern has a self-loop at {u}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let g = PatternGraph {
            n,
            edges: set.into_iter().collect(),
        };
        if let Some(v) = (0..n).find(|&v| g.degree(v) == 0) {
            return Err(Error::domain(format!("pattern vertex {v} is isolated")));
        }
        if !g.connected() {
            return Err(Error::domain("pattern is not connected"));
        }
        Ok(g)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (n, edges): (usize, &[(usize, usize)]) = match name {
            "edge" => (2, &[(0, 1)]),
            "path3" => (3, &[(0, 1), (1, 2)]),
            "triangle" => (3, &[(0, 1), (1, 2), (0, 2)]),
            "cycle4" => (4, &[(0, 1), (1, 2), (2, 3), (0, 3)]),
            "clique4" => (4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
            _ => {
                return Err(Error::domain(format!(
                    "unknown pattern {name:?}; built-in patterns: {}",
                    BUILTIN_PATTERNS.join(", ")
                )))
            }
        };
        Self::new(n, edges.iter().copied())
    }

    /// Parses an edge list. Vertex labels are arbitrary decimals and are
    /// renumbered `0..n` in increasing order.
    pub fn parse_edge_list(input: impl BufRead) -> Result<Self> {
        let edges = read_edges(input)?;
        let labels: BTreeSet<Value> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        let labels: Vec<Value> = labels.into_iter().collect();
        let id = |x: Value| labels.binary_search(&x).unwrap();
        Self::new(labels.len(), edges.iter().map(|&(u, v)| (id(u), id(v))))
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    fn connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (v, s) in seen.iter_mut().enumerate() {
                if !*s && self.has_edge(u, v) {
                    *s = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// All vertex permutations preserving the edge set, identity first.
    pub fn automorphisms(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut perm: Vec<usize> = (0..self.n).collect();
        permute(&mut perm, 0, &mut |p| {
            if self.edges.iter().all(|&(u, v)| self.has_edge(p[u], p[v])) {
                out.push(p.to_vec());
            }
        });
        out.sort();
        out
    }
}

pub const BUILTIN_PATTERNS: [&str; 5] = ["edge", "path3", "triangle", "cycle4", "clique4"];

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// An undirected data graph. Self-loops are dropped; vertices without edges
/// never appear.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DataGraph {
    edges: BTreeSet<(Value, Value)>,
}

impl DataGraph {
    pub fn new(edges: impl IntoIterator<Item = (Value, Value)>) -> Self {
        DataGraph {
            edges: edges
                .into_iter()
                .filter(|(u, v)| u != v)
                .map(|(u, v)| (u.min(v), u.max(v)))
                .collect(),
        }
    }

    /// Reads one `u v` pair per line; blank lines and `#` comments are skipped.
    pub fn parse(input: impl BufRead) -> Result<Self> {
        Ok(Self::new(read_edges(input)?))
    }

    /// The complete graph on `0..n`.
    pub fn complete(n: u64) -> Self {
        Self::new((0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Value, Value)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: Value, v: Value) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    fn directed(&self) -> impl Iterator<Item = (Value, Value)> + '_ {
        self.edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)])
    }
}

fn read_edges(input: impl BufRead) -> Result<Vec<(Value, Value)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(format!("expected \"u v\", got {line:?}")));
        }
        let num = |s: &str| s.parse::<Value>().map_err(|e| parse_err(format!("{s:?}: {e}")));
        out.push((num(fields[0])?, num(fields[1])?));
    }
    Ok(out)
}

/// Pattern vertex `i` becomes `Attr(i)`.
pub fn pattern_to_query(pattern: &PatternGraph, graph: &DataGraph) -> Result<JoinQuery> {
    let rels = pattern
        .edges
        .iter()
        .map(|&(u, v)| Relation::binary(Attr(u as u32), Attr(v as u32), graph.directed()))
        .collect::<Result<Vec<_>>>()?;
    JoinQuery::binary(rels)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Homomorphism,
    /// Distinct pattern vertices map to distinct data vertices.
    Injective,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Homomorphism => "homomorphism",
            Mode::Injective => "injective",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homomorphism" | "hom" => Ok(Mode::Homomorphism),
            "injective" | "inj" => Ok(Mode::Injective),
            _ => Err(Error::domain(format!(
                "unknown mode {s:?}; expected homomorphism or injective"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Embeddings {
    /// Image of pattern vertex `i` at position `i`, sorted.
    pub maps: Vec<Vec<Value>>,
    pub solve: SolveOutput,
}

impl Embeddings {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// Runs the join on `opts.p` simulated machines and post-filters the result.
///
/// With `dedup`, only the lexicographically smallest image of each
/// automorphism orbit is kept, so every occurrence is listed once.
pub fn enumerate_embeddings(
    pattern: &PatternGraph,
    graph: &DataGraph,
    opts: &SolveOptions,
    mode: Mode,
    dedup: bool,
) -> Result<Embeddings> {
    let q = pattern_to_query(pattern, graph)?;
    let solve = solve_join(&q, opts)?;
    // The result scheme is Attr(0..n) in order, so rows are already maps.
    let autos = if dedup { pattern.automorphisms() } else { Vec::new() };
    let keep = |row: &Vec<Value>| {
        if mode == Mode::Injective {
            let distinct: BTreeSet<&Value> = row.iter().collect();
            if distinct.len() != row.len() {
                return false;
            }
        }
        autos.iter().all(|s| {
            let image: Vec<Value> = s.iter().map(|&i| row[i]).collect();
            *row <= image
        })
    };
    let flags = crate::par::map_collect(true, solve.result.rows(), keep);
    let maps = solve
        .result
        .rows()
        .iter()
        .zip(flags)
        .filter(|(_, k)| *k)
        .map(|(r, _)| r.clone())
        .collect();
    Ok(Embeddings { maps, solve })
}
