//! Reference implementations shared by the integration tests. They are
//! deliberately naive and share no code with the library's algorithms.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mpcjoin::subgraph::{DataGraph, PatternGraph};
use mpcjoin::{Attr, JoinQuery, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Join by extending partial assignments one relation at a time. Rows come
/// back in ascending attribute order, sorted.
pub fn nested_loop_join(q: &JoinQuery) -> Vec<Vec<Value>> {
    let mut partial: Vec<BTreeMap<Attr, Value>> = vec![BTreeMap::new()];
    for r in q.relations() {
        let mut next = Vec::new();
        for asg in &partial {
            'row: for row in r.rows() {
                let mut ext = asg.clone();
                for (&x, &v) in r.scheme().iter().zip(row) {
                    if *ext.entry(x).or_insert(v) != v {
                        continue 'row;
                    }
                }
                next.push(ext);
            }
        }
        partial = next;
    }
    let mut out: Vec<Vec<Value>> = partial.into_iter().map(|a| a.into_values().collect()).collect();
    out.sort();
    out.dedup();
    out
}

/// Counts pattern maps by recursive backtracking over pattern vertices.
pub fn backtrack_count(pattern: &PatternGraph, g: &DataGraph, injective: bool) -> u64 {
    let mut adj: BTreeMap<Value, BTreeSet<Value>> = BTreeMap::new();
    for (u, v) in g.edges() {
        adj.entry(u).or_default().insert(v);
        adj.entry(v).or_default().insert(u);
    }
    let n = pattern.vertex_count();
    let mut img: Vec<Option<Value>> = vec![None; n];
    fn go(
        k: usize,
        pattern: &PatternGraph,
        adj: &BTreeMap<Value, BTreeSet<Value>>,
        injective: bool,
        img: &mut Vec<Option<Value>>,
    ) -> u64 {
        if k == img.len() {
            return 1;
        }
        let mut total = 0;
        for &v in adj.keys() {
            if injective && img.contains(&Some(v)) {
                continue;
            }
            let ok = pattern.edges().iter().all(|&(a, b)| {
                let other = if a == k { b } else if b == k { a } else { return true };
                match img[other] {
                    Some(w) if other < k => adj[&v].contains(&w),
                    _ => true,
                }
            });
            if ok {
                img[k] = Some(v);
                total += go(k + 1, pattern, adj, injective, img);
                img[k] = None;
            }
        }
        total
    }
    go(0, pattern, &adj, injective, &mut img)
}

/// Erdős–Rényi graph on `0..n`.
pub fn gnp(n: u64, prob: f64, seed: u64) -> DataGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(prob) {
                edges.push((u, v));
            }
        }
    }
    DataGraph::new(edges)
}
