use super::*;
use crate::hypergraph::SHOWCASE_EDGES;
use crate::relcore::count_join;
use proptest::prelude::*;

fn a(i: u32) -> Attr {
    Attr(i)
}

fn rel(x: u32, y: u32, rows: &[(u64, u64)]) -> Relation {
    Relation::new(vec![a(x), a(y)], rows.iter().map(|&(u, v)| vec![u, v])).unwrap()
}

fn triangle(r: &[(u64, u64)], s: &[(u64, u64)], t: &[(u64, u64)]) -> JoinQuery {
    JoinQuery::binary(vec![rel(0, 1, r), rel(1, 2, s), rel(0, 2, t)]).unwrap()
}

/// Showcase instance: `d`, `e`, `f`, `k` are heavy on D, E, F, K; every
/// other value is light.
const D: u64 = 1000;
const E: u64 = 2000;
const F: u64 = 3000;
const K: u64 = 4000;

fn showcase_lambda(q: &JoinQuery) -> u64 {
    (q.input_size() as u64).div_ceil(40)
}

fn showcase_query() -> JoinQuery {
    let heavy = [(3u32, D), (4, E), (5, F), (10, K)];
    let rels = SHOWCASE_EDGES
        .iter()
        .map(|&(x, y)| {
            let (x, y) = (x.min(y), x.max(y));
            let mut rows = Vec::new();
            for i in 0..6u64 {
                rows.push(vec![i, i + 1]);
            }
            for &(h, v) in &heavy {
                if h == x {
                    rows.extend((0..40u64).map(|i| vec![v, i]));
                } else if h == y {
                    rows.extend((0..40u64).map(|i| vec![i, v]));
                }
            }
            Relation::new(vec![a(x), a(y)], rows).unwrap()
        })
        .collect();
    JoinQuery::binary(rels).unwrap()
}

#[test]
fn threshold_boundary_is_inclusive() {
    let mut rows: Vec<(u64, u64)> = (0..5).map(|i| (7, i)).collect();
    rows.extend((0..5).map(|i| (10 + i, 100 + i)));
    let q = JoinQuery::binary(vec![rel(0, 1, &rows)]).unwrap();
    let idx = classify(&q, 2).unwrap();
    assert!(idx.is_heavy_on(a(0), 7));
    assert_eq!(idx.heavy_on(a(0)), &[7]);
    assert!(idx.heavy_on(a(1)).is_empty());
    assert!(!idx.is_heavy_on(a(1), 7));
}

#[test]
fn lambda_one_needs_a_full_relation() {
    let q = JoinQuery::binary(vec![rel(0, 1, &[(1, 2), (1, 3), (1, 4)])]).unwrap();
    let idx = classify(&q, 1).unwrap();
    assert_eq!(idx.heavy_on(a(0)), &[1]);
    assert!(idx.heavy_on(a(1)).is_empty());
    let q = triangle(&[(1, 2), (1, 3)], &[(2, 5)], &[(1, 5)]);
    let idx = classify(&q, 1).unwrap();
    assert!(idx.heavy_set.is_empty());
}

#[test]
fn lambda_m_makes_everything_heavy() {
    let q = triangle(&[(1, 2), (3, 4)], &[(2, 5)], &[(1, 5)]);
    let idx = classify(&q, 4).unwrap();
    assert_eq!(idx.heavy_set, BTreeSet::from([1, 2, 3, 4, 5]));
    assert_eq!(idx.heavy_on(a(0)), &[1, 3]);
}

#[test]
fn lambda_out_of_range_is_rejected() {
    let q = triangle(&[(1, 2)], &[(2, 5)], &[(1, 5)]);
    assert!(classify(&q, 0).is_err());
    assert!(classify(&q, 4).is_err());
    assert!(classify(&q, 3).is_ok());
}

#[test]
fn empty_h_has_one_empty_configuration() {
    let q = triangle(&[(1, 2)], &[(2, 5)], &[(1, 5)]);
    let idx = classify(&q, 3).unwrap();
    assert_eq!(enumerate_configs(&q, &[], &idx).unwrap(), vec![Configuration::empty()]);
}

#[test]
fn two_heavy_values_give_two_configurations() {
    let mut rows: Vec<(u64, u64)> = (0..4).map(|i| (1, i)).collect();
    rows.extend((0..4).map(|i| (2, 10 + i)));
    let q = JoinQuery::binary(vec![rel(0, 1, &rows), rel(1, 2, &[(0, 0)])]).unwrap();
    let idx = classify(&q, 3).unwrap();
    let configs = enumerate_configs(&q, &[a(0)], &idx).unwrap();
    assert_eq!(configs.len(), 2);
    assert_eq!(configs[0].eta, vec![1]);
    assert_eq!(configs[1].eta, vec![2]);
    assert!(enumerate_configs(&q, &[a(9)], &idx).is_err());
}

#[test]
fn showcase_configuration_dekf() {
    let q = showcase_query();
    let idx = classify(&q, showcase_lambda(&q)).unwrap();
    for (x, v) in [(3, D), (4, E), (5, F), (10, K)] {
        assert_eq!(idx.heavy_on(a(x)), &[v]);
    }
    let h = [a(3), a(4), a(5), a(10)];
    let configs = enumerate_configs(&q, &h, &idx).unwrap();
    assert!(configs.contains(&Configuration {
        h: h.to_vec(),
        eta: vec![D, E, F, K],
    }));
}

#[test]
fn residual_on_cross_edge_keeps_light_partners() {
    let q = showcase_query();
    let idx = classify(&q, showcase_lambda(&q)).unwrap();
    let h = [a(3), a(4), a(5), a(10)];
    let cfg = Configuration {
        h: h.to_vec(),
        eta: vec![D, E, F, K],
    };
    let rq = residual_query(&q, &cfg, &idx);
    let ad = q.position_of(&[a(0), a(3)]).unwrap();
    let r = rq.relation_for(ad).unwrap();
    assert_eq!(r.scheme(), &[a(0)]);
    let expected: Vec<Vec<Value>> = (0..40).map(|i| vec![i]).collect();
    assert_eq!(r.rows(), expected.as_slice());
    // DK lies inside H, so it is inactive; (d, k) is not in R_DK.
    assert!(rq.relation_for(q.position_of(&[a(3), a(10)]).unwrap()).is_none());
    assert!(!rq.feasible);
}

#[test]
fn full_h_yields_eta_iff_feasible() {
    let mut r: Vec<(u64, u64)> = (0..3).map(|i| (1, 10 + i)).collect();
    r.push((10, 2));
    let q = JoinQuery::binary(vec![rel(0, 1, &r), rel(1, 2, &[(10, 5), (11, 5), (12, 5), (13, 6)])]).unwrap();
    let idx = classify(&q, 8).unwrap();
    let attrs = q.attset();
    let feasible = Configuration {
        h: attrs.clone(),
        eta: vec![1, 10, 5],
    };
    let rq = residual_query(&q, &feasible, &idx);
    assert!(rq.relations.is_empty());
    assert!(rq.feasible);
    let infeasible = Configuration {
        h: attrs,
        eta: vec![1, 13, 5],
    };
    assert!(!residual_query(&q, &infeasible, &idx).feasible);
}

#[test]
fn absent_heavy_value_empties_cross_residual() {
    let mut r: Vec<(u64, u64)> = (0..4).map(|i| (1, 10 + i)).collect();
    r.push((5, 20));
    let s = [(30, 7), (31, 8)];
    let q = JoinQuery::binary(vec![rel(0, 1, &r), rel(1, 2, &s)]).unwrap();
    let idx = classify(&q, 2).unwrap();
    // 1 is heavy on A; pretend a heavy value 5 on A, which is not in R_AB with light partners.
    let cfg = Configuration {
        h: vec![a(0)],
        eta: vec![5],
    };
    let rq = residual_query(&q, &cfg, &idx);
    assert_eq!(rq.relation_for(0).unwrap().rows(), &[vec![20]]);
    let cfg = Configuration {
        h: vec![a(2)],
        eta: vec![99],
    };
    assert!(residual_query(&q, &cfg, &idx).relation_for(1).unwrap().is_empty());
}

#[test]
fn no_heavy_values_only_empty_h_contributes() {
    let q = triangle(&[(1, 2), (3, 4), (5, 6)], &[(2, 7), (4, 8), (6, 9)], &[(1, 7), (3, 8), (5, 0)]);
    let idx = classify(&q, 2).unwrap();
    assert!(idx.heavy_set.is_empty());
    let rq = residual_query(&q, &Configuration::empty(), &idx);
    let residuals: Vec<&Relation> = rq.relations.iter().map(|r| &r.relation).collect();
    assert_eq!(residuals, q.relations().iter().collect::<Vec<_>>());
    let rep = decompose_check(&q, &idx).unwrap();
    assert!(rep.holds(), "{rep:?}");
    assert_eq!(rep.nonempty_pieces, 1);
    assert_eq!(rep.join_size, 2);
}

#[test]
fn repeated_value_is_covered_by_heavy_branch() {
    let mut r2: Vec<(u64, u64)> = (0..20).map(|i| (3, 100 + i)).collect();
    r2.extend((0..8).map(|i| (3, 10 + i)));
    let s: Vec<(u64, u64)> = (0..8).map(|i| (10 + i, 50)).chain([(3, 50), (3, 51)]).collect();
    let t = [(3, 50), (3, 51), (4, 50)];
    let q = triangle(&r2, &s, &t);
    let idx = classify(&q, 2).unwrap();
    assert!(idx.is_heavy_on(a(0), 3));
    let rep = decompose_check(&q, &idx).unwrap();
    assert!(rep.holds(), "{rep:?}");
    assert_eq!(rep.join_size, 8);
    // Every result has A = 3, so only pieces with A ∈ H contribute.
    let res = Residualizer::new(&q, &idx);
    let empty = res.residual(&Configuration::empty());
    assert_eq!(join_oracle(&empty.query()).len(), 0);
}

/// Deterministic pseudo-random triangle with a few planted heavy values.
fn random_triangle(m: usize, domain: u64, seed: u64) -> JoinQuery {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        s
    };
    let mut rels = Vec::new();
    for (x, y) in [(0, 1), (1, 2), (0, 2)] {
        let rows: Vec<(u64, u64)> = (0..m / 3)
            .map(|i| {
                let u = if i % 4 == 0 { 0 } else { next() % domain };
                (u, next() % domain)
            })
            .collect();
        rels.push(rel(x, y, &rows));
    }
    JoinQuery::binary(rels).unwrap()
}

#[test]
fn random_triangle_decomposes() {
    let q = random_triangle(300, 12, 7);
    let idx = classify(&q, 4).unwrap();
    let rep = decompose_check(&q, &idx).unwrap();
    assert!(rep.holds(), "{rep:?}");
    assert_eq!(rep.pieces_size, rep.join_size);
    assert_eq!(BigUint::from(rep.join_size), count_join(&q));
}

use num_bigint::BigUint;

fn arb_query() -> impl Strategy<Value = JoinQuery> {
    let edges = prop::sample::select(vec![
        vec![(0u32, 1u32), (1, 2), (0, 2)],
        vec![(0, 1), (1, 2), (2, 3)],
        vec![(0, 1), (1, 2), (2, 3), (0, 3)],
        vec![(0, 1), (0, 2), (0, 3)],
    ]);
    (edges, 1u64..8, any::<u64>()).prop_flat_map(|(edges, dom, _)| {
        let n = edges.len();
        prop::collection::vec(prop::collection::vec((0..dom, 0..dom), 1..24), n).prop_map(move |rows| {
            let rels = edges.iter().zip(rows).map(|(&(x, y), r)| rel(x, y, &r)).collect();
            JoinQuery::binary(rels).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_is_a_partition(q in arb_query(), l in 1u64..6) {
        let lambda = l.min(q.input_size() as u64);
        let idx = classify(&q, lambda).unwrap();
        let rep = decompose_check(&q, &idx).unwrap();
        prop_assert!(rep.holds(), "{:?}", rep);
    }

    #[test]
    fn residual_sizes_and_config_counts(q in arb_query(), l in 1u64..6) {
        let lambda = l.min(q.input_size() as u64);
        let idx = classify(&q, lambda).unwrap();
        let attset = q.attset();
        let k = attset.len() as u32;
        let m = q.input_size() as u128;
        for (x, vs) in &idx.per_attribute_heavy {
            prop_assert!(vs.len() as u64 <= lambda, "{:?} has {} heavy values", x, vs.len());
        }
        prop_assert!(idx.heavy_set.len() as u64 <= lambda * k as u64);
        let res = Residualizer::new(&q, &idx);
        for h in attr_subsets(&attset) {
            let configs = enumerate_configs(&q, &h, &idx).unwrap();
            prop_assert!(configs.len() as u128 <= (lambda as u128).pow(h.len() as u32));
            let mut total = 0u128;
            for cfg in &configs {
                prop_assert!(cfg.h.iter().zip(&cfg.eta).all(|(&x, &v)| idx.is_heavy_on(x, v)));
                let rq = res.residual(cfg);
                prop_assert_eq!(&rq, &residual_query(&q, cfg, &idx));
                for r in &rq.relations {
                    for row in r.relation.rows() {
                        for (&x, &v) in r.relation.scheme().iter().zip(row) {
                            prop_assert!(!idx.is_heavy_on(x, v));
                        }
                    }
                }
                total += rq.m_eta() as u128;
            }
            prop_assert!(total <= m * (lambda as u128).pow(k - 2), "H={:?}", h);
        }
    }
}
