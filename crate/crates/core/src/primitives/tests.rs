use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::mpcsim::Outbox;
use crate::relcore::cartesian_oracle;

const A: Attr = Attr(0);
const B: Attr = Attr(1);
const C: Attr = Attr(2);
const D: Attr = Attr(3);

fn random_binary(x: Attr, y: Attr, n: usize, dom: u64, rng: &mut ChaCha8Rng) -> Relation {
    let mut set = BTreeSet::new();
    while set.len() < n {
        set.insert((rng.random_range(0..dom), rng.random_range(0..dom)));
    }
    Relation::binary(x, y, set).unwrap()
}

fn random_triangle(per_relation: usize, dom: u64, seed: u64) -> JoinQuery {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    JoinQuery::new(vec![
        random_binary(A, B, per_relation, dom, &mut rng),
        random_binary(B, C, per_relation, dom, &mut rng),
        random_binary(A, C, per_relation, dom, &mut rng),
    ])
    .unwrap()
}

fn cube(shares: &[(Attr, usize)]) -> ShareVector {
    shares.iter().copied().collect()
}

#[test]
fn plan_examples() {
    let g = plan_grid(&[100, 100], 4).unwrap();
    assert_eq!((g.t_prime, g.threshold, g.dims.clone()), (2, 50, vec![2, 2]));
    for p in [1, 2, 5, 10] {
        let g = plan_grid(&[1000], p).unwrap();
        assert_eq!((g.t_prime, g.dims.clone()), (1, vec![p]));
    }
    let g = plan_grid(&[100, 1], 100).unwrap();
    assert_eq!(g.thresholds, vec![1, 1]);
    assert_eq!((g.t_prime, g.dims.clone()), (2, vec![100, 1]));
    assert!(plan_grid(&[], 4).is_err());
    // A tiny relation beyond the grid is broadcast.
    let g = plan_grid(&[1, 1000, 1000], 16).unwrap();
    assert_eq!(g.order, vec![1, 2, 0]);
    assert_eq!(g.t_prime, 2);
    assert!(g.is_broadcast(0));
    assert_eq!(g.dims, vec![4, 4]);
}

#[test]
fn grid_two_by_two() {
    let r1 = Relation::unary(A, [1, 2]);
    let r2 = Relation::unary(B, [10, 11]);
    let q = JoinQuery::new(vec![r1.clone(), r2.clone()]).unwrap();
    let mut c = Cluster::init(4, &q, 0).unwrap();
    let plan = grid_cartesian(&mut c, &[r1.clone(), r2.clone()]).unwrap();
    assert_eq!(plan.dims, vec![2, 2]);
    assert_eq!(c.load_report().per_round[0], vec![2, 2, 2, 2]);
    assert!(c.outputs().iter().all(|o| o.len() == 1));
    assert_eq!(c.emitted_count(), 4);
    assert_eq!(c.collect_output(), cartesian_oracle(&[r1, r2]).unwrap().rows());
}

#[test]
fn grid_single_machine() {
    let r1 = Relation::unary(A, 0..7);
    let r2 = Relation::binary(B, C, (0..5).map(|i| (i, i))).unwrap();
    let q = JoinQuery::new(vec![r1.clone(), r2.clone()]).unwrap();
    let mut c = Cluster::init(1, &q, 0).unwrap();
    grid_cartesian(&mut c, &[r1.clone(), r2.clone()]).unwrap();
    assert_eq!(c.load_report().total_load(), 7 + 10);
    assert_eq!(c.collect_output().len(), 35);
}

#[test]
fn grid_three_unary() {
    let rels = [
        Relation::unary(A, 0..4),
        Relation::unary(B, 0..4),
        Relation::unary(C, 0..4),
    ];
    let q = JoinQuery::new(rels.to_vec()).unwrap();
    let mut c = Cluster::init(8, &q, 0).unwrap();
    let plan = grid_cartesian(&mut c, &rels).unwrap();
    assert_eq!(plan.dims, vec![2, 2, 2]);
    assert_eq!(c.load_report().per_round[0], vec![6; 8]);
    assert_eq!(c.collect_output().len(), 64);
    assert_eq!(c.emitted_count(), 64);
}

#[test]
fn grid_rejects_shared_attributes() {
    let r1 = Relation::unary(A, 0..4);
    let r2 = Relation::binary(A, B, [(1, 1)]).unwrap();
    let q = JoinQuery::new(vec![r1.clone(), r2.clone()]).unwrap();
    let mut c = Cluster::init(2, &q, 0).unwrap();
    assert!(grid_cartesian(&mut c, &[r1, r2]).is_err());
}

#[test]
fn compose_unit_placements() {
    let q1 = JoinQuery::new(vec![Relation::unary(A, [1, 2])]).unwrap();
    let q2 = JoinQuery::new(vec![Relation::unary(B, [5, 6])]).unwrap();
    let a = plan_grid(&[2], 2).unwrap();
    let b = plan_grid(&[2], 2).unwrap();
    let all = JoinQuery::new(vec![q1.relations()[0].clone(), q2.relations()[0].clone()]).unwrap();
    let mut c = Cluster::init(4, &all, 0).unwrap();
    compose_products(&mut c, &q1, &a, &q2, &b).unwrap();
    assert!(c.outputs().iter().all(|o| o.len() == 1));
    assert_eq!(c.collect_output().len(), 4);

    let mut c = Cluster::init(3, &all, 0).unwrap();
    assert!(compose_products(&mut c, &q1, &a, &q2, &b).is_err());
}

#[test]
fn compose_with_empty_side() {
    let q1 = JoinQuery::new(vec![Relation::unary(A, 0..8)]).unwrap();
    let q2 = JoinQuery::new(vec![Relation::unary(B, [])]).unwrap();
    let all = JoinQuery::new(vec![q1.relations()[0].clone(), q2.relations()[0].clone()]).unwrap();
    let mut c = Cluster::init(2, &all, 0).unwrap();
    compose_products(&mut c, &q1, plan_grid(&[8], 2).unwrap(), &q2, plan_grid(&[0], 2).unwrap()).unwrap();
    assert!(c.collect_output().is_empty());
    assert!(c.load_report().total_load() > 0);
}

#[test]
fn compose_triangle_with_unary() {
    let q1 = random_triangle(67, 30, 4);
    let r2 = Relation::unary(D, 0..6);
    let q2 = JoinQuery::new(vec![r2.clone()]).unwrap();
    let hc = HypercubePlan::new(&q1, &cube(&[(A, 2), (B, 2), (C, 2)]), 17).unwrap();
    let gp = plan_grid(&[6], 2).unwrap();
    let mut rels = q1.relations().to_vec();
    rels.push(r2.clone());
    let all = JoinQuery::new(rels).unwrap();
    let mut c = Cluster::init(16, &all, 9).unwrap();
    compose_products(&mut c, &q1, &hc, &q2, &gp).unwrap();
    let expected = cartesian_oracle(&[join_oracle(&q1), r2]).unwrap();
    assert_eq!(c.collect_output(), expected.rows());
}

#[test]
fn composed_rows_share_random_choices() {
    let q1 = random_triangle(50, 20, 1);
    let r2 = Relation::unary(D, 0..6);
    let hc = HypercubePlan::new(&q1, &cube(&[(A, 2), (B, 1), (C, 2)]), 3).unwrap();
    let gp = plan_grid(&[6], 3).unwrap();
    let composed = Composed::new(&hc, &gp, 3);
    let mut rels = q1.relations().to_vec();
    rels.push(r2);
    let all = JoinQuery::new(rels).unwrap();
    let mut c = Cluster::init(12, &all, 0).unwrap();
    let schemes: Vec<usize> = all.relations().iter().map(Relation::arity).collect();
    c.run_round("route", |ctx, out: &mut Outbox| {
        let mut dests = Vec::new();
        for (ri, &k) in schemes.iter().enumerate() {
            for (rank, row) in ctx.get(&input_tag(ri)).to_vec().chunks(k).enumerate() {
                dests.clear();
                let id = round_robin_id(ctx.id, ctx.p, 0, rank);
                composed.place(ri, id, row, &mut dests);
                for &d in &dests {
                    out.send(d, Tag::new(ROUTE_STREAM, ri as u64, 0), row);
                }
            }
        }
    })
    .unwrap();
    let fragment = |m: usize, ri: u64| -> BTreeSet<Vec<Value>> {
        let k = schemes[ri as usize];
        c.store(m)
            .get(&Tag::new(ROUTE_STREAM, ri, 0))
            .map(|w| w.chunks(k).map(<[Value]>::to_vec).collect())
            .unwrap_or_default()
    };
    let (p1, p2) = (4, 3);
    for i in 0..p1 {
        for ri in 0..3 {
            let first = fragment(i, ri);
            assert!(!first.is_empty());
            for j in 1..p2 {
                assert_eq!(fragment(j * p1 + i, ri), first);
            }
        }
    }
    for j in 0..p2 {
        let first = fragment(j * p1, 3);
        for i in 1..p1 {
            assert_eq!(fragment(j * p1 + i, 3), first);
        }
    }
}

#[test]
fn skew_free_examples() {
    let q = random_triangle(40, 10, 2);
    let ones = cube(&[(A, 1), (B, 1), (C, 1)]);
    assert!(check_skew_free(&q, &ones, 1));
    let hot = JoinQuery::new(vec![Relation::binary(A, B, (0..10).map(|i| (7, i))).unwrap()]).unwrap();
    assert!(!check_skew_free(&hot, &cube(&[(A, 2), (B, 1)]), 1));
    assert!(check_skew_free(&hot, &cube(&[(A, 1), (B, 2)]), 1));
}

#[test]
fn hypercube_replication() {
    let q = random_triangle(30, 12, 5);
    let mut c = Cluster::init(8, &q, 0).unwrap();
    hypercube_join(&mut c, &q, &cube(&[(A, 2), (B, 2), (C, 2)]), 11).unwrap();
    let words: u64 = c.load_report().per_round[0].iter().sum();
    assert_eq!(words, 3 * 30 * 2 * 2);
    assert_eq!(c.collect_output(), join_oracle(&q).rows());
}

#[test]
fn hypercube_identical_values() {
    let q = JoinQuery::new(vec![
        Relation::binary(A, B, [(4, 4)]).unwrap(),
        Relation::binary(B, C, [(4, 4)]).unwrap(),
        Relation::binary(A, C, [(4, 4)]).unwrap(),
    ])
    .unwrap();
    let mut c = Cluster::init(1, &q, 0).unwrap();
    hypercube_join(&mut c, &q, &cube(&[(A, 1), (B, 1), (C, 1)]), 0).unwrap();
    assert_eq!(c.collect_output(), vec![vec![4, 4, 4]]);
    let mut c = Cluster::init(2, &q, 0).unwrap();
    assert!(hypercube_join(&mut c, &q, &cube(&[(A, 1), (B, 1), (C, 1)]), 0).is_err());
}

#[test]
fn hypercube_matches_oracle_over_seeds() {
    let q = random_triangle(200, 60, 8);
    let shares = cube(&[(A, 2), (B, 2), (C, 2)]);
    assert!(check_skew_free(&q, &shares, 1));
    let expected = join_oracle(&q);
    for seed in 0..10 {
        let mut c = Cluster::init(8, &q, seed).unwrap();
        hypercube_join(&mut c, &q, &shares, seed).unwrap();
        assert_eq!(c.collect_output(), expected.rows());
    }
}

#[test]
fn round_robin_ids_enumerate_each_relation() {
    for p in 1..6 {
        for base in 0..9 {
            let n = 13;
            let mut ids = Vec::new();
            for machine in 0..p {
                let count = (base..base + n).filter(|g| g % p == machine).count();
                ids.extend((0..count).map(|r| round_robin_id(machine, p, base, r)));
            }
            ids.sort_unstable();
            assert_eq!(ids, (0..n as u64).collect::<Vec<_>>());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grid_is_complete_and_within_pinned_load(
        sizes in proptest::collection::vec(0u64..40, 1..4),
        p in prop_oneof![Just(1usize), Just(4), Just(16), Just(64)],
    ) {
        let attrs = [A, B, C];
        let rels: Vec<Relation> = sizes
            .iter()
            .zip(attrs)
            .map(|(&n, a)| Relation::unary(a, 0..n))
            .collect();
        let q = JoinQuery::new(rels.clone()).unwrap();
        let mut c = Cluster::init(p, &q, 0).unwrap();
        let plan = grid_cartesian(&mut c, &rels).unwrap();
        prop_assert!(plan.machines() <= p);
        prop_assert_eq!(c.collect_output(), cartesian_oracle(&rels).unwrap().rows().to_vec());
        let broadcast: u64 = (0..rels.len()).filter(|&i| plan.is_broadcast(i)).map(|i| sizes[i]).sum();
        let bound = 2 * plan.t_prime as u64 * plan.threshold + broadcast;
        prop_assert!(c.load_report().total_load() <= bound);
    }
}
