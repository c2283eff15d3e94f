//! The join as simulated MPC rounds.
//!
//! Every machine holds the histogram, so everything derived from it (heavy
//! values, live configurations, `m_η`, step-1 slices) is computed once here
//! and shared read-only with all machines. The step-3 plan depends on the
//! broadcast counts, which every machine receives in full; it is likewise
//! derived once from machine 0's copy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use super::allocate::{allocate_machines, fit_shares, fit_to_budget, step1_machines, Step3Stats};
use super::histogram::Histogram;
use super::reduce::Split;
use crate::error::{Error, Result};
use crate::hypergraph::Rational;
use crate::mpcsim::{bucket, hash_with, input_tag, Cluster, MachineCtx, Outbox, Tag};
use crate::primitives::{join_fragments, plan_grid, round_robin_id, Composed, GridPlan, HypercubePlan, Placement, ShareVector};
use crate::relcore::{Attr, JoinQuery, Value};
use crate::taxonomy::{attr_subsets, enumerate_configs, extend_with, Configuration, HeavyLightIndex};

const STEP1: u32 = 20;
const WITNESS: u32 = 21;
const INTERSECT: u32 = 22;
const REQUEST: u32 = 23;
const REPLY: u32 = 24;
const ISOLATED: u32 = 25;
const COUNTS: u32 = 26;
const STEP3: u32 = 27;
/// Attribute slot of a feasibility entry in the count broadcast.
const FEASIBILITY: u64 = u64::MAX;

fn scope(mask: u32, c: usize) -> u64 {
    (mask as u64) << 32 | c as u64
}

fn unscope(s: u64) -> (u32, usize) {
    ((s >> 32) as u32, (s & 0xffff_ffff) as usize)
}

/// Events worth reporting: none of them affects correctness, but each voids
/// the load guarantee for the affected configurations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveFlags {
    /// The automatic `λ` exceeded `m` and was lowered to it.
    pub lambda_clamped: bool,
    pub step1_rescaled: bool,
    pub step3_rescaled: bool,
    /// Some `H` has more configurations than machines, so slices wrap.
    pub slices_wrapped: bool,
    pub shares_reduced: bool,
}

/// Either a real placement or a single machine receiving nothing.
enum Part<P> {
    Unit,
    Plan(P),
}

impl<P: Placement> Placement for Part<P> {
    fn machines(&self) -> usize {
        match self {
            Part::Unit => 1,
            Part::Plan(p) => p.machines(),
        }
    }

    fn place(&self, input: usize, id: u64, tuple: &[Value], out: &mut Vec<usize>) {
        match self {
            Part::Unit => out.push(0),
            Part::Plan(p) => p.place(input, id, tuple, out),
        }
    }
}

struct Step3 {
    start: usize,
    placement: Composed<Part<GridPlan>, Part<HypercubePlan>>,
    /// First tuple id of each sender's share of `R''_X(η)`.
    iso_offsets: BTreeMap<(Attr, usize), u64>,
}

/// Everything about one `H` with at least one live configuration.
struct Layout {
    mask: u32,
    split: Split,
    configs: Vec<Configuration>,
    m_eta: Vec<u64>,
    step1: Vec<usize>,
    start1: Vec<usize>,
    /// Per relation: `η` restricted to the relation's heavy positions → the
    /// configurations it belongs to.
    by_key: Vec<HashMap<Vec<Value>, Vec<usize>>>,
    /// Input schemes of step 3: isolated attributes, then light edges.
    inputs: Vec<Vec<Attr>>,
    step3: Vec<Option<Step3>>,
    /// Feasible configurations with `L = ∅`, emitted directly.
    whole: Vec<bool>,
    start3: Vec<usize>,
}

pub(super) struct Run<'a> {
    q: &'a JoinQuery,
    schemes: Vec<Vec<Attr>>,
    attset: Vec<Attr>,
    p: usize,
    seed: u64,
    m: u64,
    lambda: u64,
    rho: Rational,
    idx: HeavyLightIndex,
    layouts: Vec<Option<Layout>>,
    pub flags: SolveFlags,
}

impl<'a> Run<'a> {
    pub fn new(q: &'a JoinQuery, p: usize, seed: u64, rho: Rational, hist: &Histogram) -> Result<Self> {
        let attset = q.attset();
        if attset.len() >= 32 {
            return Err(Error::TooLarge {
                what: "attributes",
                size: attset.len(),
                limit: 31,
            });
        }
        let mut run = Run {
            q,
            schemes: q.relations().iter().map(|r| r.scheme().to_vec()).collect(),
            idx: hist.heavy_index(&attset),
            attset,
            p,
            seed,
            m: hist.m,
            lambda: hist.lambda,
            rho,
            layouts: Vec::new(),
            flags: SolveFlags::default(),
        };
        let subsets = attr_subsets(&run.attset);
        for (mask, h) in subsets.into_iter().enumerate() {
            let layout = run.layout(mask as u32, &h, hist)?;
            run.layouts.push(layout);
        }
        Ok(run)
    }

    fn rotation(&self, mask: u32) -> usize {
        (mask as usize * self.p) >> self.attset.len()
    }

    fn layout(&mut self, mask: u32, h: &[Attr], hist: &Histogram) -> Result<Option<Layout>> {
        let split = Split::new(self.q, h);
        let mut configs = Vec::new();
        let mut m_eta = Vec::new();
        'cfg: for cfg in enumerate_configs(self.q, h, &self.idx)? {
            let mut total = 0;
            for (ri, s) in self.schemes.iter().enumerate() {
                let bound: Vec<(usize, Value)> = s
                    .iter()
                    .enumerate()
                    .filter_map(|(c, &x)| cfg.get(x).map(|v| (c, v)))
                    .collect();
                if bound.len() == s.len() {
                    continue;
                }
                let n = hist.residual_size(ri, s, &bound);
                if n == 0 {
                    continue 'cfg;
                }
                total += n;
            }
            configs.push(cfg);
            m_eta.push(total);
        }
        if configs.is_empty() {
            return Ok(None);
        }
        let raw: Vec<usize> = m_eta
            .iter()
            .map(|&n| step1_machines(n, self.m, self.p, self.lambda, self.attset.len()))
            .collect();
        let (step1, rescaled) = fit_to_budget(&raw, self.p);
        self.flags.step1_rescaled |= rescaled;
        self.flags.slices_wrapped |= step1.iter().sum::<usize>() > self.p;
        let mut start1 = Vec::with_capacity(configs.len());
        let mut at = self.rotation(mask);
        for &n in &step1 {
            start1.push(at % self.p);
            at += n;
        }
        let mut by_key: Vec<HashMap<Vec<Value>, Vec<usize>>> = vec![HashMap::new(); self.schemes.len()];
        for (c, cfg) in configs.iter().enumerate() {
            for (ri, s) in self.schemes.iter().enumerate() {
                let key: Vec<Value> = s.iter().filter_map(|&x| cfg.get(x)).collect();
                by_key[ri].entry(key).or_default().push(c);
            }
        }
        let mut inputs: Vec<Vec<Attr>> = split.isolated.iter().map(|&y| vec![y]).collect();
        inputs.extend(split.light.iter().map(|&ri| self.schemes[ri].clone()));
        let n = configs.len();
        Ok(Some(Layout {
            mask,
            split,
            configs,
            m_eta,
            step1,
            start1,
            by_key,
            inputs,
            step3: (0..n).map(|_| None).collect(),
            whole: vec![false; n],
            start3: vec![0; n],
        }))
    }

    fn route_seed(&self, sc: u64, ri: usize) -> u64 {
        hash_with(self.seed, sc, ri as u64)
    }

    fn owner(&self, lay: &Layout, c: usize, y: Attr, v: Value) -> usize {
        let sc = scope(lay.mask, c);
        let salt = hash_with(self.seed, sc, 1 << 40 | y.0 as u64);
        (lay.start1[c] + bucket(salt, 1, v, lay.step1[c])) % self.p
    }

    fn layout_of(&self, sc: u64) -> (&Layout, usize) {
        let (mask, c) = unscope(sc);
        (self.layouts[mask as usize].as_ref().expect("scope of a live H"), c)
    }

    /// Step 1: every tuple goes to a random machine of each configuration it
    /// belongs to, projected onto the light attributes. Tuples heavy on both
    /// attributes are witnesses for configurations containing them.
    pub fn step1(&self, cluster: &mut Cluster) -> Result<()> {
        let mut bases = Vec::with_capacity(self.schemes.len());
        let mut acc = 0;
        for r in self.q.relations() {
            bases.push(acc);
            acc += r.len();
        }
        let k = self.attset.len();
        let pos: Vec<Vec<usize>> = self
            .schemes
            .iter()
            .map(|s| s.iter().map(|x| self.attset.binary_search(x).unwrap()).collect())
            .collect();
        cluster.run_round("step1", |ctx, out| {
            let mut batch: BTreeMap<(usize, Tag), Vec<Value>> = BTreeMap::new();
            for (ri, s) in self.schemes.iter().enumerate() {
                let words = ctx.get(&input_tag(ri)).to_vec();
                for (rank, row) in words.chunks(s.len()).enumerate() {
                    let id = round_robin_id(ctx.id, ctx.p, bases[ri], rank);
                    let heavy: Vec<bool> = s.iter().zip(row).map(|(&x, &v)| self.idx.is_heavy_on(x, v)).collect();
                    let emask: u32 = pos[ri].iter().map(|&i| 1u32 << i).sum();
                    let pattern: u32 = pos[ri].iter().zip(&heavy).filter(|(_, &h)| h).map(|(&i, _)| 1u32 << i).sum();
                    let key: Vec<Value> = row.iter().zip(&heavy).filter(|(_, &h)| h).map(|(&v, _)| v).collect();
                    let light: Vec<Value> = row.iter().zip(&heavy).filter(|(_, &h)| !h).map(|(&v, _)| v).collect();
                    for mask in 0u32..1 << k {
                        if mask & emask != pattern {
                            continue;
                        }
                        let Some(lay) = &self.layouts[mask as usize] else { continue };
                        let Some(cs) = lay.by_key[ri].get(&key) else { continue };
                        for &c in cs {
                            let sc = scope(mask, c);
                            if light.is_empty() {
                                let tag = Tag::new(WITNESS, sc, ri as u64);
                                batch.entry((lay.start1[c], tag)).or_default().extend_from_slice(row);
                            } else {
                                let r = bucket(self.route_seed(sc, ri), 0, id, lay.step1[c]);
                                let dest = (lay.start1[c] + r) % self.p;
                                let tag = Tag::new(STEP1, sc, ri as u64);
                                batch.entry((dest, tag)).or_default().extend_from_slice(&light);
                            }
                        }
                    }
                }
            }
            flush(out, batch);
        })?;
        Ok(())
    }

    /// Step 2, first half: unary residual values go to the owner of their
    /// value, and every light-edge holder asks the owners whether its border
    /// values survive the intersection.
    pub fn step2_intersect(&self, cluster: &mut Cluster) -> Result<()> {
        cluster.run_round("step2-intersect", |ctx, out| {
            let mut batch: BTreeMap<(usize, Tag), Vec<Value>> = BTreeMap::new();
            let mut requests: BTreeMap<(u64, Attr), BTreeSet<Value>> = BTreeMap::new();
            for (tag, words) in ctx.stream(STEP1) {
                let (lay, c) = self.layout_of(tag.scope);
                let ri = tag.item as usize;
                if lay.split.cross.binary_search(&ri).is_ok() {
                    let y = lay.split.cross_attr(self.q, ri);
                    for &v in words {
                        let t = Tag::new(INTERSECT, tag.scope, ri as u64);
                        batch.entry((self.owner(lay, c, y, v), t)).or_default().push(v);
                    }
                } else {
                    let s = &self.schemes[ri];
                    for row in words.chunks(2) {
                        for (&y, &v) in s.iter().zip(row) {
                            if lay.split.is_border(y) {
                                requests.entry((tag.scope, y)).or_default().insert(v);
                            }
                        }
                    }
                }
            }
            for ((sc, y), vals) in requests {
                let (lay, c) = self.layout_of(sc);
                let t = Tag::new(REQUEST, sc, (ctx.id as u64) << 32 | y.0 as u64);
                for v in vals {
                    batch.entry((self.owner(lay, c, y, v), t)).or_default().push(v);
                }
            }
            flush(out, batch);
        })?;
        Ok(())
    }

    /// Step 2, second half: owners intersect, keep `R''_X(η)` for isolated
    /// `X`, and answer the requests.
    pub fn step2_reply(&self, cluster: &mut Cluster) -> Result<()> {
        cluster.run_round("step2-reply", |ctx, out| {
            let mut seen: BTreeMap<(u64, Attr), BTreeMap<Value, usize>> = BTreeMap::new();
            for (tag, words) in ctx.stream(INTERSECT) {
                let (lay, _) = self.layout_of(tag.scope);
                let y = lay.split.cross_attr(self.q, tag.item as usize);
                let counts = seen.entry((tag.scope, y)).or_default();
                for &v in words {
                    *counts.entry(v).or_insert(0) += 1;
                }
            }
            let mut accepted: BTreeMap<(u64, Attr), BTreeSet<Value>> = BTreeMap::new();
            for ((sc, y), counts) in seen {
                let (lay, _) = self.layout_of(sc);
                let need = lay.split.cross_at[&y].len();
                accepted.insert((sc, y), counts.into_iter().filter(|&(_, n)| n == need).map(|(v, _)| v).collect());
            }
            let mut batch: BTreeMap<(usize, Tag), Vec<Value>> = BTreeMap::new();
            for (tag, words) in ctx.stream(REQUEST) {
                let (req, y) = ((tag.item >> 32) as usize, Attr(tag.item as u32));
                let Some(acc) = accepted.get(&(tag.scope, y)) else { continue };
                let ok: Vec<Value> = words.iter().copied().filter(|v| acc.contains(v)).collect();
                if !ok.is_empty() {
                    batch.entry((req, Tag::new(REPLY, tag.scope, y.0 as u64))).or_default().extend(ok);
                }
            }
            flush(out, batch);
            for ((sc, y), vals) in accepted {
                let (lay, _) = self.layout_of(sc);
                if lay.split.isolated.binary_search(&y).is_ok() && !vals.is_empty() {
                    ctx.store_mut().insert(Tag::new(ISOLATED, sc, y.0 as u64), vals.into_iter().collect());
                }
            }
        })?;
        Ok(())
    }

    /// Every machine tells every other how many values of each `R''_X(η)`
    /// it owns and how many inactive edges of each configuration it has
    /// witnessed; entries are `[mask, config, attribute, count]`.
    pub fn count_broadcast(&self, cluster: &mut Cluster) -> Result<()> {
        cluster.broadcast_all("count-broadcast", COUNTS, 0, |ctx| {
            let mut words = Vec::new();
            for (tag, vals) in ctx.stream(ISOLATED) {
                let (mask, c) = unscope(tag.scope);
                words.extend([mask as u64, c as u64, tag.item, vals.len() as u64]);
            }
            let mut witnessed: BTreeMap<u64, usize> = BTreeMap::new();
            for (tag, _) in ctx.stream(WITNESS) {
                *witnessed.entry(tag.scope).or_insert(0) += 1;
            }
            for (sc, n) in witnessed {
                let (mask, c) = unscope(sc);
                words.extend([mask as u64, c as u64, FEASIBILITY, n as u64]);
            }
            words
        })?;
        Ok(())
    }

    /// Derives the step-3 plan from the broadcast counts as held by machine 0.
    pub fn plan_step3(&mut self, cluster: &Cluster) -> Result<()> {
        type Key = (u32, usize);
        let mut iso: BTreeMap<Key, BTreeMap<Attr, BTreeMap<usize, u64>>> = BTreeMap::new();
        let mut witnessed: BTreeMap<Key, u64> = BTreeMap::new();
        let store = cluster.store(0);
        for (tag, words) in store.range(Tag::new(COUNTS, 0, 0)..=Tag::new(COUNTS, u64::MAX, u64::MAX)) {
            let sender = tag.item as usize;
            for e in words.chunks(4) {
                let key = (e[0] as u32, e[1] as usize);
                if e[2] == FEASIBILITY {
                    *witnessed.entry(key).or_insert(0) += e[3];
                } else {
                    iso.entry(key)
                        .or_default()
                        .entry(Attr(e[2] as u32))
                        .or_default()
                        .insert(sender, e[3]);
                }
            }
        }
        let k = self.attset.len();
        for mask in 0..self.layouts.len() {
            let Some(lay) = self.layouts[mask].as_ref() else { continue };
            let mask = mask as u32;
            let split = &lay.split;
            let stats: Vec<Step3Stats> = (0..lay.configs.len())
                .map(|c| {
                    let feasible = witnessed.get(&(mask, c)).copied().unwrap_or(0) == split.inactive.len() as u64;
                    let per = iso.get(&(mask, c));
                    let iso_counts: Vec<u64> = split
                        .isolated
                        .iter()
                        .map(|y| per.and_then(|m| m.get(y)).map_or(0, |s| s.values().sum()))
                        .collect();
                    Step3Stats {
                        live: feasible && iso_counts.iter().all(|&n| n > 0),
                        iso_counts,
                    }
                })
                .collect();
            let plan = allocate_machines(&lay.m_eta, &stats, self.p, self.m, self.lambda, &self.rho, k, split.l.len());
            self.flags.step3_rescaled |= plan.step3_rescaled;
            self.flags.slices_wrapped |= plan.step3.iter().sum::<usize>() > self.p;
            let light_attrs = split.light_attrs();
            let mut at = self.rotation(mask);
            let mut step3 = Vec::with_capacity(stats.len());
            let mut start3 = Vec::with_capacity(stats.len());
            let mut whole = Vec::with_capacity(stats.len());
            for (c, st) in stats.iter().enumerate() {
                let size = plan.step3[c];
                let start = at % self.p;
                at += size;
                start3.push(start);
                whole.push(st.live && split.l.is_empty());
                if !st.live || split.l.is_empty() {
                    step3.push(None);
                    continue;
                }
                let (cube, p2) = if light_attrs.is_empty() {
                    (Part::Unit, 1)
                } else {
                    let (shares, reduced) = fit_shares(light_attrs.len(), self.lambda, size);
                    self.flags.shares_reduced |= reduced;
                    let shares: ShareVector = light_attrs.iter().copied().zip(shares).collect();
                    let seed = hash_with(self.seed, 0xc0be, scope(mask, c));
                    let light_schemes: Vec<Vec<Attr>> = split.light.iter().map(|&ri| self.schemes[ri].clone()).collect();
                    let plan = HypercubePlan::for_schemes(&light_schemes, &shares, seed)?;
                    let p2 = plan.machines();
                    (Part::Plan(plan), p2)
                };
                let grid = if split.isolated.is_empty() {
                    Part::Unit
                } else {
                    Part::Plan(plan_grid(&st.iso_counts, (size / p2).max(1))?)
                };
                let mut iso_offsets = BTreeMap::new();
                if let Some(per) = iso.get(&(mask, c)) {
                    for (&y, senders) in per {
                        let mut off = 0;
                        for (&s, &n) in senders {
                            iso_offsets.insert((y, s), off);
                            off += n;
                        }
                    }
                }
                step3.push(Some(Step3 {
                    start,
                    placement: Composed::new(grid, cube, split.isolated.len()),
                    iso_offsets,
                }));
            }
            let lay = self.layouts[mask as usize].as_mut().unwrap();
            lay.step3 = step3;
            lay.start3 = start3;
            lay.whole = whole;
        }
        Ok(())
    }

    /// Step 3: isolated values and surviving light tuples go to the machines
    /// of their configuration's composed grid × hypercube.
    pub fn step3(&self, cluster: &mut Cluster) -> Result<()> {
        cluster.run_round("step3", |ctx, out| {
            let mut batch: BTreeMap<(usize, Tag), Vec<Value>> = BTreeMap::new();
            let mut dests = Vec::new();
            for (tag, vals) in ctx.stream(ISOLATED) {
                let (lay, c) = self.layout_of(tag.scope);
                let Some(s3) = &lay.step3[c] else { continue };
                let y = Attr(tag.item as u32);
                let input = lay.split.isolated.binary_search(&y).unwrap();
                let base = s3.iso_offsets[&(y, ctx.id)];
                let t = Tag::new(STEP3, tag.scope, input as u64);
                for (rank, &v) in vals.iter().enumerate() {
                    dests.clear();
                    s3.placement.place(input, base + rank as u64, &[v], &mut dests);
                    for &d in &dests {
                        batch.entry(((s3.start + d) % self.p, t)).or_default().push(v);
                    }
                }
            }
            for (tag, words) in ctx.stream(STEP1) {
                let (lay, c) = self.layout_of(tag.scope);
                let ri = tag.item as usize;
                let Ok(li) = lay.split.light.binary_search(&ri) else { continue };
                let Some(s3) = &lay.step3[c] else { continue };
                let s = &self.schemes[ri];
                let allowed: Vec<Option<BTreeSet<Value>>> = s
                    .iter()
                    .map(|&y| {
                        lay.split
                            .is_border(y)
                            .then(|| ctx.get(&Tag::new(REPLY, tag.scope, y.0 as u64)).iter().copied().collect())
                    })
                    .collect();
                let input = lay.split.isolated.len() + li;
                let t = Tag::new(STEP3, tag.scope, input as u64);
                for row in words.chunks(2) {
                    let keep = row
                        .iter()
                        .zip(&allowed)
                        .all(|(v, a)| a.as_ref().is_none_or(|a| a.contains(v)));
                    if !keep {
                        continue;
                    }
                    dests.clear();
                    s3.placement.place(input, 0, row, &mut dests);
                    for &d in &dests {
                        batch.entry(((s3.start + d) % self.p, t)).or_default().extend_from_slice(row);
                    }
                }
            }
            flush(out, batch);
        })?;
        Ok(())
    }

    /// Local joins of whatever step 3 delivered, plus the configurations
    /// with no light attribute, which are their own answer.
    pub fn finish(&self, cluster: &mut Cluster) -> Result<()> {
        let failed = Mutex::new(None);
        cluster.compute_local(|ctx| {
            if let Err(e) = self.finish_machine(ctx) {
                *failed.lock().unwrap() = Some(e);
            }
        });
        match failed.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn finish_machine(&self, ctx: &mut MachineCtx) -> Result<()> {
        let mut scopes: BTreeMap<u64, BTreeMap<usize, Vec<Value>>> = BTreeMap::new();
        for (tag, words) in ctx.stream(STEP3) {
            scopes.entry(tag.scope).or_default().insert(tag.item as usize, words.clone());
        }
        let mut results = Vec::new();
        for (sc, frags) in scopes {
            let (lay, c) = self.layout_of(sc);
            if frags.len() < lay.inputs.len() {
                continue;
            }
            let words: Vec<&[Value]> = frags.values().map(Vec::as_slice).collect();
            let j = join_fragments(&lay.inputs, &words)?;
            let cfg = &lay.configs[c];
            for row in j.rows() {
                results.push(extend_with(&self.attset, j.scheme(), row, cfg));
            }
        }
        for lay in self.layouts.iter().flatten() {
            for (c, &w) in lay.whole.iter().enumerate() {
                if w && lay.start3[c] == ctx.id {
                    results.push(extend_with(&self.attset, &[], &[], &lay.configs[c]));
                }
            }
        }
        for r in results {
            ctx.emit(r);
        }
        Ok(())
    }

    /// Number of live configurations over all `H`.
    pub fn live_configurations(&self) -> usize {
        self.layouts.iter().flatten().map(|l| l.configs.len()).sum()
    }

    /// Configurations that received step-3 machines or are answered
    /// directly.
    pub fn solved_configurations(&self) -> usize {
        self.layouts
            .iter()
            .flatten()
            .map(|l| l.step3.iter().filter(|s| s.is_some()).count() + l.whole.iter().filter(|&&w| w).count())
            .sum()
    }
}

fn flush(out: &mut Outbox, batch: BTreeMap<(usize, Tag), Vec<Value>>) {
    for ((dest, tag), words) in batch {
        out.send(dest, tag, &words);
    }
}
