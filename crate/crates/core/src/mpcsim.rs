//! A deterministic simulator of the MPC model.
//!
//! `p` machines hold private key/value stores. Each round runs a compute
//! function on every machine; the function may read and rewrite its own store
//! and queue messages, which are delivered only after every machine has
//! finished. The cost of a round is the largest number of words any machine
//! receives. A word is one `u64`; tags and headers are free.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::par;
use crate::relcore::{JoinQuery, Value};

/// Routing label of a message and key of a machine-local store entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub stream: u32,
    pub scope: u64,
    pub item: u64,
}

impl Tag {
    pub const fn new(stream: u32, scope: u64, item: u64) -> Self {
        Tag { stream, scope, item }
    }
}

/// Stream holding the initial input; `scope` is the relation's position in
/// the query, words are its rows concatenated.
pub const INPUT_STREAM: u32 = 0;

pub fn input_tag(relation: usize) -> Tag {
    Tag::new(INPUT_STREAM, relation as u64, 0)
}

/// How machine compute functions are scheduled. Results never depend on it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// Machines run on the rayon pool (sequential without the `parallel`
    /// feature).
    #[default]
    Parallel,
    Sequential,
    /// Machines run one at a time in the given order; used to check that
    /// results are schedule-independent.
    Permuted(Vec<usize>),
}

#[derive(Clone, Debug, Default)]
pub struct Machine {
    store: BTreeMap<Tag, Vec<Value>>,
    output: Vec<Vec<Value>>,
}

/// A machine's view during one compute phase.
pub struct MachineCtx<'a> {
    pub id: usize,
    pub p: usize,
    pub seed: u64,
    pub round: usize,
    machine: &'a mut Machine,
}

impl MachineCtx<'_> {
    pub fn store(&self) -> &BTreeMap<Tag, Vec<Value>> {
        &self.machine.store
    }

    pub fn store_mut(&mut self) -> &mut BTreeMap<Tag, Vec<Value>> {
        &mut self.machine.store
    }

    pub fn get(&self, tag: &Tag) -> &[Value] {
        self.machine.store.get(tag).map_or(&[], Vec::as_slice)
    }

    pub fn take(&mut self, tag: &Tag) -> Vec<Value> {
        self.machine.store.remove(tag).unwrap_or_default()
    }

    /// Entries whose tag lies in `stream`, in tag order.
    pub fn stream(&self, stream: u32) -> impl Iterator<Item = (&Tag, &Vec<Value>)> + '_ {
        self.machine
            .store
            .range(Tag::new(stream, 0, 0)..=Tag::new(stream, u64::MAX, u64::MAX))
    }

    /// Records a result tuple.
    pub fn emit(&mut self, tuple: Vec<Value>) {
        self.machine.output.push(tuple);
    }
}

/// Messages queued during a compute phase, delivered at the round barrier.
#[derive(Default)]
pub struct Outbox {
    headers: Vec<(usize, Tag, usize, usize)>,
    words: Vec<Value>,
}

impl Outbox {
    pub fn send(&mut self, dest: usize, tag: Tag, payload: &[Value]) {
        self.headers.push((dest, tag, self.words.len(), payload.len()));
        self.words.extend_from_slice(payload);
    }

    pub fn words(&self) -> usize {
        self.words.len()
    }
}

/// Per-round, per-machine received word counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub labels: Vec<String>,
    pub per_round: Vec<Vec<u64>>,
    /// Wall-clock time of each round; not part of equality-relevant output.
    pub elapsed: Vec<Duration>,
}

impl LoadReport {
    pub fn rounds(&self) -> usize {
        self.per_round.len()
    }

    pub fn round_loads(&self) -> Vec<u64> {
        self.per_round
            .iter()
            .map(|r| r.iter().copied().max().unwrap_or(0))
            .collect()
    }

    pub fn total_load(&self) -> u64 {
        self.round_loads().iter().sum()
    }

    /// Sum of the round loads whose label starts with `prefix`.
    pub fn load_of(&self, prefix: &str) -> u64 {
        self.labels
            .iter()
            .zip(self.round_loads())
            .filter(|(l, _)| l.starts_with(prefix))
            .map(|(_, v)| v)
            .sum()
    }

    pub fn push(&mut self, label: impl Into<String>, received: Vec<u64>, elapsed: Duration) {
        self.labels.push(label.into());
        self.per_round.push(received);
        self.elapsed.push(elapsed);
    }

    /// `round,machine,words_received`, one row per round and machine.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("round,machine,words_received\n");
        for (r, row) in self.per_round.iter().enumerate() {
            for (m, w) in row.iter().enumerate() {
                writeln!(s, "{r},{m},{w}").unwrap();
            }
        }
        s
    }
}

pub struct Cluster {
    p: usize,
    seed: u64,
    machines: Vec<Machine>,
    report: LoadReport,
    execution: Execution,
}

impl Cluster {
    /// `p` empty machines.
    pub fn new(p: usize, seed: u64) -> Result<Self> {
        if p == 0 {
            return Err(Error::domain("a cluster needs at least one machine"));
        }
        Ok(Cluster {
            p,
            seed,
            machines: vec![Machine::default(); p],
            report: LoadReport::default(),
            execution: Execution::default(),
        })
    }

    /// Distributes the input round-robin in canonical order: relations in
    /// query order, rows in sorted order. Placing the input is free.
    pub fn init(p: usize, q: &JoinQuery, seed: u64) -> Result<Self> {
        let mut c = Self::new(p, seed)?;
        let mut next = 0;
        for (ri, r) in q.relations().iter().enumerate() {
            for row in r.rows() {
                c.machines[next]
                    .store
                    .entry(input_tag(ri))
                    .or_default()
                    .extend_from_slice(row);
                next = (next + 1) % p;
            }
        }
        Ok(c)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn round_index(&self) -> usize {
        self.report.rounds()
    }

    pub fn set_execution(&mut self, e: Execution) {
        self.execution = e;
    }

    pub fn execution(&self) -> &Execution {
        &self.execution
    }

    pub fn store(&self, machine: usize) -> &BTreeMap<Tag, Vec<Value>> {
        &self.machines[machine].store
    }

    pub fn load_report(&self) -> &LoadReport {
        &self.report
    }

    fn for_each_machine<R, F>(&mut self, f: F) -> Vec<R>
    where
        R: Send + Default,
        F: Fn(&mut MachineCtx) -> R + Sync + Send,
    {
        let (p, seed, round) = (self.p, self.seed, self.report.rounds());
        let run = |id: usize, machine: &mut Machine| {
            let mut ctx = MachineCtx {
                id,
                p,
                seed,
                round,
                machine,
            };
            f(&mut ctx)
        };
        match &self.execution {
            Execution::Parallel => par::map_mut_collect(true, &mut self.machines, run),
            Execution::Sequential => par::map_mut_collect(false, &mut self.machines, run),
            Execution::Permuted(order) => {
                let mut out: Vec<R> = (0..p).map(|_| R::default()).collect();
                let mut seen = vec![false; p];
                for id in order.iter().copied().chain(0..p) {
                    if id < p && !seen[id] {
                        seen[id] = true;
                        out[id] = run(id, &mut self.machines[id]);
                    }
                }
                out
            }
        }
    }

    /// One communication round. Every machine runs `compute`, then all queued
    /// messages are delivered in (source machine, send order) order.
    pub fn run_round<F>(&mut self, label: &str, compute: F) -> Result<Vec<u64>>
    where
        F: Fn(&mut MachineCtx, &mut Outbox) + Sync + Send,
    {
        let start = Instant::now();
        let outboxes = self.for_each_machine(|ctx| {
            let mut out = Outbox::default();
            compute(ctx, &mut out);
            out
        });
        for (from, out) in outboxes.iter().enumerate() {
            for &(dest, _, _, len) in &out.headers {
                if dest >= self.p {
                    return Err(Error::BadDestination {
                        from,
                        dest,
                        p: self.p,
                    });
                }
                if len == 0 {
                    return Err(Error::domain(format!("machine {from} sent an empty message")));
                }
            }
        }
        let mut received = vec![0u64; self.p];
        for out in &outboxes {
            for &(dest, tag, off, len) in &out.headers {
                received[dest] += len as u64;
                self.machines[dest]
                    .store
                    .entry(tag)
                    .or_default()
                    .extend_from_slice(&out.words[off..off + len]);
            }
        }
        self.report.push(label, received.clone(), start.elapsed());
        Ok(received)
    }

    /// `from` sends `payload` to every other machine.
    pub fn broadcast(&mut self, label: &str, from: usize, tag: Tag, payload: &[Value]) -> Result<Vec<u64>> {
        if from >= self.p {
            return Err(Error::BadDestination {
                from,
                dest: from,
                p: self.p,
            });
        }
        self.run_round(label, |ctx, out| {
            if ctx.id == from {
                for d in (0..ctx.p).filter(|&d| d != from) {
                    out.send(d, tag, payload);
                }
            }
        })
    }

    /// Every machine sends the payload produced by `make` to every other
    /// machine, under a tag whose `item` is the sender's id.
    pub fn broadcast_all<F>(&mut self, label: &str, stream: u32, scope: u64, make: F) -> Result<Vec<u64>>
    where
        F: Fn(&MachineCtx) -> Vec<Value> + Sync + Send,
    {
        self.run_round(label, |ctx, out| {
            let payload = make(ctx);
            if payload.is_empty() {
                return;
            }
            let tag = Tag::new(stream, scope, ctx.id as u64);
            // A machine's own copy is a local write, not a message.
            ctx.store_mut().entry(tag).or_default().extend_from_slice(&payload);
            for d in (0..ctx.p).filter(|&d| d != ctx.id) {
                out.send(d, tag, &payload);
            }
        })
    }

    /// Records a round whose communication is accounted for without being
    /// simulated, e.g. a standard sorting-based preprocessing step.
    pub fn charge_round(&mut self, label: &str, received: Vec<u64>) -> Result<()> {
        if received.len() != self.p {
            return Err(Error::domain("charged round must list every machine"));
        }
        self.report.push(label, received, Duration::ZERO);
        Ok(())
    }

    /// Local computation on every machine; free and not a round.
    pub fn compute_local<F>(&mut self, f: F)
    where
        F: Fn(&mut MachineCtx) + Sync + Send,
    {
        self.for_each_machine(|ctx| f(ctx));
    }

    /// Tuples emitted by each machine, indexed by machine.
    pub fn outputs(&self) -> Vec<&[Vec<Value>]> {
        self.machines.iter().map(|m| m.output.as_slice()).collect()
    }

    /// The union of all emitted tuples, sorted and deduplicated.
    pub fn collect_output(&self) -> Vec<Vec<Value>> {
        let mut all: Vec<Vec<Value>> = self
            .machines
            .iter()
            .flat_map(|m| m.output.iter().cloned())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn emitted_count(&self) -> usize {
        self.machines.iter().map(|m| m.output.len()).sum()
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seeded hash of `x`; different `salt`s give independent-looking
/// functions.
pub fn hash_with(seed: u64, salt: u64, x: u64) -> u64 {
    mix64(mix64(seed ^ mix64(salt)) ^ x)
}

/// `hash_with` reduced to `[0, n)`.
pub fn bucket(seed: u64, salt: u64, x: u64, n: usize) -> usize {
    ((hash_with(seed, salt, x) as u128 * n as u128) >> 64) as usize
}
