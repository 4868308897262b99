use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::counter::{completed_nodes, counter_levels, prefix_nodes, total_nodes, DyadicNode};
use crate::dp::{solve_offset, DpParams, Epsilon, PrivacyBudget, Tail};
use crate::dp_oram::{DpOramParams, DpOramSystem, QueryCost};
use crate::error::{invalid, Error, Result};
use crate::query::{Query, QueryKind};
use crate::rng::{fork, StreamRng};
use crate::sanitize::{NoisyHistogram, NoisyTree, SanitizedIndex, TreeShape};
use crate::store::{decode, encode, encode_dummy, BitKey, Record};

/// Default number of buffered updates per batch.
pub const DEFAULT_BATCH_SIZE: usize = 64;
/// Default number of batches the counter noise is calibrated for.
pub const DEFAULT_HORIZON: u64 = 1024;

/// u = max(64, per-query additive overhead).
pub fn suggest_batch_size(per_query_overhead: f64) -> usize {
    DEFAULT_BATCH_SIZE.max(per_query_overhead.ceil().max(0.0) as usize)
}

/// One client update. Deletes and modifies act on the record with the
/// given key at the smallest address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Update {
    Add {
        new_key: u32,
        #[serde(default)]
        payload: Vec<u8>,
    },
    Delete {
        old_key: u32,
    },
    /// Moves the record to `new_key` and/or replaces its payload; a modify
    /// without `new_key` leaves every indexed key unchanged.
    Modify {
        old_key: u32,
        #[serde(default)]
        new_key: Option<u32>,
        #[serde(default)]
        payload: Option<Vec<u8>>,
    },
}

impl Update {
    /// Parses one update per non-empty line.
    pub fn parse_json_lines(text: &str) -> Result<Vec<Update>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| invalid(format!("update line {}: {e}", i + 1)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Buffered,
    Flushed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicParams {
    pub base: DpOramParams,
    pub batch_size: usize,
    pub horizon: u64,
    /// Budget of each counter tree (one per query kind, plus the record
    /// counter when the record count is hidden).
    pub update_epsilon: Epsilon,
    /// ORAM capacity as a multiple of the initial record count.
    pub headroom: f64,
    /// Pad the ORAM to a noisy overcount of the record count.
    pub hide_count: bool,
}

impl DynamicParams {
    pub fn new(base: DpOramParams, update_epsilon: Epsilon) -> Self {
        DynamicParams {
            base,
            batch_size: DEFAULT_BATCH_SIZE,
            horizon: DEFAULT_HORIZON,
            update_epsilon,
            headroom: 2.0,
            hide_count: false,
        }
    }
}

#[derive(Debug, Clone)]
enum Pending {
    Added(Record),
    Replaced { key: u32, payload: Option<Vec<u8>> },
    Deleted,
}

#[derive(Debug, Clone)]
enum NodeRelease {
    Point(NoisyHistogram),
    Range(NoisyTree),
}

#[derive(Debug, Clone)]
struct KindCounter {
    dp: DpParams,
    offset: u64,
    nodes: BTreeMap<DyadicNode, NodeRelease>,
}

/// DP-ORAM for range and point queries with batched updates.
#[derive(Debug)]
pub struct DynamicSystem {
    sys: DpOramSystem,
    params: DynamicParams,
    /// Keys of the logical database including buffered updates.
    view: crate::dp_oram::LocalIndex,
    pending: BTreeMap<usize, Pending>,
    buffered: usize,
    batch_delta: Vec<i64>,
    batch_count: i64,
    history: Vec<Vec<i64>>,
    count_history: Vec<i64>,
    counters: BTreeMap<QueryKind, KindCounter>,
    record_nodes: BTreeMap<DyadicNode, f64>,
    record_scale: f64,
    record_offset: f64,
    initial_records: usize,
    next_free: usize,
    padded: usize,
    batches: u64,
    budget: PrivacyBudget,
    noise: StreamRng,
}

impl DynamicSystem {
    pub fn setup<R: Rng + ?Sized>(records: &[Record], params: &DynamicParams, rng: &mut R) -> Result<Self> {
        if params.base.kinds.contains(&QueryKind::Attribute) {
            return Err(Error::Unsupported(
                "batched updates cover range and point indexes only".into(),
            ));
        }
        if params.batch_size == 0 || params.horizon == 0 {
            return Err(invalid("batch size and horizon must be positive"));
        }
        if !(params.headroom.is_finite() && params.headroom >= 1.0) {
            return Err(invalid("headroom must be at least 1"));
        }
        let n = records.len();
        let mut base = params.base.clone();
        let capacity = base.capacity.unwrap_or_else(|| {
            ((n as f64 * params.headroom).ceil() as usize)
                .max(n + params.batch_size)
                .max(1)
        });
        base.capacity = Some(capacity);
        let sys = DpOramSystem::setup(records, &base, rng)?;
        let noise = fork(rng);

        let domain = base.domain as usize;
        let levels = counter_levels(params.horizon) as f64;
        let nodes = total_nodes(params.horizon);
        let mode = base.dp.noise;
        // A modify moves one record between keys: two bins change.
        let node_eps = Epsilon::new(params.update_epsilon.value() / (2.0 * levels))?;
        let node_dp = base.dp.with_epsilon(node_eps);
        let mut counters = BTreeMap::new();
        for &kind in &base.kinds {
            let (draws, scale) = match kind {
                QueryKind::Point => (domain as u64, 1.0 / node_eps.value()),
                QueryKind::Range => {
                    let shape = TreeShape::new(domain, base.tree_arity)?;
                    (shape.node_count() as u64, shape.noise_scale(node_eps))
                }
                QueryKind::Attribute => unreachable!("rejected above"),
            };
            let offset = solve_offset(mode, draws * nodes, scale, base.dp.beta, Tail::Lower)?.padding();
            counters.insert(
                kind,
                KindCounter {
                    dp: node_dp,
                    offset,
                    nodes: BTreeMap::new(),
                },
            );
        }
        let record_scale = levels / params.update_epsilon.value();
        let record_offset = solve_offset(mode, nodes, record_scale, base.dp.beta, Tail::Lower)?.padding() as f64;

        let counted = base.kinds.len() + usize::from(params.hide_count);
        let total = Epsilon::new(base.dp.epsilon.value() + params.update_epsilon.value() * counted as f64)?;
        let mut budget = PrivacyBudget::new(total);
        for c in sys.budget().ledger() {
            budget.charge(c.label.clone(), Epsilon::new(c.epsilon)?, c.composition.clone())?;
        }
        for &kind in &base.kinds {
            budget.charge_sequential(format!("{}-updates", kind.name()), params.update_epsilon)?;
        }
        if params.hide_count {
            budget.charge_sequential("record-count-updates", params.update_epsilon)?;
        }

        let mut view = crate::dp_oram::LocalIndex::new(base.columns);
        for (addr, r) in records.iter().enumerate() {
            view.insert(addr, r.key, r.attributes);
        }
        Ok(DynamicSystem {
            sys,
            params: DynamicParams {
                base,
                ..params.clone()
            },
            view,
            pending: BTreeMap::new(),
            buffered: 0,
            batch_delta: vec![0; domain],
            batch_count: 0,
            history: Vec::new(),
            count_history: Vec::new(),
            counters,
            record_nodes: BTreeMap::new(),
            record_scale,
            record_offset,
            initial_records: n,
            next_free: n,
            padded: n,
            batches: 0,
            budget,
            noise,
        })
    }

    pub fn budget(&self) -> &PrivacyBudget {
        &self.budget
    }

    pub fn params(&self) -> &DynamicParams {
        &self.params
    }

    pub fn inner(&self) -> &DpOramSystem {
        &self.sys
    }

    /// Batches flushed so far (t).
    pub fn batches(&self) -> u64 {
        self.batches
    }

    pub fn buffered(&self) -> usize {
        self.buffered
    }

    /// Noisy nodes summed into every current count.
    pub fn prefix_node_count(&self) -> usize {
        prefix_nodes(self.batches).len()
    }

    /// Live records in the logical database, buffered updates included.
    pub fn records(&self) -> usize {
        self.view.records()
    }

    /// Record slots the server sees as occupied.
    pub fn storage(&self) -> usize {
        self.next_free.max(self.padded)
    }

    fn check_key(&self, key: u32) -> Result<()> {
        if key == 0 || key > self.params.base.domain {
            return Err(invalid(format!(
                "key {key} outside domain [1, {}]",
                self.params.base.domain
            )));
        }
        Ok(())
    }

    fn check_payload(&self, payload: &[u8]) -> Result<()> {
        if payload.len() > self.params.base.payload_len {
            return Err(invalid(format!(
                "payload of {} bytes exceeds record length {}",
                payload.len(),
                self.params.base.payload_len
            )));
        }
        Ok(())
    }

    fn locate(&self, key: u32) -> Result<usize> {
        self.check_key(key)?;
        self.view
            .first_with_key(key)
            .ok_or_else(|| invalid(format!("no record with key {key}")))
    }

    /// Buffers an update, flushing the batch once u updates are waiting.
    pub fn push_update(&mut self, update: Update) -> Result<PushOutcome> {
        if self.batches >= self.params.horizon {
            return Err(Error::CapacityExhausted(format!(
                "update horizon of {} batches reached",
                self.params.horizon
            )));
        }
        match update {
            Update::Add { new_key, payload } => {
                self.check_key(new_key)?;
                self.check_payload(&payload)?;
                if self.next_free >= self.sys.oram().capacity() {
                    return Err(Error::CapacityExhausted(format!(
                        "ORAM holds {} records",
                        self.sys.oram().capacity()
                    )));
                }
                let addr = self.next_free;
                self.next_free += 1;
                let attributes = BitKey::new(0, self.params.base.columns)?;
                self.view.insert(addr, new_key, attributes);
                self.pending.insert(
                    addr,
                    Pending::Added(Record::new(new_key, payload).with_attributes(attributes)),
                );
                self.batch_delta[new_key as usize - 1] += 1;
                self.batch_count += 1;
            }
            Update::Delete { old_key } => {
                let addr = self.locate(old_key)?;
                self.view.remove(addr);
                self.pending.insert(addr, Pending::Deleted);
                self.batch_delta[old_key as usize - 1] -= 1;
                self.batch_count -= 1;
            }
            Update::Modify {
                old_key,
                new_key,
                payload,
            } => {
                let addr = self.locate(old_key)?;
                let key = new_key.unwrap_or(old_key);
                self.check_key(key)?;
                if let Some(p) = &payload {
                    self.check_payload(p)?;
                }
                let (_, attributes) = self.view.get(addr).expect("located address is live");
                self.view.insert(addr, key, attributes);
                let next = match self.pending.remove(&addr) {
                    Some(Pending::Added(mut r)) => {
                        r.key = key;
                        if let Some(p) = payload {
                            r.payload = p;
                        }
                        Pending::Added(r)
                    }
                    Some(Pending::Replaced { payload: old, .. }) => Pending::Replaced {
                        key,
                        payload: payload.or(old),
                    },
                    Some(Pending::Deleted) => unreachable!("deleted records are not in the view"),
                    None => Pending::Replaced { key, payload },
                };
                self.pending.insert(addr, next);
                self.batch_delta[old_key as usize - 1] -= 1;
                self.batch_delta[key as usize - 1] += 1;
            }
        }
        self.buffered += 1;
        if self.buffered == self.params.batch_size {
            self.flush_batch()?;
            Ok(PushOutcome::Flushed)
        } else {
            Ok(PushOutcome::Buffered)
        }
    }

    /// Turns the full buffer into a batch: releases newly completed counter
    /// nodes and applies the buffered updates to the ORAM.
    pub fn flush_batch(&mut self) -> Result<()> {
        if self.buffered != self.params.batch_size {
            return Err(invalid(format!(
                "flush needs {} buffered updates, have {}",
                self.params.batch_size, self.buffered
            )));
        }
        self.batches += 1;
        let t = self.batches;
        self.history.push(std::mem::replace(&mut self.batch_delta, vec![0; self.params.base.domain as usize]));
        self.count_history.push(std::mem::take(&mut self.batch_count));

        for node in completed_nodes(t) {
            let (lo, hi) = node.batches();
            let batches = &self.history[lo as usize - 1..hi as usize];
            let mut delta = vec![0i64; self.params.base.domain as usize];
            for b in batches {
                for (d, x) in delta.iter_mut().zip(b) {
                    *d += x;
                }
            }
            for (&kind, counter) in self.counters.iter_mut() {
                let release = match kind {
                    QueryKind::Point => NodeRelease::Point(NoisyHistogram::with_offset(
                        &delta,
                        counter.dp,
                        counter.offset,
                        &mut self.noise,
                    )),
                    QueryKind::Range => {
                        let shape = TreeShape::new(delta.len(), self.params.base.tree_arity)?;
                        NodeRelease::Range(NoisyTree::with_offset(
                            &delta,
                            shape,
                            counter.dp,
                            counter.offset as f64,
                            &mut self.noise,
                        ))
                    }
                    QueryKind::Attribute => unreachable!(),
                };
                counter.nodes.insert(node, release);
            }
            let count: i64 = self.count_history[lo as usize - 1..hi as usize].iter().sum();
            let noise = self.params.base.dp.noise.sample(self.record_scale, &mut self.noise);
            self.record_nodes.insert(node, count as f64 + noise + self.record_offset);
        }

        let payload_len = self.params.base.payload_len;
        for (addr, change) in std::mem::take(&mut self.pending) {
            match change {
                Pending::Deleted => {
                    self.sys.oram.write(addr, &encode_dummy(payload_len))?;
                    self.sys.local.remove(addr);
                }
                Pending::Added(r) => {
                    self.sys.oram.write(addr, &encode(&r, payload_len)?)?;
                    self.sys.local.insert(addr, r.key, r.attributes);
                }
                Pending::Replaced { key, payload } => {
                    let block = self.sys.oram.read(addr)?;
                    let mut r = decode(&block)?.ok_or_else(|| {
                        Error::Protocol(format!("modified address {addr} holds no record"))
                    })?;
                    r.key = key;
                    if let Some(p) = payload {
                        r.payload = p;
                    }
                    self.sys.oram.write(addr, &encode(&r, payload_len)?)?;
                    self.sys.local.insert(addr, r.key, r.attributes);
                }
            }
        }
        self.buffered = 0;

        if self.params.hide_count {
            let target = self.release_record_count().max(0) as usize;
            if target > self.sys.oram().capacity() {
                return Err(Error::CapacityExhausted(format!(
                    "noisy record count {target} exceeds ORAM capacity {}",
                    self.sys.oram().capacity()
                )));
            }
            for addr in self.storage()..target {
                self.sys.oram.write(addr, &encode_dummy(payload_len))?;
            }
            self.padded = self.padded.max(target);
        }
        self.sys.oram.clear_log();
        self.sys.padding_range = self.next_free.max(1);
        Ok(())
    }

    /// Overcount n̂^t of the flushed record count; n^0 is public.
    pub fn release_record_count(&self) -> i64 {
        let sum: f64 = prefix_nodes(self.batches)
            .iter()
            .map(|n| self.record_nodes[n])
            .sum();
        self.initial_records as i64 + sum.ceil() as i64
    }

    /// Overcount of the flushed records matching `q`.
    pub fn answer(&self, q: &Query) -> Result<i64> {
        q.validate(self.params.base.domain, self.params.base.columns)?;
        let counter = self
            .counters
            .get(&q.kind())
            .ok_or_else(|| Error::Unsupported(format!("{} queries not enabled", q.kind().name())))?;
        let prefix = prefix_nodes(self.batches);
        let index = &self.sys.server.indexes[&q.kind()];
        let extra = (self.params.base.count_multiplier * self.sys.local.records() as f64).ceil() as i64;
        let count = match (*q, index) {
            (Query::Point { key }, SanitizedIndex::Point(h)) => {
                let mut c = h.count(key as usize)?;
                for n in &prefix {
                    if let NodeRelease::Point(d) = &counter.nodes[n] {
                        c += d.count(key as usize)?;
                    }
                }
                c
            }
            (Query::Range { lo, hi }, SanitizedIndex::Range(t)) => {
                let mut s = t.range_sum(lo as usize, hi as usize)?;
                for n in &prefix {
                    if let NodeRelease::Range(d) = &counter.nodes[n] {
                        s += d.range_sum(lo as usize, hi as usize)?;
                    }
                }
                s.ceil() as i64
            }
            _ => unreachable!("index kind matches counter kind"),
        };
        Ok(count + extra)
    }

    /// Per-key counts implied by the released structures with every offset
    /// removed; equals the flushed histogram when noise is disabled.
    pub fn estimated_counts(&self, kind: QueryKind) -> Result<Vec<f64>> {
        let counter = self
            .counters
            .get(&kind)
            .ok_or_else(|| Error::Unsupported(format!("{} queries not enabled", kind.name())))?;
        let domain = self.params.base.domain as usize;
        let prefix = prefix_nodes(self.batches);
        let mut out = vec![0.0; domain];
        match &self.sys.server.indexes[&kind] {
            SanitizedIndex::Point(h) => {
                for (o, &r) in out.iter_mut().zip(h.released()) {
                    *o = r as f64 - h.offset() as f64;
                }
                for n in &prefix {
                    if let NodeRelease::Point(d) = &counter.nodes[n] {
                        for (o, &r) in out.iter_mut().zip(d.released()) {
                            *o += r as f64 - d.offset() as f64;
                        }
                    }
                }
            }
            SanitizedIndex::Range(t) => {
                let trees = std::iter::once(t).chain(prefix.iter().filter_map(|n| match &counter.nodes[n] {
                    NodeRelease::Range(d) => Some(d),
                    NodeRelease::Point(_) => None,
                }));
                for tree in trees {
                    for (j, o) in out.iter_mut().enumerate() {
                        let leaf = crate::sanitize::NodeId {
                            level: tree.shape().height(),
                            index: j,
                        };
                        *o += tree.value(leaf) - tree.offset();
                    }
                }
            }
            SanitizedIndex::Attribute(_) => unreachable!(),
        }
        Ok(out)
    }

    /// Answers `q` over the logical database, buffered updates included.
    pub fn query(&mut self, q: &Query) -> Result<Vec<Record>> {
        let released = self.answer(q)?;
        let matches_key = |key: u32| match *q {
            Query::Range { lo, hi } => lo <= key && key <= hi,
            Query::Point { key: k } => k == key,
            Query::Attribute { .. } => false,
        };
        let mut targets: Vec<usize> = self
            .sys
            .local
            .addresses(q)
            .into_iter()
            .filter(|a| !self.pending.contains_key(a))
            .collect();
        for (&addr, p) in &self.pending {
            if let Pending::Replaced { key, .. } = p {
                if matches_key(*key) {
                    targets.push(addr);
                }
            }
        }
        targets.sort_unstable();
        let cost = QueryCost {
            released,
            matches: targets.len(),
            accesses: (released.max(0) as usize).max(targets.len()),
        };
        let mut out = Vec::with_capacity(targets.len());
        for (addr, mut r) in self.sys.run_accesses(&targets, cost)? {
            if let Some(Pending::Replaced { key, payload }) = self.pending.get(&addr) {
                r.key = *key;
                if let Some(p) = payload {
                    r.payload = p.clone();
                }
            }
            out.push(r);
        }
        for p in self.pending.values() {
            if let Pending::Added(r) = p {
                if matches_key(r.key) {
                    out.push(r.clone());
                }
            }
        }
        out.sort_by(|a, b| (a.key, &a.payload).cmp(&(b.key, &b.payload)));
        Ok(out)
    }
}
