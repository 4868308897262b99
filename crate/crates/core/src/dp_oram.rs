//! DP-ORAM: every record stored once in an ORAM, with a sanitized count per
//! query deciding how many oblivious accesses the client performs.
//!
//! For a query q the server evaluates its sanitized index and returns an
//! overcount c. The client reads the |q(D)| true addresses from its local
//! index and c − |q(D)| uniformly random addresses whose results it drops,
//! so the server observes only (q, c, one ORAM path per access).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{DpParams, Epsilon, PrivacyBudget};
use crate::error::{invalid, Result};
use crate::oram::{self, Engine, Oram};
use crate::query::{Query, QueryKind};
use crate::rng::{fork, StreamRng};
use crate::sanitize::{Histogram, NoisyAttributeIndex, NoisyHistogram, NoisyTree, SanitizedIndex};
use crate::store::{decode, encode, plaintext_len, BitKey, LeakageTrace, Record, DEFAULT_PAYLOAD_LEN};

/// Default arity of the range tree.
pub const DEFAULT_TREE_ARITY: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpOramParams {
    /// Ordered key domain [1, N] for range and point queries.
    pub domain: u32,
    /// Binary attribute columns for attribute queries.
    pub columns: usize,
    pub kinds: BTreeSet<QueryKind>,
    /// Total budget and confidence; ε is split across `kinds`.
    pub dp: DpParams,
    /// Per-kind budgets overriding the equal split.
    pub epsilon_overrides: BTreeMap<QueryKind, Epsilon>,
    pub tree_arity: usize,
    /// Extra accesses per query as a multiple of n, added to the overcount.
    pub count_multiplier: f64,
    pub engine: Engine,
    /// Slots per Path ORAM bucket (Z).
    pub oram_bucket_size: usize,
    /// ORAM addresses; defaults to max(1, n).
    pub capacity: Option<usize>,
    pub payload_len: usize,
}

impl DpOramParams {
    pub fn new(domain: u32, columns: usize, kinds: impl IntoIterator<Item = QueryKind>, dp: DpParams) -> Self {
        DpOramParams {
            domain,
            columns,
            kinds: kinds.into_iter().collect(),
            dp,
            epsilon_overrides: BTreeMap::new(),
            tree_arity: DEFAULT_TREE_ARITY,
            count_multiplier: 0.0,
            engine: Engine::Path,
            oram_bucket_size: oram::DEFAULT_BUCKET_SIZE,
            capacity: None,
            payload_len: DEFAULT_PAYLOAD_LEN,
        }
    }

    /// Budget spent on the index for `kind`.
    pub fn epsilon_for(&self, kind: QueryKind) -> Result<Epsilon> {
        match self.epsilon_overrides.get(&kind) {
            Some(&e) => Ok(e),
            None => Epsilon::new(self.dp.epsilon.value() / self.kinds.len() as f64),
        }
    }

    fn validate(&self, records: &[Record]) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(invalid("at least one query kind must be enabled"));
        }
        let ordered = self.kinds.contains(&QueryKind::Range) || self.kinds.contains(&QueryKind::Point);
        if ordered && self.domain == 0 {
            return Err(invalid("domain must be non-empty"));
        }
        if self.kinds.contains(&QueryKind::Attribute) && self.columns == 0 {
            return Err(invalid("attribute queries need at least one column"));
        }
        if !(self.count_multiplier.is_finite() && self.count_multiplier >= 0.0) {
            return Err(invalid("count multiplier must be non-negative"));
        }
        for r in records {
            if ordered && (r.key == 0 || r.key > self.domain) {
                return Err(invalid(format!("key {} outside domain [1, {}]", r.key, self.domain)));
            }
            if self.kinds.contains(&QueryKind::Attribute) && r.attributes.len() != self.columns {
                return Err(invalid(format!(
                    "record has {} attribute columns, expected {}",
                    r.attributes.len(),
                    self.columns
                )));
            }
        }
        Ok(())
    }
}

/// Client-side plaintext index from search keys to ORAM addresses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalIndex {
    entries: BTreeMap<usize, (u32, BitKey)>,
    by_key: BTreeMap<u32, BTreeSet<usize>>,
    ones: Vec<BTreeSet<usize>>,
    zeros: Vec<BTreeSet<usize>>,
}

impl LocalIndex {
    pub fn new(columns: usize) -> Self {
        LocalIndex {
            entries: BTreeMap::new(),
            by_key: BTreeMap::new(),
            ones: vec![BTreeSet::new(); columns],
            zeros: vec![BTreeSet::new(); columns],
        }
    }

    /// Indexes the record at `addr`, replacing whatever was there.
    pub fn insert(&mut self, addr: usize, key: u32, attributes: BitKey) {
        self.remove(addr);
        self.entries.insert(addr, (key, attributes));
        self.by_key.entry(key).or_default().insert(addr);
        for c in 0..self.ones.len() {
            let side = if attributes.get(c) { &mut self.ones } else { &mut self.zeros };
            side[c].insert(addr);
        }
    }

    /// Drops `addr` and returns the keys it was indexed under.
    pub fn remove(&mut self, addr: usize) -> Option<(u32, BitKey)> {
        let (key, attributes) = self.entries.remove(&addr)?;
        if let Some(set) = self.by_key.get_mut(&key) {
            set.remove(&addr);
            if set.is_empty() {
                self.by_key.remove(&key);
            }
        }
        for c in 0..self.ones.len() {
            let side = if attributes.get(c) { &mut self.ones } else { &mut self.zeros };
            side[c].remove(&addr);
        }
        Some((key, attributes))
    }

    pub fn get(&self, addr: usize) -> Option<(u32, BitKey)> {
        self.entries.get(&addr).copied()
    }

    /// Smallest address holding `key`.
    pub fn first_with_key(&self, key: u32) -> Option<usize> {
        self.by_key.get(&key).and_then(|s| s.first().copied())
    }

    pub fn records(&self) -> usize {
        self.entries.len()
    }

    /// Addresses of the records matching `q`, ascending within each key.
    pub fn addresses(&self, q: &Query) -> Vec<usize> {
        match *q {
            Query::Range { lo, hi } => self
                .by_key
                .range(lo..=hi)
                .flat_map(|(_, s)| s.iter().copied())
                .collect(),
            Query::Point { key } => self
                .by_key
                .get(&key)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default(),
            Query::Attribute { column, value } => {
                let side = if value { &self.ones } else { &self.zeros };
                side.get(column).map(|s| s.iter().copied().collect()).unwrap_or_default()
            }
        }
    }

    /// |q(D)|.
    pub fn count(&self, q: &Query) -> usize {
        match *q {
            Query::Range { lo, hi } => self.by_key.range(lo..=hi).map(|(_, s)| s.len()).sum(),
            Query::Point { key } => self.by_key.get(&key).map_or(0, |s| s.len()),
            Query::Attribute { column, value } => {
                let side = if value { &self.ones } else { &self.zeros };
                side.get(column).map_or(0, |s| s.len())
            }
        }
    }
}

/// Builds the sanitized index for every enabled kind, in kind order.
pub fn build_indexes<R: Rng + ?Sized>(
    records: &[Record],
    params: &DpOramParams,
    rng: &mut R,
) -> Result<(BTreeMap<QueryKind, SanitizedIndex>, PrivacyBudget)> {
    params.validate(records)?;
    let mut budget = PrivacyBudget::new(params.dp.epsilon);
    let mut indexes = BTreeMap::new();
    for &kind in &params.kinds {
        let eps = params.epsilon_for(kind)?;
        budget.charge_sequential(format!("{}-index", kind.name()), eps)?;
        let dp = params.dp.with_epsilon(eps);
        let index = match kind {
            QueryKind::Range | QueryKind::Point => {
                let keys: Vec<u32> = records.iter().map(|r| r.key).collect();
                let hist = Histogram::from_keys(&keys, params.domain as usize)?;
                if kind == QueryKind::Range {
                    SanitizedIndex::Range(NoisyTree::build(&hist, params.tree_arity, dp, rng)?)
                } else {
                    SanitizedIndex::Point(NoisyHistogram::build(&hist, dp, rng)?)
                }
            }
            QueryKind::Attribute => {
                let keys: Vec<BitKey> = records.iter().map(|r| r.attributes).collect();
                SanitizedIndex::Attribute(NoisyAttributeIndex::build(&keys, params.columns, dp, rng)?)
            }
        };
        indexes.insert(kind, index);
    }
    Ok((indexes, budget))
}

/// What one query costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCost {
    /// Overcount released by the server.
    pub released: i64,
    /// True result size |q(D)|.
    pub matches: usize,
    /// Logical ORAM accesses: max(released, matches).
    pub accesses: usize,
}

impl QueryCost {
    pub fn undershoot(&self) -> bool {
        self.released < self.matches as i64
    }
}

/// Released count below the true count: the client still fetches every
/// match, which reveals more than the sanitizer allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyIncident {
    pub query_id: u64,
    pub released: i64,
    pub matches: usize,
}

/// The server's side: the sanitized indexes and the leakage trace.
#[derive(Debug, Clone)]
pub struct DpOramServer {
    pub indexes: BTreeMap<QueryKind, SanitizedIndex>,
    pub trace: LeakageTrace,
}

impl DpOramServer {
    /// Evaluates the overcount for `q` on the shipped index.
    pub fn answer(&self, q: &Query) -> Result<i64> {
        self.indexes
            .get(&q.kind())
            .ok_or_else(|| crate::error::Error::Unsupported(format!("{} queries not enabled", q.kind().name())))?
            .answer(q)
    }
}

pub struct DpOramSystem {
    pub(crate) params: DpOramParams,
    pub(crate) oram: Box<dyn Oram>,
    pub(crate) local: LocalIndex,
    pub(crate) server: DpOramServer,
    pub(crate) budget: PrivacyBudget,
    pub(crate) rng: StreamRng,
    pub(crate) incidents: Vec<PrivacyIncident>,
    /// Padding addresses are drawn from [0, padding_range).
    pub(crate) padding_range: usize,
}

impl std::fmt::Debug for DpOramSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DpOramSystem")
            .field("records", &self.local.records())
            .field("capacity", &self.oram.capacity())
            .field("kinds", &self.params.kinds)
            .finish_non_exhaustive()
    }
}

impl DpOramSystem {
    /// Builds the sanitized indexes and writes every record into the ORAM.
    ///
    /// Index noise, ORAM randomness and client padding choices use separate
    /// forks of `rng`; [`build_indexes`] on the first fork reproduces the
    /// indexes without touching the ORAM.
    pub fn setup<R: Rng + ?Sized>(records: &[Record], params: &DpOramParams, rng: &mut R) -> Result<Self> {
        let mut noise = fork(rng);
        let oram_rng = fork(rng);
        let client_rng = fork(rng);
        let (indexes, budget) = build_indexes(records, params, &mut noise)?;
        let capacity = params.capacity.unwrap_or(records.len().max(1));
        if capacity < records.len() {
            return Err(invalid(format!(
                "ORAM capacity {capacity} below record count {}",
                records.len()
            )));
        }
        let block_len = plaintext_len(params.payload_len);
        let mut oram = oram::init_with(params.engine, capacity, block_len, params.oram_bucket_size, oram_rng)?;
        let mut local = LocalIndex::new(params.columns);
        for (addr, r) in records.iter().enumerate() {
            oram.write(addr, &encode(r, params.payload_len)?)?;
            local.insert(addr, r.key, r.attributes);
        }
        oram.clear_log();
        Ok(DpOramSystem {
            params: params.clone(),
            oram,
            local,
            server: DpOramServer {
                indexes,
                trace: LeakageTrace::new(),
            },
            budget,
            rng: client_rng,
            incidents: Vec::new(),
            padding_range: records.len().max(1),
        })
    }

    pub fn params(&self) -> &DpOramParams {
        &self.params
    }

    pub fn budget(&self) -> &PrivacyBudget {
        &self.budget
    }

    pub fn server(&self) -> &DpOramServer {
        &self.server
    }

    pub fn trace(&self) -> &LeakageTrace {
        &self.server.trace
    }

    pub fn set_trace(&mut self, trace: LeakageTrace) -> LeakageTrace {
        std::mem::replace(&mut self.server.trace, trace)
    }

    pub fn local_index(&self) -> &LocalIndex {
        &self.local
    }

    pub fn incidents(&self) -> &[PrivacyIncident] {
        &self.incidents
    }

    pub fn oram(&self) -> &dyn Oram {
        self.oram.as_ref()
    }

    /// Record slots held by the server.
    pub fn storage(&self) -> usize {
        self.oram.capacity()
    }

    /// Real records n.
    pub fn records(&self) -> usize {
        self.local.records()
    }

    fn validate(&self, q: &Query) -> Result<()> {
        q.validate(self.params.domain, self.params.columns)
    }

    /// Cost of `q` without performing any ORAM access.
    pub fn cost(&self, q: &Query) -> Result<QueryCost> {
        self.validate(q)?;
        let released = self.server.answer(q)? + self.extra_accesses();
        let matches = self.local.count(q);
        Ok(QueryCost {
            released,
            matches,
            accesses: (released.max(0) as usize).max(matches),
        })
    }

    fn extra_accesses(&self) -> i64 {
        (self.params.count_multiplier * self.local.records() as f64).ceil() as i64
    }

    pub fn query(&mut self, q: &Query) -> Result<Vec<Record>> {
        self.query_with_cost(q).map(|(r, _)| r)
    }

    pub fn query_with_cost(&mut self, q: &Query) -> Result<(Vec<Record>, QueryCost)> {
        let cost = self.cost(q)?;
        let addrs = self.local.addresses(q);
        let mut records: Vec<Record> = self.run_accesses(&addrs, cost)?.into_iter().map(|(_, r)| r).collect();
        records.sort_by_key(|r| r.key);
        Ok((records, cost))
    }

    /// Reads `targets` plus padding up to `cost.accesses` in random order,
    /// logs the server view and returns the decoded target records by address.
    pub(crate) fn run_accesses(&mut self, targets: &[usize], cost: QueryCost) -> Result<Vec<(usize, Record)>> {
        let mut plan: Vec<(usize, bool)> = targets.iter().map(|&a| (a, true)).collect();
        for _ in targets.len()..cost.accesses {
            plan.push((self.rng.random_range(0..self.padding_range), false));
        }
        plan.shuffle(&mut self.rng);
        let mut out = Vec::with_capacity(targets.len());
        for (addr, wanted) in plan {
            let block = self.oram.read(addr)?;
            if wanted {
                if let Some(r) = decode(&block)? {
                    out.push((addr, r));
                }
            }
        }
        let leaves = self.oram.access_log().to_vec();
        self.oram.clear_log();
        let id = self.server.trace.record(&leaves, cost.accesses);
        if cost.undershoot() {
            self.incidents.push(PrivacyIncident {
                query_id: id,
                released: cost.released,
                matches: cost.matches,
            });
        }
        out.sort_by_key(|&(a, _)| a);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::NoiseMode;
    use crate::rng;

    fn records() -> Vec<Record> {
        [(1u32, [true, false]), (3, [false, false]), (3, [true, true]), (8, [false, true])]
            .iter()
            .enumerate()
            .map(|(i, (k, bits))| {
                Record::new(*k, vec![i as u8; 4]).with_attributes(BitKey::from_bools(bits).unwrap())
            })
            .collect()
    }

    fn params(kinds: &[QueryKind], noise: NoiseMode) -> DpOramParams {
        DpOramParams::new(8, 2, kinds.iter().copied(), DpParams::new(1.0, 0.01).unwrap().with_noise(noise))
    }

    #[test]
    fn single_record_point_only() {
        let recs = vec![Record::new(2, vec![])];
        let sys = DpOramSystem::setup(&recs, &params(&[QueryKind::Point], NoiseMode::Laplace), &mut rng::stream(0)).unwrap();
        assert_eq!(sys.storage(), 1);
        assert_eq!(sys.server().indexes.len(), 1);
    }

    #[test]
    fn ledger_sums_per_kind_budgets() {
        let sys = DpOramSystem::setup(&records(), &params(&QueryKind::ALL, NoiseMode::Laplace), &mut rng::stream(0)).unwrap();
        assert_eq!(sys.budget().ledger().len(), 3);
        assert!((sys.budget().spent() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn storage_ignores_enabled_kinds() {
        let a = DpOramSystem::setup(&records(), &params(&[QueryKind::Range], NoiseMode::Laplace), &mut rng::stream(0)).unwrap();
        let b = DpOramSystem::setup(&records(), &params(&QueryKind::ALL, NoiseMode::Laplace), &mut rng::stream(0)).unwrap();
        assert_eq!(a.storage(), b.storage());
    }

    #[test]
    fn empty_answer_is_all_padding() {
        let mut sys = DpOramSystem::setup(&records(), &params(&[QueryKind::Point], NoiseMode::Disabled), &mut rng::stream(0)).unwrap();
        let (got, cost) = sys.query_with_cost(&Query::Point { key: 5 }).unwrap();
        assert!(got.is_empty());
        assert_eq!(cost.matches, 0);
        let mu = match &sys.server().indexes[&QueryKind::Point] {
            SanitizedIndex::Point(h) => h.offset() as i64,
            _ => unreachable!(),
        };
        assert_eq!(cost.released, mu);
        assert_eq!(sys.trace().entries()[0].indices.len(), mu as usize);
    }

    #[test]
    fn answers_match_plaintext() {
        let recs = records();
        let mut sys = DpOramSystem::setup(&recs, &params(&QueryKind::ALL, NoiseMode::Laplace), &mut rng::stream(4)).unwrap();
        let queries = [
            Query::Range { lo: 1, hi: 8 },
            Query::Range { lo: 2, hi: 3 },
            Query::Point { key: 3 },
            Query::Attribute { column: 1, value: true },
            Query::Attribute { column: 0, value: false },
        ];
        for q in queries {
            let mut want = q.filter(&recs);
            want.sort_by_key(|r| r.key);
            let got = sys.query(&q).unwrap();
            assert_eq!(got.len(), want.len());
            for r in &want {
                assert!(got.contains(r));
            }
        }
        let whole = sys.trace().entries()[0].m_prime;
        assert!(whole >= recs.len());
        assert!(sys.query(&Query::Point { key: 9 }).is_err());
    }

    #[test]
    fn disabled_kind_is_unsupported() {
        let mut sys = DpOramSystem::setup(&records(), &params(&[QueryKind::Point], NoiseMode::Laplace), &mut rng::stream(0)).unwrap();
        assert!(matches!(
            sys.query(&Query::Range { lo: 1, hi: 2 }),
            Err(crate::error::Error::Unsupported(_))
        ));
    }
}
