//! Bucketized store for range queries in the atomic model.
//!
//! A noisy cumulative histogram places b bucket borders so that each bucket
//! covers roughly ⌈n/b⌉ records; every bucket is then padded with dummies to
//! the same capacity ⌈n/b⌉ + μ_b. A range query fetches every bucket whose
//! interval intersects it.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{solve_bucket_offset, DpParams, PrivacyBudget};
use crate::error::{invalid, Error, Result};
use crate::rng::fork;
use crate::sanitize::{Histogram, NoisyTree, TreeShape};
use crate::store::{fetch_groups, upload_groups, Group, Record, SecretKey, ServerStore, DEFAULT_PAYLOAD_LEN};

/// Default tree arity for bucketization.
pub const DEFAULT_ARITY: usize = 16;

/// b = 4·log₂N, at least 1 and at most N.
pub fn default_buckets(domain: u32) -> usize {
    ((4.0 * f64::from(domain).log2()).round() as usize).clamp(1, domain as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeParams {
    pub domain: u32,
    pub buckets: usize,
    pub arity: usize,
    pub dp: DpParams,
    pub payload_len: usize,
}

impl RangeParams {
    pub fn new(domain: u32, dp: DpParams) -> Self {
        RangeParams {
            domain,
            buckets: default_buckets(domain),
            arity: DEFAULT_ARITY,
            dp,
            payload_len: DEFAULT_PAYLOAD_LEN,
        }
    }

    pub fn with_buckets(mut self, buckets: usize) -> Self {
        self.buckets = buckets;
        self
    }

    pub fn with_arity(mut self, arity: usize) -> Self {
        self.arity = arity;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.domain == 0 {
            return Err(invalid("domain must be non-empty"));
        }
        if self.buckets == 0 || self.buckets > self.domain as usize {
            return Err(invalid(format!(
                "bucket count {} must lie in [1, {}]",
                self.buckets, self.domain
            )));
        }
        Ok(())
    }
}

/// Bucket borders and the common padded capacity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketPlan {
    /// `borders[j]` is the last domain position of bucket j (1-based); `borders[0] = 0`.
    pub borders: Vec<u32>,
    /// ⌈n/b⌉, the target number of records per bucket.
    pub target: usize,
    /// μ_b, the dummies added on top of the target.
    pub offset: u64,
    pub capacity: usize,
}

impl BucketPlan {
    pub fn buckets(&self) -> usize {
        self.borders.len() - 1
    }

    /// Stored records n′ = b · capacity.
    pub fn storage(&self) -> usize {
        self.buckets() * self.capacity
    }

    /// Domain interval `[lo, hi]` of bucket `j` (0-based).
    pub fn interval(&self, j: usize) -> (u32, u32) {
        (self.borders[j] + 1, self.borders[j + 1])
    }

    /// The bucket holding `key`.
    pub fn bucket_of(&self, key: u32) -> usize {
        self.borders[1..].partition_point(|&b| b < key)
    }

    /// Buckets whose intervals intersect `[lo, hi]`.
    pub fn buckets_for(&self, lo: u32, hi: u32) -> Range<usize> {
        self.bucket_of(lo)..self.bucket_of(hi) + 1
    }
}

/// Places borders on a noisy cumulative histogram.
///
/// Border j is the smallest position whose noisy prefix reaches j·target,
/// kept strictly increasing and leaving room for the remaining buckets; the
/// last border is always N.
pub fn place_borders(cumulative: &[i64], buckets: usize, target: usize) -> Vec<u32> {
    let domain = cumulative.len();
    let mut borders = Vec::with_capacity(buckets + 1);
    borders.push(0u32);
    for j in 1..buckets {
        let first = borders[j - 1] as usize + 1;
        let last = domain - (buckets - j);
        let goal = (j * target) as i64;
        let pos = (first..=last)
            .find(|&x| cumulative[x - 1] >= goal)
            .unwrap_or(last);
        borders.push(pos as u32);
    }
    borders.push(domain as u32);
    borders
}

/// Computes the bucket plan, charging ε for the bucketization tree.
///
/// Fails with [`Error::BucketOverflow`] if some bucket's true count exceeds
/// the capacity; the caller decides whether to retry.
pub fn plan<R: Rng + ?Sized>(
    keys: &[u32],
    params: &RangeParams,
    rng: &mut R,
) -> Result<(BucketPlan, PrivacyBudget)> {
    params.validate()?;
    let domain = params.domain as usize;
    let hist = Histogram::from_keys(keys, domain)?;
    let mut budget = PrivacyBudget::new(params.dp.epsilon);
    budget.charge_sequential("range-bucketization", params.dp.epsilon)?;

    let shape = TreeShape::new(domain, params.arity)?;
    let tree = NoisyTree::with_offset(&hist.signed(), shape, params.dp, 0.0, rng);
    let target = keys.len().div_ceil(params.buckets);
    let borders = place_borders(&tree.cumulative(), params.buckets, target);
    let offset = solve_bucket_offset(params.arity, domain, params.dp.epsilon, params.dp.beta)?
        .padding();
    let plan = BucketPlan {
        borders,
        target,
        offset,
        capacity: target + offset as usize,
    };

    let mut counts = vec![0usize; plan.buckets()];
    for &k in keys {
        counts[plan.bucket_of(k)] += 1;
    }
    if let Some((bucket, &count)) = counts.iter().enumerate().find(|(_, &c)| c > plan.capacity) {
        return Err(Error::BucketOverflow {
            bucket,
            count,
            capacity: plan.capacity,
        });
    }
    Ok((plan, budget))
}

/// Client state: the bucket plan, ds1 layout and secret key.
#[derive(Debug, Clone)]
pub struct RangeClientIndex {
    plan: BucketPlan,
    groups: Vec<Group>,
    key: SecretKey,
    budget: PrivacyBudget,
    records: usize,
}

/// Builds the bucketized store. Noise and encryption draw from separate
/// forks of `rng`, so [`plan`] on the first fork reproduces the layout.
pub fn setup<R: Rng + ?Sized>(
    records: &[Record],
    params: &RangeParams,
    rng: &mut R,
) -> Result<(RangeClientIndex, ServerStore)> {
    let mut noise = fork(rng);
    let mut crypto = fork(rng);
    let keys: Vec<u32> = records.iter().map(|r| r.key).collect();
    let (plan, budget) = plan(&keys, params, &mut noise)?;

    let mut members: Vec<Vec<&Record>> = vec![Vec::new(); plan.buckets()];
    for r in records {
        members[plan.bucket_of(r.key)].push(r);
    }
    let key = SecretKey::generate(&mut crypto);
    let sizes = vec![plan.capacity; plan.buckets()];
    let (server, groups) = upload_groups(&members, &sizes, &key, params.payload_len, &mut crypto)?;
    Ok((
        RangeClientIndex {
            plan,
            groups,
            key,
            budget,
            records: records.len(),
        },
        server,
    ))
}

impl RangeClientIndex {
    pub fn plan(&self) -> &BucketPlan {
        &self.plan
    }

    pub fn budget(&self) -> &PrivacyBudget {
        &self.budget
    }

    /// Real records n.
    pub fn records(&self) -> usize {
        self.records
    }

    fn check(&self, lo: u32, hi: u32) -> Result<()> {
        let domain = *self.plan.borders.last().unwrap();
        if lo < 1 || lo > hi || hi > domain {
            return Err(invalid(format!("range [{lo}, {hi}] outside domain [1, {domain}]")));
        }
        Ok(())
    }

    /// Records the server returns for `[lo, hi]` (m′), without fetching.
    pub fn volume(&self, lo: u32, hi: u32) -> Result<usize> {
        self.check(lo, hi)?;
        Ok(self.plan.buckets_for(lo, hi).len() * self.plan.capacity)
    }

    /// Fetches the intersecting buckets and returns exactly the records in `[lo, hi]`.
    pub fn query(&self, server: &mut ServerStore, lo: u32, hi: u32) -> Result<Vec<Record>> {
        self.check(lo, hi)?;
        let groups = &self.groups[self.plan.buckets_for(lo, hi)];
        fetch_groups(server, &self.key, groups, |r| lo <= r.key && r.key <= hi)
    }

    /// Updates need the ORAM-backed store.
    pub fn push_update(&mut self, _update: crate::dynamic::Update) -> Result<()> {
        Err(Error::Unsupported("bucketized range stores are static".into()))
    }
}
