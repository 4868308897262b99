//! Store for point queries in the atomic model.
//!
//! The plain variant gives every domain bin its own group padded to a noisy
//! overcount. The hashed variant first finds light bins with part of the
//! budget, merges them into a few buckets by two-choice hashing, and pads
//! heavy bins and buckets with the rest.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{DpParams, Epsilon, PrivacyBudget};
use crate::error::{invalid, Error, Result};
use crate::rng::fork;
use crate::sanitize::{Histogram, NoisyHistogram};
use crate::store::{fetch_groups, upload_groups, Group, Record, SecretKey, ServerStore, DEFAULT_PAYLOAD_LEN};

/// Parameters of the two-choice hashing variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashingParams {
    /// Bins whose noisy count falls below this are light.
    pub threshold: Option<f64>,
    /// Buckets for light bins; `None` uses ⌈20·√N_l⌉.
    pub buckets: Option<usize>,
    /// Share of ε spent on finding light bins.
    pub discovery_share: f64,
}

impl Default for HashingParams {
    fn default() -> Self {
        HashingParams {
            threshold: None,
            buckets: None,
            discovery_share: 0.5,
        }
    }
}

impl HashingParams {
    /// θ = 10·√2/ε unless set explicitly.
    pub fn threshold_for(&self, epsilon: Epsilon) -> f64 {
        self.threshold
            .unwrap_or(10.0 * std::f64::consts::SQRT_2 / epsilon.value())
    }

    /// N_b = ⌈20·√N_l⌉ capped at N_l unless set explicitly.
    pub fn buckets_for(&self, light: usize) -> usize {
        if light == 0 {
            return 0;
        }
        let n = self
            .buckets
            .unwrap_or_else(|| (20.0 * (light as f64).sqrt()).ceil() as usize);
        n.clamp(1, light)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum PointVariant {
    Plain,
    Hashed(HashingParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointParams {
    pub domain: u32,
    pub dp: DpParams,
    pub variant: PointVariant,
    pub payload_len: usize,
}

impl PointParams {
    pub fn plain(domain: u32, dp: DpParams) -> Self {
        PointParams {
            domain,
            dp,
            variant: PointVariant::Plain,
            payload_len: DEFAULT_PAYLOAD_LEN,
        }
    }

    pub fn hashed(domain: u32, dp: DpParams, hashing: HashingParams) -> Self {
        PointParams {
            variant: PointVariant::Hashed(hashing),
            ..PointParams::plain(domain, dp)
        }
    }
}

/// Which group holds each bin, and how large every group is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointLayout {
    /// Group index per bin (position 1 at index 0).
    pub group_of: Vec<usize>,
    /// Padded size of every group; this is all the server learns at setup.
    pub sizes: Vec<usize>,
    /// Bins merged into buckets (0 for the plain variant).
    pub light_bins: usize,
    /// Buckets holding the light bins.
    pub light_buckets: usize,
}

impl PointLayout {
    pub fn storage(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn groups(&self) -> usize {
        self.sizes.len()
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Assigns each item to the less loaded of its two hashed buckets, ties to
/// the first choice, processing items in the given order.
pub fn two_choice(items: &[usize], buckets: usize, seeds: (u64, u64)) -> Vec<usize> {
    let mut load = vec![0usize; buckets];
    items
        .iter()
        .map(|&item| {
            let a = (splitmix(seeds.0 ^ item as u64) % buckets as u64) as usize;
            let b = (splitmix(seeds.1 ^ item as u64) % buckets as u64) as usize;
            let pick = if load[b] < load[a] { b } else { a };
            load[pick] += 1;
            pick
        })
        .collect()
}

/// Computes the group layout and padded sizes from keys alone.
pub fn plan<R: Rng + ?Sized>(
    keys: &[u32],
    params: &PointParams,
    rng: &mut R,
) -> Result<(PointLayout, PrivacyBudget)> {
    if params.domain == 0 {
        return Err(invalid("domain must be non-empty"));
    }
    let domain = params.domain as usize;
    let hist = Histogram::from_keys(keys, domain)?;
    let mut budget = PrivacyBudget::new(params.dp.epsilon);
    match params.variant {
        PointVariant::Plain => {
            budget.charge_sequential("point-histogram", params.dp.epsilon)?;
            let noisy = NoisyHistogram::build(&hist, params.dp, rng)?;
            Ok((
                PointLayout {
                    group_of: (0..domain).collect(),
                    sizes: noisy.released().iter().map(|&c| c as usize).collect(),
                    light_bins: 0,
                    light_buckets: 0,
                },
                budget,
            ))
        }
        PointVariant::Hashed(h) => {
            let (eps_find, eps_pad) = params.dp.epsilon.split(h.discovery_share)?;
            budget.charge_sequential("point-light-bins", eps_find)?;
            budget.charge_sequential("point-histogram", eps_pad)?;

            let theta = h.threshold_for(params.dp.epsilon);
            let scale = 1.0 / eps_find.value();
            let light: Vec<usize> = hist
                .bins()
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c as f64 + params.dp.noise.sample(scale, rng) < theta)
                .map(|(i, _)| i)
                .collect();
            let heavy: Vec<usize> = {
                let mut is_light = vec![false; domain];
                light.iter().for_each(|&i| is_light[i] = true);
                (0..domain).filter(|&i| !is_light[i]).collect()
            };
            let n_buckets = h.buckets_for(light.len());
            let seeds = (rng.next_u64(), rng.next_u64());

            let mut group_of = vec![0usize; domain];
            for (g, &bin) in heavy.iter().enumerate() {
                group_of[bin] = g;
            }
            for (&bin, bucket) in light.iter().zip(two_choice(&light, n_buckets, seeds)) {
                group_of[bin] = heavy.len() + bucket;
            }
            let mut merged = vec![0u64; heavy.len() + n_buckets];
            for (bin, &c) in hist.bins().iter().enumerate() {
                merged[group_of[bin]] += c;
            }
            let noisy = NoisyHistogram::build(&Histogram::new(merged), params.dp.with_epsilon(eps_pad), rng)?;
            Ok((
                PointLayout {
                    group_of,
                    sizes: noisy.released().iter().map(|&c| c as usize).collect(),
                    light_bins: light.len(),
                    light_buckets: n_buckets,
                },
                budget,
            ))
        }
    }
}

/// Client state for the point store.
#[derive(Debug, Clone)]
pub struct PointClientIndex {
    layout: PointLayout,
    groups: Vec<Group>,
    key: SecretKey,
    budget: PrivacyBudget,
    records: usize,
}

/// Builds the point store; noise and encryption use separate forks of `rng`.
pub fn setup<R: Rng + ?Sized>(
    records: &[Record],
    params: &PointParams,
    rng: &mut R,
) -> Result<(PointClientIndex, ServerStore)> {
    let mut noise = fork(rng);
    let mut crypto = fork(rng);
    let keys: Vec<u32> = records.iter().map(|r| r.key).collect();
    let (layout, budget) = plan(&keys, params, &mut noise)?;
    let mut members: Vec<Vec<&Record>> = vec![Vec::new(); layout.groups()];
    for r in records {
        members[layout.group_of[r.key as usize - 1]].push(r);
    }
    let key = SecretKey::generate(&mut crypto);
    let (server, groups) = upload_groups(&members, &layout.sizes, &key, params.payload_len, &mut crypto)?;
    Ok((
        PointClientIndex {
            layout,
            groups,
            key,
            budget,
            records: records.len(),
        },
        server,
    ))
}

impl PointClientIndex {
    pub fn layout(&self) -> &PointLayout {
        &self.layout
    }

    pub fn budget(&self) -> &PrivacyBudget {
        &self.budget
    }

    pub fn records(&self) -> usize {
        self.records
    }

    fn group(&self, key: u32) -> Result<usize> {
        let domain = self.layout.group_of.len();
        if key < 1 || key as usize > domain {
            return Err(invalid(format!("point {key} outside domain [1, {domain}]")));
        }
        Ok(self.layout.group_of[key as usize - 1])
    }

    /// Records the server returns for point `key` (m′), without fetching.
    pub fn volume(&self, key: u32) -> Result<usize> {
        Ok(self.layout.sizes[self.group(key)?])
    }

    /// Fetches the group holding `key` and returns exactly its matching records.
    pub fn query(&self, server: &mut ServerStore, key: u32) -> Result<Vec<Record>> {
        let g = self.group(key)?;
        fetch_groups(server, &self.key, &self.groups[g..=g], |r| r.key == key)
    }

    /// Updates need the ORAM-backed store.
    pub fn push_update(&mut self, _update: crate::dynamic::Update) -> Result<()> {
        Err(Error::Unsupported("hashed point stores are static".into()))
    }
}
