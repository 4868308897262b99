//! Experiment orchestration.
//!
//! The database and workload are drawn once from sub-stream 0 of the seed;
//! trial t sets the system up from sub-stream t + 1. Trials run in parallel
//! and are aggregated in trial order, so reports are byte-identical across
//! runs and thread counts.

use dpstore::dp_oram::{build_indexes, DpOramParams, DpOramSystem};
use dpstore::oram::{buckets_per_access, Engine};
use dpstore::point::{self, HashingParams, PointParams};
use dpstore::range::{self, RangeParams};
use dpstore::rng::{fork, substream};
use dpstore::sanitize::Histogram;
use dpstore::store::{LeakageTrace, ServerStore};
use dpstore::{BitKey, DpParams, Query, QueryKind, Record};
use rand::Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;

use crate::config::{DataSource, ExecMode, ExperimentConfig, SystemKind};
use crate::error::{BenchError, Result};
use crate::ingest::{ingest_csv, IngestSpec};
use crate::report::{EfficiencyReport, GroupReport, QueryReport, Summary};
use crate::workload::{self, QueryGroup};

/// Database, workload and exact result sizes shared by all trials.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub records: Vec<Record>,
    pub groups: Vec<QueryGroup>,
    /// m for every query, by group.
    pub matches: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Outcome {
    m_prime: usize,
    physical: usize,
}

#[derive(Debug, Clone)]
struct Trial {
    stored: usize,
    physical_slots: usize,
    outcomes: Vec<Vec<Outcome>>,
    incidents: usize,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<EfficiencyReport> {
    config.validate()?;
    let prepared = prepare(config)?;
    run_prepared(config, &prepared)
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let mut base = substream(config.seed, 0);
    let mut data_rng = fork(&mut base);
    let mut workload_rng = fork(&mut base);
    let records = load_records(config, &mut data_rng)?;
    let groups = workload::build(
        &config.workload,
        config.domain,
        config.data_columns(),
        config.max_queries,
        &mut workload_rng,
    );
    let matches = exact_matches(&records, &groups, config.domain)?;
    Ok(Prepared {
        records,
        groups,
        matches,
    })
}

pub fn run_prepared(config: &ExperimentConfig, prepared: &Prepared) -> Result<EfficiencyReport> {
    let trials: Vec<Trial> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, prepared, t))
        .collect::<Result<_>>()?;
    Ok(aggregate(config, prepared, &trials))
}

/// Synthetic or ingested records; payloads are the record index for
/// synthetic data.
pub fn load_records<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<Vec<Record>> {
    let domain = config.domain;
    let columns = config.columns;
    let payload = |i: usize| {
        let mut p = i.to_string().into_bytes();
        p.truncate(config.payload_len);
        p
    };
    let attrs = |rng: &mut R| -> Result<BitKey> {
        let mask = if columns >= 64 { u64::MAX } else { (1u64 << columns) - 1 };
        Ok(BitKey::new(rng.random::<u64>() & mask, columns)?)
    };
    match &config.data {
        DataSource::Uniform { records } => (0..*records)
            .map(|i| {
                let key = rng.random_range(1..=domain.max(1));
                Ok(Record::new(key, payload(i)).with_attributes(attrs(rng)?))
            })
            .collect(),
        DataSource::Zipf { records, exponent } => {
            let zipf = Zipf::new(f64::from(domain.max(1)), *exponent)
                .map_err(|e| BenchError::Invalid(format!("zipf: {e}")))?;
            (0..*records)
                .map(|i| {
                    let key = (zipf.sample(rng) as u32).clamp(1, domain.max(1));
                    Ok(Record::new(key, payload(i)).with_attributes(attrs(rng)?))
                })
                .collect()
        }
        DataSource::Csv {
            path,
            key_column,
            binning,
            attribute_columns,
        } => ingest_csv(
            path,
            &IngestSpec {
                key_column: key_column.clone(),
                domain,
                binning: *binning,
                attribute_columns: attribute_columns.clone(),
                payload_len: config.payload_len,
            },
        ),
    }
}

fn exact_matches(records: &[Record], groups: &[QueryGroup], domain: u32) -> Result<Vec<Vec<usize>>> {
    let keys: Vec<u32> = records.iter().map(|r| r.key).collect();
    let needs_keys = groups
        .iter()
        .flat_map(|g| &g.queries)
        .any(|q| q.kind() != QueryKind::Attribute);
    let prefix: Vec<u64> = if needs_keys {
        std::iter::once(0)
            .chain(Histogram::from_keys(&keys, domain as usize)?.cumulative())
            .collect()
    } else {
        Vec::new()
    };
    Ok(groups
        .iter()
        .map(|g| {
            g.queries
                .iter()
                .map(|q| match *q {
                    Query::Range { lo, hi } => (prefix[hi as usize] - prefix[lo as usize - 1]) as usize,
                    Query::Point { key } => (prefix[key as usize] - prefix[key as usize - 1]) as usize,
                    Query::Attribute { .. } => records.iter().filter(|r| q.matches(r)).count(),
                })
                .collect()
        })
        .collect())
}

fn dp_params(config: &ExperimentConfig) -> Result<DpParams> {
    Ok(DpParams::new(config.epsilon, config.beta)?.with_noise(config.noise))
}

pub fn range_params(config: &ExperimentConfig) -> Result<RangeParams> {
    let mut p = RangeParams::new(config.domain, dp_params(config)?).with_arity(config.arity);
    if let Some(b) = config.buckets {
        p = p.with_buckets(b);
    }
    p.payload_len = config.payload_len;
    Ok(p)
}

pub fn point_params(config: &ExperimentConfig) -> Result<PointParams> {
    let dp = dp_params(config)?;
    let mut p = match config.system {
        SystemKind::AtomicPointHashed => PointParams::hashed(
            config.domain,
            dp,
            HashingParams {
                threshold: config.threshold,
                buckets: config.light_buckets,
                discovery_share: config.discovery_share,
            },
        ),
        _ => PointParams::plain(config.domain, dp),
    };
    p.payload_len = config.payload_len;
    Ok(p)
}

pub fn dp_oram_params(config: &ExperimentConfig) -> Result<DpOramParams> {
    let mut p = DpOramParams::new(
        config.domain,
        config.data_columns(),
        config.dp_oram_kinds(),
        dp_params(config)?,
    );
    p.tree_arity = config.arity;
    p.engine = config.engine;
    p.oram_bucket_size = config.oram_bucket_size;
    p.count_multiplier = config.count_multiplier;
    p.payload_len = config.payload_len;
    Ok(p)
}

fn physical_slots(engine: Engine, capacity: usize, bucket_size: usize) -> usize {
    match engine {
        Engine::Path => bucket_size * (2 * capacity.max(1).next_power_of_two() - 1),
        Engine::Linear => capacity,
    }
}

fn sorted(mut records: Vec<Record>) -> Vec<Record> {
    records.sort_by(|a, b| (a.key, a.attributes, &a.payload).cmp(&(b.key, b.attributes, &b.payload)));
    records
}

fn run_trial(config: &ExperimentConfig, prepared: &Prepared, trial: usize) -> Result<Trial> {
    let mut rng = substream(config.seed, trial as u64 + 1);
    let core = |source: dpstore::Error| BenchError::Trial { trial, source };
    let records = &prepared.records;
    let keys: Vec<u32> = records.iter().map(|r| r.key).collect();
    let mut incidents = 0;
    let mut outcomes: Vec<Vec<Outcome>> = Vec::with_capacity(prepared.groups.len());
    let (stored, slots);

    // Checks one Full-mode answer against the plaintext scan.
    let check = |q: &Query, got: Vec<Record>| -> Result<()> {
        if sorted(got) != sorted(q.filter(records)) {
            return Err(BenchError::Mismatch {
                trial,
                message: format!("answer to {q:?} differs from the plaintext scan"),
            });
        }
        Ok(())
    };
    let check_volume = |server: &ServerStore, outcomes: &[Vec<Outcome>]| -> Result<()> {
        let sum: usize = outcomes.iter().flatten().map(|o| o.m_prime).sum();
        if sum != server.trace().total_volume() {
            return Err(BenchError::Mismatch {
                trial,
                message: format!("Σ m′ = {sum} but the trace holds {}", server.trace().total_volume()),
            });
        }
        Ok(())
    };

    match (config.system, config.mode) {
        (SystemKind::AtomicRange, ExecMode::Volume) => {
            let params = range_params(config)?;
            let (plan, _) = range::plan(&keys, &params, &mut fork(&mut rng)).map_err(core)?;
            for g in &prepared.groups {
                let row = g.queries.iter().map(|q| match *q {
                    Query::Range { lo, hi } => {
                        let m_prime = plan.buckets_for(lo, hi).len() * plan.capacity;
                        Ok(Outcome { m_prime, physical: m_prime })
                    }
                    _ => Err(BenchError::Invalid("range store given a non-range query".into())),
                });
                outcomes.push(row.collect::<Result<_>>()?);
            }
            stored = plan.storage();
            slots = stored;
        }
        (SystemKind::AtomicRange, ExecMode::Full) => {
            let params = range_params(config)?;
            let (client, mut server) = range::setup(records, &params, &mut rng).map_err(core)?;
            server.set_trace(LeakageTrace::volumes_only());
            for g in &prepared.groups {
                let mut row = Vec::with_capacity(g.queries.len());
                for q in &g.queries {
                    let Query::Range { lo, hi } = *q else {
                        return Err(BenchError::Invalid("range store given a non-range query".into()));
                    };
                    check(q, client.query(&mut server, lo, hi).map_err(core)?)?;
                    let m_prime = server.trace().entries().last().map_or(0, |e| e.m_prime);
                    row.push(Outcome { m_prime, physical: m_prime });
                }
                outcomes.push(row);
            }
            check_volume(&server, &outcomes)?;
            stored = server.len();
            slots = stored;
        }
        (SystemKind::AtomicPointPlain | SystemKind::AtomicPointHashed, ExecMode::Volume) => {
            let params = point_params(config)?;
            let (layout, _) = point::plan(&keys, &params, &mut fork(&mut rng)).map_err(core)?;
            for g in &prepared.groups {
                let row = g.queries.iter().map(|q| match *q {
                    Query::Point { key } => {
                        let m_prime = layout.sizes[layout.group_of[key as usize - 1]];
                        Ok(Outcome { m_prime, physical: m_prime })
                    }
                    _ => Err(BenchError::Invalid("point store given a non-point query".into())),
                });
                outcomes.push(row.collect::<Result<_>>()?);
            }
            stored = layout.storage();
            slots = stored;
        }
        (SystemKind::AtomicPointPlain | SystemKind::AtomicPointHashed, ExecMode::Full) => {
            let params = point_params(config)?;
            let (client, mut server) = point::setup(records, &params, &mut rng).map_err(core)?;
            server.set_trace(LeakageTrace::volumes_only());
            for g in &prepared.groups {
                let mut row = Vec::with_capacity(g.queries.len());
                for q in &g.queries {
                    let Query::Point { key } = *q else {
                        return Err(BenchError::Invalid("point store given a non-point query".into()));
                    };
                    check(q, client.query(&mut server, key).map_err(core)?)?;
                    let m_prime = server.trace().entries().last().map_or(0, |e| e.m_prime);
                    row.push(Outcome { m_prime, physical: m_prime });
                }
                outcomes.push(row);
            }
            check_volume(&server, &outcomes)?;
            stored = server.len();
            slots = stored;
        }
        (SystemKind::DpOram, ExecMode::Volume) => {
            let params = dp_oram_params(config)?;
            let (indexes, _) = build_indexes(records, &params, &mut fork(&mut rng)).map_err(core)?;
            let capacity = records.len().max(1);
            let per_access = buckets_per_access(params.engine, capacity);
            let extra = (params.count_multiplier * records.len() as f64).ceil() as i64;
            for (g, ms) in prepared.groups.iter().zip(&prepared.matches) {
                let mut row = Vec::with_capacity(g.queries.len());
                for (q, &m) in g.queries.iter().zip(ms) {
                    let index = indexes.get(&q.kind()).ok_or_else(|| {
                        core(dpstore::Error::Unsupported(format!("{} queries not enabled", q.kind().name())))
                    })?;
                    let released = index.answer(q).map_err(core)? + extra;
                    if released < m as i64 {
                        incidents += 1;
                    }
                    let m_prime = (released.max(0) as usize).max(m);
                    row.push(Outcome {
                        m_prime,
                        physical: m_prime * per_access,
                    });
                }
                outcomes.push(row);
            }
            stored = capacity;
            slots = physical_slots(params.engine, capacity, params.oram_bucket_size);
        }
        (SystemKind::DpOram, ExecMode::Full) => {
            let params = dp_oram_params(config)?;
            let mut sys = DpOramSystem::setup(records, &params, &mut rng).map_err(core)?;
            sys.set_trace(LeakageTrace::volumes_only());
            let per_access = sys.oram().buckets_per_access();
            for g in &prepared.groups {
                let mut row = Vec::with_capacity(g.queries.len());
                for q in &g.queries {
                    let (got, cost) = sys.query_with_cost(q).map_err(core)?;
                    check(q, got)?;
                    row.push(Outcome {
                        m_prime: cost.accesses,
                        physical: cost.accesses * per_access,
                    });
                }
                outcomes.push(row);
            }
            let sum: usize = outcomes.iter().flatten().map(|o| o.m_prime).sum();
            if sum != sys.trace().total_volume() {
                return Err(BenchError::Mismatch {
                    trial,
                    message: format!("Σ m′ = {sum} but the trace holds {}", sys.trace().total_volume()),
                });
            }
            incidents = sys.incidents().len();
            stored = sys.storage();
            slots = physical_slots(params.engine, stored, params.oram_bucket_size);
        }
    }
    Ok(Trial {
        stored,
        physical_slots: slots,
        outcomes,
        incidents,
    })
}

fn aggregate(config: &ExperimentConfig, prepared: &Prepared, trials: &[Trial]) -> EfficiencyReport {
    let n = prepared.records.len();
    let t = trials.len() as f64;
    let per_trial = |f: &dyn Fn(&Trial) -> f64| trials.iter().map(f).collect::<Vec<f64>>();

    let mut groups = Vec::with_capacity(prepared.groups.len());
    let mut queries = Vec::new();
    for (gi, (g, ms)) in prepared.groups.iter().zip(&prepared.matches).enumerate() {
        let mean_over = |trial: &Trial, pick: &dyn Fn(usize, &Outcome) -> Option<f64>| {
            let vals: Vec<f64> = ms
                .iter()
                .zip(&trial.outcomes[gi])
                .filter_map(|(&m, o)| pick(m, o))
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let a: Vec<f64> = trials
            .iter()
            .filter_map(|tr| mean_over(tr, &|m, o| (m > 0).then(|| o.m_prime as f64 / m as f64)))
            .collect();
        let empty: Vec<f64> = trials
            .iter()
            .filter_map(|tr| mean_over(tr, &|m, o| (m == 0).then_some(o.m_prime as f64)))
            .collect();
        let physical: Vec<f64> = trials
            .iter()
            .filter_map(|tr| mean_over(tr, &|_, o| Some(o.physical as f64)))
            .collect();
        groups.push(GroupReport {
            label: g.label.clone(),
            selectivity: g.selectivity,
            queries: g.queries.len(),
            nonempty_queries: ms.iter().filter(|&&m| m > 0).count(),
            a: Summary::of(&a),
            empty_m_prime: Summary::of(&empty),
            physical_reads: Summary::of(&physical),
        });
        for (qi, (q, &m)) in g.queries.iter().zip(ms).enumerate() {
            let mean_m_prime = trials.iter().map(|tr| tr.outcomes[gi][qi].m_prime as f64).sum::<f64>() / t;
            queries.push(QueryReport {
                group: gi,
                query: *q,
                m,
                mean_m_prime,
                a: (m > 0).then(|| mean_m_prime / m as f64),
            });
        }
    }

    let stored = per_trial(&|tr| tr.stored as f64);
    EfficiencyReport {
        system: config.system,
        epsilon: config.epsilon,
        beta: config.beta,
        seed: config.seed,
        domain: config.domain,
        records: n,
        trials: trials.len(),
        storage_a: (n > 0).then(|| Summary::of(&per_trial(&|tr| tr.stored as f64 / n as f64))).flatten(),
        stored_records: Summary::of(&stored).expect("at least one trial"),
        physical_slots: Summary::of(&per_trial(&|tr| tr.physical_slots as f64)).expect("at least one trial"),
        total_volume: trials
            .iter()
            .flat_map(|tr| tr.outcomes.iter().flatten())
            .map(|o| o.m_prime as u64)
            .sum(),
        incidents: trials.iter().map(|tr| tr.incidents).sum(),
        groups,
        queries,
        runtime_secs: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WorkloadSpec;
    use dpstore::NoiseMode;

    fn small(system: SystemKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(system);
        c.domain = 32;
        c.data = DataSource::Uniform { records: 120 };
        c.epsilon = 1.0;
        c.trials = 3;
        c.seed = 11;
        c.workload = match system {
            SystemKind::AtomicRange | SystemKind::DpOram => WorkloadSpec::Ranges {
                selectivities: vec![0.1, 0.5],
            },
            _ => WorkloadSpec::AllPoints,
        };
        c
    }

    #[test]
    fn volume_mode_matches_full_mode() {
        for system in SystemKind::ALL {
            let mut cfg = small(system);
            let full = run_experiment(&cfg).unwrap();
            cfg.mode = ExecMode::Volume;
            let volume = run_experiment(&cfg).unwrap();
            assert_eq!(full.to_json().unwrap(), volume.to_json().unwrap(), "{system}");
        }
    }

    #[test]
    fn efficiency_is_at_least_one() {
        for system in SystemKind::ALL {
            let r = run_experiment(&small(system)).unwrap();
            for q in &r.queries {
                if let Some(a) = q.a {
                    assert!(a >= 1.0, "{system}: {q:?}");
                }
            }
        }
    }

    #[test]
    fn whole_domain_range_fetches_every_bucket() {
        let mut cfg = small(SystemKind::AtomicRange);
        cfg.noise = NoiseMode::Disabled;
        cfg.workload = WorkloadSpec::Ranges { selectivities: vec![1.0] };
        let r = run_experiment(&cfg).unwrap();
        let prep = prepare(&cfg).unwrap();
        let keys: Vec<u32> = prep.records.iter().map(|r| r.key).collect();
        let params = range_params(&cfg).unwrap();
        let (plan, _) = range::plan(&keys, &params, &mut dpstore::rng::stream(0)).unwrap();
        // b · capacity / n, with capacity = ⌈n/b⌉ + μ_b.
        let b = params.buckets as f64;
        let expect = b * (120f64 / b).ceil() + b * plan.offset as f64;
        assert_eq!(r.groups[0].a.unwrap().mean, expect / 120.0);
    }

    #[test]
    fn point_queries_cost_more_than_ranges_in_dp_oram() {
        let mut cfg = small(SystemKind::DpOram);
        cfg.domain = 1024;
        cfg.data = DataSource::Uniform { records: 10_000 };
        cfg.epsilon = 0.1;
        cfg.trials = 2;
        cfg.mode = ExecMode::Volume;
        cfg.kinds = Some([QueryKind::Range, QueryKind::Point].into_iter().collect());
        cfg.workload = WorkloadSpec::Ranges { selectivities: vec![0.1] };
        let range = run_experiment(&cfg).unwrap();
        cfg.workload = WorkloadSpec::AllPoints;
        let points = run_experiment(&cfg).unwrap();
        assert!(points.mean_a()[0].unwrap() > range.mean_a()[0].unwrap());
    }

    #[test]
    fn csv_report_has_one_row_per_group() {
        let r = run_experiment(&small(SystemKind::AtomicRange)).unwrap();
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("label,selectivity,queries"));
    }
}
