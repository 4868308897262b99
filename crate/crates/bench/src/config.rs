//! Experiment configuration in a `key = value` text format.
//!
//! ```text
//! # atomic range store on synthetic uniform data
//! system = atomic-range
//! epsilon = 0.1
//! beta = 2^-20
//! domain = 1024
//! records = 10000
//! workload = ranges
//! selectivities = 0.05, 0.1, 0.2, 0.4, 0.8
//! trials = 100
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use dpstore::oram::{Engine, DEFAULT_BUCKET_SIZE};
use dpstore::{NoiseMode, QueryKind};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::ingest::Binning;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    AtomicRange,
    AtomicPointPlain,
    AtomicPointHashed,
    DpOram,
}

impl SystemKind {
    pub const ALL: [SystemKind; 4] = [
        SystemKind::AtomicRange,
        SystemKind::AtomicPointPlain,
        SystemKind::AtomicPointHashed,
        SystemKind::DpOram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::AtomicRange => "atomic-range",
            SystemKind::AtomicPointPlain => "atomic-point-plain",
            SystemKind::AtomicPointHashed => "atomic-point-hashed",
            SystemKind::DpOram => "dp-oram",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown system {s:?}"))
    }
}

/// How queries are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecMode {
    /// Build the encrypted store and run every query through it.
    #[default]
    Full,
    /// Derive volumes from the client plan alone; reports match `Full`.
    Volume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WorkloadSpec {
    AllPoints,
    Ranges { selectivities: Vec<f64> },
    AllAttributes,
}

impl WorkloadSpec {
    pub fn query_kind(&self) -> QueryKind {
        match self {
            WorkloadSpec::AllPoints => QueryKind::Point,
            WorkloadSpec::Ranges { .. } => QueryKind::Range,
            WorkloadSpec::AllAttributes => QueryKind::Attribute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataSource {
    /// Keys uniform on [1, N], attribute bits fair coins.
    Uniform { records: usize },
    /// Key r drawn with probability proportional to r^(−exponent).
    Zipf { records: usize, exponent: f64 },
    Csv {
        path: PathBuf,
        key_column: String,
        binning: Binning,
        attribute_columns: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub epsilon: f64,
    pub beta: f64,
    pub seed: u64,
    pub noise: NoiseMode,
    /// Ordered key domain size N.
    pub domain: u32,
    /// Binary attribute columns k.
    pub columns: usize,
    /// Range buckets b; defaults to 4·log₂N.
    pub buckets: Option<usize>,
    /// Arity of the range trees.
    pub arity: usize,
    /// Light-bin threshold θ for the hashed point store.
    pub threshold: Option<f64>,
    /// Buckets N_b for the hashed point store.
    pub light_buckets: Option<usize>,
    pub discovery_share: f64,
    /// Query kinds indexed by DP-ORAM; defaults to the workload's kind.
    pub kinds: Option<BTreeSet<QueryKind>>,
    pub engine: Engine,
    /// Path ORAM bucket size Z.
    pub oram_bucket_size: usize,
    pub count_multiplier: f64,
    pub payload_len: usize,
    pub trials: usize,
    pub mode: ExecMode,
    pub data: DataSource,
    pub workload: WorkloadSpec,
    /// Per-group cap; larger groups are subsampled once, deterministically.
    pub max_queries: Option<usize>,
}

impl ExperimentConfig {
    /// Defaults: ε = 0.1, β = 2⁻²⁰, N = 1024, 10⁴ uniform records, range
    /// workload over the standard selectivity grid, one trial.
    pub fn new(system: SystemKind) -> Self {
        ExperimentConfig {
            system,
            epsilon: 0.1,
            beta: 2f64.powi(-20),
            seed: 0,
            noise: NoiseMode::Laplace,
            domain: 1024,
            columns: 0,
            buckets: None,
            arity: dpstore::range::DEFAULT_ARITY,
            threshold: None,
            light_buckets: None,
            discovery_share: 0.5,
            kinds: None,
            engine: Engine::Path,
            oram_bucket_size: DEFAULT_BUCKET_SIZE,
            count_multiplier: 0.0,
            payload_len: dpstore::store::DEFAULT_PAYLOAD_LEN,
            trials: 1,
            mode: ExecMode::Full,
            data: DataSource::Uniform { records: 10_000 },
            workload: WorkloadSpec::Ranges {
                selectivities: vec![0.05, 0.1, 0.2, 0.4, 0.8],
            },
            max_queries: None,
        }
    }

    /// Parses the text format; `default_seed` applies when no `seed` key is set.
    pub fn parse(text: &str, default_seed: u64) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| BenchError::Config {
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = k.trim().to_string();
            if entries.iter().any(|(_, seen, _)| *seen == key) {
                return Err(BenchError::Config {
                    line: i + 1,
                    message: format!("duplicate key {key}"),
                });
            }
            entries.push((i + 1, key, v.trim().to_string()));
        }
        let find = |key: &str| entries.iter().find(|(_, k, _)| k == key);
        let (line, _, system) = find("system").ok_or_else(|| BenchError::Invalid("missing key `system`".into()))?;
        let system = system.parse().map_err(|m| BenchError::Config { line: *line, message: m })?;
        let mut cfg = ExperimentConfig::new(system);
        cfg.seed = default_seed;

        let mut data_source = "uniform".to_string();
        let mut records = 10_000usize;
        let mut exponent = 1.0f64;
        let mut csv_path: Option<PathBuf> = None;
        let mut key_column: Option<String> = None;
        let mut binning = Binning::Direct;
        let mut attribute_columns = Vec::new();
        let mut workload = "ranges".to_string();
        let mut selectivities = vec![0.05, 0.1, 0.2, 0.4, 0.8];

        for (line, key, value) in &entries {
            let err = |m: String| BenchError::Config { line: *line, message: m };
            let v = value.as_str();
            match key.as_str() {
                "system" => {}
                "epsilon" => cfg.epsilon = parse_num(v).map_err(err)?,
                "beta" => cfg.beta = parse_num(v).map_err(err)?,
                "seed" => cfg.seed = parse(v).map_err(err)?,
                "noise" => {
                    cfg.noise = match v {
                        "laplace" => NoiseMode::Laplace,
                        "geometric" => NoiseMode::Geometric,
                        "disabled" => NoiseMode::Disabled,
                        _ => return Err(err(format!("unknown noise {v:?}"))),
                    }
                }
                "domain" => cfg.domain = parse(v).map_err(err)?,
                "columns" => cfg.columns = parse(v).map_err(err)?,
                "buckets" => cfg.buckets = Some(parse(v).map_err(err)?),
                "arity" => cfg.arity = parse(v).map_err(err)?,
                "threshold" => cfg.threshold = Some(parse_num(v).map_err(err)?),
                "light_buckets" => cfg.light_buckets = Some(parse(v).map_err(err)?),
                "discovery_share" => cfg.discovery_share = parse_num(v).map_err(err)?,
                "kinds" => {
                    let kinds = split_list(v)
                        .map(|k| match k {
                            "range" => Ok(QueryKind::Range),
                            "point" => Ok(QueryKind::Point),
                            "attribute" => Ok(QueryKind::Attribute),
                            _ => Err(err(format!("unknown query kind {k:?}"))),
                        })
                        .collect::<Result<BTreeSet<_>>>()?;
                    cfg.kinds = Some(kinds);
                }
                "engine" => {
                    cfg.engine = match v {
                        "path" => Engine::Path,
                        "linear" => Engine::Linear,
                        _ => return Err(err(format!("unknown engine {v:?}"))),
                    }
                }
                "oram_bucket_size" => cfg.oram_bucket_size = parse(v).map_err(err)?,
                "count_multiplier" => cfg.count_multiplier = parse_num(v).map_err(err)?,
                "payload_len" => cfg.payload_len = parse(v).map_err(err)?,
                "trials" => cfg.trials = parse(v).map_err(err)?,
                "mode" => {
                    cfg.mode = match v {
                        "full" => ExecMode::Full,
                        "volume" => ExecMode::Volume,
                        _ => return Err(err(format!("unknown mode {v:?}"))),
                    }
                }
                "data" => data_source = v.to_string(),
                "records" => records = parse(v).map_err(err)?,
                "zipf_exponent" => exponent = parse_num(v).map_err(err)?,
                "csv" => csv_path = Some(PathBuf::from(v)),
                "key_column" => key_column = Some(v.to_string()),
                "binning" => binning = v.parse().map_err(err)?,
                "attribute_columns" => attribute_columns = split_list(v).map(String::from).collect(),
                "workload" => workload = v.to_string(),
                "selectivities" => {
                    selectivities = split_list(v)
                        .map(|s| parse_num(s).map_err(err))
                        .collect::<Result<_>>()?
                }
                "max_queries" => cfg.max_queries = Some(parse(v).map_err(err)?),
                other => return Err(err(format!("unknown key {other}"))),
            }
        }

        cfg.data = match data_source.as_str() {
            "uniform" => DataSource::Uniform { records },
            "zipf" => DataSource::Zipf { records, exponent },
            "csv" => DataSource::Csv {
                path: csv_path.ok_or_else(|| BenchError::Invalid("data = csv needs `csv`".into()))?,
                key_column: key_column.ok_or_else(|| BenchError::Invalid("data = csv needs `key_column`".into()))?,
                binning,
                attribute_columns,
            },
            other => return Err(BenchError::Invalid(format!("unknown data source {other:?}"))),
        };
        cfg.workload = match workload.as_str() {
            "points" => WorkloadSpec::AllPoints,
            "ranges" => WorkloadSpec::Ranges { selectivities },
            "attributes" => WorkloadSpec::AllAttributes,
            other => return Err(BenchError::Invalid(format!("unknown workload {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// DP-ORAM index kinds.
    pub fn dp_oram_kinds(&self) -> BTreeSet<QueryKind> {
        self.kinds
            .clone()
            .unwrap_or_else(|| [self.workload.query_kind()].into_iter().collect())
    }

    /// Attribute columns the data carries.
    pub fn data_columns(&self) -> usize {
        match &self.data {
            DataSource::Csv { attribute_columns, .. } => attribute_columns.len(),
            _ => self.columns,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Invalid(m));
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.arity < 2 {
            return bad("arity must be at least 2".into());
        }
        if !(self.discovery_share > 0.0 && self.discovery_share < 1.0) {
            return bad("discovery_share must lie in (0, 1)".into());
        }
        if self.oram_bucket_size == 0 {
            return bad("oram_bucket_size must be positive".into());
        }
        if !(self.count_multiplier.is_finite() && self.count_multiplier >= 0.0) {
            return bad("count_multiplier must be non-negative".into());
        }
        if self.max_queries == Some(0) {
            return bad("max_queries must be positive".into());
        }
        if let DataSource::Zipf { exponent, .. } = self.data {
            if !(exponent.is_finite() && exponent >= 0.0) {
                return bad("zipf_exponent must be non-negative".into());
            }
        }
        let kind = self.workload.query_kind();
        let supported = match self.system {
            SystemKind::AtomicRange => kind == QueryKind::Range,
            SystemKind::AtomicPointPlain | SystemKind::AtomicPointHashed => kind == QueryKind::Point,
            SystemKind::DpOram => self.dp_oram_kinds().contains(&kind),
        };
        if !supported {
            return bad(format!("{} does not answer {} queries", self.system, kind.name()));
        }
        if kind != QueryKind::Attribute && self.domain == 0 {
            return bad("domain must be positive".into());
        }
        if kind == QueryKind::Attribute && self.data_columns() == 0 {
            return bad("attribute workloads need columns".into());
        }
        if let WorkloadSpec::Ranges { selectivities } = &self.workload {
            if selectivities.is_empty() {
                return bad("selectivities must not be empty".into());
            }
            if let Some(s) = selectivities.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
                return bad(format!("selectivity {s} outside (0, 1]"));
            }
        }
        if let Some(b) = self.buckets {
            if b == 0 || b > self.domain as usize {
                return bad(format!("buckets must lie in [1, {}]", self.domain));
            }
        }
        Ok(())
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| format!("{v:?}: {e}"))
}

/// A float, or a power written `base^exp` such as `2^-20`.
pub fn parse_num(v: &str) -> std::result::Result<f64, String> {
    match v.split_once('^') {
        Some((b, e)) => {
            let b: f64 = parse(b.trim())?;
            let e: f64 = parse(e.trim())?;
            Ok(b.powf(e))
        }
        None => parse(v),
    }
}
