//! Data ingestion, workload generation and efficiency experiments for the
//! dpstore systems.

pub mod config;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod report;
pub mod workload;

pub use config::{DataSource, ExecMode, ExperimentConfig, SystemKind, WorkloadSpec};
pub use error::{BenchError, Result};
pub use experiment::run_experiment;
pub use ingest::{ingest_csv, ingest_reader, Binning, IngestSpec};
pub use report::{EfficiencyReport, GroupReport, QueryReport, Summary};
pub use workload::QueryGroup;
