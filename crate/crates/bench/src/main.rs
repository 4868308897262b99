use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use dpstore::sanitize::Histogram;
use dpstore_bench::config::parse_num;
use dpstore_bench::workload;
use dpstore_bench::{ingest_csv, run_experiment, BenchError, Binning, ExperimentConfig, IngestSpec, Result};

#[derive(Parser)]
#[command(name = "bench", version, about = "Storage and communication efficiency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkloadKind {
    Points,
    Ranges,
    Attributes,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and emit its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Seed used when the config sets none.
        #[arg(long, env = "DPSTORE_SEED", default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write the per-group CSV summary.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Include wall-clock runtime in the report (breaks byte-identical reruns).
        #[arg(long)]
        timing: bool,
    },
    /// Ingest a CSV file and print the resulting key histogram.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        key_col: String,
        #[arg(long)]
        domain: u32,
        #[arg(long, default_value = "direct")]
        binning: String,
        /// Comma-separated 0/1 attribute columns.
        #[arg(long, value_delimiter = ',')]
        attr_cols: Vec<String>,
    },
    /// Print a query workload as JSON lines.
    Workload {
        #[arg(long, value_enum)]
        kind: WorkloadKind,
        #[arg(long)]
        selectivity: Option<String>,
        #[arg(long)]
        domain: Option<u32>,
        #[arg(long)]
        columns: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            json,
            csv,
            timing,
        } => {
            let cfg = ExperimentConfig::parse(&fs::read_to_string(&config)?, seed)?;
            let start = Instant::now();
            let mut report = run_experiment(&cfg)?;
            let elapsed = start.elapsed().as_secs_f64();
            if timing {
                report.runtime_secs = Some(elapsed);
            }
            let text = report.to_json()?;
            match json {
                Some(path) => fs::write(path, text)?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
            if let Some(path) = csv {
                report.write_csv(fs::File::create(path)?)?;
            }
            eprintln!("{} trials in {elapsed:.2}s", cfg.trials);
        }
        Command::Ingest {
            csv,
            key_col,
            domain,
            binning,
            attr_cols,
        } => {
            let binning: Binning = binning.parse().map_err(BenchError::Invalid)?;
            let spec = IngestSpec {
                binning,
                attribute_columns: attr_cols,
                ..IngestSpec::new(key_col, domain)
            };
            let records = ingest_csv(&csv, &spec)?;
            let keys: Vec<u32> = records.iter().map(|r| r.key).collect();
            let hist = Histogram::from_keys(&keys, domain as usize)?;
            let summary = serde_json::json!({
                "records": records.len(),
                "domain": domain,
                "histogram": hist.bins(),
            });
            println!("{summary}");
        }
        Command::Workload {
            kind,
            selectivity,
            domain,
            columns,
        } => {
            let need_domain = || domain.ok_or_else(|| BenchError::Invalid("--domain is required".into()));
            let queries = match kind {
                WorkloadKind::Points => workload::all_points(need_domain()?),
                WorkloadKind::Ranges => {
                    let s = selectivity.ok_or_else(|| BenchError::Invalid("--selectivity is required".into()))?;
                    let s = parse_num(&s).map_err(BenchError::Invalid)?;
                    if !(s > 0.0 && s <= 1.0) {
                        return Err(BenchError::Invalid(format!("selectivity {s} outside (0, 1]")));
                    }
                    workload::ranges_at(need_domain()?, s)
                }
                WorkloadKind::Attributes => workload::all_attributes(
                    columns.ok_or_else(|| BenchError::Invalid("--columns is required".into()))?,
                ),
            };
            let mut out = io::BufWriter::new(io::stdout().lock());
            for q in queries {
                serde_json::to_writer(&mut out, &q)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
