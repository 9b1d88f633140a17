use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{ArgAction, Args};
use mqssd_core::bench::{
    plan_offsets, precondition, prepare_file, run_grid, FileBackend, IoBackend, OpSelection,
    TrialCsvWriter, TrialRecord, TrialStatus, WorkloadSpec,
};
use mqssd_core::oracle::{OracleBackend, OracleConfig};
use mqssd_core::{DeviceProfile, OpKind};
use serde::Serialize;

use crate::args::{ByteSize, FractionGrid, KGrid};
use crate::output;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// read, write or both.
    #[arg(long, default_value = "both")]
    op: OpSelection,
    /// Worker counts, e.g. `1,2,4` or `1:128:2` [default: 1:128:2].
    #[arg(long)]
    k_grid: Option<KGrid>,
    /// Fractions of pages accessed randomly, e.g. `0.001:1:10`
    /// [default: 8 log-spaced values from 0.001 to 1].
    #[arg(long)]
    r_grid: Option<FractionGrid>,
    /// Placement seed; `MQSSD_SEED` overrides it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    /// Benchmark file; created or extended to `--size` if needed.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Benchmark file size [default: 50GiB, or 256MiB with --desk].
    #[arg(long)]
    size: Option<ByteSize>,
    /// Bytes moved by each worker per trial [default: 256MiB, or 1MiB with --desk].
    #[arg(long)]
    per_worker: Option<ByteSize>,
    #[arg(long)]
    page_size: Option<ByteSize>,
    /// Bypass the page cache with O_DIRECT where supported.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    direct_io: Option<bool>,
    /// Synthesize the grid from an oracle config or device profile JSON
    /// instead of doing I/O.
    #[arg(long, value_name = "JSON")]
    oracle: Option<PathBuf>,
    /// Override the oracle's relative noise.
    #[arg(long, requires = "oracle")]
    noise: Option<f64>,
    /// Trial CSV; provenance goes to `<stem>.provenance.json` beside it.
    #[arg(long, default_value = "trials.csv")]
    out: PathBuf,
    /// Print the offset plans as JSON lines and stop.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", require_equals = true, default_value = "false")]
    dry_run: bool,
    /// Sequentially write this many bytes before the grid.
    #[arg(long)]
    precondition: Option<ByteSize>,
    #[arg(long)]
    label: Option<String>,
    /// Start from desk-scale defaults instead of full-scale ones.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", require_equals = true, default_value = "false")]
    desk: bool,
}

fn workload(a: &BenchArgs) -> Result<WorkloadSpec> {
    let mut spec = if a.desk {
        WorkloadSpec::desk_scale()
    } else {
        WorkloadSpec::default()
    };
    spec.ops = a.op;
    if let Some(g) = &a.k_grid {
        spec.k_grid = g.0.clone();
    }
    if let Some(g) = &a.r_grid {
        spec.r_fraction_grid = g.0.clone();
    }
    spec.seed = output::seed(a.seed, spec.seed)?;
    if let Some(r) = a.reps {
        spec.repetitions = r;
    }
    if let Some(f) = &a.file {
        spec.file_path = f.clone();
    }
    if let Some(s) = a.size {
        spec.file_size = s.0;
    }
    if let Some(s) = a.per_worker {
        spec.per_worker_bytes = s.0;
    }
    if let Some(s) = a.page_size {
        spec.page_size = s.0;
    }
    if let Some(d) = a.direct_io {
        spec.direct_io = d;
    }
    if let Some(l) = &a.label {
        spec.device_label = l.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn load_oracle(path: &std::path::Path, noise: Option<f64>) -> Result<OracleConfig> {
    let text = output::read_text(path)?;
    let config = match OracleConfig::from_json(&text) {
        Ok(c) => c,
        Err(_) => {
            let profile = DeviceProfile::from_json(&text)
                .with_context(|| format!("{} is neither an oracle config nor a device profile", path.display()))?;
            OracleConfig::from_profile(&profile)
        }
    };
    match noise {
        Some(sigma) => {
            let noisy = OracleConfig::new(config.ground_truth().clone(), sigma, config.seed())?;
            Ok(noisy.with_latency_floor(config.latency_floor_us())?)
        }
        None => Ok(config),
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    provenance: &'a mqssd_core::bench::RunProvenance,
    precondition: Option<&'a mqssd_core::bench::PreconditionRecord>,
    oracle: Option<String>,
    finished_at_unix: u64,
}

pub fn run(a: BenchArgs) -> Result<()> {
    let spec = workload(&a)?;

    if a.dry_run {
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        for k in spec.k_values() {
            for r in spec.r_values() {
                for rep in 0..spec.repetitions {
                    let plan = plan_offsets(&spec, k, r, rep)?;
                    serde_json::to_writer(&mut out, &plan)?;
                    writeln!(out)?;
                }
            }
        }
        return Ok(());
    }

    let (backend, pre): (Box<dyn IoBackend>, _) = match &a.oracle {
        Some(path) => (Box::new(OracleBackend::new(load_oracle(path, a.noise)?)), None),
        None => {
            prepare_file(&spec.file_path, spec.file_size)?;
            let pre = match a.precondition {
                Some(b) => Some(precondition(&spec.file_path, b.0, &spec)?),
                None => None,
            };
            (Box::new(FileBackend::open(&spec)?), pre)
        }
    };

    let mut writer = TrialCsvWriter::new(output::create(&a.out)?);
    let outcome = run_grid(&spec, backend.as_ref(), pre.as_ref(), |rec| writer.write(rec))?;
    writer.into_inner()?.flush()?;

    let sidecar = output::sidecar(&a.out, "provenance.json");
    output::write_json(
        &sidecar,
        &Sidecar {
            provenance: &outcome.provenance,
            precondition: pre.as_ref(),
            oracle: a.oracle.as_ref().map(|p| p.display().to_string()),
            finished_at_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    )?;

    print_summary(&outcome.records);
    println!(
        "{} trials ({} failed) -> {}",
        outcome.provenance.trials_total,
        outcome.provenance.trials_failed,
        a.out.display()
    );
    Ok(())
}

/// Per `(op, k)`: throughput range over `r` and the ratio between the
/// least and most random cells.
fn print_summary(records: &[TrialRecord]) {
    let mut cells: BTreeMap<(OpKind, u32), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == TrialStatus::Ok) {
        cells.entry((r.op, r.k)).or_default().entry(r.r).or_default().push(r.throughput);
    }
    println!("{:<6} {:>5} {:>14} {:>14} {:>12}", "op", "k", "min B/us", "max B/us", "rmin:rmax");
    for ((op, k), by_r) in &cells {
        let means: Vec<f64> = by_r.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
        let min = means.iter().copied().fold(f64::INFINITY, f64::min);
        let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ratio = means.first().unwrap_or(&f64::NAN) / means.last().unwrap_or(&f64::NAN);
        println!("{:<6} {:>5} {:>14.3} {:>14.3} {:>11.2}x", op.as_str(), k, min, max, ratio);
    }
}
