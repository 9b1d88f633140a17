use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SchemaIssue};
use crate::models::{r_fraction, OpKind};

pub const TRIAL_CSV_HEADER: [&str; 11] = [
    "device_label",
    "op",
    "k",
    "r",
    "r_fraction",
    "per_worker_bytes",
    "elapsed_us",
    "throughput_bytes_per_us",
    "repetition",
    "seed",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub device_label: String,
    pub op: OpKind,
    pub k: u32,
    /// Random accesses per worker.
    pub r: u64,
    /// `r·B/N_w`.
    pub r_fraction: f64,
    pub per_worker_bytes: u64,
    /// Start barrier to last worker completion.
    pub elapsed_us: f64,
    #[serde(rename = "throughput_bytes_per_us")]
    pub throughput: f64,
    pub repetition: u32,
    pub seed: u64,
    pub status: TrialStatus,
}

impl TrialRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn completed(
        device_label: &str,
        op: OpKind,
        k: u32,
        r: u64,
        per_worker_bytes: u64,
        page_size: u64,
        elapsed_us: f64,
        repetition: u32,
        seed: u64,
    ) -> Self {
        TrialRecord {
            device_label: device_label.to_string(),
            op,
            k,
            r,
            r_fraction: r_fraction(r, page_size, per_worker_bytes),
            per_worker_bytes,
            elapsed_us,
            throughput: f64::from(k) * per_worker_bytes as f64 / elapsed_us,
            repetition,
            seed,
            status: TrialStatus::Ok,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn failed(
        device_label: &str,
        op: OpKind,
        k: u32,
        r: u64,
        per_worker_bytes: u64,
        page_size: u64,
        repetition: u32,
        seed: u64,
    ) -> Self {
        TrialRecord {
            device_label: device_label.to_string(),
            op,
            k,
            r,
            r_fraction: r_fraction(r, page_size, per_worker_bytes),
            per_worker_bytes,
            elapsed_us: 0.0,
            throughput: 0.0,
            repetition,
            seed,
            status: TrialStatus::Failed,
        }
    }

    /// Bytes moved by all workers.
    pub fn total_bytes(&self) -> f64 {
        f64::from(self.k) * self.per_worker_bytes as f64
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.k == 0 {
            return Err("k must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.r_fraction) {
            return Err(format!("r_fraction {} outside [0, 1]", self.r_fraction));
        }
        if self.status == TrialStatus::Ok {
            if !(self.elapsed_us > 0.0 && self.elapsed_us.is_finite()) {
                return Err(format!("elapsed_us {} must be positive", self.elapsed_us));
            }
            let expected = self.total_bytes() / self.elapsed_us;
            if ((self.throughput - expected) / expected).abs() > 1e-9 {
                return Err(format!(
                    "throughput {} inconsistent with k·N_w/elapsed = {expected}",
                    self.throughput
                ));
            }
        }
        Ok(())
    }
}

/// Incremental CSV writer; every record is flushed so partial runs are usable.
pub struct TrialCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrialCsvWriter<W> {
    pub fn new(out: W) -> Self {
        TrialCsvWriter {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, record: &TrialRecord) -> Result<()> {
        self.inner.serialize(record)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn write_trials_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = TrialCsvWriter::new(out);
    if records.is_empty() {
        w.inner.write_record(TRIAL_CSV_HEADER)?;
    }
    for r in records {
        w.write(r)?;
    }
    w.into_inner()?;
    Ok(())
}

/// Reads a trial CSV, collecting every schema violation with its line number.
pub fn read_trials_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != TRIAL_CSV_HEADER {
        return Err(Error::Schema(vec![SchemaIssue {
            line: 1,
            message: format!(
                "header must be '{}', got '{}'",
                TRIAL_CSV_HEADER.join(","),
                header.join(",")
            ),
        }]));
    }
    let headers = csv::StringRecord::from(header);
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for row in reader.records() {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                issues.push(SchemaIssue {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match row
            .deserialize::<TrialRecord>(Some(&headers))
            .map_err(|e| e.to_string())
            .and_then(|rec| rec.check().map(|()| rec))
        {
            Ok(rec) => records.push(rec),
            Err(message) => issues.push(SchemaIssue { line, message }),
        }
    }
    if issues.is_empty() {
        Ok(records)
    } else {
        Err(Error::Schema(issues))
    }
}
