//! Concurrent file I/O microbenchmark.
//!
//! A trial runs `k` workers, each moving `N_w` bytes through `r` chunks placed
//! at random page-aligned offsets inside its own disjoint region of a shared
//! file. A grid sweeps the random-access fraction and the worker count.

mod plan;
mod record;
mod run;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use plan::{plan_offsets, Chunk, OffsetPlan};
pub use record::{read_trials_csv, write_trials_csv, TrialCsvWriter, TrialRecord, TrialStatus, TRIAL_CSV_HEADER};
pub use run::{
    precondition, prepare_file, run_grid, run_planned_trial, run_trial, FileBackend,
    GridOutcome, IoBackend, PreconditionRecord, RunProvenance, TrialContext,
};

use crate::error::{Error, Result};
use crate::models::{r_count, OpKind};

pub const KIB: u64 = 1 << 10;
pub const MIB: u64 = 1 << 20;
pub const GIB: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpSelection {
    Read,
    Write,
    Both,
}

impl OpSelection {
    pub fn kinds(self) -> Vec<OpKind> {
        match self {
            OpSelection::Read => vec![OpKind::Read],
            OpSelection::Write => vec![OpKind::Write],
            OpSelection::Both => OpKind::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for OpSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "read" => Ok(OpSelection::Read),
            "write" => Ok(OpSelection::Write),
            "both" | "all" => Ok(OpSelection::Both),
            other => Err(Error::InvalidParameter(format!("unknown op selection '{other}'"))),
        }
    }
}

/// Powers of two from 1 to 128.
pub fn default_k_grid() -> Vec<u32> {
    (0..8).map(|i| 1 << i).collect()
}

/// Eight log-spaced fractions from 0.001 to 1.
pub fn default_r_fractions() -> Vec<f64> {
    (0..8)
        .map(|i| 10f64.powf(-3.0 + 3.0 * f64::from(i) / 7.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    pub device_label: String,
    pub file_path: PathBuf,
    pub file_size: u64,
    pub per_worker_bytes: u64,
    pub ops: OpSelection,
    pub k_grid: Vec<u32>,
    /// Fraction of each worker's pages reached through a random access.
    pub r_fraction_grid: Vec<f64>,
    pub repetitions: u32,
    pub page_size: u64,
    pub direct_io: bool,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            device_label: "device".into(),
            file_path: PathBuf::from("mqssd-bench.dat"),
            file_size: 50 * GIB,
            per_worker_bytes: 256 * MIB,
            ops: OpSelection::Both,
            k_grid: default_k_grid(),
            r_fraction_grid: default_r_fractions(),
            repetitions: 5,
            page_size: 4096,
            direct_io: true,
            seed: 0x6d_7173_7364,
        }
    }
}

impl WorkloadSpec {
    /// The full grid scaled down to a 256 MiB file and 1 MiB per worker.
    pub fn desk_scale() -> Self {
        WorkloadSpec {
            file_size: 256 * MIB,
            per_worker_bytes: MIB,
            ..WorkloadSpec::default()
        }
    }

    pub fn pages_per_worker(&self) -> u64 {
        self.per_worker_bytes / self.page_size
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.page_size;
        if b == 0 || !b.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "page size {b} must be a positive power of two"
            )));
        }
        if self.per_worker_bytes == 0 || self.per_worker_bytes % b != 0 {
            return Err(Error::InvalidParameter(format!(
                "per-worker bytes {} must be a positive multiple of {b}",
                self.per_worker_bytes
            )));
        }
        if self.file_size == 0 || self.file_size % b != 0 {
            return Err(Error::InvalidParameter(format!(
                "file size {} must be a positive multiple of {b}",
                self.file_size
            )));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::InvalidParameter(
                "k grid must be non-empty with k >= 1".into(),
            ));
        }
        for &k in &self.k_grid {
            if u64::from(k) * self.per_worker_bytes > self.file_size {
                return Err(Error::InvalidParameter(format!(
                    "k={k} workers of {} bytes exceed the {} byte file",
                    self.per_worker_bytes, self.file_size
                )));
            }
        }
        if self.r_fraction_grid.is_empty() {
            return Err(Error::InvalidParameter("r grid must be non-empty".into()));
        }
        if let Some(f) = self
            .r_fraction_grid
            .iter()
            .find(|f| !(**f > 0.0 && **f <= 1.0))
        {
            return Err(Error::InvalidParameter(format!(
                "r fraction {f} outside (0, 1]"
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
        }
        Ok(())
    }

    /// Sorted k values without duplicates.
    pub fn k_values(&self) -> Vec<u32> {
        let mut ks = self.k_grid.clone();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// Distinct random-access counts per worker for the fraction grid, ascending.
    pub fn r_values(&self) -> Vec<u64> {
        let mut rs: Vec<u64> = self
            .r_fraction_grid
            .iter()
            .map(|&f| r_count(f, self.page_size, self.per_worker_bytes))
            .collect();
        rs.sort_unstable();
        rs.dedup();
        rs
    }

    /// Number of trials `run_grid` will execute.
    pub fn trial_count(&self) -> usize {
        self.ops.kinds().len()
            * self.k_values().len()
            * self.r_values().len()
            * self.repetitions as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let spec = WorkloadSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.k_values().len(), 8);
        assert_eq!(spec.r_values().len(), 8);
        // 8 k-values × 8 r-fractions × 5 repetitions, per op.
        assert_eq!(spec.trial_count(), 2 * 8 * 8 * 5);
        let fr = default_r_fractions();
        assert!((fr[0] - 0.001).abs() < 1e-15);
        assert_eq!(fr[7], 1.0);
    }

    #[test]
    fn desk_scale_is_valid() {
        WorkloadSpec::desk_scale().validate().unwrap();
    }

    #[test]
    fn oversubscribed_file_is_rejected() {
        let spec = WorkloadSpec {
            file_size: 64 * MIB,
            per_worker_bytes: MIB,
            ..WorkloadSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn bad_fractions_are_rejected() {
        for f in [0.0, -0.1, 1.5] {
            let spec = WorkloadSpec {
                r_fraction_grid: vec![f],
                ..WorkloadSpec::desk_scale()
            };
            assert!(spec.validate().is_err(), "{f}");
        }
    }

    #[test]
    fn unaligned_sizes_are_rejected() {
        let spec = WorkloadSpec {
            per_worker_bytes: MIB + 1,
            ..WorkloadSpec::desk_scale()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn small_workers_collapse_duplicate_r() {
        let spec = WorkloadSpec {
            per_worker_bytes: 8 * 4096,
            ..WorkloadSpec::desk_scale()
        };
        // 8 pages: everything below 0.2 rounds (or clamps) to r = 1.
        assert_eq!(spec.r_values(), vec![1, 3, 8]);
    }
}
