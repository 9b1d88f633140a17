use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WorkloadSpec;
use crate::error::{Error, Result};
use crate::seed::keyed_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub offset: u64,
    pub len: u64,
}

impl Chunk {
    pub fn end(&self) -> u64 {
        self.offset + self.len
    }
}

/// Per-worker chunk lists, each in issue order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetPlan {
    pub k: u32,
    pub r: u64,
    pub repetition: u32,
    /// Size of each worker's private region of the file.
    pub region_bytes: u64,
    pub workers: Vec<Vec<Chunk>>,
}

/// Places `r` chunks per worker at random page-aligned offsets.
///
/// The file is cut into `k` equal page-aligned regions, one per worker. Chunk
/// lengths are `⌊N_w/r⌋` rounded down to a page, with one chunk absorbing the
/// remainder. Inside a region the chunks are laid out with uniformly random
/// page gaps (sorted uniform draws over the free pages), so chunks never
/// overlap, and are then issued in a random order.
pub fn plan_offsets(spec: &WorkloadSpec, k: u32, r: u64, repetition: u32) -> Result<OffsetPlan> {
    let b = spec.page_size;
    let per_worker = spec.per_worker_bytes;
    if k == 0 {
        return Err(Error::InfeasiblePlan("k must be at least 1".into()));
    }
    if r == 0 {
        return Err(Error::InfeasiblePlan("r must be at least 1".into()));
    }
    if b == 0 || per_worker == 0 || per_worker % b != 0 {
        return Err(Error::InfeasiblePlan(format!(
            "per-worker bytes {per_worker} must be a positive multiple of page size {b}"
        )));
    }
    let pages = per_worker / b;
    if r > pages {
        return Err(Error::InfeasiblePlan(format!(
            "r={r} exceeds the {pages} pages each worker transfers"
        )));
    }
    let region = spec.file_size / u64::from(k) / b * b;
    if region < per_worker {
        return Err(Error::InfeasiblePlan(format!(
            "region of {region} bytes per worker cannot hold {per_worker} bytes (k={k})"
        )));
    }
    let free_pages = (region - per_worker) / b;
    let base_len = (pages / r) * b;
    let last_len = per_worker - (r - 1) * base_len;

    let workers = (0..k)
        .map(|j| {
            let mut rng = keyed_rng(&[spec.seed, u64::from(k), r, u64::from(repetition), u64::from(j)]);
            let mut gaps: Vec<u64> = (0..r).map(|_| rng.random_range(0..=free_pages)).collect();
            gaps.sort_unstable();
            let long_slot = rng.random_range(0..r);

            let region_start = u64::from(j) * region;
            let mut laid = 0u64;
            let mut chunks: Vec<Chunk> = gaps
                .iter()
                .enumerate()
                .map(|(i, &gap)| {
                    let len = if i as u64 == long_slot { last_len } else { base_len };
                    let chunk = Chunk {
                        offset: region_start + gap * b + laid,
                        len,
                    };
                    laid += len;
                    chunk
                })
                .collect();
            chunks.shuffle(&mut rng);
            chunks
        })
        .collect();

    Ok(OffsetPlan {
        k,
        r,
        repetition,
        region_bytes: region,
        workers,
    })
}

impl OffsetPlan {
    pub fn chunk_count(&self) -> usize {
        self.workers.iter().map(Vec::len).sum()
    }

    /// Checks alignment, per-worker accounting, file bounds and that no byte
    /// is assigned twice.
    pub fn validate(&self, page_size: u64, per_worker_bytes: u64, file_size: u64) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasiblePlan(msg));
        if self.workers.len() != self.k as usize {
            return fail(format!(
                "plan has {} workers, expected {}",
                self.workers.len(),
                self.k
            ));
        }
        let mut all = Vec::with_capacity(self.chunk_count());
        for (j, chunks) in self.workers.iter().enumerate() {
            if chunks.len() as u64 != self.r {
                return fail(format!(
                    "worker {j} has {} chunks, expected {}",
                    chunks.len(),
                    self.r
                ));
            }
            let mut total = 0u64;
            for c in chunks {
                if c.offset % page_size != 0 {
                    return fail(format!("worker {j}: offset {} not page aligned", c.offset));
                }
                if c.len == 0 || c.len % page_size != 0 {
                    return fail(format!("worker {j}: length {} not a page multiple", c.len));
                }
                if c.end() > file_size {
                    return fail(format!("worker {j}: chunk ends past the file at {}", c.end()));
                }
                total += c.len;
                all.push((*c, j));
            }
            if total != per_worker_bytes {
                return fail(format!(
                    "worker {j} transfers {total} bytes, expected {per_worker_bytes}"
                ));
            }
        }
        all.sort_unstable_by_key(|(c, _)| c.offset);
        for w in all.windows(2) {
            let ((a, wa), (b, wb)) = (w[0], w[1]);
            if a.end() > b.offset {
                return fail(format!(
                    "chunk {}+{} (worker {wa}) overlaps chunk {}+{} (worker {wb})",
                    a.offset, a.len, b.offset, b.len
                ));
            }
        }
        Ok(())
    }
}
