use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Barrier;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{plan_offsets, OffsetPlan, TrialRecord, WorkloadSpec, MIB};
use crate::error::{Error, Result};
use crate::models::OpKind;
use crate::seed::stream_key;

/// Coordinates of one trial within a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialContext {
    pub op: OpKind,
    pub k: u32,
    pub r: u64,
    pub repetition: u32,
}

/// Something that can execute a planned trial and report its elapsed time.
pub trait IoBackend: Sync {
    fn name(&self) -> String;

    /// Whether OS cache bypass is actually in effect.
    fn direct_io(&self) -> bool;

    /// Size of the individual transfers issued inside a chunk, if any.
    fn unit_transfer_bytes(&self) -> Option<u64>;

    /// Runs the plan and returns microseconds from the start barrier to the
    /// completion of the last worker.
    fn execute(&self, spec: &WorkloadSpec, ctx: &TrialContext, plan: &OffsetPlan) -> Result<f64>;
}

/// Synchronous positional I/O against a regular file or block device.
#[derive(Debug, Clone)]
pub struct FileBackend {
    path: PathBuf,
    direct_io: bool,
    buffer_bytes: u64,
}

impl FileBackend {
    pub const DEFAULT_BUFFER: u64 = MIB;

    /// Opens the benchmark target, falling back to buffered I/O when the
    /// filesystem refuses `O_DIRECT`.
    pub fn open(spec: &WorkloadSpec) -> Result<Self> {
        let len = std::fs::metadata(&spec.file_path)?.len();
        if len < spec.file_size {
            return Err(Error::InvalidParameter(format!(
                "{} is {len} bytes, smaller than the {} byte workload file",
                spec.file_path.display(),
                spec.file_size
            )));
        }
        let direct_io = spec.direct_io && open_target(&spec.file_path, true, false).is_ok();
        if spec.direct_io && !direct_io {
            log::warn!(
                "direct I/O unavailable for {}; using buffered I/O",
                spec.file_path.display()
            );
        }
        let buffer_bytes = Self::DEFAULT_BUFFER.max(spec.page_size) / spec.page_size * spec.page_size;
        Ok(FileBackend {
            path: spec.file_path.clone(),
            direct_io,
            buffer_bytes,
        })
    }

    pub fn with_buffer_bytes(mut self, bytes: u64) -> Self {
        self.buffer_bytes = bytes;
        self
    }
}

fn open_target(path: &Path, direct: bool, write: bool) -> std::io::Result<File> {
    let mut opts = OpenOptions::new();
    opts.read(true).write(write);
    #[cfg(target_os = "linux")]
    if direct {
        use std::os::unix::fs::OpenOptionsExt;
        opts.custom_flags(libc::O_DIRECT);
    }
    #[cfg(not(target_os = "linux"))]
    if direct {
        return Err(std::io::Error::new(
            std::io::ErrorKind::Unsupported,
            "direct I/O is only wired up on Linux",
        ));
    }
    opts.open(path)
}

/// A buffer whose usable slice starts on an `align`-byte boundary.
struct AlignedBuf {
    storage: Vec<u8>,
    start: usize,
    len: usize,
}

impl AlignedBuf {
    fn new(len: usize, align: usize, fill: u64) -> Self {
        let mut storage = vec![0u8; len + align];
        let start = storage.as_ptr().align_offset(align);
        let mut x = fill | 1;
        for b in &mut storage[start..start + len] {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            *b = x as u8;
        }
        AlignedBuf {
            storage,
            start,
            len,
        }
    }

    fn slice_mut(&mut self, n: usize) -> &mut [u8] {
        &mut self.storage[self.start..self.start + n.min(self.len)]
    }
}

#[cfg(unix)]
fn transfer_at(file: &File, op: OpKind, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
    use std::os::unix::fs::FileExt;
    match op {
        OpKind::Read => file.read_exact_at(buf, offset),
        OpKind::Write => file.write_all_at(buf, offset),
    }
}

#[cfg(not(unix))]
fn transfer_at(_file: &File, _op: OpKind, _buf: &mut [u8], _offset: u64) -> std::io::Result<()> {
    Err(std::io::Error::new(
        std::io::ErrorKind::Unsupported,
        "positional file I/O requires a unix target",
    ))
}

impl IoBackend for FileBackend {
    fn name(&self) -> String {
        format!("file:{}", self.path.display())
    }

    fn direct_io(&self) -> bool {
        self.direct_io
    }

    fn unit_transfer_bytes(&self) -> Option<u64> {
        Some(self.buffer_bytes)
    }

    fn execute(&self, spec: &WorkloadSpec, ctx: &TrialContext, plan: &OffsetPlan) -> Result<f64> {
        let write = ctx.op == OpKind::Write;
        let files = plan
            .workers
            .iter()
            .map(|_| open_target(&self.path, self.direct_io, write))
            .collect::<std::io::Result<Vec<File>>>()?;
        let barrier = Barrier::new(plan.workers.len() + 1);
        let align = spec.page_size as usize;

        let results = std::thread::scope(|scope| {
            let handles: Vec<_> = plan
                .workers
                .iter()
                .zip(&files)
                .enumerate()
                .map(|(j, (chunks, file))| {
                    let barrier = &barrier;
                    let buffer_bytes = self.buffer_bytes;
                    let direct = self.direct_io;
                    scope.spawn(move || -> std::io::Result<(Instant, Instant)> {
                        let mut buf = AlignedBuf::new(buffer_bytes as usize, align, j as u64 + 1);
                        barrier.wait();
                        let started = Instant::now();
                        for chunk in chunks {
                            let mut done = 0;
                            while done < chunk.len {
                                let n = (chunk.len - done).min(buffer_bytes);
                                transfer_at(file, ctx.op, buf.slice_mut(n as usize), chunk.offset + done)?;
                                done += n;
                            }
                        }
                        if write && !direct {
                            file.sync_data()?;
                        }
                        Ok((started, Instant::now()))
                    })
                })
                .collect();
            barrier.wait();
            handles
                .into_iter()
                .map(|h| h.join().expect("benchmark worker panicked"))
                .collect::<Vec<_>>()
        });

        // Span from the first worker leaving the barrier to the last one
        // finishing.
        let mut span: Option<(Instant, Instant)> = None;
        for r in results {
            let (a, b) = r?;
            span = Some(span.map_or((a, b), |(s, e)| (s.min(a), e.max(b))));
        }
        let (start, end) = span.ok_or_else(|| Error::InfeasiblePlan("plan has no workers".into()))?;
        Ok((end - start).as_secs_f64() * 1e6)
    }
}

/// Runs one grid cell: plans offsets, then executes them.
pub fn run_trial(
    spec: &WorkloadSpec,
    backend: &dyn IoBackend,
    op: OpKind,
    k: u32,
    r: u64,
    repetition: u32,
) -> Result<TrialRecord> {
    let plan = plan_offsets(spec, k, r, repetition)?;
    let ctx = TrialContext {
        op,
        k,
        r,
        repetition,
    };
    run_planned_trial(spec, backend, &ctx, &plan)
}

/// Executes a supplied plan after checking it; overlapping or misaligned
/// plans are refused before any I/O is issued.
pub fn run_planned_trial(
    spec: &WorkloadSpec,
    backend: &dyn IoBackend,
    ctx: &TrialContext,
    plan: &OffsetPlan,
) -> Result<TrialRecord> {
    if plan.k != ctx.k || plan.r != ctx.r {
        return Err(Error::InfeasiblePlan(format!(
            "plan is for k={} r={}, trial is k={} r={}",
            plan.k, plan.r, ctx.k, ctx.r
        )));
    }
    plan.validate(spec.page_size, spec.per_worker_bytes, spec.file_size)?;
    let elapsed = backend.execute(spec, ctx, plan)?;
    if !(elapsed > 0.0 && elapsed.is_finite()) {
        return Err(Error::Degenerate(format!("measured elapsed time {elapsed} μs")));
    }
    Ok(TrialRecord::completed(
        &spec.device_label,
        ctx.op,
        ctx.k,
        ctx.r,
        spec.per_worker_bytes,
        spec.page_size,
        elapsed,
        ctx.repetition,
        spec.seed,
    ))
}

/// Description of how a grid was produced, written next to the trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub device_label: String,
    pub backend: String,
    pub direct_io: bool,
    pub unit_transfer_bytes: Option<u64>,
    pub precondition_id: Option<String>,
    /// `(k, bytes)`: size of each worker's region, for judging cache reuse.
    pub region_bytes: Vec<(u32, u64)>,
    pub trials_total: usize,
    pub trials_failed: usize,
    pub spec: WorkloadSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    /// Every trial in execution order, failed ones included.
    pub records: Vec<TrialRecord>,
    pub provenance: RunProvenance,
}

impl GridOutcome {
    pub fn successful(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records
            .iter()
            .filter(|r| r.status == super::TrialStatus::Ok)
    }
}

/// Runs every `(op, k, r, repetition)` cell in that nesting order, handing
/// each record to `sink` as soon as it exists. Failed trials are recorded and
/// skipped; the grid aborts once more than 10% of its trials have failed.
pub fn run_grid(
    spec: &WorkloadSpec,
    backend: &dyn IoBackend,
    precondition: Option<&PreconditionRecord>,
    mut sink: impl FnMut(&TrialRecord) -> Result<()>,
) -> Result<GridOutcome> {
    spec.validate()?;
    let total = spec.trial_count();
    let ks = spec.k_values();
    let rs = spec.r_values();
    let mut records = Vec::with_capacity(total);
    let mut failed = 0usize;

    for op in spec.ops.kinds() {
        for &k in &ks {
            for &r in &rs {
                for rep in 0..spec.repetitions {
                    let record = match run_trial(spec, backend, op, k, r, rep) {
                        Ok(rec) => rec,
                        Err(e) => {
                            log::warn!("trial op={op} k={k} r={r} rep={rep} failed: {e}");
                            failed += 1;
                            TrialRecord::failed(
                                &spec.device_label,
                                op,
                                k,
                                r,
                                spec.per_worker_bytes,
                                spec.page_size,
                                rep,
                                spec.seed,
                            )
                        }
                    };
                    sink(&record)?;
                    records.push(record);
                    if failed * 10 > total {
                        return Err(Error::GridAborted { failed, total });
                    }
                }
            }
        }
    }

    let provenance = RunProvenance {
        device_label: spec.device_label.clone(),
        backend: backend.name(),
        direct_io: backend.direct_io(),
        unit_transfer_bytes: backend.unit_transfer_bytes(),
        precondition_id: precondition.filter(|p| !p.skipped).map(|p| p.id.clone()),
        region_bytes: ks
            .iter()
            .map(|&k| (k, spec.file_size / u64::from(k) / spec.page_size * spec.page_size))
            .collect(),
        trials_total: total,
        trials_failed: failed,
        spec: spec.clone(),
    };
    Ok(GridOutcome {
        records,
        provenance,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreconditionRecord {
    pub id: String,
    pub skipped: bool,
    pub bytes_requested: u64,
    pub bytes_written: u64,
    /// Complete sequential passes over the file.
    pub full_passes: u64,
    pub duration_us: u64,
}

/// Creates (or extends) the benchmark file to `size` bytes.
pub fn prepare_file(path: &Path, size: u64) -> Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .read(true)
        .write(true)
        .open(path)?;
    if file.metadata()?.len() < size {
        file.set_len(size)?;
    }
    Ok(())
}

/// Writes `bytes_to_write` bytes in `N_w`-sized sequential writes that wrap
/// around the file, bringing the device towards steady state.
pub fn precondition(path: &Path, bytes_to_write: u64, spec: &WorkloadSpec) -> Result<PreconditionRecord> {
    let id = format!(
        "pre-{:016x}",
        stream_key(&[spec.seed, bytes_to_write, spec.file_size, spec.per_worker_bytes])
    );
    if bytes_to_write == 0 {
        return Ok(PreconditionRecord {
            id,
            skipped: true,
            bytes_requested: 0,
            bytes_written: 0,
            full_passes: 0,
            duration_us: 0,
        });
    }
    if spec.file_size == 0 || spec.file_size % spec.page_size != 0 {
        return Err(Error::InvalidParameter(
            "file size must be a positive page multiple".into(),
        ));
    }
    // Whole pages only, so every write stays aligned.
    let bytes_to_write = bytes_to_write.div_ceil(spec.page_size) * spec.page_size;
    let direct = spec.direct_io && open_target(path, true, true).is_ok();
    let file = open_target(path, direct, true)?;
    let step = (spec.per_worker_bytes / spec.page_size * spec.page_size).max(spec.page_size);
    let unit = FileBackend::DEFAULT_BUFFER.min(step) / spec.page_size * spec.page_size;
    let mut buf = AlignedBuf::new(unit as usize, spec.page_size as usize, spec.seed);

    let start = Instant::now();
    let mut written = 0u64;
    let mut offset = 0u64;
    while written < bytes_to_write {
        let n = (bytes_to_write - written)
            .min(step)
            .min(spec.file_size - offset);
        let mut done = 0;
        while done < n {
            let m = (n - done).min(unit);
            transfer_at(&file, OpKind::Write, buf.slice_mut(m as usize), offset + done)?;
            done += m;
        }
        written += n;
        offset = (offset + n) % spec.file_size;
    }
    if !direct {
        file.sync_data()?;
    }
    Ok(PreconditionRecord {
        id,
        skipped: false,
        bytes_requested: bytes_to_write,
        bytes_written: written,
        full_passes: written / spec.file_size,
        duration_us: start.elapsed().as_micros() as u64,
    })
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::bench::{TrialStatus, KIB};

    fn scratch_spec(dir: &Path) -> WorkloadSpec {
        WorkloadSpec {
            device_label: "scratch".into(),
            file_path: dir.join("bench.dat"),
            file_size: 4 * MIB,
            per_worker_bytes: 256 * KIB,
            ops: crate::bench::OpSelection::Both,
            k_grid: vec![1, 2, 4],
            r_fraction_grid: vec![0.02, 0.5, 1.0],
            repetitions: 1,
            page_size: 4096,
            direct_io: true,
            seed: 11,
        }
    }

    #[test]
    fn real_file_grid_is_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let spec = scratch_spec(dir.path());
        prepare_file(&spec.file_path, spec.file_size).unwrap();
        let backend = FileBackend::open(&spec).unwrap();
        let mut streamed = 0;
        let out = run_grid(&spec, &backend, None, |_| {
            streamed += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(streamed, spec.trial_count());
        assert_eq!(out.records.len(), 2 * 3 * 3);
        for rec in &out.records {
            assert_eq!(rec.status, TrialStatus::Ok);
            let moved = rec.throughput * rec.elapsed_us;
            assert!((moved - rec.total_bytes()).abs() <= 1e-9 * rec.total_bytes());
        }
        // op, then k, then r ascending.
        let order: Vec<(OpKind, u32, u64)> = out.records.iter().map(|r| (r.op, r.k, r.r)).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
    }

    #[test]
    fn precondition_passes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = scratch_spec(dir.path());
        prepare_file(&spec.file_path, spec.file_size).unwrap();
        let skipped = precondition(&spec.file_path, 0, &spec).unwrap();
        assert!(skipped.skipped);
        assert_eq!(skipped.bytes_written, 0);

        let rec = precondition(&spec.file_path, 2 * spec.file_size, &spec).unwrap();
        assert!(!rec.skipped);
        assert_eq!(rec.full_passes, 2);
        assert_eq!(rec.bytes_written, 2 * spec.file_size);
    }

    #[test]
    fn grid_provenance_links_precondition() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = scratch_spec(dir.path());
        spec.ops = crate::bench::OpSelection::Write;
        spec.k_grid = vec![1];
        prepare_file(&spec.file_path, spec.file_size).unwrap();
        let pre = precondition(&spec.file_path, spec.file_size, &spec).unwrap();
        let backend = FileBackend::open(&spec).unwrap();
        let out = run_grid(&spec, &backend, Some(&pre), |_| Ok(())).unwrap();
        assert_eq!(out.provenance.precondition_id.as_deref(), Some(pre.id.as_str()));
    }

    #[test]
    fn short_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = scratch_spec(dir.path());
        prepare_file(&spec.file_path, MIB).unwrap();
        assert!(FileBackend::open(&spec).is_err());
    }
}
