//! Model calibration from benchmark trials.
//!
//! For every `(op, k)` cell the mean elapsed time of a worker is regressed on
//! the number of random accesses `r`: the slope is the setup cost per random
//! access and the intercept is the time to move the worker's pages
//! sequentially. The per-k costs are then fitted with rational functions of
//! `k` to form the MQSSD profile, while the single-threaded slice feeds the
//! DAM, PDAM and Affine baselines.

mod rational_fit;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use rational_fit::{fit_rational, FitOptions, PointResidual, RationalFit};

use crate::bench::{TrialRecord, TrialStatus};
use crate::error::{Error, Result, SchemaIssue};
use crate::models::{
    AffineCosts, AffineParams, DamParams, DeviceProfile, MqssdProfile, OpKind, PageGeometry,
    PdamParams, Provenance,
};
use crate::rational::{Coefficients, RationalFn};
use crate::stats::{mean, LinearFit};

/// Setup and transfer costs derived for one operation at one concurrency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerKCosts {
    pub op: OpKind,
    pub k: u32,
    /// Microseconds per random access.
    pub setup: f64,
    /// Microseconds per page.
    pub transfer: f64,
    pub r_squared: f64,
    pub sample_count: usize,
    pub distinct_r: usize,
    /// The regression slope was negative and has been clamped to zero.
    pub slope_clamped: bool,
    /// Elapsed times had no variance; `r_squared` is reported as 0.
    pub zero_variance: bool,
}

/// Least-squares setup/transfer costs for trials sharing one `op`, `k` and
/// per-worker byte count. Failed trials are ignored.
pub fn derive_per_k(trials: &[TrialRecord], page_size: u64) -> Result<PerKCosts> {
    let ok: Vec<&TrialRecord> = trials
        .iter()
        .filter(|t| t.status == TrialStatus::Ok)
        .collect();
    let first = *ok
        .first()
        .ok_or_else(|| Error::InsufficientData("no successful trials".into()))?;
    if let Some(t) = ok.iter().find(|t| {
        t.op != first.op || t.k != first.k || t.per_worker_bytes != first.per_worker_bytes
    }) {
        return Err(Error::InconsistentGrid(format!(
            "expected op={} k={} N_w={}, found op={} k={} N_w={}",
            first.op, first.k, first.per_worker_bytes, t.op, t.k, t.per_worker_bytes
        )));
    }

    let mut by_r: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for t in &ok {
        by_r.entry(t.r).or_default().push(t.elapsed_us);
    }
    if by_r.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "op={} k={} has {} distinct r values; need at least 3",
            first.op,
            first.k,
            by_r.len()
        )));
    }
    let xs: Vec<f64> = by_r.keys().map(|&r| r as f64).collect();
    let ys: Vec<f64> = by_r.values().map(|v| mean(v)).collect();
    let fit = LinearFit::ols(&xs, &ys)
        .ok_or_else(|| Error::InsufficientData("regression is underdetermined".into()))?;

    let (setup, intercept, slope_clamped) = if fit.slope < 0.0 {
        log::warn!(
            "op={} k={}: negative setup slope {:.4} clamped to 0",
            first.op,
            first.k,
            fit.slope
        );
        (0.0, mean(&ys), true)
    } else {
        (fit.slope, fit.intercept, false)
    };
    if !(intercept > 0.0) {
        return Err(Error::Degenerate(format!(
            "op={} k={}: sequential transfer time {intercept} is not positive",
            first.op, first.k
        )));
    }
    let transfer = intercept * page_size as f64 / first.per_worker_bytes as f64;

    Ok(PerKCosts {
        op: first.op,
        k: first.k,
        setup,
        transfer,
        r_squared: fit.r_squared,
        sample_count: ok.len(),
        distinct_r: by_r.len(),
        slope_clamped,
        zero_variance: fit.zero_variance,
    })
}

/// One tabulated `(op, k)` cost pair, the input of the rational-fit stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub op: OpKind,
    pub k: u32,
    pub setup: f64,
    pub transfer: f64,
}

impl From<&PerKCosts> for CostPoint {
    fn from(c: &PerKCosts) -> Self {
        CostPoint {
            op: c.op,
            k: c.k,
            setup: c.setup,
            transfer: c.transfer,
        }
    }
}

pub const COST_POINT_CSV_HEADER: [&str; 4] = ["op", "k", "setup", "transfer"];

pub fn write_cost_points_csv<W: Write>(out: W, points: &[CostPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if points.is_empty() {
        w.write_record(COST_POINT_CSV_HEADER)?;
    }
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads tabulated per-k costs; every problem is reported with its line.
pub fn read_cost_points_csv<R: Read>(input: R) -> Result<Vec<CostPoint>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != COST_POINT_CSV_HEADER {
        return Err(Error::Schema(vec![SchemaIssue {
            line: 1,
            message: format!("header must be '{}'", COST_POINT_CSV_HEADER.join(",")),
        }]));
    }
    let headers = reader.headers()?.clone();
    let mut points = Vec::new();
    let mut issues = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match record.deserialize::<CostPoint>(Some(&headers)) {
            Ok(p) if p.k == 0 || !(p.setup >= 0.0) || !(p.transfer > 0.0) => issues.push(SchemaIssue {
                line,
                message: format!("op={} k={}: need k >= 1, setup >= 0, transfer > 0", p.op, p.k),
            }),
            Ok(p) => points.push(p),
            Err(e) => issues.push(SchemaIssue {
                line,
                message: e.to_string(),
            }),
        }
    }
    if issues.is_empty() {
        Ok(points)
    } else {
        Err(Error::Schema(issues))
    }
}

/// Outcome of fitting one of the four cost functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionFit {
    /// `s`, `beta`, `t` or `alpha`.
    pub function: String,
    pub op: OpKind,
    /// Degrees actually fitted; lower than the profile's when the data has
    /// too few concurrency levels.
    pub fitted_degrees: (usize, usize),
    pub coefficients: Coefficients,
    pub residuals: Vec<PointResidual>,
    pub converged: bool,
    pub iterations: usize,
}

impl FunctionFit {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.relative.abs())
            .fold(0.0, f64::max)
    }
}

/// Setup costs of exactly zero cannot be represented by a positive rational
/// function, so they are lifted to this fraction of the transfer cost.
pub const SETUP_FLOOR_RELATIVE: f64 = 1e-12;

/// Fits `s`, `β`, `t` and `α` to tabulated per-k costs and assembles the
/// MQSSD profile.
pub fn fit_cost_functions(
    points: &[CostPoint],
    geometry: PageGeometry,
    opts: &FitOptions,
) -> Result<(MqssdProfile, Vec<FunctionFit>)> {
    let k_max = opts
        .k_max
        .or_else(|| points.iter().map(|p| p.k).max())
        .ok_or_else(|| Error::InsufficientData("no per-k costs to fit".into()))?;
    let opts = FitOptions {
        k_max: Some(k_max),
        ..*opts
    };

    let mut fitted = Vec::with_capacity(4);
    let mut fits = Vec::with_capacity(4);
    for (name, op, setup, degrees) in [
        ("s", OpKind::Write, true, (2, 2)),
        ("beta", OpKind::Write, false, (3, 3)),
        ("t", OpKind::Read, true, (2, 2)),
        ("alpha", OpKind::Read, false, (2, 2)),
    ] {
        let series: Vec<(u32, f64)> = points
            .iter()
            .filter(|p| p.op == op)
            .map(|p| {
                let v = if setup {
                    p.setup.max(SETUP_FLOOR_RELATIVE * p.transfer)
                } else {
                    p.transfer
                };
                (p.k, v)
            })
            .collect();
        if series.is_empty() {
            return Err(Error::InsufficientData(format!("no {op} costs to fit {name}")));
        }
        let (fit, used) = fit_padded(&series, degrees, &opts)?;
        fits.push(FunctionFit {
            function: name.to_string(),
            op,
            fitted_degrees: used,
            coefficients: fit.function.coefficients(),
            residuals: fit.residuals,
            converged: fit.converged,
            iterations: fit.iterations,
        });
        fitted.push(fit.function);
    }
    let alpha = fitted.pop().unwrap();
    let t = fitted.pop().unwrap();
    let beta = fitted.pop().unwrap();
    let s = fitted.pop().unwrap();
    Ok((MqssdProfile::new(s, beta, t, alpha, geometry)?, fits))
}

/// Fits at the highest degrees the number of points supports (never above
/// `degrees`) and zero-pads the result to `degrees`.
fn fit_padded(
    series: &[(u32, f64)],
    degrees: (usize, usize),
    opts: &FitOptions,
) -> Result<(RationalFit, (usize, usize))> {
    let (mut p, mut q) = degrees;
    while p + q + 1 > series.len() {
        if q >= p && q > 0 {
            q -= 1;
        } else {
            p -= 1;
        }
    }
    let mut fit = fit_rational(series, (p, q), opts)?;
    if (p, q) != degrees {
        let mut num = fit.function.numerator().to_vec();
        let mut den = fit.function.denominator().to_vec();
        num.resize(degrees.0 + 1, 0.0);
        den.resize(degrees.1 + 1, 0.0);
        fit.function = RationalFn::new(num, den, fit.function.k_max())?;
    }
    Ok((fit, (p, q)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Overrides the label found in the trial records.
    pub device_label: Option<String>,
    pub page_size: u64,
    /// Memory size `M`; defaults to half the working set.
    pub memory_bytes: Option<u64>,
    /// PDAM `P`, the declared number of parallel channels.
    pub channels: u32,
    /// Constrain fitted cost functions to be non-increasing in `k`.
    pub nonincreasing: bool,
    /// Dataset identifier recorded in the profile provenance.
    pub source: String,
    /// Calibration timestamp; taken from the system clock when `None`.
    pub calibrated_at_unix: Option<u64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            device_label: None,
            page_size: PageGeometry::DEFAULT_PAGE_SIZE,
            memory_bytes: None,
            channels: 8,
            nonincreasing: true,
            source: "unspecified".into(),
            calibrated_at_unix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub per_k: Vec<PerKCosts>,
    pub fits: Vec<FunctionFit>,
    pub converged: bool,
    pub iterations: usize,
}

impl CalibrationReport {
    pub fn per_k_for(&self, op: OpKind, k: u32) -> Option<&PerKCosts> {
        self.per_k.iter().find(|c| c.op == op && c.k == k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub profile: DeviceProfile,
    pub report: CalibrationReport,
}

/// Calibrates all four models from a full trial grid.
pub fn calibrate_profile(trials: &[TrialRecord], config: &CalibrationConfig) -> Result<Calibration> {
    let ok: Vec<&TrialRecord> = trials
        .iter()
        .filter(|t| t.status == TrialStatus::Ok)
        .collect();
    let first = *ok
        .first()
        .ok_or_else(|| Error::InsufficientData("dataset has no successful trials".into()))?;
    let per_worker = first.per_worker_bytes;
    if let Some(t) = ok.iter().find(|t| t.per_worker_bytes != per_worker) {
        return Err(Error::InconsistentGrid(format!(
            "mixed per-worker byte counts {} and {}",
            per_worker, t.per_worker_bytes
        )));
    }
    let page_size = config.page_size;
    let memory = config
        .memory_bytes
        .unwrap_or_else(|| (per_worker / 2 / page_size * page_size).max(page_size));
    let geometry = PageGeometry::new(page_size, per_worker, memory)?;

    let mut cells: BTreeMap<(OpKind, u32), Vec<TrialRecord>> = BTreeMap::new();
    for t in &ok {
        cells.entry((t.op, t.k)).or_default().push((*t).clone());
    }
    for op in OpKind::ALL {
        if !cells.contains_key(&(op, 1)) {
            return Err(Error::InsufficientData(format!(
                "dataset has no k=1 {op} trials; the single-threaded slice is required"
            )));
        }
    }

    let per_k = cells
        .values()
        .map(|cell| derive_per_k(cell, page_size))
        .collect::<Result<Vec<_>>>()?;

    let pages = per_worker as f64 / page_size as f64;
    let mean_page_time = |op: OpKind| -> f64 {
        let per_page: Vec<f64> = cells[&(op, 1)].iter().map(|t| t.elapsed_us / pages).collect();
        mean(&per_page)
    };
    let (read_page, write_page) = (mean_page_time(OpKind::Read), mean_page_time(OpKind::Write));
    let dam = DamParams::new(read_page, write_page)?;
    let pdam = PdamParams::new(read_page, write_page, config.channels)?;

    let single = |op: OpKind| -> Result<AffineCosts> {
        let c = per_k
            .iter()
            .find(|c| c.op == op && c.k == 1)
            .expect("k=1 cell checked above");
        AffineCosts::new(c.setup, c.transfer)
    };
    let affine = AffineParams::new(single(OpKind::Read)?, single(OpKind::Write)?)?;

    let points: Vec<CostPoint> = per_k.iter().map(CostPoint::from).collect();
    let fit_opts = FitOptions {
        nonincreasing: config.nonincreasing,
        ..FitOptions::default()
    };
    let (mqssd, fits) = fit_cost_functions(&points, geometry, &fit_opts)?;

    let device_label = config
        .device_label
        .clone()
        .unwrap_or_else(|| first.device_label.clone());
    let profile = DeviceProfile {
        device_label,
        dam,
        pdam,
        affine,
        mqssd,
        provenance: Provenance {
            source: config.source.clone(),
            calibrated_at_unix: config.calibrated_at_unix.unwrap_or_else(now_unix),
        },
    };
    let report = CalibrationReport {
        converged: fits.iter().all(|f| f.converged),
        iterations: fits.iter().map(|f| f.iterations).sum(),
        per_k,
        fits,
    };
    Ok(Calibration { profile, report })
}

/// Builds a full profile from tabulated per-k costs when the raw trials are
/// not available. Affine takes the k=1 costs; DAM and PDAM take the mean
/// per-page time those costs imply over `r_fractions`, `β + s·mean(f)`,
/// which is what the trial-based path measures at k=1.
pub fn calibrate_from_cost_points(
    points: &[CostPoint],
    per_worker_bytes: u64,
    r_fractions: &[f64],
    config: &CalibrationConfig,
) -> Result<Calibration> {
    let page_size = config.page_size;
    let memory = config
        .memory_bytes
        .unwrap_or_else(|| (per_worker_bytes / 2 / page_size * page_size).max(page_size));
    let geometry = PageGeometry::new(page_size, per_worker_bytes, memory)?;
    if r_fractions.is_empty() || r_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::InvalidParameter("r fractions must lie in (0, 1]".into()));
    }
    let single = |op: OpKind| -> Result<AffineCosts> {
        let p = points.iter().find(|p| p.op == op && p.k == 1).ok_or_else(|| {
            Error::InsufficientData(format!("no k=1 {op} row; the single-threaded slice is required"))
        })?;
        AffineCosts::new(p.setup, p.transfer)
    };
    let (read, write) = (single(OpKind::Read)?, single(OpKind::Write)?);
    let mean_f = mean(r_fractions);
    let page_time = |c: AffineCosts| c.beta + c.s * mean_f;
    let dam = DamParams::new(page_time(read), page_time(write))?;
    let pdam = PdamParams::new(page_time(read), page_time(write), config.channels)?;
    let affine = AffineParams::new(read, write)?;

    let fit_opts = FitOptions {
        nonincreasing: config.nonincreasing,
        ..FitOptions::default()
    };
    let (mqssd, fits) = fit_cost_functions(points, geometry, &fit_opts)?;
    let profile = DeviceProfile {
        device_label: config.device_label.clone().unwrap_or_else(|| "unlabeled".into()),
        dam,
        pdam,
        affine,
        mqssd,
        provenance: Provenance {
            source: config.source.clone(),
            calibrated_at_unix: config.calibrated_at_unix.unwrap_or_else(now_unix),
        },
    };
    let report = CalibrationReport {
        converged: fits.iter().all(|f| f.converged),
        iterations: fits.iter().map(|f| f.iterations).sum(),
        per_k: Vec::new(),
        fits,
    };
    Ok(Calibration { profile, report })
}

#[cfg(not(target_arch = "wasm32"))]
fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(target_arch = "wasm32")]
fn now_unix() -> u64 {
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(op: OpKind, k: u32, r: u64, per_worker: u64, elapsed: f64) -> TrialRecord {
        TrialRecord::completed("t", op, k, r, per_worker, 4096, elapsed, 0, 1)
    }

    fn cell(points: &[(u64, f64)], per_worker: u64) -> Vec<TrialRecord> {
        points
            .iter()
            .map(|&(r, t)| trial(OpKind::Write, 4, r, per_worker, t))
            .collect()
    }

    #[test]
    fn collinear_cell() {
        let c = derive_per_k(&cell(&[(0, 100.0), (10, 200.0), (20, 300.0)], 50 * 4096), 4096)
            .unwrap();
        assert!((c.setup - 10.0).abs() < 1e-12);
        assert!((c.transfer - 2.0).abs() < 1e-12);
        assert!((c.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_three_point_cell() {
        // Closed-form OLS (cross-checked with numpy.polyfit): slope 9.5,
        // intercept 105, R² = 1 − 150/18200.
        let c = derive_per_k(&cell(&[(0, 100.0), (10, 210.0), (20, 290.0)], 50 * 4096), 4096)
            .unwrap();
        assert!((c.setup - 9.5).abs() < 1e-12);
        assert!((c.transfer - 105.0 / 50.0).abs() < 1e-12);
        assert!((c.r_squared - 0.991_758_241_758_241_8).abs() < 1e-12);
    }

    #[test]
    fn flat_cell_has_zero_setup() {
        let c = derive_per_k(&cell(&[(1, 400.0), (5, 400.0), (9, 400.0)], 100 * 4096), 4096)
            .unwrap();
        assert_eq!(c.setup, 0.0);
        assert_eq!(c.transfer, 4.0);
        assert_eq!(c.r_squared, 0.0);
        assert!(c.zero_variance);
    }

    #[test]
    fn negative_slope_is_clamped() {
        let c = derive_per_k(&cell(&[(1, 400.0), (5, 390.0), (9, 380.0)], 100 * 4096), 4096)
            .unwrap();
        assert!(c.slope_clamped);
        assert_eq!(c.setup, 0.0);
        assert!((c.transfer - 3.9).abs() < 1e-12);
    }

    #[test]
    fn repetitions_are_averaged() {
        let per_worker = 10 * 4096;
        let trials: Vec<_> = [(1, 11.0), (1, 13.0), (2, 14.0), (3, 16.0), (3, 16.0)]
            .iter()
            .map(|&(r, t)| trial(OpKind::Read, 2, r, per_worker, t))
            .collect();
        let c = derive_per_k(&trials, 4096).unwrap();
        assert!((c.setup - 2.0).abs() < 1e-12);
        assert!((c.transfer - 1.0).abs() < 1e-12);
        assert_eq!(c.sample_count, 5);
        assert_eq!(c.distinct_r, 3);
    }

    #[test]
    fn needs_three_distinct_r() {
        let trials = cell(&[(1, 10.0), (1, 11.0), (2, 12.0)], 4096 * 8);
        assert!(matches!(derive_per_k(&trials, 4096), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn mixed_k_is_rejected() {
        let mut trials = cell(&[(1, 10.0), (2, 11.0), (3, 12.0)], 4096 * 8);
        trials[1].k = 8;
        assert!(matches!(derive_per_k(&trials, 4096), Err(Error::InconsistentGrid(_))));
    }

    #[test]
    fn non_positive_intercept_is_an_error() {
        let trials = cell(&[(10, 5.0), (20, 15.0), (30, 25.0)], 4096 * 8);
        assert!(matches!(derive_per_k(&trials, 4096), Err(Error::Degenerate(_))));
    }

    #[test]
    fn failed_trials_are_ignored() {
        let mut trials = cell(&[(0, 100.0), (10, 200.0), (20, 300.0)], 50 * 4096);
        let mut failed = trial(OpKind::Write, 4, 5, 50 * 4096, 1.0);
        failed.status = TrialStatus::Failed;
        trials.push(failed);
        let c = derive_per_k(&trials, 4096).unwrap();
        assert!((c.setup - 10.0).abs() < 1e-12);
        assert_eq!(c.sample_count, 3);
    }

    #[test]
    fn padded_fit_for_short_grids() {
        let (fit, used) = fit_padded(&[(1, 4.0), (2, 3.0)], (3, 3), &FitOptions::default()).unwrap();
        assert_eq!(used, (1, 0));
        assert_eq!(fit.function.degrees(), (3, 3));
    }
}
