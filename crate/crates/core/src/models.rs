//! The DAM, PDAM, Affine and MQSSD throughput models.
//!
//! All predictors return aggregate device throughput in bytes per
//! microsecond. The Affine and MQSSD models are evaluated through elapsed
//! time: each of `k` workers moves `N_w` bytes with `r` random accesses, so a
//! worker takes `r·setup + (N_w/B)·transfer` microseconds and the device
//! delivers `k·N_w` bytes in that time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{Coefficients, RationalFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Read,
    Write,
}

impl OpKind {
    pub const ALL: [OpKind; 2] = [OpKind::Read, OpKind::Write];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Read => "read",
            OpKind::Write => "write",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "read" | "r" => Ok(OpKind::Read),
            "write" | "w" => Ok(OpKind::Write),
            other => Err(Error::InvalidParameter(format!("unknown op '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dam,
    Pdam,
    Affine,
    Mqssd,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Dam,
        ModelKind::Pdam,
        ModelKind::Affine,
        ModelKind::Mqssd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dam => "dam",
            ModelKind::Pdam => "pdam",
            ModelKind::Affine => "affine",
            ModelKind::Mqssd => "mqssd",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dam" => Ok(ModelKind::Dam),
            "pdam" => Ok(ModelKind::Pdam),
            "affine" => Ok(ModelKind::Affine),
            "mqssd" => Ok(ModelKind::Mqssd),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

/// Page size `B`, working set `N` and memory `M`, all in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct PageGeometry {
    page_size: u64,
    working_set: u64,
    memory: u64,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    #[serde(rename = "B")]
    page_size: u64,
    #[serde(rename = "N")]
    working_set: u64,
    #[serde(rename = "M")]
    memory: u64,
}

impl TryFrom<RawGeometry> for PageGeometry {
    type Error = Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        PageGeometry::new(raw.page_size, raw.working_set, raw.memory)
    }
}

impl From<PageGeometry> for RawGeometry {
    fn from(g: PageGeometry) -> Self {
        RawGeometry {
            page_size: g.page_size,
            working_set: g.working_set,
            memory: g.memory,
        }
    }
}

impl PageGeometry {
    pub const DEFAULT_PAGE_SIZE: u64 = 4096;

    pub fn new(page_size: u64, working_set: u64, memory: u64) -> Result<Self> {
        if page_size == 0 || !page_size.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "page size {page_size} must be a positive power of two"
            )));
        }
        if !(page_size <= memory && memory < working_set) {
            return Err(Error::InvalidParameter(format!(
                "geometry requires B <= M < N, got B={page_size} M={memory} N={working_set}"
            )));
        }
        Ok(PageGeometry {
            page_size,
            working_set,
            memory,
        })
    }

    pub fn page_size(&self) -> u64 {
        self.page_size
    }

    pub fn working_set(&self) -> u64 {
        self.working_set
    }

    pub fn memory(&self) -> u64 {
        self.memory
    }

    fn b(&self) -> f64 {
        self.page_size as f64
    }
}

/// DAM page cost in microseconds per page transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDam", into = "RawDam")]
pub struct DamParams {
    read: f64,
    write: f64,
}

#[derive(Serialize, Deserialize)]
struct RawDam {
    read: f64,
    write: f64,
}

impl TryFrom<RawDam> for DamParams {
    type Error = Error;
    fn try_from(raw: RawDam) -> Result<Self> {
        DamParams::new(raw.read, raw.write)
    }
}

impl From<DamParams> for RawDam {
    fn from(p: DamParams) -> Self {
        RawDam {
            read: p.read,
            write: p.write,
        }
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl DamParams {
    pub fn new(read: f64, write: f64) -> Result<Self> {
        require_positive("DAM read page_cost", read)?;
        require_positive("DAM write page_cost", write)?;
        Ok(DamParams { read, write })
    }

    pub fn page_cost(&self, op: OpKind) -> f64 {
        match op {
            OpKind::Read => self.read,
            OpKind::Write => self.write,
        }
    }

    /// `B / page_cost`, independent of `r` and `k`.
    pub fn throughput(&self, op: OpKind, geometry: &PageGeometry) -> f64 {
        geometry.b() / self.page_cost(op)
    }
}

/// PDAM cycle cost in microseconds and the number of pages `P` moved per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPdam", into = "RawPdam")]
pub struct PdamParams {
    read: f64,
    write: f64,
    parallelism: u32,
}

#[derive(Serialize, Deserialize)]
struct RawPdam {
    read: f64,
    write: f64,
    #[serde(rename = "P")]
    parallelism: u32,
}

impl TryFrom<RawPdam> for PdamParams {
    type Error = Error;
    fn try_from(raw: RawPdam) -> Result<Self> {
        PdamParams::new(raw.read, raw.write, raw.parallelism)
    }
}

impl From<PdamParams> for RawPdam {
    fn from(p: PdamParams) -> Self {
        RawPdam {
            read: p.read,
            write: p.write,
            parallelism: p.parallelism,
        }
    }
}

impl PdamParams {
    pub fn new(read: f64, write: f64, parallelism: u32) -> Result<Self> {
        require_positive("PDAM read cycle_cost", read)?;
        require_positive("PDAM write cycle_cost", write)?;
        if parallelism == 0 {
            return Err(Error::InvalidParameter("PDAM P must be at least 1".into()));
        }
        Ok(PdamParams {
            read,
            write,
            parallelism,
        })
    }

    pub fn cycle_cost(&self, op: OpKind) -> f64 {
        match op {
            OpKind::Read => self.read,
            OpKind::Write => self.write,
        }
    }

    pub fn parallelism(&self) -> u32 {
        self.parallelism
    }

    fn effective_k(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(f64::from(k.min(self.parallelism)))
    }

    /// Per-page cost when `k` pages are requested per cycle.
    pub fn page_cost(&self, op: OpKind, k: u32) -> Result<f64> {
        Ok(self.cycle_cost(op) / self.effective_k(k)?)
    }

    /// `B·min(k, P) / cycle_cost`, independent of `r`.
    pub fn throughput(&self, op: OpKind, geometry: &PageGeometry, k: u32) -> Result<f64> {
        Ok(geometry.b() * self.effective_k(k)? / self.cycle_cost(op))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCosts {
    /// Setup cost per random access, microseconds.
    pub s: f64,
    /// Transfer cost per page, microseconds.
    pub beta: f64,
}

impl AffineCosts {
    pub fn new(s: f64, beta: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Affine setup cost must be >= 0, got {s}"
            )));
        }
        require_positive("Affine transfer cost", beta)?;
        Ok(AffineCosts { s, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAffine", into = "RawAffine")]
pub struct AffineParams {
    read: AffineCosts,
    write: AffineCosts,
}

#[derive(Serialize, Deserialize)]
struct RawAffine {
    read: AffineCosts,
    write: AffineCosts,
}

impl TryFrom<RawAffine> for AffineParams {
    type Error = Error;
    fn try_from(raw: RawAffine) -> Result<Self> {
        AffineParams::new(raw.read, raw.write)
    }
}

impl From<AffineParams> for RawAffine {
    fn from(p: AffineParams) -> Self {
        RawAffine {
            read: p.read,
            write: p.write,
        }
    }
}

impl AffineParams {
    pub fn new(read: AffineCosts, write: AffineCosts) -> Result<Self> {
        AffineCosts::new(read.s, read.beta)?;
        AffineCosts::new(write.s, write.beta)?;
        Ok(AffineParams { read, write })
    }

    pub fn costs(&self, op: OpKind) -> AffineCosts {
        match op {
            OpKind::Read => self.read,
            OpKind::Write => self.write,
        }
    }

    /// Elapsed microseconds for one worker moving `per_worker_bytes` with `r`
    /// random accesses. Does not depend on `k`.
    pub fn worker_elapsed(
        &self,
        op: OpKind,
        geometry: &PageGeometry,
        r: u64,
        per_worker_bytes: u64,
    ) -> Result<f64> {
        let pages = pages_per_worker(geometry, per_worker_bytes)?;
        let c = self.costs(op);
        Ok(r as f64 * c.s + pages * c.beta)
    }

    pub fn throughput(
        &self,
        op: OpKind,
        geometry: &PageGeometry,
        r: u64,
        k: u32,
        per_worker_bytes: u64,
    ) -> Result<f64> {
        check_k(k)?;
        let elapsed = self.worker_elapsed(op, geometry, r, per_worker_bytes)?;
        Ok(f64::from(k) * per_worker_bytes as f64 / elapsed)
    }

    /// Throughput with `r` given as the fraction of pages accessed randomly.
    pub fn throughput_at_fraction(
        &self,
        op: OpKind,
        geometry: &PageGeometry,
        r_fraction: f64,
        k: u32,
    ) -> Result<f64> {
        check_k(k)?;
        check_fraction(r_fraction)?;
        let c = self.costs(op);
        Ok(f64::from(k) * geometry.b() / (r_fraction * c.s + c.beta))
    }
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidParameter("k must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "random-access fraction {f} outside [0, 1]"
        )))
    }
}

fn pages_per_worker(geometry: &PageGeometry, per_worker_bytes: u64) -> Result<f64> {
    if per_worker_bytes < geometry.page_size {
        return Err(Error::Degenerate(format!(
            "per-worker bytes {per_worker_bytes} smaller than page size {}",
            geometry.page_size
        )));
    }
    Ok(per_worker_bytes as f64 / geometry.b())
}

/// Random-access fraction `r·B/N_w` for `r` accesses per worker.
pub fn r_fraction(r: u64, page_size: u64, per_worker_bytes: u64) -> f64 {
    r as f64 * page_size as f64 / per_worker_bytes as f64
}

/// Number of random accesses per worker for a fraction of pages, rounded to
/// the nearest count and clamped to `[1, N_w/B]`.
pub fn r_count(r_fraction: f64, page_size: u64, per_worker_bytes: u64) -> u64 {
    let pages = per_worker_bytes / page_size;
    let r = (r_fraction * pages as f64).round() as u64;
    r.clamp(1, pages.max(1))
}

/// Concurrency-dependent costs: `s`/`β` for writes and `t`/`α` for reads.
#[derive(Debug, Clone, PartialEq)]
pub struct MqssdProfile {
    pub(crate) write_setup: RationalFn,
    pub(crate) write_transfer: RationalFn,
    pub(crate) read_setup: RationalFn,
    pub(crate) read_transfer: RationalFn,
    geometry: PageGeometry,
    k_max: u32,
}

impl MqssdProfile {
    /// Builds a profile from `s(k)`, `β(k)`, `t(k)` and `α(k)`. The setup
    /// functions and `α` must have degree (2, 2); `β` must have degree (3, 3).
    pub fn new(
        s: RationalFn,
        beta: RationalFn,
        t: RationalFn,
        alpha: RationalFn,
        geometry: PageGeometry,
    ) -> Result<Self> {
        for (name, f, deg) in [
            ("s", &s, (2, 2)),
            ("beta", &beta, (3, 3)),
            ("t", &t, (2, 2)),
            ("alpha", &alpha, (2, 2)),
        ] {
            if f.degrees() != deg {
                return Err(Error::InvalidParameter(format!(
                    "{name} must have degrees {deg:?}, got {:?}",
                    f.degrees()
                )));
            }
        }
        let k_max = s.k_max();
        if [&beta, &t, &alpha].iter().any(|f| f.k_max() != k_max) {
            return Err(Error::InvalidParameter(
                "all MQSSD cost functions must share k_max".into(),
            ));
        }
        Ok(MqssdProfile {
            write_setup: s,
            write_transfer: beta,
            read_setup: t,
            read_transfer: alpha,
            geometry,
            k_max,
        })
    }

    /// Profile whose four cost functions are constants. With every setup and
    /// transfer constant the model collapses to the Affine model.
    pub fn constant(
        write: AffineCosts,
        read: AffineCosts,
        geometry: PageGeometry,
        k_max: u32,
    ) -> Result<Self> {
        MqssdProfile::new(
            RationalFn::constant_with_degrees(write.s, 2, 2, k_max)?,
            RationalFn::constant_with_degrees(write.beta, 3, 3, k_max)?,
            RationalFn::constant_with_degrees(read.s, 2, 2, k_max)?,
            RationalFn::constant_with_degrees(read.beta, 2, 2, k_max)?,
            geometry,
        )
    }

    pub fn geometry(&self) -> &PageGeometry {
        &self.geometry
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn s(&self) -> &RationalFn {
        &self.write_setup
    }

    pub fn beta(&self) -> &RationalFn {
        &self.write_transfer
    }

    pub fn t(&self) -> &RationalFn {
        &self.read_setup
    }

    pub fn alpha(&self) -> &RationalFn {
        &self.read_transfer
    }

    pub fn setup_fn(&self, op: OpKind) -> &RationalFn {
        match op {
            OpKind::Write => &self.write_setup,
            OpKind::Read => &self.read_setup,
        }
    }

    pub fn transfer_fn(&self, op: OpKind) -> &RationalFn {
        match op {
            OpKind::Write => &self.write_transfer,
            OpKind::Read => &self.read_transfer,
        }
    }

    /// `(setup(k), transfer(k))` in microseconds for the given operation.
    pub fn costs(&self, op: OpKind, k: u32) -> Result<AffineCosts> {
        Ok(AffineCosts {
            s: self.setup_fn(op).eval(k)?,
            beta: self.transfer_fn(op).eval(k)?,
        })
    }

    pub fn worker_elapsed(&self, op: OpKind, r: u64, k: u32, per_worker_bytes: u64) -> Result<f64> {
        let pages = pages_per_worker(&self.geometry, per_worker_bytes)?;
        if r as f64 > pages {
            return Err(Error::InvalidParameter(format!(
                "r={r} exceeds the {pages} pages per worker"
            )));
        }
        let c = self.costs(op, k)?;
        Ok(r as f64 * c.s + pages * c.beta)
    }

    pub fn throughput(&self, op: OpKind, r: u64, k: u32, per_worker_bytes: u64) -> Result<f64> {
        let elapsed = self.worker_elapsed(op, r, k, per_worker_bytes)?;
        Ok(f64::from(k) * per_worker_bytes as f64 / elapsed)
    }

    pub fn throughput_at_fraction(&self, op: OpKind, r_fraction: f64, k: u32) -> Result<f64> {
        check_fraction(r_fraction)?;
        let c = self.costs(op, k)?;
        Ok(f64::from(k) * self.geometry.b() / (r_fraction * c.s + c.beta))
    }

    pub(crate) fn to_doc(&self) -> MqssdDoc {
        MqssdDoc {
            s: self.write_setup.coefficients(),
            beta: self.write_transfer.coefficients(),
            t: self.read_setup.coefficients(),
            alpha: self.read_transfer.coefficients(),
            k_max: self.k_max,
        }
    }

    pub(crate) fn from_doc(doc: &MqssdDoc, geometry: PageGeometry) -> Result<Self> {
        MqssdProfile::new(
            RationalFn::from_coefficients(&doc.s, doc.k_max)?,
            RationalFn::from_coefficients(&doc.beta, doc.k_max)?,
            RationalFn::from_coefficients(&doc.t, doc.k_max)?,
            RationalFn::from_coefficients(&doc.alpha, doc.k_max)?,
            geometry,
        )
    }
}

/// The `mqssd` section of a profile document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MqssdDoc {
    pub s: Coefficients,
    pub beta: Coefficients,
    pub t: Coefficients,
    pub alpha: Coefficients,
    pub k_max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Identifier of the dataset the profile was calibrated from.
    pub source: String,
    /// Calibration time, seconds since the Unix epoch.
    pub calibrated_at_unix: u64,
}

/// A calibrated parameter set for one device, all four models side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeviceProfileDoc", into = "DeviceProfileDoc")]
pub struct DeviceProfile {
    pub device_label: String,
    pub dam: DamParams,
    pub pdam: PdamParams,
    pub affine: AffineParams,
    pub mqssd: MqssdProfile,
    pub provenance: Provenance,
}

/// On-disk JSON layout of a [`DeviceProfile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DeviceProfileDoc {
    device_label: String,
    geometry: PageGeometry,
    dam: DamParams,
    pdam: PdamParams,
    affine: AffineParams,
    mqssd: MqssdDoc,
    provenance: Provenance,
}

impl TryFrom<DeviceProfileDoc> for DeviceProfile {
    type Error = Error;

    fn try_from(doc: DeviceProfileDoc) -> Result<Self> {
        Ok(DeviceProfile {
            mqssd: MqssdProfile::from_doc(&doc.mqssd, doc.geometry)?,
            device_label: doc.device_label,
            dam: doc.dam,
            pdam: doc.pdam,
            affine: doc.affine,
            provenance: doc.provenance,
        })
    }
}

impl From<DeviceProfile> for DeviceProfileDoc {
    fn from(p: DeviceProfile) -> Self {
        DeviceProfileDoc {
            device_label: p.device_label,
            geometry: *p.mqssd.geometry(),
            dam: p.dam,
            pdam: p.pdam,
            affine: p.affine,
            mqssd: p.mqssd.to_doc(),
            provenance: p.provenance,
        }
    }
}

impl DeviceProfile {
    pub fn geometry(&self) -> &PageGeometry {
        self.mqssd.geometry()
    }

    /// Aggregate throughput predicted by `model` at concurrency `k` with a
    /// fraction `r_fraction` of pages accessed randomly.
    pub fn predict(&self, model: ModelKind, op: OpKind, k: u32, r_fraction: f64) -> Result<f64> {
        check_fraction(r_fraction)?;
        let g = self.geometry();
        match model {
            ModelKind::Dam => {
                check_k(k)?;
                Ok(self.dam.throughput(op, g))
            }
            ModelKind::Pdam => self.pdam.throughput(op, g, k),
            ModelKind::Affine => self.affine.throughput_at_fraction(op, g, r_fraction, k),
            ModelKind::Mqssd => self.mqssd.throughput_at_fraction(op, r_fraction, k),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> PageGeometry {
        PageGeometry::new(4096, 1 << 30, 1 << 20).unwrap()
    }

    #[test]
    fn geometry_rejects_dam_violations() {
        assert!(PageGeometry::new(4096, 1 << 20, 1 << 20).is_err());
        assert!(PageGeometry::new(4096, 1 << 20, 1024).is_err());
        assert!(PageGeometry::new(3000, 1 << 20, 4096).is_err());
        assert!(PageGeometry::new(0, 1 << 20, 4096).is_err());
    }

    #[test]
    fn dam_is_page_over_cost() {
        let g = geometry();
        let dam = DamParams::new(2.0, 4096.0).unwrap();
        assert_eq!(dam.throughput(OpKind::Read, &g), 2048.0);
        assert_eq!(dam.throughput(OpKind::Write, &g), 1.0);
    }

    #[test]
    fn pdam_examples() {
        let g = geometry();
        let pdam = PdamParams::new(10.0, 10.0, 8).unwrap();
        assert_eq!(pdam.throughput(OpKind::Read, &g, 4).unwrap(), 1638.4);
        assert_eq!(pdam.throughput(OpKind::Read, &g, 8).unwrap(), 3276.8);
        assert_eq!(pdam.throughput(OpKind::Read, &g, 128).unwrap(), 3276.8);
        assert_eq!(pdam.page_cost(OpKind::Read, 2).unwrap(), 5.0);
        assert_eq!(pdam.page_cost(OpKind::Read, 64).unwrap(), 1.25);
    }

    #[test]
    fn pdam_with_one_channel_is_dam() {
        let g = geometry();
        let pdam = PdamParams::new(3.5, 7.0, 1).unwrap();
        let dam = DamParams::new(3.5, 7.0).unwrap();
        for k in [1, 2, 17, 128] {
            for op in OpKind::ALL {
                assert_eq!(pdam.throughput(op, &g, k).unwrap(), dam.throughput(op, &g));
                assert_eq!(pdam.page_cost(op, k).unwrap(), pdam.cycle_cost(op));
            }
        }
    }

    #[test]
    fn affine_zero_setup_is_pure_bandwidth() {
        let g = geometry();
        let a = AffineParams::new(AffineCosts::new(0.0, 2.0).unwrap(), AffineCosts::new(0.0, 2.0).unwrap())
            .unwrap();
        let nw = 4096 * 1000;
        for k in [1, 3, 64] {
            for r in [0, 1, 500, 1000] {
                assert_eq!(
                    a.throughput(OpKind::Read, &g, r, k, nw).unwrap(),
                    f64::from(k) * 2048.0
                );
            }
        }
    }

    #[test]
    fn affine_hand_evaluation() {
        let g = geometry();
        let c = AffineCosts::new(100.0, 2.0).unwrap();
        let a = AffineParams::new(c, c).unwrap();
        let nw = 4096 * 1000;
        assert_eq!(a.worker_elapsed(OpKind::Write, &g, 1000, nw).unwrap(), 102_000.0);
        let tp = a.throughput(OpKind::Write, &g, 1000, 1, nw).unwrap();
        assert!((tp - 40.156_862_745).abs() < 1e-6);
        // Sequential limit equals the zero-setup case.
        let seq = AffineParams::new(AffineCosts::new(0.0, 2.0).unwrap(), c).unwrap();
        assert_eq!(
            a.throughput(OpKind::Write, &g, 0, 1, nw).unwrap(),
            seq.throughput(OpKind::Read, &g, 0, 1, nw).unwrap()
        );
    }

    #[test]
    fn affine_rejects_sub_page_workers() {
        let g = geometry();
        let c = AffineCosts::new(1.0, 1.0).unwrap();
        let a = AffineParams::new(c, c).unwrap();
        assert!(matches!(
            a.throughput(OpKind::Read, &g, 0, 1, 100),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn mqssd_sequential_single_worker() {
        let g = geometry();
        let p = MqssdProfile::constant(
            AffineCosts::new(50.0, 3.0).unwrap(),
            AffineCosts::new(20.0, 1.5).unwrap(),
            g,
            128,
        )
        .unwrap();
        let nw = 4096 * 256;
        assert_eq!(p.throughput(OpKind::Write, 0, 1, nw).unwrap(), 4096.0 / 3.0);
        assert_eq!(p.throughput(OpKind::Read, 0, 1, nw).unwrap(), 4096.0 / 1.5);
        assert!(matches!(
            p.throughput(OpKind::Read, 0, 129, nw),
            Err(Error::Domain { k: 129, k_max: 128 })
        ));
    }

    #[test]
    fn op_and_model_parse() {
        assert_eq!("READ".parse::<OpKind>().unwrap(), OpKind::Read);
        assert_eq!("mqssd".parse::<ModelKind>().unwrap(), ModelKind::Mqssd);
        assert!("erase".parse::<OpKind>().is_err());
    }
}
