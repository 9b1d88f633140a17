use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::MqssdProfile;

/// Capacity growth factor between adjacent levels, or the degenerate layout
/// that keeps all data in one sorted run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fanout {
    Leveled(u32),
    SingleLevel,
}

impl fmt::Display for Fanout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fanout::Leveled(v) => write!(f, "{v}"),
            Fanout::SingleLevel => f.write_str("single"),
        }
    }
}

impl FromStr for Fanout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single" | "single-level" | "inf" => Ok(Fanout::SingleLevel),
            other => other
                .parse::<u32>()
                .map(Fanout::Leveled)
                .map_err(|_| Error::InvalidParameter(format!("bad fanout '{s}'"))),
        }
    }
}

impl Serialize for Fanout {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Fanout::Leveled(v) => s.serialize_u32(*v),
            Fanout::SingleLevel => s.serialize_str("single"),
        }
    }
}

impl<'de> Deserialize<'de> for Fanout {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Fanout::Leveled(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// LSM data layout. All sizes are in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsmLayout {
    pub fanout: Fanout,
    pub file_size_bytes: u64,
    pub l0_file_count: u32,
    pub block_size_bytes: u64,
    pub working_set_bytes: u64,
    pub entry_size_bytes: u64,
}

impl LsmLayout {
    pub fn leveled(
        fanout: u32,
        file_size_bytes: u64,
        l0_file_count: u32,
        block_size_bytes: u64,
        working_set_bytes: u64,
        entry_size_bytes: u64,
    ) -> Result<Self> {
        let layout = LsmLayout {
            fanout: Fanout::Leveled(fanout),
            file_size_bytes,
            l0_file_count,
            block_size_bytes,
            working_set_bytes,
            entry_size_bytes,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// One sorted run: no L0 files and unbounded fanout.
    pub fn single_level(
        file_size_bytes: u64,
        block_size_bytes: u64,
        working_set_bytes: u64,
        entry_size_bytes: u64,
    ) -> Result<Self> {
        let layout = LsmLayout {
            fanout: Fanout::SingleLevel,
            file_size_bytes,
            l0_file_count: 0,
            block_size_bytes,
            working_set_bytes,
            entry_size_bytes,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Same sizes, different fanout. `SingleLevel` also drops the L0 files.
    pub fn with_fanout(&self, fanout: Fanout) -> Result<Self> {
        let mut next = *self;
        next.fanout = fanout;
        if fanout == Fanout::SingleLevel {
            next.l0_file_count = 0;
        }
        next.validate()?;
        Ok(next)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.file_size_bytes == 0 || self.block_size_bytes == 0 || self.entry_size_bytes == 0 {
            return bad("file, block and entry sizes must be positive".into());
        }
        if self.file_size_bytes % self.block_size_bytes != 0 {
            return bad(format!(
                "file size {} is not a multiple of block size {}",
                self.file_size_bytes, self.block_size_bytes
            ));
        }
        match self.fanout {
            Fanout::SingleLevel => {
                if self.l0_file_count != 0 {
                    return bad("a single-level layout has no L0 files".into());
                }
            }
            Fanout::Leveled(f) => {
                if f < 2 {
                    return bad(format!("fanout must be at least 2, got {f}"));
                }
                if self.l0_file_count == 0 {
                    return bad("a leveled layout needs at least one L0 file".into());
                }
                let l0_bytes = u128::from(self.l0_file_count) * u128::from(self.file_size_bytes);
                if u128::from(self.working_set_bytes) < l0_bytes {
                    return bad(format!(
                        "working set {} is smaller than C*T = {l0_bytes}",
                        self.working_set_bytes
                    ));
                }
            }
        }
        Ok(())
    }

    /// `B'/B`; below one when a page holds several blocks.
    pub fn block_page_ratio(&self, page_size: u64) -> Result<f64> {
        let b = self.block_size_bytes;
        if b % page_size != 0 && page_size % b != 0 {
            return Err(Error::InvalidParameter(format!(
                "block size {b} and page size {page_size} must divide one another"
            )));
        }
        Ok(b as f64 / page_size as f64)
    }

    /// Smallest `L >= 1` with `C * T * F^L >= N`.
    pub fn level_count(&self) -> Result<u32> {
        let Fanout::Leveled(f) = self.fanout else {
            return Err(Error::InvalidParameter(
                "level count is defined only for leveled layouts".into(),
            ));
        };
        let n = u128::from(self.working_set_bytes);
        let mut cap = u128::from(self.l0_file_count) * u128::from(self.file_size_bytes) * u128::from(f);
        let mut levels = 1;
        while cap < n {
            cap = cap.saturating_mul(u128::from(f));
            levels += 1;
        }
        Ok(levels)
    }

    /// Sorted runs a point query may probe: `C + L`, or one.
    pub fn sorted_runs(&self) -> Result<u32> {
        match self.fanout {
            Fanout::SingleLevel => Ok(1),
            Fanout::Leveled(_) => Ok(self.l0_file_count + self.level_count()?),
        }
    }
}

struct Costs {
    s: f64,
    beta: f64,
    t: f64,
    alpha: f64,
    page: f64,
}

fn costs(profile: &MqssdProfile, k: u32) -> Result<Costs> {
    Ok(Costs {
        s: profile.s().eval(k)?,
        beta: profile.beta().eval(k)?,
        t: profile.t().eval(k)?,
        alpha: profile.alpha().eval(k)?,
        page: profile.geometry().page_size() as f64,
    })
}

fn check_pages(layout: &LsmLayout, profile: &MqssdProfile) -> Result<()> {
    layout.block_page_ratio(profile.geometry().page_size()).map(|_| ())
}

/// Cost of one file read plus rewrite, `t + s + T(α + β)/B`.
fn rewrite_one(c: &Costs, file_size: f64) -> f64 {
    c.t + c.s + file_size * (c.alpha + c.beta) / c.page
}

/// Reading and rewriting `files` whole files.
pub fn file_rw_cost(files: u64, layout: &LsmLayout, profile: &MqssdProfile, k: u32) -> Result<f64> {
    if files == 0 {
        return Err(Error::InvalidParameter("file count must be at least 1".into()));
    }
    let c = costs(profile, k)?;
    Ok(files as f64 * rewrite_one(&c, layout.file_size_bytes as f64))
}

/// Compaction cost amortized over every inserted byte.
pub fn insert_cost_per_byte(layout: &LsmLayout, profile: &MqssdProfile, k: u32) -> Result<f64> {
    let Fanout::Leveled(f) = layout.fanout else {
        return Err(Error::InvalidParameter(
            "single-level layouts use sl_insert_cost".into(),
        ));
    };
    let c = costs(profile, k)?;
    let l = layout.level_count()?;
    let t = layout.file_size_bytes as f64;
    let touched = f64::from(layout.l0_file_count) + f64::from(f) * f64::from(l);
    Ok(touched / t * rewrite_one(&c, t))
}

pub fn insert_cost_per_entry(layout: &LsmLayout, profile: &MqssdProfile, k: u32) -> Result<f64> {
    Ok(layout.entry_size_bytes as f64 * insert_cost_per_byte(layout, profile, k)?)
}

/// Expected point-query cost with fence pointers held in memory.
pub fn query_cost(layout: &LsmLayout, profile: &MqssdProfile, k: u32) -> Result<f64> {
    check_pages(layout, profile)?;
    let c = costs(profile, k)?;
    let runs = f64::from(layout.sorted_runs()?);
    Ok(runs * (c.t + layout.block_size_bytes as f64 * c.alpha / c.page))
}

/// Point query plus a sequential read of `bytes` across the covering files.
pub fn scan_cost(layout: &LsmLayout, profile: &MqssdProfile, k: u32, bytes: u64) -> Result<f64> {
    let q = query_cost(layout, profile, k)?;
    let c = costs(profile, k)?;
    let x = bytes as f64;
    Ok(q + x * (c.t / layout.file_size_bytes as f64 + c.alpha / c.page))
}

/// Per-entry insert cost of the single-level layout: every flush rewrites
/// a file, so each key pays about one whole file rewrite.
pub fn sl_insert_cost(profile: &MqssdProfile, k: u32, layout: &LsmLayout) -> Result<f64> {
    if layout.fanout != Fanout::SingleLevel {
        return Err(Error::InvalidParameter("sl_insert_cost needs a single-level layout".into()));
    }
    let c = costs(profile, k)?;
    Ok(rewrite_one(&c, layout.file_size_bytes as f64))
}

/// Point query against the single sorted run.
pub fn sl_query_cost(profile: &MqssdProfile, k: u32, layout: &LsmLayout) -> Result<f64> {
    check_pages(layout, profile)?;
    let c = costs(profile, k)?;
    Ok(c.t + layout.block_size_bytes as f64 * c.alpha / c.page)
}

/// Least-squares multiplier `c` minimizing `Σ (c·p − m)²`.
pub fn fit_scalar(predicted: &[f64], measured: &[f64]) -> Result<f64> {
    if predicted.len() != measured.len() || predicted.is_empty() {
        return Err(Error::InsufficientData(
            "scalar fit needs equally many predictions and measurements".into(),
        ));
    }
    let pp: f64 = predicted.iter().map(|p| p * p).sum();
    if pp <= 0.0 {
        return Err(Error::Degenerate("all predictions are zero".into()));
    }
    let pm: f64 = predicted.iter().zip(measured).map(|(p, m)| p * m).sum();
    Ok(pm / pp)
}

/// One cell of a cost grid; `fanout` renders as `F` in CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    #[serde(rename = "F")]
    pub fanout: String,
    pub k: Option<u32>,
    pub metric: String,
    pub value: f64,
}

pub const COST_METRICS: [&str; 5] = ["file_rw", "insert_per_byte", "insert_per_entry", "query", "scan"];

/// Every cost metric for each layout and `k`. Single-level layouts report
/// their own insert and query formulas in the matching columns.
pub fn cost_grid(
    profile: &MqssdProfile,
    layouts: &[LsmLayout],
    ks: &[u32],
    scan_bytes: u64,
) -> Result<Vec<CostRow>> {
    let mut rows = Vec::new();
    for layout in layouts {
        for &k in ks {
            let (per_byte, per_entry, query) = match layout.fanout {
                Fanout::Leveled(_) => (
                    insert_cost_per_byte(layout, profile, k)?,
                    insert_cost_per_entry(layout, profile, k)?,
                    query_cost(layout, profile, k)?,
                ),
                Fanout::SingleLevel => {
                    let e = sl_insert_cost(profile, k, layout)?;
                    (e / layout.entry_size_bytes as f64, e, sl_query_cost(profile, k, layout)?)
                }
            };
            let values = [
                file_rw_cost(1, layout, profile, k)?,
                per_byte,
                per_entry,
                query,
                scan_cost(layout, profile, k, scan_bytes)?,
            ];
            for (metric, value) in COST_METRICS.iter().zip(values) {
                rows.push(CostRow {
                    fanout: layout.fanout.to_string(),
                    k: Some(k),
                    metric: (*metric).to_string(),
                    value,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AffineCosts, PageGeometry};
    use crate::rational::RationalFn;

    const B: u64 = 4096;
    const KIB: u64 = 1024;
    const MIB: u64 = 1 << 20;
    const GIB: u64 = 1 << 30;

    fn geometry() -> PageGeometry {
        PageGeometry::new(B, 1 << 40, 1 << 30).unwrap()
    }

    fn unit_profile() -> MqssdProfile {
        let one = AffineCosts::new(1.0, 1.0).unwrap();
        MqssdProfile::constant(one, one, geometry(), 64).unwrap()
    }

    fn read_profile(t: f64, alpha: f64) -> MqssdProfile {
        MqssdProfile::constant(
            AffineCosts::new(1.0, 1.0).unwrap(),
            AffineCosts::new(t, alpha).unwrap(),
            geometry(),
            64,
        )
        .unwrap()
    }

    fn decreasing_profile() -> MqssdProfile {
        let f2 = |a: f64| RationalFn::new(vec![a, 0.0, 0.0], vec![1.0, 0.5, 0.0], 64).unwrap();
        MqssdProfile::new(
            f2(50.0),
            RationalFn::new(vec![8.0, 0.0, 0.0, 0.0], vec![1.0, 0.2, 0.0, 0.0], 64).unwrap(),
            f2(30.0),
            f2(2.0),
            geometry(),
        )
        .unwrap()
    }

    #[test]
    fn level_count_examples() {
        let l = LsmLayout::leveled(8, 64 * MIB, 8, 4 * KIB, 128 * GIB, 128).unwrap();
        assert_eq!(l.level_count().unwrap(), 3);
        assert_eq!(l.sorted_runs().unwrap(), 11);
        let edge = LsmLayout::leveled(8, 64 * MIB, 8, 4 * KIB, 8 * 64 * MIB, 128).unwrap();
        assert_eq!(edge.level_count().unwrap(), 1);
        let sl = LsmLayout::single_level(64 * MIB, 4 * KIB, 128 * GIB, 128).unwrap();
        assert!(sl.level_count().is_err());
        assert_eq!(sl.sorted_runs().unwrap(), 1);
    }

    #[test]
    fn layout_validation() {
        assert!(LsmLayout::leveled(1, 64 * MIB, 8, 4 * KIB, GIB, 128).is_err());
        assert!(LsmLayout::leveled(8, 64 * MIB, 0, 4 * KIB, GIB, 128).is_err());
        assert!(LsmLayout::leveled(8, 64 * MIB + 1, 8, 4 * KIB, GIB, 128).is_err());
        assert!(LsmLayout::leveled(8, 64 * MIB, 8, 4 * KIB, 64 * MIB, 128).is_err());
        let odd = LsmLayout::leveled(8, 3 * 1000, 8, 1000, GIB, 100).unwrap();
        assert!(odd.block_page_ratio(B).is_err());
        let small = LsmLayout::leveled(8, 64 * MIB, 8, 1024, GIB, 100).unwrap();
        assert_eq!(small.block_page_ratio(B).unwrap(), 0.25);
    }

    #[test]
    fn file_rw_unit_profile() {
        let l = LsmLayout::leveled(4, 4 * B, 4, B, GIB, 16).unwrap();
        assert_eq!(file_rw_cost(1, &l, &unit_profile(), 1).unwrap(), 10.0);
        assert_eq!(file_rw_cost(2, &l, &unit_profile(), 1).unwrap(), 20.0);
        assert!(file_rw_cost(0, &l, &unit_profile(), 1).is_err());
        assert!(matches!(
            file_rw_cost(1, &l, &unit_profile(), 65),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn insert_unit_profile() {
        let t = 1024 * B;
        // N/(CT) = 16 = 4^2, so L = 2.
        let l = LsmLayout::leveled(4, t, 4, B, 64 * t, 64).unwrap();
        assert_eq!(l.level_count().unwrap(), 2);
        let expected = (4.0 + 8.0) / t as f64 * (2.0 + 1024.0 * 2.0);
        assert!((insert_cost_per_byte(&l, &unit_profile(), 1).unwrap() - expected).abs() < 1e-15);
        assert!(
            (insert_cost_per_entry(&l, &unit_profile(), 1).unwrap() - 64.0 * expected).abs() < 1e-12
        );
        let sl = l.with_fanout(Fanout::SingleLevel).unwrap();
        assert!(insert_cost_per_byte(&sl, &unit_profile(), 1).is_err());
    }

    #[test]
    fn query_examples() {
        let p = read_profile(10.0, 1.0);
        let l = LsmLayout::leveled(8, 64 * MIB, 8, B, 128 * GIB, 128).unwrap();
        assert_eq!(query_cost(&l, &p, 1).unwrap(), 121.0);
        let sl = l.with_fanout(Fanout::SingleLevel).unwrap();
        assert_eq!(sl_query_cost(&p, 1, &sl).unwrap(), 11.0);
        assert_eq!(query_cost(&sl, &p, 1).unwrap(), sl_query_cost(&p, 1, &sl).unwrap());
    }

    #[test]
    fn scan_examples() {
        let l = LsmLayout::leveled(8, 64 * MIB, 8, B, 128 * GIB, 128).unwrap();
        let p = read_profile(10.0, 1.0);
        let q = query_cost(&l, &p, 1).unwrap();
        assert_eq!(scan_cost(&l, &p, 1, 0).unwrap(), q);
        let one = scan_cost(&l, &p, 1, MIB).unwrap();
        let two = scan_cost(&l, &p, 1, 2 * MIB).unwrap();
        assert!(two < 2.0 * one);
        // Scanning one file adds one setup plus T/B page transfers.
        let extra = scan_cost(&l, &p, 1, l.file_size_bytes).unwrap() - q;
        assert_eq!(extra, 10.0 + (64 * MIB / B) as f64);
    }

    #[test]
    fn single_level_insert() {
        let sl = LsmLayout::single_level(4 * B, B, GIB, 16).unwrap();
        assert_eq!(sl_insert_cost(&unit_profile(), 1, &sl).unwrap(), 10.0);
        let leveled = LsmLayout::leveled(4, 4 * B, 4, B, GIB, 16).unwrap();
        assert!(sl_insert_cost(&unit_profile(), 1, &leveled).is_err());
    }

    #[test]
    fn sl_insert_ratio_grows_with_file_size() {
        let p = decreasing_profile();
        let mut last = 0.0;
        for t in [MIB, 4 * MIB, 16 * MIB, 64 * MIB, 256 * MIB] {
            let leveled = LsmLayout::leveled(8, t, 4, B, 512 * GIB, 128).unwrap();
            let sl = leveled.with_fanout(Fanout::SingleLevel).unwrap();
            let ratio = sl_insert_cost(&p, 4, &sl).unwrap() / insert_cost_per_entry(&leveled, &p, 4).unwrap();
            assert!(ratio > last, "T={t}: {ratio} <= {last}");
            last = ratio;
        }
    }

    #[test]
    fn costs_decrease_in_k() {
        let p = decreasing_profile();
        let l = LsmLayout::leveled(8, 64 * MIB, 8, B, 128 * GIB, 128).unwrap();
        let sl = l.with_fanout(Fanout::SingleLevel).unwrap();
        let eval = |k: u32| {
            [
                file_rw_cost(3, &l, &p, k).unwrap(),
                insert_cost_per_byte(&l, &p, k).unwrap(),
                query_cost(&l, &p, k).unwrap(),
                scan_cost(&l, &p, k, 10 * MIB).unwrap(),
                sl_insert_cost(&p, k, &sl).unwrap(),
                sl_query_cost(&p, k, &sl).unwrap(),
            ]
        };
        for k in 1..64 {
            let (a, b) = (eval(k), eval(k + 1));
            assert!(a.iter().zip(&b).all(|(x, y)| y < x), "k={k}");
        }
    }

    #[test]
    fn fanout_text_and_json() {
        assert_eq!("single".parse::<Fanout>().unwrap(), Fanout::SingleLevel);
        assert_eq!("8".parse::<Fanout>().unwrap(), Fanout::Leveled(8));
        let l = LsmLayout::leveled(8, 64 * MIB, 8, B, 128 * GIB, 128).unwrap();
        let json = serde_json::to_string(&l).unwrap();
        assert!(json.contains("\"fanout\":8"));
        assert_eq!(serde_json::from_str::<LsmLayout>(&json).unwrap(), l);
        let sl = l.with_fanout(Fanout::SingleLevel).unwrap();
        let back: LsmLayout = serde_json::from_str(&serde_json::to_string(&sl).unwrap()).unwrap();
        assert_eq!(back, sl);
    }

    #[test]
    fn scalar_fit() {
        let c = fit_scalar(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((c - 2.0).abs() < 1e-15);
        assert!(fit_scalar(&[], &[]).is_err());
    }
}
