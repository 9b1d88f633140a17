//! A deterministic synthetic device that follows the MQSSD cost model.
//!
//! The oracle stands in for hardware in calibration round trips and lets the
//! bench harness run without a disk. Elapsed time for a trial is
//! `(r·setup(k) + (N_w/B)·transfer(k))·(1 + ε)` where `ε` is Gaussian noise
//! drawn from a stream keyed by the trial coordinates, never by call order.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bench::{IoBackend, OffsetPlan, TrialContext, TrialRecord, WorkloadSpec};
use crate::error::{Error, Result};
use crate::models::{DeviceProfile, MqssdDoc, MqssdProfile, OpKind, PageGeometry};
use crate::seed::keyed_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OracleDoc", into = "OracleDoc")]
pub struct OracleConfig {
    ground_truth: MqssdProfile,
    noise_relative_sigma: f64,
    seed: u64,
    latency_floor_us: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OracleDoc {
    geometry: PageGeometry,
    mqssd: MqssdDoc,
    #[serde(default)]
    noise_relative_sigma: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    latency_floor_us: f64,
}

impl TryFrom<OracleDoc> for OracleConfig {
    type Error = Error;
    fn try_from(doc: OracleDoc) -> Result<Self> {
        OracleConfig::new(
            MqssdProfile::from_doc(&doc.mqssd, doc.geometry)?,
            doc.noise_relative_sigma,
            doc.seed,
        )?
        .with_latency_floor(doc.latency_floor_us)
    }
}

impl From<OracleConfig> for OracleDoc {
    fn from(c: OracleConfig) -> Self {
        OracleDoc {
            geometry: *c.ground_truth.geometry(),
            mqssd: c.ground_truth.to_doc(),
            noise_relative_sigma: c.noise_relative_sigma,
            seed: c.seed,
            latency_floor_us: c.latency_floor_us,
        }
    }
}

impl OracleConfig {
    pub fn new(ground_truth: MqssdProfile, noise_relative_sigma: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&noise_relative_sigma) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma {noise_relative_sigma} must lie in [0, 0.5)"
            )));
        }
        Ok(OracleConfig {
            ground_truth,
            noise_relative_sigma,
            seed,
            latency_floor_us: 0.0,
        })
    }

    /// Noise-free oracle for a calibrated device.
    pub fn from_profile(profile: &DeviceProfile) -> Self {
        OracleConfig {
            ground_truth: profile.mqssd.clone(),
            noise_relative_sigma: 0.0,
            seed: 0,
            latency_floor_us: 0.0,
        }
    }

    /// Minimum elapsed time reported for any trial.
    pub fn with_latency_floor(mut self, floor_us: f64) -> Result<Self> {
        if !(floor_us >= 0.0 && floor_us.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "latency floor {floor_us} must be >= 0"
            )));
        }
        self.latency_floor_us = floor_us;
        Ok(self)
    }

    pub fn ground_truth(&self) -> &MqssdProfile {
        &self.ground_truth
    }

    pub fn noise_relative_sigma(&self) -> f64 {
        self.noise_relative_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn latency_floor_us(&self) -> f64 {
        self.latency_floor_us
    }

    /// Elapsed microseconds for one trial.
    pub fn simulate_trial(
        &self,
        op: OpKind,
        k: u32,
        r: u64,
        per_worker_bytes: u64,
        repetition: u32,
    ) -> Result<f64> {
        let base = self.ground_truth.worker_elapsed(op, r, k, per_worker_bytes)?;
        let factor = if self.noise_relative_sigma > 0.0 {
            let op_id = match op {
                OpKind::Read => 0,
                OpKind::Write => 1,
            };
            let mut rng = keyed_rng(&[self.seed, op_id, u64::from(k), r, u64::from(repetition)]);
            // Redraw the rare samples that would make time non-positive.
            loop {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let f = 1.0 + self.noise_relative_sigma * eps;
                if f > 0.01 {
                    break f;
                }
            }
        } else {
            1.0
        };
        Ok((base * factor).max(self.latency_floor_us))
    }

    /// The full trial grid of `spec`, in harness order, without touching disk.
    pub fn generate_dataset(&self, spec: &WorkloadSpec) -> Result<Vec<TrialRecord>> {
        spec.validate()?;
        let page = self.ground_truth.geometry().page_size();
        if spec.page_size != page {
            return Err(Error::InvalidParameter(format!(
                "workload page size {} differs from oracle page size {page}",
                spec.page_size
            )));
        }
        let mut out = Vec::with_capacity(spec.trial_count());
        for op in spec.ops.kinds() {
            for k in spec.k_values() {
                for r in spec.r_values() {
                    for rep in 0..spec.repetitions {
                        let elapsed = self.simulate_trial(op, k, r, spec.per_worker_bytes, rep)?;
                        out.push(TrialRecord::completed(
                            &spec.device_label,
                            op,
                            k,
                            r,
                            spec.per_worker_bytes,
                            spec.page_size,
                            elapsed,
                            rep,
                            spec.seed,
                        ));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Lets the bench harness drive the oracle in place of a file.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    config: OracleConfig,
}

impl OracleBackend {
    pub fn new(config: OracleConfig) -> Self {
        OracleBackend { config }
    }
}

impl IoBackend for OracleBackend {
    fn name(&self) -> String {
        format!("oracle:seed={}", self.config.seed)
    }

    fn direct_io(&self) -> bool {
        false
    }

    fn unit_transfer_bytes(&self) -> Option<u64> {
        None
    }

    fn execute(&self, spec: &WorkloadSpec, ctx: &TrialContext, _plan: &OffsetPlan) -> Result<f64> {
        self.config
            .simulate_trial(ctx.op, ctx.k, ctx.r, spec.per_worker_bytes, ctx.repetition)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::AffineCosts;

    fn geometry() -> PageGeometry {
        PageGeometry::new(4096, 4096 * 1000, 4096 * 10).unwrap()
    }

    fn constant_oracle(setup: f64, transfer: f64, sigma: f64) -> OracleConfig {
        let c = AffineCosts::new(setup, transfer).unwrap();
        let profile = MqssdProfile::constant(c, c, geometry(), 128).unwrap();
        OracleConfig::new(profile, sigma, 42).unwrap()
    }

    #[test]
    fn constant_device() {
        // Cost functions must stay positive; a setup far below one ulp of
        // the transfer time behaves as zero.
        let o = constant_oracle(1e-300, 2.0, 0.0);
        for k in [1, 8, 128] {
            for r in [0, 10, 1000] {
                assert_eq!(o.simulate_trial(OpKind::Read, k, r, 4096 * 1000, 0).unwrap(), 2000.0);
            }
        }
    }

    #[test]
    fn hand_evaluated_elapsed() {
        let o = constant_oracle(100.0, 2.0, 0.0);
        assert_eq!(o.simulate_trial(OpKind::Write, 3, 10, 4096 * 1000, 0).unwrap(), 3000.0);
    }

    #[test]
    fn noise_is_keyed_by_coordinates() {
        let o = constant_oracle(100.0, 2.0, 0.05);
        let a = o.simulate_trial(OpKind::Write, 4, 10, 4096 * 1000, 1).unwrap();
        let b = o.simulate_trial(OpKind::Write, 4, 10, 4096 * 1000, 1).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = o.simulate_trial(OpKind::Write, 4, 10, 4096 * 1000, 2).unwrap();
        assert_ne!(a, c);
        let d = o.simulate_trial(OpKind::Read, 4, 10, 4096 * 1000, 1).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn out_of_range_k() {
        let o = constant_oracle(1.0, 1.0, 0.0);
        assert!(matches!(
            o.simulate_trial(OpKind::Read, 129, 1, 4096 * 10, 0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn sigma_bound() {
        let c = AffineCosts::new(1.0, 1.0).unwrap();
        let p = MqssdProfile::constant(c, c, geometry(), 4).unwrap();
        assert!(OracleConfig::new(p.clone(), 0.5, 0).is_err());
        assert!(OracleConfig::new(p, -0.1, 0).is_err());
    }

    #[test]
    fn latency_floor() {
        let o = constant_oracle(1e-300, 2.0, 0.0).with_latency_floor(5000.0).unwrap();
        assert_eq!(o.simulate_trial(OpKind::Read, 1, 1, 4096 * 1000, 0).unwrap(), 5000.0);
    }

    #[test]
    fn json_round_trip() {
        let o = constant_oracle(3.0, 0.25, 0.01);
        let back = OracleConfig::from_json(&o.to_json().unwrap()).unwrap();
        assert_eq!(back, o);
    }
}
