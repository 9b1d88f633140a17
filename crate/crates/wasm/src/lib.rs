//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes and returns JSON text so the page needs no glue beyond
//! `JSON.parse`. The plain functions below the exports carry the logic and
//! are what the native tests exercise.

use mqssd_core::bench::default_r_fractions;
use mqssd_core::calibration::{calibrate_from_cost_points, read_cost_points_csv, CalibrationConfig};
use mqssd_core::lsm::{query_cost, sl_query_cost, insert_cost_per_entry, sl_insert_cost, Fanout, LsmLayout};
use mqssd_core::{DeviceProfile, ModelKind, OpKind};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

const CURVE_POINTS: usize = 48;

#[wasm_bindgen(js_name = throughputCurves)]
pub fn throughput_curves_js(profile_json: &str, op: &str, k: u32) -> Result<String, JsValue> {
    throughput_curves(profile_json, op, k).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = fitCostTable)]
pub fn fit_cost_table_js(csv: &str, monotone: bool) -> Result<String, JsValue> {
    fit_cost_table(csv, monotone).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = lsmCosts)]
pub fn lsm_costs_js(profile_json: &str, layout_json: &str) -> Result<String, JsValue> {
    lsm_costs(profile_json, layout_json).map_err(|e| JsValue::from_str(&e))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Series {
    model: ModelKind,
    values: Vec<f64>,
}

/// Aggregate throughput of every model against the random fraction at one `k`.
pub fn throughput_curves(profile_json: &str, op: &str, k: u32) -> Result<String, String> {
    let profile = DeviceProfile::from_json(profile_json).map_err(err)?;
    let op: OpKind = op.parse().map_err(err)?;
    if k == 0 || k > profile.mqssd.k_max() {
        return Err(format!("k must lie in [1, {}]", profile.mqssd.k_max()));
    }
    let fractions: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / (CURVE_POINTS - 1) as f64))
        .collect();
    let series = ModelKind::ALL
        .iter()
        .map(|&model| {
            let values = fractions
                .iter()
                .map(|&f| profile.predict(model, op, k, f))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            Ok(Series { model, values })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&json!({
        "device_label": profile.device_label,
        "op": op,
        "k": k,
        "r_fraction": fractions,
        "series": series,
    }))
    .map_err(err)
}

/// Fits all four cost functions to an `op,k,setup,transfer` table and returns
/// the fitted curves next to the input points, plus the resulting profile.
pub fn fit_cost_table(csv: &str, monotone: bool) -> Result<String, String> {
    let points = read_cost_points_csv(csv.as_bytes()).map_err(err)?;
    let config = CalibrationConfig {
        nonincreasing: monotone,
        source: "browser".into(),
        calibrated_at_unix: Some(0),
        ..CalibrationConfig::default()
    };
    let per_worker = mqssd_core::bench::WorkloadSpec::default().per_worker_bytes;
    let cal = calibrate_from_cost_points(&points, per_worker, &default_r_fractions(), &config).map_err(err)?;
    let m = &cal.profile.mqssd;
    let ks: Vec<u32> = (1..=m.k_max()).collect();
    let functions: Vec<_> = cal
        .report
        .fits
        .iter()
        .map(|fit| {
            let f = match fit.function.as_str() {
                "s" => m.s(),
                "beta" => m.beta(),
                "t" => m.t(),
                _ => m.alpha(),
            };
            let observed: Vec<(u32, f64)> = points
                .iter()
                .filter(|p| p.op == fit.op)
                .map(|p| (p.k, if matches!(fit.function.as_str(), "s" | "t") { p.setup } else { p.transfer }))
                .collect();
            json!({
                "name": fit.function,
                "op": fit.op,
                "degrees": fit.fitted_degrees,
                "coefficients": fit.coefficients,
                "max_residual": fit.max_abs_residual(),
                "nonincreasing": f.is_nonincreasing(),
                "observed": observed,
                "curve": ks.iter().map(|&k| f.eval_at(f64::from(k))).collect::<Vec<_>>(),
            })
        })
        .collect();
    let profile: serde_json::Value = serde_json::from_str(&cal.profile.to_json().map_err(err)?).map_err(err)?;
    serde_json::to_string(&json!({ "k": ks, "functions": functions, "profile": profile })).map_err(err)
}

#[derive(serde::Deserialize)]
#[serde(default)]
struct LayoutRequest {
    fanouts: Vec<u32>,
    file_size_bytes: u64,
    l0_file_count: u32,
    block_size_bytes: u64,
    working_set_bytes: u64,
    entry_size_bytes: u64,
    k_max: u32,
}

impl Default for LayoutRequest {
    fn default() -> Self {
        LayoutRequest {
            fanouts: vec![2, 4, 8, 16, 32],
            file_size_bytes: 64 << 20,
            l0_file_count: 8,
            block_size_bytes: 4096,
            working_set_bytes: 128 << 30,
            entry_size_bytes: 128,
            k_max: 32,
        }
    }
}

/// Point-query and per-entry insert cost for each fanout and the single-level
/// layout over `k = 1..=k_max`.
pub fn lsm_costs(profile_json: &str, layout_json: &str) -> Result<String, String> {
    let profile = DeviceProfile::from_json(profile_json).map_err(err)?;
    let req: LayoutRequest = if layout_json.trim().is_empty() {
        LayoutRequest::default()
    } else {
        serde_json::from_str(layout_json).map_err(err)?
    };
    let m = &profile.mqssd;
    let k_max = req.k_max.clamp(1, m.k_max());
    let ks: Vec<u32> = (1..=k_max).collect();
    let base = LsmLayout {
        fanout: Fanout::Leveled(2),
        file_size_bytes: req.file_size_bytes,
        l0_file_count: req.l0_file_count,
        block_size_bytes: req.block_size_bytes,
        working_set_bytes: req.working_set_bytes,
        entry_size_bytes: req.entry_size_bytes,
    };
    let mut layouts = Vec::new();
    for &f in &req.fanouts {
        let layout = base.with_fanout(Fanout::Leveled(f)).map_err(err)?;
        let query = ks.iter().map(|&k| query_cost(&layout, m, k)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let insert = ks
            .iter()
            .map(|&k| insert_cost_per_entry(&layout, m, k))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        layouts.push(json!({
            "F": f.to_string(),
            "levels": layout.level_count().map_err(err)?,
            "query": query,
            "insert_per_entry": insert,
        }));
    }
    let single = base.with_fanout(Fanout::SingleLevel).map_err(err)?;
    let query = ks.iter().map(|&k| sl_query_cost(m, k, &single)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let insert = ks.iter().map(|&k| sl_insert_cost(m, k, &single)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    layouts.push(json!({ "F": "single", "levels": 1, "query": query, "insert_per_entry": insert }));
    serde_json::to_string(&json!({ "k": ks, "layouts": layouts })).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const PROFILE: &str = include_str!("../../../data/sample_profile.json");
    const SAMSUNG: &str = include_str!("../../../data/samsung_990pro_per_k.csv");

    #[test]
    fn curves_cover_all_models() {
        let v: Value = serde_json::from_str(&throughput_curves(PROFILE, "read", 4).unwrap()).unwrap();
        assert_eq!(v["series"].as_array().unwrap().len(), 4);
        let mq = &v["series"][3]["values"];
        assert_eq!(mq.as_array().unwrap().len(), CURVE_POINTS);
        assert!(mq[0].as_f64().unwrap() > mq[CURVE_POINTS - 1].as_f64().unwrap());
        assert!(throughput_curves(PROFILE, "read", 0).is_err());
        assert!(throughput_curves(PROFILE, "erase", 1).is_err());
    }

    #[test]
    fn fit_table_returns_usable_profile() {
        let v: Value = serde_json::from_str(&fit_cost_table(SAMSUNG, true).unwrap()).unwrap();
        let fns = v["functions"].as_array().unwrap();
        assert_eq!(fns.len(), 4);
        assert!(fns.iter().all(|f| f["nonincreasing"] == true && f["max_residual"].as_f64().unwrap() <= 0.1));
        let profile = v["profile"].to_string();
        assert!(throughput_curves(&profile, "write", 128).is_ok());
        assert!(fit_cost_table("op,k\n", true).is_err());
    }

    #[test]
    fn single_level_wins_queries() {
        let v: Value = serde_json::from_str(&lsm_costs(PROFILE, "").unwrap()).unwrap();
        let layouts = v["layouts"].as_array().unwrap();
        let single = layouts.last().unwrap();
        assert_eq!(single["F"], "single");
        for l in &layouts[..layouts.len() - 1] {
            assert!(single["query"][0].as_f64().unwrap() < l["query"][0].as_f64().unwrap());
        }
        assert!(lsm_costs(PROFILE, r#"{"fanouts":[1]}"#).is_err());
    }
}
