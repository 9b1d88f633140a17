//! LSM-tree cost analysis on top of a calibrated MQSSD profile.

mod cost;
mod sim;

use std::io::Write;

pub use cost::{
    cost_grid, file_rw_cost, fit_scalar, insert_cost_per_byte, insert_cost_per_entry, query_cost,
    scan_cost, sl_insert_cost, sl_query_cost, CostRow, Fanout, LsmLayout, COST_METRICS,
};
pub use sim::{
    simulate_data_movement, simulate_fanout, CompactionStats, DataMovementReport, SimConfig,
    TransitionStats,
};

use crate::error::Result;

/// Flattens a simulation report into `(F, k, metric, value)` rows; `k` is
/// empty because the simulator has no concurrency dimension.
pub fn stats_rows(report: &DataMovementReport) -> Vec<CostRow> {
    let row = |f: String, metric: String, value: f64| CostRow { fanout: f, k: None, metric, value };
    let mut rows = Vec::new();
    for s in &report.per_fanout {
        let f = s.fanout.to_string();
        rows.push(row(f.clone(), "compactions".into(), s.compaction_count as f64));
        for t in &s.transitions {
            let l = t.from_level;
            rows.push(row(f.clone(), format!("touched_mean_L{l}"), t.mean));
            rows.push(row(f.clone(), format!("touched_var_L{l}"), t.variance));
            rows.push(row(f.clone(), format!("compactions_L{l}"), t.compactions as f64));
        }
        rows.push(row(f.clone(), "touched_mean_deep".into(), s.deep_mean));
        rows.push(row(f, "touched_var_deep".into(), s.deep_variance));
    }
    if let Some(fit) = &report.fit {
        rows.push(row("all".into(), "fit_slope".into(), fit.slope));
        rows.push(row("all".into(), "fit_intercept".into(), fit.intercept));
        rows.push(row("all".into(), "r_squared".into(), fit.r_squared));
    }
    rows
}

pub fn write_rows_csv<W: Write>(out: W, rows: &[CostRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["F", "k", "metric", "value"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
