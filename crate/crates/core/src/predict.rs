//! Throughput predictions for all four models over a `(op, k, r)` grid.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bench::{TrialRecord, TrialStatus};
use crate::error::{Error, Result, SchemaIssue};
use crate::models::{DeviceProfile, ModelKind, OpKind};

pub const PREDICTION_CSV_HEADER: [&str; 5] =
    ["model", "op", "k", "r_fraction", "predicted_throughput"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub model: ModelKind,
    pub op: OpKind,
    pub k: u32,
    pub r_fraction: f64,
    /// Bytes per microsecond.
    pub predicted_throughput: f64,
}

/// One `(op, k, r_fraction)` point to predict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub op: OpKind,
    pub k: u32,
    pub r_fraction: f64,
}

/// Cartesian grid in `op`, `k`, `r_fraction` order.
pub fn cartesian_cells(ops: &[OpKind], ks: &[u32], fractions: &[f64]) -> Vec<GridCell> {
    let mut cells = Vec::with_capacity(ops.len() * ks.len() * fractions.len());
    for &op in ops {
        for &k in ks {
            for &r_fraction in fractions {
                cells.push(GridCell { op, k, r_fraction });
            }
        }
    }
    cells
}

/// The distinct cells measured in a trial dataset, in `op`, `k`, `r` order.
pub fn cells_from_trials(trials: &[TrialRecord]) -> Vec<GridCell> {
    let mut cells: Vec<GridCell> = trials
        .iter()
        .filter(|t| t.status == TrialStatus::Ok)
        .map(|t| GridCell {
            op: t.op,
            k: t.k,
            r_fraction: t.r_fraction,
        })
        .collect();
    cells.sort_by(|a, b| {
        a.op.cmp(&b.op)
            .then(a.k.cmp(&b.k))
            .then(a.r_fraction.total_cmp(&b.r_fraction))
    });
    cells.dedup();
    cells
}

/// Predictions of every model at every cell, grouped by model.
///
/// PDAM and MQSSD enforce their concurrency domains, so a `k` beyond the
/// profile's calibrated range is an error rather than an extrapolation.
pub fn predict_cells(profile: &DeviceProfile, cells: &[GridCell]) -> Result<Vec<PredictionRow>> {
    let mut rows = Vec::with_capacity(cells.len() * ModelKind::ALL.len());
    for model in ModelKind::ALL {
        for cell in cells {
            let predicted_throughput = profile.predict(model, cell.op, cell.k, cell.r_fraction)?;
            rows.push(PredictionRow {
                model,
                op: cell.op,
                k: cell.k,
                r_fraction: cell.r_fraction,
                predicted_throughput,
            });
        }
    }
    Ok(rows)
}

pub fn write_predictions_csv<W: Write>(out: W, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(PREDICTION_CSV_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions_csv<R: Read>(input: R) -> Result<Vec<PredictionRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != PREDICTION_CSV_HEADER {
        return Err(Error::Schema(vec![SchemaIssue {
            line: 1,
            message: format!("header must be '{}'", PREDICTION_CSV_HEADER.join(",")),
        }]));
    }
    let mut rows = Vec::new();
    let mut issues = Vec::new();
    for row in reader.deserialize::<PredictionRow>() {
        match row {
            Ok(r) => rows.push(r),
            Err(e) => issues.push(SchemaIssue {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            }),
        }
    }
    if issues.is_empty() {
        Ok(rows)
    } else {
        Err(Error::Schema(issues))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AffineCosts, AffineParams, DamParams, MqssdProfile, PageGeometry, PdamParams, Provenance};
    use crate::rational::RationalFn;

    fn profile() -> DeviceProfile {
        let g = PageGeometry::new(4096, 1 << 26, 1 << 20).unwrap();
        let mqssd = MqssdProfile::new(
            RationalFn::new(vec![90.0, 2.0, 0.05], vec![1.0, 0.5, 0.01], 64).unwrap(),
            RationalFn::new(vec![6.0, 0.4, 0.02, 0.0004], vec![1.0, 0.3, 0.02, 0.0002], 64).unwrap(),
            RationalFn::new(vec![40.0, 1.0, 0.01], vec![1.0, 0.9, 0.02], 64).unwrap(),
            RationalFn::new(vec![3.0, 0.1, 0.002], vec![1.0, 0.4, 0.004], 64).unwrap(),
            g,
        )
        .unwrap();
        DeviceProfile {
            device_label: "p".into(),
            dam: DamParams::new(4.0, 8.0).unwrap(),
            pdam: PdamParams::new(4.0, 8.0, 8).unwrap(),
            affine: AffineParams::new(
                AffineCosts::new(40.0, 3.0).unwrap(),
                AffineCosts::new(90.0, 6.0).unwrap(),
            )
            .unwrap(),
            mqssd,
            provenance: Provenance {
                source: "test".into(),
                calibrated_at_unix: 0,
            },
        }
    }

    #[test]
    fn model_shapes_on_grid() {
        let p = profile();
        let ks = [1, 2, 4, 8, 16, 32, 64];
        let fr = [0.001, 0.01, 0.1, 0.5, 1.0];
        let rows = predict_cells(&p, &cartesian_cells(&OpKind::ALL, &ks, &fr)).unwrap();
        let of = |m: ModelKind| rows.iter().filter(move |r| r.model == m);
        let dam0 = of(ModelKind::Dam).next().unwrap().predicted_throughput;
        assert!(of(ModelKind::Dam)
            .filter(|r| r.op == OpKind::Read)
            .all(|r| r.predicted_throughput == dam0));
        for op in OpKind::ALL {
            for k in ks {
                let pdam: Vec<f64> = of(ModelKind::Pdam)
                    .filter(|r| r.op == op && r.k == k)
                    .map(|r| r.predicted_throughput)
                    .collect();
                assert!(pdam.windows(2).all(|w| w[0] == w[1]));
                let mq: Vec<f64> = of(ModelKind::Mqssd)
                    .filter(|r| r.op == op && r.k == k)
                    .map(|r| r.predicted_throughput)
                    .collect();
                assert!(mq.windows(2).all(|w| w[1] < w[0]), "{op} k={k}: {mq:?}");
            }
        }
    }

    #[test]
    fn beyond_k_max_is_rejected() {
        let p = profile();
        let cells = cartesian_cells(&[OpKind::Read], &[128], &[0.5]);
        assert!(matches!(predict_cells(&p, &cells), Err(Error::Domain { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let p = profile();
        let rows = predict_cells(&p, &cartesian_cells(&OpKind::ALL, &[1, 3], &[0.3, 1.0])).unwrap();
        let mut buf = Vec::new();
        write_predictions_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_predictions_csv(buf.as_slice()).unwrap(), rows);
    }
}
