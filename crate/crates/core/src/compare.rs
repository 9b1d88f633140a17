//! Scores model predictions against measured trials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bench::{TrialRecord, TrialStatus};
use crate::error::{Error, Result};
use crate::models::{ModelKind, OpKind};
use crate::predict::PredictionRow;
use crate::stats::mean;

/// Two fractions closer than this (relative) address the same grid cell.
const FRACTION_MATCH: f64 = 1e-9;
/// Models whose errors differ by less than this are ranked as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: ModelKind,
    /// Mean absolute relative error over every measured cell.
    pub mare: f64,
    pub per_k: Vec<(u32, f64)>,
    pub per_r_fraction: Vec<(f64, f64)>,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Ascending in error; the first entry is the best model.
    pub ranking: Vec<ModelScore>,
}

impl ComparisonReport {
    /// All models within [`TIE_TOLERANCE`] of the lowest error.
    pub fn winners(&self) -> Vec<ModelKind> {
        let best = self.ranking.first().map(|s| s.mare).unwrap_or(f64::NAN);
        self.ranking
            .iter()
            .filter(|s| s.mare - best <= TIE_TOLERANCE)
            .map(|s| s.model)
            .collect()
    }

    /// The single best model, if no other model ties it.
    pub fn strict_winner(&self) -> Option<ModelKind> {
        match self.winners().as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    pub fn score(&self, model: ModelKind) -> Option<&ModelScore> {
        self.ranking.iter().find(|s| s.model == model)
    }
}

struct Observed {
    op: OpKind,
    k: u32,
    r_fraction: f64,
    throughput: f64,
}

fn observed_cells(trials: &[TrialRecord]) -> Vec<Observed> {
    let mut groups: BTreeMap<(OpKind, u32, u64), Vec<f64>> = BTreeMap::new();
    let mut fraction_of: BTreeMap<(OpKind, u32, u64), f64> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.status == TrialStatus::Ok) {
        let key = (t.op, t.k, t.r_fraction.to_bits());
        groups.entry(key).or_default().push(t.throughput);
        fraction_of.insert(key, t.r_fraction);
    }
    groups
        .into_iter()
        .map(|(key, tps)| Observed {
            op: key.0,
            k: key.1,
            r_fraction: fraction_of[&key],
            throughput: mean(&tps),
        })
        .collect()
}

fn same_fraction(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= FRACTION_MATCH * a.abs().max(b.abs())
}

/// Mean absolute relative error of each model against the per-cell mean
/// measured throughput. Every measured cell must have a prediction from
/// every model present in `predictions`.
pub fn compare(predictions: &[PredictionRow], trials: &[TrialRecord]) -> Result<ComparisonReport> {
    let observed = observed_cells(trials);
    if observed.is_empty() {
        return Err(Error::InsufficientData("no successful trials to compare".into()));
    }
    let mut models: Vec<ModelKind> = predictions.iter().map(|p| p.model).collect();
    models.sort();
    models.dedup();
    if models.is_empty() {
        return Err(Error::InsufficientData("no predictions to compare".into()));
    }

    let mut ranking = Vec::with_capacity(models.len());
    for model in models {
        let rows: Vec<&PredictionRow> = predictions.iter().filter(|p| p.model == model).collect();
        let mut errors = Vec::with_capacity(observed.len());
        let mut per_k: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut per_r: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        for cell in &observed {
            let pred = rows
                .iter()
                .find(|p| p.op == cell.op && p.k == cell.k && same_fraction(p.r_fraction, cell.r_fraction))
                .ok_or_else(|| {
                    Error::GridMismatch(format!(
                        "no {model} prediction for op={} k={} r_fraction={}",
                        cell.op, cell.k, cell.r_fraction
                    ))
                })?;
            let err = ((pred.predicted_throughput - cell.throughput) / cell.throughput).abs();
            errors.push(err);
            per_k.entry(cell.k).or_default().push(err);
            per_r
                .entry(cell.r_fraction.to_bits())
                .or_insert_with(|| (cell.r_fraction, Vec::new()))
                .1
                .push(err);
        }
        let mut per_r_fraction: Vec<(f64, f64)> =
            per_r.into_values().map(|(f, e)| (f, mean(&e))).collect();
        per_r_fraction.sort_by(|a, b| a.0.total_cmp(&b.0));
        ranking.push(ModelScore {
            model,
            mare: mean(&errors),
            per_k: per_k.into_iter().map(|(k, e)| (k, mean(&e))).collect(),
            per_r_fraction,
            cells: errors.len(),
        });
    }
    ranking.sort_by(|a, b| a.mare.total_cmp(&b.mare).then(a.model.cmp(&b.model)));
    Ok(ComparisonReport { ranking })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(k: u32, r: u64, elapsed: f64) -> TrialRecord {
        TrialRecord::completed("d", OpKind::Read, k, r, 4096 * 100, 4096, elapsed, 0, 0)
    }

    fn row(model: ModelKind, k: u32, f: f64, tp: f64) -> PredictionRow {
        PredictionRow {
            model,
            op: OpKind::Read,
            k,
            r_fraction: f,
            predicted_throughput: tp,
        }
    }

    #[test]
    fn ranks_by_mean_relative_error() {
        let trials = vec![trial(1, 10, 1000.0), trial(2, 10, 1000.0)];
        let obs1 = trials[0].throughput;
        let obs2 = trials[1].throughput;
        let preds = vec![
            row(ModelKind::Dam, 1, 0.1, obs1 * 1.5),
            row(ModelKind::Dam, 2, 0.1, obs2 * 1.5),
            row(ModelKind::Mqssd, 1, 0.1, obs1),
            row(ModelKind::Mqssd, 2, 0.1, obs2 * 0.9),
        ];
        let report = compare(&preds, &trials).unwrap();
        assert_eq!(report.strict_winner(), Some(ModelKind::Mqssd));
        let mq = report.score(ModelKind::Mqssd).unwrap();
        assert!((mq.mare - 0.05).abs() < 1e-12);
        assert_eq!(mq.per_k.len(), 2);
        assert_eq!(mq.per_k[0], (1, 0.0));
        assert!((mq.per_k[1].1 - 0.1).abs() < 1e-12);
        assert!((report.score(ModelKind::Dam).unwrap().mare - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_cell_is_a_grid_mismatch() {
        let trials = vec![trial(1, 10, 1000.0), trial(4, 10, 1000.0)];
        let preds = vec![row(ModelKind::Dam, 1, 0.1, 1.0)];
        assert!(matches!(compare(&preds, &trials), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn ties_are_reported() {
        let trials = vec![trial(1, 10, 1000.0)];
        let obs = trials[0].throughput;
        let preds = vec![row(ModelKind::Dam, 1, 0.1, obs), row(ModelKind::Affine, 1, 0.1, obs)];
        let report = compare(&preds, &trials).unwrap();
        assert_eq!(report.winners(), vec![ModelKind::Dam, ModelKind::Affine]);
        assert_eq!(report.strict_winner(), None);
    }
}
