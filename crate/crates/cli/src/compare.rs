use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use mqssd_core::bench::read_trials_csv;
use mqssd_core::compare::compare;
use mqssd_core::predict::read_predictions_csv;

use crate::output;

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_name = "CSV")]
    predictions: PathBuf,
    #[arg(long, value_name = "CSV")]
    trials: PathBuf,
    /// Also write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: CompareArgs) -> Result<()> {
    let predictions = read_predictions_csv(output::open(&a.predictions)?)?;
    let trials = read_trials_csv(output::open(&a.trials)?)?;
    let report = compare(&predictions, &trials)?;

    println!("{:>4} {:<8} {:>14} {:>7}", "rank", "model", "MARE", "cells");
    for (i, s) in report.ranking.iter().enumerate() {
        println!("{:>4} {:<8} {:>14.6e} {:>7}", i + 1, s.model.as_str(), s.mare, s.cells);
    }

    let models: Vec<_> = report.ranking.iter().map(|s| s.model).collect();
    let header: String = models.iter().map(|m| format!(" {:>12}", m.as_str())).collect();
    println!("\n{:>8}{header}", "k");
    if let Some(first) = report.ranking.first() {
        for (i, (k, _)) in first.per_k.iter().enumerate() {
            let row: String = report.ranking.iter().map(|s| format!(" {:>12.4e}", s.per_k[i].1)).collect();
            println!("{k:>8}{row}");
        }
        println!("\n{:>8}{header}", "r_frac");
        for (i, (f, _)) in first.per_r_fraction.iter().enumerate() {
            let row: String = report
                .ranking
                .iter()
                .map(|s| format!(" {:>12.4e}", s.per_r_fraction[i].1))
                .collect();
            println!("{f:>8.4}{row}");
        }
    }

    match report.strict_winner() {
        Some(m) => println!("\nbest model: {}", m.as_str()),
        None => {
            let tied: Vec<&str> = report.winners().iter().map(|m| m.as_str()).collect();
            println!("\nbest models (tied): {}", tied.join(", "));
        }
    }
    if let Some(path) = &a.out {
        output::write_json(path, &report)?;
    }
    Ok(())
}
