use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use mqssd_core::bench::{default_r_fractions, read_trials_csv, OpSelection};
use mqssd_core::predict::{cartesian_cells, cells_from_trials, predict_cells, write_predictions_csv};
use mqssd_core::DeviceProfile;

use crate::args::{FractionGrid, KGrid};
use crate::output;

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "JSON")]
    profile: PathBuf,
    #[arg(long, default_value = "both")]
    op: OpSelection,
    /// [default: powers of two up to the profile's k_max]
    #[arg(long)]
    k_grid: Option<KGrid>,
    /// [default: 8 log-spaced fractions from 0.001 to 1]
    #[arg(long)]
    r_grid: Option<FractionGrid>,
    /// Predict exactly the cells measured in this trial CSV.
    #[arg(long, value_name = "CSV", conflicts_with_all = ["k_grid", "r_grid"])]
    like: Option<PathBuf>,
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
}

pub fn run(a: PredictArgs) -> Result<()> {
    let profile = DeviceProfile::from_json(&output::read_text(&a.profile)?)?;
    let cells = match &a.like {
        Some(path) => {
            let ops = a.op.kinds();
            let trials = read_trials_csv(output::open(path)?)?;
            cells_from_trials(&trials)
                .into_iter()
                .filter(|c| ops.contains(&c.op))
                .collect()
        }
        None => {
            let ks = a.k_grid.as_ref().map_or_else(
                || {
                    (0..32)
                        .map(|i| 1u32 << i)
                        .take_while(|&k| k <= profile.mqssd.k_max())
                        .collect()
                },
                |g| g.0.clone(),
            );
            let fractions = a.r_grid.as_ref().map_or_else(default_r_fractions, |g| g.0.clone());
            cartesian_cells(&a.op.kinds(), &ks, &fractions)
        }
    };
    let rows = predict_cells(&profile, &cells)?;
    write_predictions_csv(output::create(&a.out)?, &rows)?;
    println!("{} predictions for {} cells -> {}", rows.len(), cells.len(), a.out.display());
    Ok(())
}
