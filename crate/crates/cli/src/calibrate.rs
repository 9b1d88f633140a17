use std::path::PathBuf;

use anyhow::Result;
use clap::{ArgAction, Args};
use mqssd_core::bench::{default_r_fractions, read_trials_csv};
use mqssd_core::calibration::{
    calibrate_from_cost_points, calibrate_profile, read_cost_points_csv, CalibrationConfig,
    CalibrationReport, CostPoint,
};
use mqssd_core::OpKind;

use crate::args::{ByteSize, FractionGrid};
use crate::{output, UsageError};

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Trial CSV produced by `bench`.
    #[arg(long, value_name = "CSV", conflicts_with = "per_k")]
    trials: Option<PathBuf>,
    /// Tabulated per-k costs (`op,k,setup,transfer`); skips the regression
    /// stage and goes straight to the rational fits.
    #[arg(long, value_name = "CSV")]
    per_k: Option<PathBuf>,
    #[arg(long, default_value = "profile.json")]
    out: PathBuf,
    /// Fit report [default: `<out stem>.fit_report.json`].
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value = "4096")]
    page_size: ByteSize,
    /// Memory size M [default: half the per-worker bytes].
    #[arg(long)]
    memory: Option<ByteSize>,
    /// PDAM parallelism P.
    #[arg(long, default_value_t = 8)]
    channels: u32,
    /// Allow fitted cost functions to rise with k.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", require_equals = true, default_value = "false")]
    free_shape: bool,
    /// Per-worker bytes N, used with --per-k.
    #[arg(long, default_value = "256MiB")]
    per_worker: ByteSize,
    /// r fractions the DAM/PDAM page cost averages over, used with --per-k.
    #[arg(long)]
    r_grid: Option<FractionGrid>,
}

pub fn run(a: CalibrateArgs) -> Result<()> {
    let mut config = CalibrationConfig {
        device_label: a.label.clone(),
        page_size: a.page_size.0,
        memory_bytes: a.memory.map(|m| m.0),
        channels: a.channels,
        nonincreasing: !a.free_shape,
        ..CalibrationConfig::default()
    };

    let calibration = match (&a.trials, &a.per_k) {
        (Some(path), None) => {
            config.source = path.display().to_string();
            let trials = read_trials_csv(output::open(path)?)?;
            let cal = calibrate_profile(&trials, &config)?;
            print_trial_table(&cal.report);
            cal
        }
        (None, Some(path)) => {
            config.source = path.display().to_string();
            let points = read_cost_points_csv(output::open(path)?)?;
            let fractions = a.r_grid.as_ref().map_or_else(default_r_fractions, |g| g.0.clone());
            let cal = calibrate_from_cost_points(&points, a.per_worker.0, &fractions, &config)?;
            print_point_table(&points);
            cal
        }
        _ => return Err(UsageError("give exactly one of --trials or --per-k".into()).into()),
    };

    println!();
    println!("{:<6} {:>8} {:>13} {:>10} {:>6}", "fn", "degrees", "max |resid|", "converged", "iters");
    for f in &calibration.report.fits {
        println!(
            "{:<6} {:>8} {:>12.3}% {:>10} {:>6}",
            f.function,
            format!("{}/{}", f.fitted_degrees.0, f.fitted_degrees.1),
            100.0 * f.max_abs_residual(),
            f.converged,
            f.iterations
        );
    }

    output::write_text(&a.out, &calibration.profile.to_json()?)?;
    let report = a.report.clone().unwrap_or_else(|| output::sidecar(&a.out, "fit_report.json"));
    output::write_json(&report, &calibration.report)?;
    println!("profile -> {}, report -> {}", a.out.display(), report.display());
    Ok(())
}

fn print_trial_table(report: &CalibrationReport) {
    println!(
        "{:>5} {:>12} {:>10} {:>7} {:>12} {:>10} {:>7}",
        "k", "s(k)", "beta(k)", "R2", "t(k)", "alpha(k)", "R2"
    );
    let mut ks: Vec<u32> = report.per_k.iter().map(|c| c.k).collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        let cell = |op| {
            report.per_k_for(op, k).map_or(
                format!("{:>12} {:>10} {:>7}", "-", "-", "-"),
                |c| {
                    let flag = if c.slope_clamped || c.zero_variance { "*" } else { " " };
                    format!("{:>12.4e} {:>10.4} {:>6.3}{flag}", c.setup, c.transfer, c.r_squared)
                },
            )
        };
        println!("{k:>5} {} {}", cell(OpKind::Write), cell(OpKind::Read));
    }
    if report.per_k.iter().any(|c| c.slope_clamped || c.zero_variance) {
        println!("* setup clamped to zero or no variance in elapsed time");
    }
}

fn print_point_table(points: &[CostPoint]) {
    println!("{:>5} {:>12} {:>10} {:>12} {:>10}", "k", "s(k)", "beta(k)", "t(k)", "alpha(k)");
    let mut ks: Vec<u32> = points.iter().map(|p| p.k).collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        let cell = |op| {
            points
                .iter()
                .find(|p| p.op == op && p.k == k)
                .map_or(format!("{:>12} {:>10}", "-", "-"), |p| {
                    format!("{:>12.4e} {:>10.4}", p.setup, p.transfer)
                })
        };
        println!("{k:>5} {} {}", cell(OpKind::Write), cell(OpKind::Read));
    }
}
