use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::{ArgAction, Args, Subcommand};
use mqssd_core::lsm::{
    cost_grid, fit_scalar, query_cost, simulate_data_movement, sl_query_cost, stats_rows,
    write_rows_csv, CostRow, Fanout, LsmLayout, SimConfig,
};
use mqssd_core::DeviceProfile;

use crate::args::{ByteSize, KGrid};
use crate::{output, UsageError};

#[derive(Debug, Subcommand)]
pub enum LsmCommand {
    /// Insert, query and scan costs over (F, k), plus a single-level column.
    Costs(CostsArgs),
    /// Simulate leveled compaction and fit files touched against F.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct CostsArgs {
    #[arg(long, value_name = "JSON")]
    profile: PathBuf,
    /// Base layout JSON; the flags below override its fields.
    #[arg(long, value_name = "JSON")]
    layout: Option<PathBuf>,
    #[arg(long, default_value = "2,4,8,16,32")]
    fanouts: KGrid,
    /// SST file size T [default: 64MiB].
    #[arg(long)]
    file_size: Option<ByteSize>,
    /// L0 file count C [default: 8].
    #[arg(long)]
    l0_files: Option<u32>,
    /// Block size B' [default: 4KiB].
    #[arg(long)]
    block_size: Option<ByteSize>,
    /// Working set N [default: 128GiB].
    #[arg(long)]
    working_set: Option<ByteSize>,
    /// [default: 128]
    #[arg(long)]
    entry_size: Option<ByteSize>,
    #[arg(long, default_value = "1:32:2")]
    k_grid: KGrid,
    /// Bytes read by the scan metric.
    #[arg(long, default_value = "1MiB")]
    scan_bytes: ByteSize,
    /// Measured `(F,k,metric,value)` rows; fits one multiplier per metric.
    #[arg(long, value_name = "CSV")]
    measured: Option<PathBuf>,
    #[arg(long, default_value = "lsm_costs.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `{n_keys, t_keys, c, f_grid, seed}`; the flags below override it.
    #[arg(long, value_name = "JSON")]
    sim_config: Option<PathBuf>,
    /// [default: 1048576]
    #[arg(long)]
    n_keys: Option<u64>,
    /// Keys per file [default: 1024].
    #[arg(long)]
    t_keys: Option<u64>,
    /// L0 file count [default: 4].
    #[arg(long)]
    c: Option<u32>,
    /// [default: 2,4,8,16]
    #[arg(long)]
    f_grid: Option<KGrid>,
    /// `MQSSD_SEED` overrides it.
    #[arg(long)]
    seed: Option<u64>,
    /// Check conservation, ordering and victim optimality on every compaction.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", require_equals = true, default_value = "false")]
    verify: bool,
    #[arg(long, default_value = "lsm_sim.csv")]
    out: PathBuf,
}

pub fn run(cmd: LsmCommand) -> Result<()> {
    match cmd {
        LsmCommand::Costs(a) => costs(a),
        LsmCommand::Simulate(a) => simulate(a),
    }
}

fn base_layout(a: &CostsArgs) -> Result<LsmLayout> {
    let mut layout = match &a.layout {
        Some(path) => serde_json::from_str::<LsmLayout>(&output::read_text(path)?)?,
        None => LsmLayout {
            fanout: Fanout::Leveled(8),
            file_size_bytes: 64 << 20,
            l0_file_count: 8,
            block_size_bytes: 4 << 10,
            working_set_bytes: 128 << 30,
            entry_size_bytes: 128,
        },
    };
    if let Some(v) = a.file_size {
        layout.file_size_bytes = v.0;
    }
    if let Some(v) = a.l0_files {
        layout.l0_file_count = v;
    }
    if let Some(v) = a.block_size {
        layout.block_size_bytes = v.0;
    }
    if let Some(v) = a.working_set {
        layout.working_set_bytes = v.0;
    }
    if let Some(v) = a.entry_size {
        layout.entry_size_bytes = v.0;
    }
    if layout.l0_file_count == 0 {
        return Err(UsageError("the base layout needs C >= 1; the single-level column is added automatically".into()).into());
    }
    if let Fanout::SingleLevel = layout.fanout {
        layout.fanout = Fanout::Leveled(8);
    }
    layout.validate()?;
    Ok(layout)
}

fn costs(a: CostsArgs) -> Result<()> {
    let profile = DeviceProfile::from_json(&output::read_text(&a.profile)?)?;
    let mq = &profile.mqssd;
    let base = base_layout(&a)?;
    let mut layouts = a
        .fanouts
        .0
        .iter()
        .map(|&f| base.with_fanout(Fanout::Leveled(f)))
        .collect::<mqssd_core::Result<Vec<_>>>()?;
    layouts.push(base.with_fanout(Fanout::SingleLevel)?);

    let mut rows = cost_grid(mq, &layouts, &a.k_grid.0, a.scan_bytes.0)?;
    if let Some(path) = &a.measured {
        rows.extend(fit_measured(&rows, path)?);
    }
    write_rows_csv(output::create(&a.out)?, &rows)?;

    let f8 = base.with_fanout(Fanout::Leveled(8))?;
    let single = base.with_fanout(Fanout::SingleLevel)?;
    println!(
        "point query cost (us): single level vs leveled F=8, C={}",
        f8.l0_file_count
    );
    println!("{:>5} {:>14} {:>14} {:>8}", "k", "single", "F=8", "ratio");
    for &k in &a.k_grid.0 {
        let s = sl_query_cost(mq, k, &single)?;
        let l = query_cost(&f8, mq, k)?;
        println!("{k:>5} {s:>14.3} {l:>14.3} {:>7.2}x", l / s);
    }
    println!("{} rows -> {}", rows.len(), a.out.display());
    Ok(())
}

/// One least-squares multiplier per measured metric, applied to the
/// matching predictions.
fn fit_measured(predicted: &[CostRow], path: &std::path::Path) -> Result<Vec<CostRow>> {
    let mut reader = csv::Reader::from_reader(output::open(path)?);
    let measured: Vec<CostRow> = reader.deserialize().collect::<Result<_, _>>()?;
    let mut by_metric: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for m in &measured {
        let p = predicted
            .iter()
            .find(|p| p.fanout == m.fanout && p.k == m.k && p.metric == m.metric)
            .ok_or_else(|| {
                mqssd_core::Error::GridMismatch(format!(
                    "no prediction for F={} k={:?} metric={}",
                    m.fanout, m.k, m.metric
                ))
            })?;
        let e = by_metric.entry(m.metric.as_str()).or_default();
        e.0.push(p.value);
        e.1.push(m.value);
    }
    let mut out = Vec::new();
    for (metric, (p, m)) in &by_metric {
        let c = fit_scalar(p, m)?;
        println!("fitted multiplier for {metric}: {c:.6e}");
        out.extend(
            predicted
                .iter()
                .filter(|r| r.metric == *metric)
                .map(|r| CostRow {
                    metric: format!("{metric}_fitted"),
                    value: c * r.value,
                    ..r.clone()
                }),
        );
        out.push(CostRow {
            fanout: "all".into(),
            k: None,
            metric: format!("{metric}_multiplier"),
            value: c,
        });
    }
    Ok(out)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut config = match &a.sim_config {
        Some(path) => serde_json::from_str::<SimConfig>(&output::read_text(path)?)?,
        None => SimConfig {
            n_keys: 1 << 20,
            t_keys: 1024,
            c: 4,
            f_grid: vec![2, 4, 8, 16],
            seed: 0x6c_736d,
        },
    };
    if let Some(v) = a.n_keys {
        config.n_keys = v;
    }
    if let Some(v) = a.t_keys {
        config.t_keys = v;
    }
    if let Some(v) = a.c {
        config.c = v;
    }
    if let Some(g) = &a.f_grid {
        config.f_grid = g.0.clone();
    }
    config.seed = output::seed(a.seed, config.seed)?;

    let report = simulate_data_movement(&config, a.verify)?;
    write_rows_csv(output::create(&a.out)?, &stats_rows(&report))?;

    println!("{:>4} {:>12} {:>12} {:>12} {:>10}", "F", "compactions", "mean L0", "mean deep", "var deep");
    for s in &report.per_fanout {
        let l0 = s.transitions.first().map_or(f64::NAN, |t| t.mean);
        println!(
            "{:>4} {:>12} {:>12.3} {:>12.3} {:>10.3}",
            s.fanout, s.compaction_count, l0, s.deep_mean, s.deep_variance
        );
    }
    if let Some(fit) = &report.fit {
        println!(
            "files touched ~ {:.4}·F + {:.4}  (R² = {:.4})",
            fit.slope, fit.intercept, fit.r_squared
        );
    }
    println!("-> {}", a.out.display());
    Ok(())
}
