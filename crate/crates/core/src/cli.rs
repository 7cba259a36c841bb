//! Command-line front end: `train`, `sweep`, `oracle` and `report`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, RunConfig};
use crate::error::{QsdError, Result};
use crate::learner::{run_batch_with_workers, run_seed, run_training};
use crate::metrics::{
    average_distance_series, average_reward_series, success_plateau, success_rate_series,
    total_distance_series,
};
use crate::oracle::exact_min_distance;
use crate::output::{scale_dir, series_csv, sig6, table_csv, unix_now, OutputSet, Timestamps};
use crate::report::{read_sweep_dir, render_report, PublishedTable};
use crate::sweep::{run_sweep_with_workers, tail_mean, SweepReport};

#[derive(Debug, Parser)]
#[command(name = "qsd", version, about = "Q-learning with a scaled distance penalty on a grid table-cleaning task")]
pub struct Cli {
    /// JSON run config; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (must be absent or empty).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Size of the worker pool used for independent runs.
    #[arg(long, global = true, env = "QSD_WORKERS", value_name = "N")]
    pub workers: Option<usize>,
    /// Record wall-clock timestamps in the manifest.
    #[arg(long, global = true)]
    pub stamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a batch of independent runs at one scale and write the curves.
    Train(TrainArgs),
    /// Train at every scale of a list, then normalise and select.
    Sweep(SweepArgs),
    /// Shortest open path through every free cell.
    Oracle(OracleArgs),
    /// Compare a sweep directory with a published table.
    Report(ReportArgs),
}

/// Per-field overrides of the run config.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Preset layout: 2 (empty), 3 (centre object) or 4 (central 2x2 block).
    #[arg(long, value_name = "SIDE")]
    pub grid: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "max-iterations")]
    pub max_iterations: Option<usize>,
    /// Cell (0-based) the arm rests on before the first action.
    #[arg(long = "home-cell")]
    pub home_cell: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, allow_hyphen_values = true)]
    pub scale: Option<f64>,
    /// Also write the Q-table of the first run as `qtable.csv`.
    #[arg(long = "export-qtable")]
    pub export_qtable: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Comma-separated scaling factors; must include 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub scales: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_name = "SIDE")]
    pub grid: Option<usize>,
    /// Enumerate permutations even above 10 free cells.
    #[arg(long)]
    pub force: bool,
    /// Cell (0-based) the arm starts on; its first move then counts.
    #[arg(long, value_name = "CELL")]
    pub start: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "sweep-dir", value_name = "DIR")]
    pub sweep_dir: PathBuf,
    /// III, IV, V or VI.
    #[arg(long = "published-table", visible_alias = "paper-table", value_name = "TABLE")]
    pub table: PublishedTable,
}

fn load_config(path: Option<&Path>, grid: Option<usize>) -> Result<RunConfig> {
    let mut cfg = match (path, grid) {
        (Some(p), _) => parse_config(p)?,
        (None, Some(side)) => RunConfig::preset(side)?,
        (None, None) => {
            return Err(QsdError::Input(
                "no environment given; pass --grid SIDE or --config PATH".into(),
            ))
        }
    };
    if let (Some(_), Some(side)) = (path, grid) {
        cfg.set_grid(side)?;
    }
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, o: &Overrides, seed: Option<u64>) {
    if let Some(v) = o.runs {
        cfg.runs = v;
    }
    if let Some(v) = o.episodes {
        cfg.episodes_per_run = v;
    }
    if let Some(v) = o.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = o.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = o.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = o.max_iterations {
        cfg.max_iterations = Some(v);
    }
    if o.home_cell.is_some() {
        cfg.home_cell = o.home_cell;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
}

fn require_out(out: Option<&Path>) -> Result<&Path> {
    out.ok_or_else(|| QsdError::Input("missing --out DIR".into()))
}

fn snapshot(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn config_file(cfg: &RunConfig) -> String {
    let mut text = cfg.to_json();
    text.push('\n');
    text
}

/// Runs one parsed command line. Text meant for the terminal is returned
/// rather than printed.
pub fn run(cli: Cli) -> Result<String> {
    let started = unix_now();
    let stamp = |on: bool| on.then(|| Timestamps { started_unix: started, finished_unix: unix_now() });
    match cli.command {
        Command::Train(args) => {
            let mut cfg = load_config(cli.config.as_deref(), args.overrides.grid)?;
            apply(&mut cfg, &args.overrides, cli.seed);
            if let Some(s) = args.scale {
                cfg.scale = s;
            }
            cfg.validate()?;
            let out = require_out(cli.out.as_deref())?;
            let world = cfg.world()?;
            let learner = cfg.learner::<f64>()?;
            let batch = run_batch_with_workers(&world, &learner, cli.workers)?;
            let success = success_rate_series(&batch);
            let mut files = OutputSet::new();
            files.add("config.json", config_file(&cfg));
            files.add("reward.csv", series_csv(&average_reward_series(&batch)));
            files.add("success.csv", series_csv(&success));
            files.add("avg_distance.csv", series_csv(&average_distance_series(&batch)));
            files.add("total_distance.csv", series_csv(&total_distance_series(&batch)));
            if args.export_qtable {
                // the batch keeps no tables; run 0 is replayed from its seed
                let first = learner.with_seed(run_seed(learner.seed, 0));
                let outcome = run_training(&world, &first)?;
                files.add("qtable.csv", outcome.table.to_csv());
            }
            files.commit(out, "train", Some(cfg.seed), snapshot(&cfg), stamp(cli.stamp))?;
            let (max, from) = success_plateau(&success, cfg.plateau_band_pp);
            Ok(format!(
                "trained {} runs x {} episodes at scale {}; peak success {}% from episode {}; wrote {}\n",
                cfg.runs,
                cfg.episodes_per_run,
                sig6(cfg.scale),
                sig6(max),
                from,
                out.display()
            ))
        }
        Command::Sweep(args) => {
            let mut cfg = load_config(cli.config.as_deref(), args.overrides.grid)?;
            apply(&mut cfg, &args.overrides, cli.seed);
            if let Some(s) = &args.scales {
                cfg.scales = Some(s.clone());
            }
            cfg.validate()?;
            let out = require_out(cli.out.as_deref())?;
            let world = cfg.world()?;
            let report = run_sweep_with_workers(
                &world,
                &cfg.learner::<f64>()?,
                &cfg.scale_list(),
                &cfg.sweep_options(),
                cli.workers,
            )?;
            let files = sweep_files(&cfg, &report);
            files.commit(out, "sweep", Some(cfg.seed), snapshot(&cfg), stamp(cli.stamp))?;
            let mut msg = format!(
                "swept {} scales; selected scale {}",
                report.scales.len(),
                sig6(report.selected_scale)
            );
            if report.selection_fallback {
                msg.push_str(" (no scale passed the success filter; baseline kept)");
            }
            msg.push_str(&format!("; wrote {}\n", out.display()));
            Ok(msg)
        }
        Command::Oracle(args) => {
            let world = match (cli.config.as_deref(), args.grid) {
                (_, Some(side)) => RunConfig::preset(side)?.world()?,
                (Some(p), None) => parse_config(p)?.world()?,
                (None, None) => {
                    return Err(QsdError::Input(
                        "no environment given; pass --grid SIDE or --config PATH".into(),
                    ))
                }
            };
            let result = exact_min_distance(&world, args.start, args.force)?;
            let json = serde_json::to_string_pretty(&result).expect("serializable") + "\n";
            if let Some(out) = cli.out.as_deref() {
                let mut files = OutputSet::new();
                files.add("oracle.json", json.clone());
                let spec = crate::env::GridSpec::from(&world);
                let config = serde_json::json!({ "side": spec.side, "object_cells": spec.object_cells,
                    "start": args.start, "force": args.force });
                files.commit(out, "oracle", None, config, stamp(cli.stamp))?;
            }
            Ok(json)
        }
        Command::Report(args) => {
            let summary = read_sweep_dir(&args.sweep_dir)?;
            let text = render_report(&summary, args.table)?;
            if let Some(out) = cli.out.as_deref() {
                let mut files = OutputSet::new();
                files.add("report.txt", text.clone());
                let config = serde_json::json!({ "sweep_dir": args.sweep_dir.display().to_string(),
                    "table": args.table.name() });
                files.commit(out, "report", Some(summary.config.seed), config, stamp(cli.stamp))?;
            }
            Ok(text)
        }
    }
}

/// Every file of a sweep directory except the manifest.
pub fn sweep_files(cfg: &RunConfig, report: &SweepReport<f64>) -> OutputSet {
    let mut files = OutputSet::new();
    files.add("config.json", config_file(cfg));
    let tail = report.options.stats.tail_fraction;
    files.add(
        "scale_stats.csv",
        table_csv(
            &["scale", "total_distance", "min_distance", "below_avg_count", "max_success", "episode_of_max"],
            report
                .stats
                .iter()
                .map(|s| {
                    vec![
                        sig6(s.scale),
                        sig6(s.total_distance),
                        sig6(s.min_distance),
                        s.below_avg_episode_count.to_string(),
                        sig6(s.max_success_rate),
                        s.episode_of_max_success.to_string(),
                    ]
                })
                .collect(),
        ),
    );
    files.add(
        "normalized.csv",
        table_csv(
            &["scale", "norm_total", "norm_min", "norm_count"],
            (0..report.scales.len())
                .map(|i| {
                    vec![
                        sig6(report.scales[i]),
                        sig6(report.normalized.total[i]),
                        sig6(report.normalized.min[i]),
                        sig6(report.normalized.count[i]),
                    ]
                })
                .collect(),
        ),
    );
    files.add(
        "distance_modes.csv",
        table_csv(
            &[
                "scale",
                "tail_mean",
                "full_mean",
                "raw_sum",
                "below_avg_count",
                "stays_below_from",
                "avg_distance_tail",
            ],
            report
                .readings
                .iter()
                .zip(&report.series)
                .map(|(r, s)| {
                    vec![
                        sig6(r.scale),
                        sig6(r.tail_mean),
                        sig6(r.full_mean),
                        sig6(r.raw_sum),
                        r.below_avg_count.to_string(),
                        r.stays_below_from.map(|v| v.to_string()).unwrap_or_default(),
                        sig6(tail_mean(&s.avg_distance, tail)),
                    ]
                })
                .collect(),
        ),
    );
    files.add_json(
        "selection.json",
        &serde_json::json!({
            "selected_scale": report.selected_scale,
            "criterion": format!(
                "argmin of normalized {} total distance + normalized {} count",
                report.options.stats.total_distance_mode.name(),
                report.options.selection.count_reading.name()
            ),
            "filter_threshold_pp": report.options.selection.filter_threshold_pp,
            "fallback_to_baseline": report.selection_fallback,
        }),
    );
    for s in &report.series {
        let dir = scale_dir(s.scale);
        files.add(format!("{dir}/reward.csv"), series_csv(&s.reward));
        files.add(format!("{dir}/success.csv"), series_csv(&s.success));
        files.add(format!("{dir}/avg_distance.csv"), series_csv(&s.avg_distance));
        files.add(format!("{dir}/total_distance.csv"), series_csv(&s.total_distance));
    }
    files
}
