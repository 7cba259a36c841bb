//! Side-by-side comparison of a finished sweep with the published tables.
//!
//! The published values are reference data for delta reporting only. The
//! hyperparameters behind them were never stated, so no test treats them
//! as exact ground truth (apart from running the selection rule on them).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{QsdError, Result};
use crate::metrics::ScaleStats;
use crate::output::sig6;
use crate::sweep::{select_scale, CountReading};

/// Published success row: scale, maximum success (%), episode from which
/// it holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedSuccess {
    pub scale: f64,
    pub max_success_pct: f64,
    pub episode: usize,
}

/// Published distance row: scale, total distance, minimum distance and
/// episode count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedDistance {
    pub scale: f64,
    pub total: f64,
    pub min: f64,
    pub count: usize,
}

const fn ps(scale: f64, max_success_pct: f64, episode: usize) -> PublishedSuccess {
    PublishedSuccess { scale, max_success_pct, episode }
}

const fn pd(scale: f64, total: f64, min: f64, count: usize) -> PublishedDistance {
    PublishedDistance { scale, total, min, count }
}

/// Published values, table III (3×3 success).
pub const SUCCESS_3X3: [PublishedSuccess; 7] = [
    ps(0.0, 86.0, 81),
    ps(0.04, 86.0, 70),
    ps(0.08, 86.0, 83),
    ps(0.10, 84.0, 79),
    ps(0.15, 79.0, 85),
    ps(0.20, 68.0, 83),
    ps(0.24, 56.0, 89),
];

/// Published values, table IV (4×4 success).
pub const SUCCESS_4X4: [PublishedSuccess; 6] = [
    ps(0.0, 58.0, 88),
    ps(0.04, 57.0, 88),
    ps(0.06, 59.0, 81),
    ps(0.08, 56.0, 83),
    ps(0.10, 47.0, 89),
    ps(0.12, 35.0, 91),
];

/// Published values, table V (3×3 distance statistics).
pub const DISTANCE_3X3: [PublishedDistance; 7] = [
    pd(0.0, 15.45, 14.19, 33),
    pd(0.04, 15.41, 14.19, 31),
    pd(0.08, 15.16, 13.87, 31),
    pd(0.10, 15.08, 13.30, 22),
    pd(0.15, 17.07, 12.61, 33),
    pd(0.20, 19.20, 14.03, 38),
    pd(0.24, 21.88, 15.65, 43),
];

/// Published values, table VI (4×4 distance statistics).
pub const DISTANCE_4X4: [PublishedDistance; 6] = [
    pd(0.0, 39.00, 32.19, 42),
    pd(0.04, 35.77, 32.00, 39),
    pd(0.06, 35.56, 31.94, 37),
    pd(0.08, 35.04, 31.20, 34),
    pd(0.10, 39.49, 30.75, 39),
    pd(0.12, 48.03, 32.42, 55),
];

/// Published claims for the drop in average distance moved, in percent.
pub const CLAIMED_DISTANCE_DROP_3X3: f64 = 8.61;
pub const CLAIMED_DISTANCE_DROP_4X4: f64 = 6.7;

/// Published scale picks.
pub const PUBLISHED_PICK_3X3: f64 = 0.10;
pub const PUBLISHED_PICK_4X4: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PublishedTable {
    III,
    IV,
    V,
    VI,
}

impl PublishedTable {
    /// Grid side the table belongs to.
    pub fn side(self) -> usize {
        match self {
            PublishedTable::III | PublishedTable::V => 3,
            PublishedTable::IV | PublishedTable::VI => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PublishedTable::III => "III",
            PublishedTable::IV => "IV",
            PublishedTable::V => "V",
            PublishedTable::VI => "VI",
        }
    }
}

impl FromStr for PublishedTable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "III" | "3" => Ok(PublishedTable::III),
            "IV" | "4" => Ok(PublishedTable::IV),
            "V" | "5" => Ok(PublishedTable::V),
            "VI" | "6" => Ok(PublishedTable::VI),
            other => Err(format!("unknown table {other:?}; expected III, IV, V or VI")),
        }
    }
}

fn success_table(side: usize) -> Result<&'static [PublishedSuccess]> {
    match side {
        3 => Ok(&SUCCESS_3X3),
        4 => Ok(&SUCCESS_4X4),
        _ => Err(QsdError::Input(format!("no published values for a {side}x{side} grid"))),
    }
}

fn distance_table(side: usize) -> Result<&'static [PublishedDistance]> {
    match side {
        3 => Ok(&DISTANCE_3X3),
        4 => Ok(&DISTANCE_4X4),
        _ => Err(QsdError::Input(format!("no published values for a {side}x{side} grid"))),
    }
}

/// Published rows of one grid merged into [`ScaleStats`].
pub fn published_scale_stats(side: usize) -> Result<Vec<ScaleStats<f64>>> {
    let success = success_table(side)?;
    distance_table(side)?
        .iter()
        .map(|d| {
            let s = success
                .iter()
                .find(|s| s.scale == d.scale)
                .ok_or_else(|| QsdError::Input(format!("no published success row for scale {}", d.scale)))?;
            Ok(ScaleStats {
                scale: d.scale,
                total_distance: d.total,
                min_distance: d.min,
                below_avg_episode_count: d.count,
                max_success_rate: s.max_success_pct,
                episode_of_max_success: s.episode,
            })
        })
        .collect()
}

/// The selection rule applied to the published rows of one grid.
pub fn select_on_published(side: usize, filter_threshold_pp: f64) -> Result<f64> {
    let stats = published_scale_stats(side)?;
    let counts: Vec<f64> = stats.iter().map(|s| s.below_avg_episode_count as f64).collect();
    select_scale(&stats, &counts, filter_threshold_pp)
}

/// Relative total-distance change between the baseline and the published
/// pick, in percent.
pub fn published_total_delta_pct(side: usize) -> Result<f64> {
    let rows = distance_table(side)?;
    let pick = if side == 3 { PUBLISHED_PICK_3X3 } else { PUBLISHED_PICK_4X4 };
    let base = rows[0].total;
    let at = rows.iter().find(|r| r.scale == pick).expect("pick is tabulated").total;
    Ok(100.0 * (base - at) / base)
}

/// One scale of a sweep directory, read back from its CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scale: f64,
    pub total_distance: f64,
    pub min_distance: f64,
    pub below_avg_count: usize,
    pub max_success: f64,
    pub episode_of_max: usize,
    pub tail_mean: f64,
    pub full_mean: f64,
    pub raw_sum: f64,
    pub stays_below_from: Option<usize>,
    pub avg_distance_tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub config: RunConfig,
    pub rows: Vec<SweepRow>,
    pub selected_scale: f64,
}

#[derive(Debug, Deserialize)]
struct StatsRecord {
    scale: f64,
    total_distance: f64,
    min_distance: f64,
    below_avg_count: usize,
    max_success: f64,
    episode_of_max: usize,
}

#[derive(Debug, Deserialize)]
struct ModesRecord {
    scale: f64,
    tail_mean: f64,
    full_mean: f64,
    raw_sum: f64,
    #[allow(dead_code)]
    below_avg_count: usize,
    stays_below_from: Option<usize>,
    avg_distance_tail: f64,
}

#[derive(Debug, Deserialize)]
struct SelectionRecord {
    selected_scale: f64,
}

fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| QsdError::csv(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| QsdError::csv(path, e))
}

/// Loads the summary files written by the `sweep` command.
pub fn read_sweep_dir(dir: &Path) -> Result<SweepSummary> {
    let config = crate::config::parse_config(&dir.join("config.json"))?;
    let stats: Vec<StatsRecord> = read_csv(&dir.join("scale_stats.csv"))?;
    let modes: Vec<ModesRecord> = read_csv(&dir.join("distance_modes.csv"))?;
    let sel_path = dir.join("selection.json");
    let sel_text = std::fs::read_to_string(&sel_path).map_err(|e| QsdError::io(&sel_path, e))?;
    let selection: SelectionRecord = serde_json::from_str(&sel_text).map_err(|e| QsdError::json(&sel_path, e))?;
    if stats.len() != modes.len() {
        return Err(QsdError::Input(format!(
            "{}: scale_stats.csv and distance_modes.csv disagree on the number of scales",
            dir.display()
        )));
    }
    let rows = stats
        .into_iter()
        .zip(modes)
        .map(|(s, m)| {
            if s.scale != m.scale {
                return Err(QsdError::Input(format!(
                    "{}: scale {} in scale_stats.csv meets {} in distance_modes.csv",
                    dir.display(),
                    s.scale,
                    m.scale
                )));
            }
            Ok(SweepRow {
                scale: s.scale,
                total_distance: s.total_distance,
                min_distance: s.min_distance,
                below_avg_count: s.below_avg_count,
                max_success: s.max_success,
                episode_of_max: s.episode_of_max,
                tail_mean: m.tail_mean,
                full_mean: m.full_mean,
                raw_sum: m.raw_sum,
                stays_below_from: m.stays_below_from,
                avg_distance_tail: m.avg_distance_tail,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepSummary {
        config,
        rows,
        selected_scale: selection.selected_scale,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_else(|| "-".into())
}

fn delta(run: Option<f64>, published: Option<f64>) -> String {
    match (run, published) {
        (Some(a), Some(b)) => {
            let d = a - b;
            if d > 0.0 { format!("+{}", sig6(d)) } else { sig6(d) }
        }
        _ => "-".into(),
    }
}

fn push_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
}

/// Scales present in either the sweep or the published table, ascending.
fn union_scales(summary: &SweepSummary, published: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = summary.rows.iter().map(|r| r.scale).chain(published.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    all
}

fn find<R>(rows: &[R], scale: f64, key: impl Fn(&R) -> f64) -> Option<&R> {
    rows.iter().find(|r| (key(r) - scale).abs() < 1e-9)
}

/// Renders the comparison for one published table.
pub fn render_report(summary: &SweepSummary, table: PublishedTable) -> Result<String> {
    let side = table.side();
    let mut out = String::new();
    let cfg = &summary.config;
    let _ = writeln!(
        out,
        "sweep: {}x{} grid, objects {:?}, {} runs x {} episodes, seed {}",
        cfg.side, cfg.side, cfg.object_cells, cfg.runs, cfg.episodes_per_run, cfg.seed
    );
    let _ = writeln!(
        out,
        "learner: alpha {} gamma {} epsilon {} max_iterations {}",
        cfg.alpha,
        cfg.gamma,
        cfg.epsilon,
        cfg.max_iterations.unwrap_or_default()
    );
    if cfg.side != side {
        let _ = writeln!(
            out,
            "note: table {} describes the {side}x{side} grid but this sweep ran on {}x{}",
            table.name(),
            cfg.side,
            cfg.side
        );
    }
    let _ = writeln!(out);

    match table {
        PublishedTable::III | PublishedTable::IV => {
            let published = success_table(side)?;
            let _ = writeln!(out, "table {}: maximum success rate, published values vs this run", table.name());
            let scales = union_scales(summary, &published.iter().map(|p| p.scale).collect::<Vec<_>>());
            let rows: Vec<Vec<String>> = scales
                .iter()
                .map(|&s| {
                    let r = find(&summary.rows, s, |r| r.scale);
                    let p = find(published, s, |p| p.scale);
                    let (rs, ps) = (r.map(|r| r.max_success), p.map(|p| p.max_success_pct));
                    let (re, pe) = (r.map(|r| r.episode_of_max as f64), p.map(|p| p.episode as f64));
                    vec![sig6(s), cell(rs), cell(ps), delta(rs, ps), cell(re), cell(pe), delta(re, pe)]
                })
                .collect();
            push_table(
                &mut out,
                &["scale", "success", "published", "delta", "episode", "published", "delta"],
                &rows,
            );
        }
        PublishedTable::V | PublishedTable::VI => {
            let published = distance_table(side)?;
            let reading = cfg.count_reading;
            let _ = writeln!(
                out,
                "table {}: distance statistics, published values vs this run (total = {}, count = {})",
                table.name(),
                cfg.total_distance_mode.name(),
                reading.name()
            );
            let scales = union_scales(summary, &published.iter().map(|p| p.scale).collect::<Vec<_>>());
            let rows: Vec<Vec<String>> = scales
                .iter()
                .map(|&s| {
                    let r = find(&summary.rows, s, |r| r.scale);
                    let p = find(published, s, |p| p.scale);
                    let (rt, pt) = (r.map(|r| r.total_distance), p.map(|p| p.total));
                    let (rm, pm) = (r.map(|r| r.min_distance), p.map(|p| p.min));
                    let rc = r.and_then(|r| match reading {
                        CountReading::BelowCount => Some(r.below_avg_count as f64),
                        CountReading::StaysBelowFrom => r.stays_below_from.map(|v| v as f64),
                    });
                    let pc = p.map(|p| p.count as f64);
                    vec![
                        sig6(s),
                        cell(rt),
                        cell(pt),
                        delta(rt, pt),
                        cell(rm),
                        cell(pm),
                        delta(rm, pm),
                        cell(rc),
                        cell(pc),
                        delta(rc, pc),
                    ]
                })
                .collect();
            push_table(
                &mut out,
                &[
                    "scale", "total", "published", "delta", "min", "published", "delta", "count", "published",
                    "delta",
                ],
                &rows,
            );
            let _ = writeln!(out);
            let _ = writeln!(out, "total-distance readings of this run");
            let rows: Vec<Vec<String>> = summary
                .rows
                .iter()
                .map(|r| {
                    vec![
                        sig6(r.scale),
                        sig6(r.tail_mean),
                        sig6(r.full_mean),
                        sig6(r.raw_sum),
                        r.below_avg_count.to_string(),
                        r.stays_below_from.map_or("-".into(), |v| v.to_string()),
                    ]
                })
                .collect();
            push_table(
                &mut out,
                &["scale", "tail_mean", "full_mean", "raw_sum", "below_count", "stays_below_from"],
                &rows,
            );
        }
    }

    let _ = writeln!(out);
    let pick = if side == 3 { PUBLISHED_PICK_3X3 } else { PUBLISHED_PICK_4X4 };
    let claim = if side == 3 { CLAIMED_DISTANCE_DROP_3X3 } else { CLAIMED_DISTANCE_DROP_4X4 };
    let _ = writeln!(
        out,
        "selected scale: {} (published pick {})",
        sig6(summary.selected_scale),
        sig6(pick)
    );
    let base = find(&summary.rows, 0.0, |r| r.scale);
    let sel = find(&summary.rows, summary.selected_scale, |r| r.scale);
    if let (Some(b), Some(s)) = (base, sel) {
        let drop = 100.0 * (b.avg_distance_tail - s.avg_distance_tail) / b.avg_distance_tail;
        let total = 100.0 * (b.total_distance - s.total_distance) / b.total_distance;
        let _ = writeln!(
            out,
            "average distance per action, drop at selected scale vs s=0: {}% (published claim {}%)",
            sig6(drop),
            sig6(claim)
        );
        let _ = writeln!(
            out,
            "total distance, drop at selected scale vs s=0: {}% (published table implies {}%)",
            sig6(total),
            sig6(published_total_delta_pct(side)?)
        );
    }
    Ok(out)
}
