//! Scaling-factor sweeps and selection of the scale at the "dip".
//!
//! Each scale gets one batch with the same base seed (a paired comparison,
//! so the `s = 0` column doubles as the plain Q-learning control). The
//! total-distance and episode-count curves are min-max normalised across
//! scales and the selected scale is the argmin of their sum among scales
//! whose peak success stays within a threshold of the baseline.

use serde::{Deserialize, Serialize};

use crate::env::GridWorld;
use crate::error::{QsdError, Result};
use crate::learner::{run_batch, splitmix64, with_pool, LearnerConfig};
use crate::metrics::{
    average_distance_series, average_reward_series, distance_readings, normalize, scale_stats,
    success_rate_series, total_distance_series, DistanceReadings, ScaleStats, StatsOptions,
};
use crate::scalar::Scalar;

/// Which reading of the episode-count statistic feeds the selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountReading {
    /// Number of episodes whose total distance is below the series mean.
    #[default]
    BelowCount,
    /// First episode from which the series stays below its mean.
    StaysBelowFrom,
}

impl CountReading {
    pub fn name(self) -> &'static str {
        match self {
            CountReading::BelowCount => "below_count",
            CountReading::StaysBelowFrom => "stays_below_from",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionOptions {
    /// Scales whose peak success falls more than this many percentage
    /// points below the `s = 0` baseline are not eligible.
    pub filter_threshold_pp: f64,
    pub count_reading: CountReading,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            filter_threshold_pp: 5.0,
            count_reading: CountReading::BelowCount,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub stats: StatsOptions,
    pub selection: SelectionOptions,
    /// Give every scale its own seed instead of reusing the base seed.
    pub unpaired_seeds: bool,
}

/// Per-episode curves of one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSeries<T> {
    pub scale: T,
    pub reward: Vec<T>,
    pub success: Vec<T>,
    pub avg_distance: Vec<T>,
    pub total_distance: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCurves<T> {
    pub total: Vec<T>,
    pub min: Vec<T>,
    pub count: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport<T> {
    pub scales: Vec<T>,
    pub stats: Vec<ScaleStats<T>>,
    pub readings: Vec<DistanceReadings<T>>,
    pub series: Vec<ScaleSeries<T>>,
    pub normalized: NormalizedCurves<T>,
    pub selected_scale: T,
    /// Set when no scale passed the filter and the baseline was used.
    pub selection_fallback: bool,
    pub options: SweepOptions,
}

fn check_scales<T: Scalar>(scales: &[T]) -> Result<Vec<T>> {
    if scales.is_empty() {
        return Err(QsdError::InvalidConfig("scale list is empty".into()));
    }
    if let Some(bad) = scales.iter().find(|s| **s < T::zero() || !s.is_finite()) {
        return Err(QsdError::InvalidConfig(format!(
            "scaling factors must satisfy s >= 0, got {bad}"
        )));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scales"));
    sorted.dedup();
    if sorted[0] != T::zero() {
        return Err(QsdError::InvalidConfig(
            "scale list must include the s = 0 baseline".into(),
        ));
    }
    Ok(sorted)
}

/// Episode-count values used for selection, one per scale.
pub fn count_values<T: Scalar>(
    stats: &[ScaleStats<T>],
    readings: &[DistanceReadings<T>],
    reading: CountReading,
) -> Vec<T> {
    match reading {
        CountReading::BelowCount => stats
            .iter()
            .map(|s| T::from_count(s.below_avg_episode_count))
            .collect(),
        CountReading::StaysBelowFrom => readings
            .iter()
            // never settling below the mean ranks after the last episode
            .map(|r| T::from_count(r.stays_below_from.unwrap_or(r.episodes + 1)))
            .collect(),
    }
}

/// Filtered argmin of `norm_total + norm_count`; ties go to the smaller scale.
///
/// Returns `Err(EmptySelection)` when nothing survives the filter (only
/// possible without an `s = 0` row); callers fall back to 0.
pub fn select_scale<T: Scalar>(
    stats: &[ScaleStats<T>],
    counts: &[T],
    filter_threshold_pp: f64,
) -> Result<T> {
    let baseline = stats
        .iter()
        .find(|s| s.scale == T::zero())
        .ok_or(QsdError::EmptySelection)?;
    let floor = baseline.max_success_rate - T::lit(filter_threshold_pp);
    let totals: Vec<T> = stats.iter().map(|s| s.total_distance).collect();
    let norm_total = normalize(&totals);
    let norm_count = normalize(counts);
    let mut best: Option<(T, T)> = None;
    for (i, s) in stats.iter().enumerate() {
        if s.max_success_rate < floor {
            continue;
        }
        let score = norm_total[i] + norm_count[i];
        best = match best {
            Some((bs, bscale)) if bs < score || (bs == score && bscale <= s.scale) => {
                Some((bs, bscale))
            }
            _ => Some((score, s.scale)),
        };
    }
    best.map(|(_, scale)| scale).ok_or(QsdError::EmptySelection)
}

/// Selection over a finished report, honouring its options.
pub fn select_optimal_scale<T: Scalar>(report: &SweepReport<T>) -> Result<T> {
    let counts = count_values(&report.stats, &report.readings, report.options.selection.count_reading);
    select_scale(
        &report.stats,
        &counts,
        report.options.selection.filter_threshold_pp,
    )
}

/// Assembles a report from per-scale rows, normalising and selecting.
pub fn assemble_report<T: Scalar>(
    stats: Vec<ScaleStats<T>>,
    readings: Vec<DistanceReadings<T>>,
    series: Vec<ScaleSeries<T>>,
    options: SweepOptions,
) -> SweepReport<T> {
    let scales: Vec<T> = stats.iter().map(|s| s.scale).collect();
    let counts = count_values(&stats, &readings, options.selection.count_reading);
    let normalized = NormalizedCurves {
        total: normalize(&stats.iter().map(|s| s.total_distance).collect::<Vec<_>>()),
        min: normalize(&stats.iter().map(|s| s.min_distance).collect::<Vec<_>>()),
        count: normalize(&counts),
    };
    let (selected_scale, selection_fallback) =
        match select_scale(&stats, &counts, options.selection.filter_threshold_pp) {
            Ok(s) => (s, false),
            Err(_) => (T::zero(), true),
        };
    SweepReport {
        scales,
        stats,
        readings,
        series,
        normalized,
        selected_scale,
        selection_fallback,
        options,
    }
}

/// One batch per scale, then statistics, normalisation and selection.
pub fn run_sweep<T: Scalar>(
    world: &GridWorld,
    base: &LearnerConfig<T>,
    scales: &[T],
    options: &SweepOptions,
) -> Result<SweepReport<T>> {
    let scales = check_scales(scales)?;
    base.validate(world)?;
    let mut stats = Vec::with_capacity(scales.len());
    let mut readings = Vec::with_capacity(scales.len());
    let mut series = Vec::with_capacity(scales.len());
    for (i, &scale) in scales.iter().enumerate() {
        let mut cfg = base.with_scale(scale);
        if options.unpaired_seeds {
            cfg.seed = splitmix64(base.seed ^ (i as u64).wrapping_mul(0xA24B_AED4_963E_E407));
        }
        let batch = run_batch(world, &cfg)?;
        let total = total_distance_series(&batch);
        stats.push(scale_stats(&batch, scale, &options.stats));
        readings.push(distance_readings(scale, &total, options.stats.tail_fraction));
        series.push(ScaleSeries {
            scale,
            reward: average_reward_series(&batch),
            success: success_rate_series(&batch),
            avg_distance: average_distance_series(&batch),
            total_distance: total,
        });
    }
    Ok(assemble_report(stats, readings, series, *options))
}

/// [`run_sweep`] on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers<T: Scalar>(
    world: &GridWorld,
    base: &LearnerConfig<T>,
    scales: &[T],
    options: &SweepOptions,
    workers: Option<usize>,
) -> Result<SweepReport<T>> {
    match workers {
        None => run_sweep(world, base, scales, options),
        Some(n) => with_pool(n, || run_sweep(world, base, scales, options)),
    }
}

/// Mean of the last `tail_fraction` of a series.
pub fn tail_mean<T: Scalar>(series: &[T], tail_fraction: f64) -> T {
    crate::metrics::collapse_total(series, crate::metrics::TotalDistanceMode::TailMean, tail_fraction)
}

/// Relative drop of the late-episode average distance at `scale` versus
/// the baseline, in percent. Positive means the scale moved less.
pub fn distance_drop_pct<T: Scalar>(report: &SweepReport<T>, scale: T) -> Option<f64> {
    let tail = report.options.stats.tail_fraction;
    let base = report.series.iter().find(|s| s.scale == T::zero())?;
    let other = report.series.iter().find(|s| s.scale == scale)?;
    let b = tail_mean(&base.avg_distance, tail).as_f64();
    let o = tail_mean(&other.avg_distance, tail).as_f64();
    (b > 0.0).then(|| 100.0 * (b - o) / b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scale: f64, total: f64, min: f64, count: usize, success: f64) -> ScaleStats<f64> {
        ScaleStats {
            scale,
            total_distance: total,
            min_distance: min,
            below_avg_episode_count: count,
            max_success_rate: success,
            episode_of_max_success: 1,
        }
    }

    #[test]
    fn scale_list_checks() {
        assert!(check_scales::<f64>(&[]).is_err());
        assert!(check_scales(&[0.04, 0.08]).is_err());
        assert!(check_scales(&[0.0, -0.1]).is_err());
        assert_eq!(check_scales(&[0.1, 0.0, 0.04, 0.1]).unwrap(), vec![0.0, 0.04, 0.1]);
    }

    #[test]
    fn single_baseline_selects_zero() {
        let stats = vec![row(0.0, 10.0, 9.0, 40, 90.0)];
        let report = assemble_report(stats, vec![], vec![], SweepOptions::default());
        assert_eq!(report.selected_scale, 0.0);
        assert!(!report.selection_fallback);
        assert_eq!(report.normalized.total, vec![0.0]);
        assert_eq!(report.normalized.count, vec![0.0]);
        assert_eq!(select_optimal_scale(&report).unwrap(), 0.0);
    }

    #[test]
    fn filter_excludes_degraded_scales() {
        // 0.2 has the best curves but loses too much success
        let stats = vec![
            row(0.0, 12.0, 10.0, 50, 90.0),
            row(0.1, 11.0, 10.0, 45, 87.0),
            row(0.2, 8.0, 7.0, 20, 60.0),
        ];
        let counts: Vec<f64> = stats.iter().map(|s| s.below_avg_episode_count as f64).collect();
        assert_eq!(select_scale(&stats, &counts, 5.0).unwrap(), 0.1);
        assert_eq!(select_scale(&stats, &counts, 40.0).unwrap(), 0.2);
    }

    #[test]
    fn ties_go_to_smaller_scale() {
        let stats = vec![row(0.0, 10.0, 9.0, 30, 90.0), row(0.1, 10.0, 9.0, 30, 90.0)];
        let counts = vec![30.0, 30.0];
        assert_eq!(select_scale(&stats, &counts, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn missing_baseline_is_an_error() {
        let stats = vec![row(0.1, 10.0, 9.0, 30, 90.0)];
        assert!(matches!(
            select_scale(&stats, &[30.0], 5.0),
            Err(QsdError::EmptySelection)
        ));
        let report = assemble_report(stats, vec![], vec![], SweepOptions::default());
        assert!(report.selection_fallback);
        assert_eq!(report.selected_scale, 0.0);
    }

    #[test]
    fn selection_invariant_under_affine_rescaling() {
        let stats = vec![
            row(0.0, 15.45, 14.19, 33, 86.0),
            row(0.04, 15.41, 14.19, 31, 86.0),
            row(0.08, 15.16, 13.87, 31, 86.0),
            row(0.10, 15.08, 13.30, 22, 84.0),
            row(0.15, 17.07, 12.61, 33, 79.0),
        ];
        let counts: Vec<f64> = stats.iter().map(|s| s.below_avg_episode_count as f64).collect();
        let base = select_scale(&stats, &counts, 5.0).unwrap();
        for (a, b) in [(2.0, 3.0), (0.5, -10.0), (100.0, 0.0)] {
            let scaled: Vec<_> = stats
                .iter()
                .map(|s| ScaleStats { total_distance: a * s.total_distance + b, ..*s })
                .collect();
            let c: Vec<f64> = counts.iter().map(|c| a * c + b).collect();
            assert_eq!(select_scale(&scaled, &c, 5.0).unwrap(), base);
        }
    }

    #[test]
    fn small_sweep_runs_and_is_paired() {
        let world = GridWorld::new(3, [4]).unwrap();
        let base = LearnerConfig::<f64> {
            runs: 20,
            episodes_per_run: 30,
            seed: 3,
            ..LearnerConfig::defaults_for(&world)
        };
        let report = run_sweep(&world, &base, &[0.0, 0.05], &SweepOptions::default()).unwrap();
        assert_eq!(report.scales, vec![0.0, 0.05]);
        for s in &report.series {
            assert_eq!(s.reward.len(), 30);
            assert!(s.success.iter().all(|v| (0.0..=100.0).contains(v)));
            assert!(s.avg_distance.iter().all(|v| *v >= 0.0));
        }
        for n in [&report.normalized.total, &report.normalized.min, &report.normalized.count] {
            assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // the baseline column is an ordinary batch with the base seed
        let batch = run_batch(&world, &base).unwrap();
        assert_eq!(report.series[0].reward, average_reward_series(&batch));
        assert_eq!(report.stats[0], scale_stats(&batch, 0.0, &StatsOptions::default()));
    }
}
