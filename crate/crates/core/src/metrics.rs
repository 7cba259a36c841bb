//! Per-episode learning curves and the per-scale distance statistics used to
//! pick a scaling factor.

use serde::{Deserialize, Serialize};

use crate::learner::Batch;
use crate::scalar::Scalar;

/// How the per-episode total-distance series is collapsed into one
/// "total distance" figure per scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TotalDistanceMode {
    /// Mean over the last `tail_fraction` of episodes.
    #[default]
    TailMean,
    /// Mean over all episodes.
    FullMean,
    /// Plain sum over all episodes.
    RawSum,
}

impl TotalDistanceMode {
    pub const ALL: [TotalDistanceMode; 3] = [
        TotalDistanceMode::TailMean,
        TotalDistanceMode::FullMean,
        TotalDistanceMode::RawSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TotalDistanceMode::TailMean => "tail_mean",
            TotalDistanceMode::FullMean => "full_mean",
            TotalDistanceMode::RawSum => "raw_sum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsOptions {
    pub total_distance_mode: TotalDistanceMode,
    /// Share of trailing episodes used by `tail_mean`.
    pub tail_fraction: f64,
    /// A success level counts as sustained while it stays within this many
    /// percentage points of the maximum.
    pub plateau_band_pp: f64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            total_distance_mode: TotalDistanceMode::TailMean,
            tail_fraction: 0.25,
            plateau_band_pp: 3.0,
        }
    }
}

/// Summary row for one scaling factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats<T> {
    pub scale: T,
    pub total_distance: T,
    pub min_distance: T,
    pub below_avg_episode_count: usize,
    pub max_success_rate: T,
    /// 1-based episode from which the maximum success rate holds.
    pub episode_of_max_success: usize,
}

/// Alternative readings of the distance statistics, reported side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReadings<T> {
    pub scale: T,
    pub tail_mean: T,
    pub full_mean: T,
    pub raw_sum: T,
    pub below_avg_count: usize,
    /// 1-based episode after which every value stays below the mean, if any.
    pub stays_below_from: Option<usize>,
    pub episodes: usize,
}

fn per_episode<T: Scalar>(batch: &Batch<T>, f: impl Fn(&crate::learner::EpisodeStats<T>) -> T) -> Vec<T> {
    let episodes = batch.episodes_per_run();
    let runs = T::from_count(batch.runs.len().max(1));
    (0..episodes)
        .map(|e| batch.runs.iter().map(|r| f(&r.episodes[e])).sum::<T>() / runs)
        .collect()
}

/// Mean total reward per episode across runs.
pub fn average_reward_series<T: Scalar>(batch: &Batch<T>) -> Vec<T> {
    per_episode(batch, |e| e.total_reward)
}

/// Mean over runs of `total_distance / iterations` per episode.
pub fn average_distance_series<T: Scalar>(batch: &Batch<T>) -> Vec<T> {
    per_episode(batch, |e| {
        if e.iterations == 0 {
            T::zero()
        } else {
            e.total_distance / T::from_count(e.iterations)
        }
    })
}

/// Mean total distance per episode across runs.
pub fn total_distance_series<T: Scalar>(batch: &Batch<T>) -> Vec<T> {
    per_episode(batch, |e| e.total_distance)
}

/// Percentage of runs that reached the terminal state, per episode.
pub fn success_rate_series<T: Scalar>(batch: &Batch<T>) -> Vec<T> {
    let hundred = T::lit(100.0);
    per_episode(batch, |e| if e.success { hundred } else { T::zero() })
}

/// Maximum of a success series and the first 1-based episode from which
/// every later value stays within `band_pp` of it.
pub fn success_plateau<T: Scalar>(series: &[T], band_pp: f64) -> (T, usize) {
    let Some(max) = series.iter().copied().reduce(T::max) else {
        return (T::zero(), 0);
    };
    let floor = max - T::lit(band_pp);
    let held = series.iter().rev().take_while(|&&v| v >= floor).count();
    if held == 0 {
        // the curve peaked and fell away; report where the peak was
        let first = series.iter().position(|&v| v == max).unwrap_or(0);
        return (max, first + 1);
    }
    (max, series.len() - held + 1)
}

fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_count(values.len().max(1))
}

/// Number of episodes strictly below the series mean.
pub fn below_average_count<T: Scalar>(series: &[T]) -> usize {
    let m = mean(series);
    series.iter().filter(|&&v| v < m).count()
}

/// First 1-based episode from which the series stays strictly below its mean.
pub fn stays_below_from<T: Scalar>(series: &[T]) -> Option<usize> {
    let m = mean(series);
    let tail = series.iter().rev().take_while(|&&v| v < m).count();
    (tail > 0).then(|| series.len() - tail + 1)
}

pub fn collapse_total<T: Scalar>(series: &[T], mode: TotalDistanceMode, tail_fraction: f64) -> T {
    match mode {
        TotalDistanceMode::RawSum => series.iter().copied().sum(),
        TotalDistanceMode::FullMean => mean(series),
        TotalDistanceMode::TailMean => {
            let n = series.len();
            let k = ((n as f64 * tail_fraction).round() as usize).clamp(1, n.max(1));
            mean(&series[n.saturating_sub(k)..])
        }
    }
}

/// Statistics for one scale from the total-distance and success series.
pub fn stats_from_series<T: Scalar>(
    scale: T,
    total_distance: &[T],
    success: &[T],
    opts: &StatsOptions,
) -> ScaleStats<T> {
    let (max_success_rate, episode_of_max_success) = success_plateau(success, opts.plateau_band_pp);
    ScaleStats {
        scale,
        total_distance: collapse_total(total_distance, opts.total_distance_mode, opts.tail_fraction),
        min_distance: total_distance.iter().copied().reduce(T::min).unwrap_or(T::zero()),
        below_avg_episode_count: below_average_count(total_distance),
        max_success_rate,
        episode_of_max_success,
    }
}

pub fn scale_stats<T: Scalar>(batch: &Batch<T>, scale: T, opts: &StatsOptions) -> ScaleStats<T> {
    stats_from_series(
        scale,
        &total_distance_series(batch),
        &success_rate_series(batch),
        opts,
    )
}

pub fn distance_readings<T: Scalar>(scale: T, total_distance: &[T], tail_fraction: f64) -> DistanceReadings<T> {
    DistanceReadings {
        scale,
        tail_mean: collapse_total(total_distance, TotalDistanceMode::TailMean, tail_fraction),
        full_mean: collapse_total(total_distance, TotalDistanceMode::FullMean, tail_fraction),
        raw_sum: collapse_total(total_distance, TotalDistanceMode::RawSum, tail_fraction),
        below_avg_count: below_average_count(total_distance),
        stays_below_from: stays_below_from(total_distance),
        episodes: total_distance.len(),
    }
}

/// Min-max normalisation to `[0, 1]`; a constant input maps to all zeros.
pub fn normalize<T: Scalar>(values: &[T]) -> Vec<T> {
    let (Some(lo), Some(hi)) = (
        values.iter().copied().reduce(T::min),
        values.iter().copied().reduce(T::max),
    ) else {
        return Vec::new();
    };
    let range = hi - lo;
    if range <= T::zero() {
        return vec![T::zero(); values.len()];
    }
    values.iter().map(|&v| (v - lo) / range).collect()
}
