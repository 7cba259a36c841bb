//! Tabular Q-learning with a scaled distance penalty.
//!
//! The update is the standard temporal-difference step followed by a
//! subtraction of `scale × distance`, where `distance` is the Euclidean
//! distance between the cell just acted on and the previous one. The
//! penalty sits outside the learning-rate bracket, so `scale = 0` reduces
//! the update exactly to plain Q-learning.
//!
//! RNG contract, per iteration: one uniform `f64` draw in `[0, 1)`; if it is
//! below `epsilon`, one `gen_range(0..G)` draw picks the action, otherwise
//! the greedy action is taken (ties to the lowest index). Anything that
//! claims stream-compatibility with this engine must follow the same order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::{CleanState, GridWorld};
use crate::error::{QsdError, Result};
use crate::scalar::Scalar;

/// Generator used for every run.
pub type QsdRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> QsdRng {
    QsdRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `index` of a batch seeded with `seed`.
pub fn run_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// State-action value table, one row per clean-mask and one column per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> QTable<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QTable {
            rows,
            cols,
            values: vec![T::zero(); rows * cols],
        }
    }

    pub fn for_world(world: &GridWorld) -> Self {
        Self::zeros(world.num_states(), world.num_cells())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.values[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_in_row(&self, row: usize) -> T {
        self.row(row)
            .iter()
            .copied()
            .fold(T::neg_infinity(), |m, v| if v > m { v } else { m })
    }

    /// Greedy action for `row`; ties go to the lowest column.
    pub fn argmax_in_row(&self, row: usize) -> usize {
        let values = self.row(row);
        let mut best = 0;
        for (i, &v) in values.iter().enumerate().skip(1) {
            if v > values[best] {
                best = i;
            }
        }
        best
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// CSV dump: header `state,a0,…`, one line per state index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state");
        for c in 0..self.cols {
            out.push_str(&format!(",a{c}"));
        }
        out.push('\n');
        for r in 0..self.rows {
            out.push_str(&r.to_string());
            for v in self.row(r) {
                out.push(',');
                out.push_str(&format!("{}", v.as_f64()));
            }
            out.push('\n');
        }
        out
    }
}

/// Hyperparameters of one learning experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig<T> {
    pub alpha: T,
    pub gamma: T,
    /// Exploration probability, compared against an `f64` uniform draw.
    pub epsilon: f64,
    pub scale: T,
    pub max_iterations: usize,
    pub episodes_per_run: usize,
    pub runs: usize,
    pub seed: u64,
    /// Cell the arm rests on before the first action. `None` makes the
    /// first move of every episode free.
    pub home_cell: Option<usize>,
}

impl<T: Scalar> LearnerConfig<T> {
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_GAMMA: f64 = 0.9;
    pub const DEFAULT_EPSILON: f64 = 0.1;
    pub const DEFAULT_EPISODES: usize = 100;
    pub const DEFAULT_RUNS: usize = 1000;

    /// Default iteration budget: three actions per free cell.
    pub fn default_max_iterations(world: &GridWorld) -> usize {
        3 * world.num_free()
    }

    pub fn defaults_for(world: &GridWorld) -> Self {
        LearnerConfig {
            alpha: T::lit(Self::DEFAULT_ALPHA),
            gamma: T::lit(Self::DEFAULT_GAMMA),
            epsilon: Self::DEFAULT_EPSILON,
            scale: T::zero(),
            max_iterations: Self::default_max_iterations(world),
            episodes_per_run: Self::DEFAULT_EPISODES,
            runs: Self::DEFAULT_RUNS,
            seed: 0,
            home_cell: None,
        }
    }

    pub fn validate(&self, world: &GridWorld) -> Result<()> {
        let bad = |msg: String| Err(QsdError::InvalidConfig(msg));
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.gamma >= T::zero() && self.gamma < T::one()) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if self.scale < T::zero() || !self.scale.is_finite() {
            return bad(format!(
                "scaling factor must satisfy s >= 0, got {}",
                self.scale
            ));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if self.episodes_per_run == 0 {
            return bad("episodes_per_run must be positive".into());
        }
        if self.runs == 0 {
            return bad("runs must be positive".into());
        }
        if let Some(home) = self.home_cell {
            if home >= world.num_cells() {
                return bad(format!(
                    "home_cell {home} outside the {} grid cells",
                    world.num_cells()
                ));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        LearnerConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn with_scale(&self, scale: T) -> Self {
        LearnerConfig {
            scale,
            ..self.clone()
        }
    }
}

/// Outcome of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats<T> {
    pub total_reward: T,
    pub iterations: usize,
    /// Sum of per-step distances, in grid-edge units.
    pub total_distance: T,
    pub success: bool,
}

/// Per-episode statistics of one run, in episode order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries<T> {
    pub episodes: Vec<EpisodeStats<T>>,
}

/// All runs of a batch, in run-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub runs: Vec<RunSeries<T>>,
}

impl<T> Batch<T> {
    pub fn episodes_per_run(&self) -> usize {
        self.runs.first().map_or(0, |r| r.episodes.len())
    }
}

/// Euclidean distance between two cells, in grid-edge units.
pub fn dist_calc<T: Scalar>(current: usize, previous: usize, world: &GridWorld) -> Result<T> {
    let (rc, cc) = world.cell_coords(current)?;
    let (rp, cp) = world.cell_coords(previous)?;
    let dr = T::from_count(rc) - T::from_count(rp);
    let dc = T::from_count(cc) - T::from_count(cp);
    Ok((dr * dr + dc * dc).sqrt())
}

/// All pairwise cell distances, `table[current * G + previous]`.
#[derive(Debug, Clone)]
pub struct DistanceTable<T> {
    cells: usize,
    values: Vec<T>,
}

impl<T: Scalar> DistanceTable<T> {
    pub fn new(world: &GridWorld) -> Self {
        let cells = world.num_cells();
        let mut values = Vec::with_capacity(cells * cells);
        for current in 0..cells {
            for previous in 0..cells {
                values.push(dist_calc(current, previous, world).expect("cells in range"));
            }
        }
        DistanceTable { cells, values }
    }

    pub fn get(&self, current: usize, previous: usize) -> T {
        self.values[current * self.cells + previous]
    }
}

/// Epsilon-greedy choice over all cells of the grid, object cells included.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    q: &QTable<T>,
    state_row: usize,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.gen();
    if u < epsilon {
        rng.gen_range(0..q.cols())
    } else {
        q.argmax_in_row(state_row)
    }
}

/// Applies the penalised temporal-difference update and returns the new
/// value of `Q(state_row, action)`.
pub fn qsd_update<T: Scalar>(
    q: &mut QTable<T>,
    state_row: usize,
    action: usize,
    reward: T,
    next_row: usize,
    dmetric: T,
    cfg: &LearnerConfig<T>,
) -> Result<T> {
    let current = q.get(state_row, action);
    let target = reward + cfg.gamma * q.max_in_row(next_row);
    let updated = current + cfg.alpha * (target - current) - cfg.scale * dmetric;
    if !updated.is_finite() {
        return Err(QsdError::Numerical(format!(
            "Q({state_row}, {action}) became {updated}"
        )));
    }
    q.set(state_row, action, updated);
    Ok(updated)
}

/// One episode of learning, starting from the all-unclean state.
pub fn run_episode<T: Scalar, R: Rng + ?Sized>(
    world: &GridWorld,
    q: &mut QTable<T>,
    cfg: &LearnerConfig<T>,
    rng: &mut R,
    initial_prev_cell: Option<usize>,
) -> Result<EpisodeStats<T>> {
    let distances = DistanceTable::new(world);
    episode_with(world, q, cfg, rng, initial_prev_cell, &distances)
}

fn episode_with<T: Scalar, R: Rng + ?Sized>(
    world: &GridWorld,
    q: &mut QTable<T>,
    cfg: &LearnerConfig<T>,
    rng: &mut R,
    initial_prev_cell: Option<usize>,
    distances: &DistanceTable<T>,
) -> Result<EpisodeStats<T>> {
    let mut state = world.initial_state();
    let mut prev = initial_prev_cell;
    let mut stats = EpisodeStats {
        total_reward: T::zero(),
        iterations: 0,
        total_distance: T::zero(),
        success: false,
    };
    loop {
        let row = world.state_index(state);
        let action = select_action(q, row, cfg.epsilon, rng);
        let outcome = world.step::<T>(state, action)?;
        let dmetric = prev.map_or(T::zero(), |p| distances.get(action, p));
        let next_row = world.state_index(outcome.next_state);
        qsd_update(q, row, action, outcome.reward, next_row, dmetric, cfg)?;

        stats.iterations += 1;
        stats.total_reward = stats.total_reward + outcome.reward;
        stats.total_distance = stats.total_distance + dmetric;
        prev = Some(action);

        if world.is_terminal(outcome.next_state) {
            stats.success = true;
            break;
        }
        if stats.iterations >= cfg.max_iterations {
            break;
        }
        // object hits already leave the state untouched
        state = outcome.next_state;
    }
    Ok(stats)
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainingOutcome<T> {
    pub series: RunSeries<T>,
    pub table: QTable<T>,
}

/// Trains a fresh table for `episodes_per_run` episodes using `cfg.seed`.
pub fn run_training<T: Scalar>(world: &GridWorld, cfg: &LearnerConfig<T>) -> Result<TrainingOutcome<T>> {
    cfg.validate(world)?;
    let distances = DistanceTable::new(world);
    let mut rng = seeded_rng(cfg.seed);
    let mut table = QTable::for_world(world);
    let mut episodes = Vec::with_capacity(cfg.episodes_per_run);
    for _ in 0..cfg.episodes_per_run {
        // qsd_update rejects every non-finite write, so the table stays finite
        let stats = episode_with(world, &mut table, cfg, &mut rng, cfg.home_cell, &distances)?;
        if !(stats.total_reward.is_finite() && stats.total_distance.is_finite()) {
            return Err(QsdError::Numerical("non-finite episode statistics".into()));
        }
        episodes.push(stats);
    }
    Ok(TrainingOutcome {
        series: RunSeries { episodes },
        table,
    })
}

/// Runs `cfg.runs` independent trainings, run `i` seeded with
/// [`run_seed`]`(cfg.seed, i)`. Results are in run-index order regardless
/// of scheduling.
pub fn run_batch<T: Scalar>(world: &GridWorld, cfg: &LearnerConfig<T>) -> Result<Batch<T>> {
    cfg.validate(world)?;
    let runs = (0..cfg.runs)
        .into_par_iter()
        .map(|i| run_training(world, &cfg.with_seed(run_seed(cfg.seed, i))).map(|o| o.series))
        .collect::<Result<Vec<_>>>()?;
    Ok(Batch { runs })
}

/// Same as [`run_batch`] on a dedicated pool of `workers` threads.
pub fn run_batch_with_workers<T: Scalar>(
    world: &GridWorld,
    cfg: &LearnerConfig<T>,
    workers: Option<usize>,
) -> Result<Batch<T>> {
    match workers {
        None => run_batch(world, cfg),
        Some(n) => with_pool(n, || run_batch(world, cfg)),
    }
}

pub(crate) fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| QsdError::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    pool.install(f)
}

/// A greedy (epsilon = 0) replay of a trained table, without learning.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout<T> {
    pub stats: EpisodeStats<T>,
    pub path: Vec<usize>,
}

pub fn greedy_rollout<T: Scalar>(
    world: &GridWorld,
    q: &QTable<T>,
    max_iterations: usize,
    home_cell: Option<usize>,
) -> Result<Rollout<T>> {
    let mut state: CleanState = world.initial_state();
    let mut prev = home_cell;
    let mut path = Vec::new();
    let mut stats = EpisodeStats {
        total_reward: T::zero(),
        iterations: 0,
        total_distance: T::zero(),
        success: false,
    };
    while stats.iterations < max_iterations {
        let action = q.argmax_in_row(world.state_index(state));
        let outcome = world.step::<T>(state, action)?;
        let d = match prev {
            Some(p) => dist_calc(action, p, world)?,
            None => T::zero(),
        };
        stats.iterations += 1;
        stats.total_reward = stats.total_reward + outcome.reward;
        stats.total_distance = stats.total_distance + d;
        path.push(action);
        prev = Some(action);
        if world.is_terminal(outcome.next_state) {
            stats.success = true;
            break;
        }
        state = outcome.next_state;
    }
    Ok(Rollout { stats, path })
}
