//! Ground truth for tests: the shortest open path through every free cell,
//! and an independently written plain Q-learning loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{GridWorld, REWARD_CLEANED, REWARD_OBJECT_HIT, REWARD_REDUNDANT};
use crate::error::{QsdError, Result};
use crate::learner::{seeded_rng, EpisodeStats, LearnerConfig, QTable};
use crate::scalar::Scalar;

/// Free-cell count above which permutation enumeration needs `force`.
pub const ENUMERATION_LIMIT: usize = 10;
/// Free-cell count above which the subset DP refuses to run.
pub const DP_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Permutations,
    HeldKarp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub min_distance: f64,
    pub optimal_order: Vec<usize>,
    /// Orders enumerated, or DP transitions evaluated for `held_karp`.
    pub orders_examined: u64,
    pub method: OracleMethod,
}

fn euclid(world: &GridWorld, a: usize, b: usize) -> f64 {
    let s = world.side();
    let dr = (a / s) as f64 - (b / s) as f64;
    let dc = (a % s) as f64 - (b % s) as f64;
    (dr * dr + dc * dc).sqrt()
}

fn path_cost(world: &GridWorld, start: Option<usize>, order: &[usize]) -> f64 {
    let mut cost = match (start, order.first()) {
        (Some(s), Some(&first)) => euclid(world, first, s),
        _ => 0.0,
    };
    for w in order.windows(2) {
        cost += euclid(world, w[1], w[0]);
    }
    cost
}

/// Minimum travel over every ordering of `cells` (Heap's algorithm).
pub fn enumerate_orders(world: &GridWorld, cells: &[usize], start: Option<usize>) -> OracleResult {
    let mut perm = cells.to_vec();
    let n = perm.len();
    let mut best = path_cost(world, start, &perm);
    let mut best_order = perm.clone();
    let mut examined = 1u64;
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            examined += 1;
            let cost = path_cost(world, start, &perm);
            if cost < best {
                best = cost;
                best_order.clone_from(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    OracleResult {
        min_distance: best,
        optimal_order: best_order,
        orders_examined: examined,
        method: OracleMethod::Permutations,
    }
}

/// Exhaustive search over all orderings of the free cells. The first move
/// is free unless `start` is given.
pub fn brute_force_min_distance(world: &GridWorld, start: Option<usize>, force: bool) -> Result<OracleResult> {
    let n = world.num_free();
    if n > ENUMERATION_LIMIT && !force {
        return Err(QsdError::OracleTooLarge {
            cells: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    if let Some(s) = start {
        world.cell_coords(s)?;
    }
    Ok(enumerate_orders(world, world.free_cells(), start))
}

/// Subset dynamic program over (visited set, last cell).
pub fn held_karp_min_distance(world: &GridWorld, start: Option<usize>) -> Result<OracleResult> {
    let cells = world.free_cells();
    let n = cells.len();
    if n > DP_LIMIT {
        return Err(QsdError::OracleTooLarge { cells: n, limit: DP_LIMIT });
    }
    if let Some(s) = start {
        world.cell_coords(s)?;
    }
    let full = (1usize << n) - 1;
    let mut cost = vec![f64::INFINITY; (1 << n) * n];
    let mut parent = vec![usize::MAX; (1 << n) * n];
    let mut transitions = 0u64;
    for j in 0..n {
        cost[(1 << j) * n + j] = start.map_or(0.0, |s| euclid(world, cells[j], s));
    }
    for set in 1..=full {
        for last in 0..n {
            let here = cost[set * n + last];
            if set & (1 << last) == 0 || !here.is_finite() {
                continue;
            }
            for next in 0..n {
                if set & (1 << next) != 0 {
                    continue;
                }
                transitions += 1;
                let to = set | (1 << next);
                let c = here + euclid(world, cells[next], cells[last]);
                if c < cost[to * n + next] {
                    cost[to * n + next] = c;
                    parent[to * n + next] = last;
                }
            }
        }
    }
    let (mut last, min_distance) = (0..n)
        .map(|j| (j, cost[full * n + j]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one free cell");
    let mut order = Vec::with_capacity(n);
    let mut set = full;
    loop {
        order.push(cells[last]);
        let prev = parent[set * n + last];
        set &= !(1 << last);
        if prev == usize::MAX {
            break;
        }
        last = prev;
    }
    order.reverse();
    Ok(OracleResult {
        min_distance,
        optimal_order: order,
        orders_examined: transitions,
        method: OracleMethod::HeldKarp,
    })
}

/// Exact minimum: permutations when small (or forced), the DP otherwise.
pub fn exact_min_distance(world: &GridWorld, start: Option<usize>, force_enumeration: bool) -> Result<OracleResult> {
    if world.num_free() <= ENUMERATION_LIMIT || force_enumeration {
        brute_force_min_distance(world, start, true)
    } else {
        held_karp_min_distance(world, start)
    }
}

/// Plain Q-learning written from scratch, sharing only the RNG contract and
/// the greedy tie-break with the main engine. `cfg.scale` is ignored.
pub fn reference_q_learning<T: Scalar>(
    world: &GridWorld,
    cfg: &LearnerConfig<T>,
) -> (QTable<T>, Vec<EpisodeStats<T>>) {
    let g = world.num_cells();
    let n_free = world.num_free();
    let mut q = vec![T::zero(); (1usize << n_free) * g];
    let mut bit = vec![None; g];
    for (i, &c) in world.free_cells().iter().enumerate() {
        bit[c] = Some(i);
    }
    let full: u64 = (1u64 << n_free) - 1;
    let side = world.side();
    let mut rng = seeded_rng(cfg.seed);
    let mut history = Vec::with_capacity(cfg.episodes_per_run);

    for _ in 0..cfg.episodes_per_run {
        let mut mask: u64 = 0;
        let mut prev: Option<usize> = cfg.home_cell;
        let mut reward_sum = T::zero();
        let mut distance_sum = T::zero();
        let mut iterations = 0usize;
        let mut success = false;
        loop {
            let row = mask as usize;
            let explore: f64 = rng.gen();
            let action = if explore < cfg.epsilon {
                rng.gen_range(0..g)
            } else {
                let mut best = 0;
                for a in 1..g {
                    if q[row * g + a] > q[row * g + best] {
                        best = a;
                    }
                }
                best
            };
            let (next, r) = match bit[action] {
                None => (mask, REWARD_OBJECT_HIT),
                Some(b) if mask >> b & 1 == 1 => (mask, REWARD_REDUNDANT),
                Some(b) => (mask | 1 << b, REWARD_CLEANED),
            };
            let r = T::lit(r);
            let next_row = next as usize;
            let mut next_max = T::neg_infinity();
            for a in 0..g {
                if q[next_row * g + a] > next_max {
                    next_max = q[next_row * g + a];
                }
            }
            let old = q[row * g + action];
            q[row * g + action] = old + cfg.alpha * (r + cfg.gamma * next_max - old);

            let step = match prev {
                None => T::zero(),
                Some(p) => {
                    let dr = T::from_count(action / side) - T::from_count(p / side);
                    let dc = T::from_count(action % side) - T::from_count(p % side);
                    (dr * dr + dc * dc).sqrt()
                }
            };
            iterations += 1;
            reward_sum = reward_sum + r;
            distance_sum = distance_sum + step;
            prev = Some(action);
            if next == full {
                success = true;
                break;
            }
            if iterations >= cfg.max_iterations {
                break;
            }
            mask = next;
        }
        history.push(EpisodeStats {
            total_reward: reward_sum,
            iterations,
            total_distance: distance_sum,
            success,
        });
    }

    let mut table = QTable::zeros(1 << n_free, g);
    for row in 0..(1 << n_free) {
        for a in 0..g {
            table.set(row, a, q[row * g + a]);
        }
    }
    (table, history)
}
