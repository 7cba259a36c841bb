//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs without the libtest harness so the lines
//! always reach the terminal.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qsd::config::{parse_config, RunConfig};
use qsd::learner::{dist_calc, greedy_rollout, run_batch, run_seed, run_training, LearnerConfig};
use qsd::oracle::{brute_force_min_distance, reference_q_learning};
use qsd::report::{
    select_on_published, CLAIMED_DISTANCE_DROP_3X3, CLAIMED_DISTANCE_DROP_4X4,
};
use qsd::sweep::{distance_drop_pct, run_sweep, run_sweep_with_workers, SweepReport};
use qsd::{GridWorld, Result};

struct Tally {
    failed: Vec<&'static str>,
}

impl Tally {
    fn record(&mut self, name: &'static str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(name);
        }
    }
}

fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn calibrated(side: usize) -> RunConfig {
    parse_config(&manifest_dir().join(format!("configs/calibrated_{side}x{side}.json"))).expect("calibrated config")
}

fn sweep_of(cfg: &RunConfig) -> SweepReport<f64> {
    run_sweep(&cfg.world().unwrap(), &cfg.learner().unwrap(), &cfg.scale_list(), &cfg.sweep_options())
        .expect("sweep")
}

fn stat_at(report: &SweepReport<f64>, scale: f64) -> &qsd::ScaleStats64 {
    report.stats.iter().find(|s| (s.scale - scale).abs() < 1e-12).expect("scale present")
}

fn plain_q_equivalence(t: &mut Tally) {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut compared = 0usize;
    for (side, objects) in [(2usize, vec![]), (3, vec![4usize])] {
        let world = GridWorld::new(side, objects).unwrap();
        let defaults = LearnerConfig::<f64>::defaults_for(&world);
        let tuned = LearnerConfig::<f64> {
            alpha: 0.2,
            epsilon: 0.2,
            max_iterations: (11 * world.num_free()).div_ceil(8),
            ..defaults.clone()
        };
        for base in [defaults, tuned] {
            for seed in 0..100u64 {
                let cfg = base.with_seed(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ seed);
                let engine = run_training(&world, &cfg).unwrap();
                let (q_ref, stats_ref) = reference_q_learning(&world, &cfg);
                let same_q = engine.table.values().len() == q_ref.values().len()
                    && engine
                        .table
                        .values()
                        .iter()
                        .zip(q_ref.values())
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                let same_stats = engine.series.episodes.len() == stats_ref.len()
                    && engine.series.episodes.iter().zip(&stats_ref).all(|(a, b)| {
                        a.iterations == b.iterations
                            && a.success == b.success
                            && a.total_reward.to_bits() == b.total_reward.to_bits()
                            && a.total_distance.to_bits() == b.total_distance.to_bits()
                    });
                compared += 1;
                if !(same_q && same_stats) {
                    mismatches.push((side, seed));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    t.record(
        "plain-q-learning-equivalence",
        mismatches.is_empty() && secs < 10.0,
        format!(
            "{compared} trainings (2x2 and 3x3, 100 seeds, two configs), {} mismatches, {secs:.2}s (limit 10s)",
            mismatches.len()
        ),
    );
}

fn reachable_states(world: &GridWorld) -> usize {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([world.initial_state()]);
    seen.insert(world.initial_state().mask());
    while let Some(s) = queue.pop_front() {
        for a in 0..world.num_cells() {
            let next = world.step::<f64>(s, a).unwrap().next_state;
            if seen.insert(next.mask()) {
                queue.push_back(next);
            }
        }
    }
    seen.len()
}

fn state_space(t: &mut Tally) {
    let start = Instant::now();
    let three = reachable_states(&GridWorld::new(3, [4]).unwrap());
    let four = reachable_states(&GridWorld::new(4, [5, 6, 9, 10]).unwrap());
    let secs = start.elapsed().as_secs_f64();
    t.record(
        "state-space-count",
        three == 256 && four == 4096 && secs < 1.0,
        format!("3x3 reaches {three} (want 256), 4x4 reaches {four} (want 4096), {secs:.3}s"),
    );
}

fn metric_axioms(t: &mut Tally) {
    let start = Instant::now();
    let mut violations = 0usize;
    for m in [2usize, 3, 4] {
        let world = GridWorld::new(m, []).unwrap();
        let g = world.num_cells();
        let d = |a: usize, b: usize| dist_calc::<f64>(a, b, &world).unwrap();
        for a in 0..g {
            if d(a, a) != 0.0 {
                violations += 1;
            }
            for b in 0..g {
                if d(a, b) < 0.0 || d(a, b) != d(b, a) || (a != b && d(a, b) == 0.0) {
                    violations += 1;
                }
                for c in 0..g {
                    if d(a, c) > d(a, b) + d(b, c) + 1e-12 {
                        violations += 1;
                    }
                }
            }
        }
    }
    let world = GridWorld::new(3, [4]).unwrap();
    let diag = dist_calc::<f64>(8, 0, &world).unwrap();
    let diag_err = (diag - 2.0 * 2f64.sqrt()).abs();
    let secs = start.elapsed().as_secs_f64();
    t.record(
        "distance-metric-axioms",
        violations == 0 && diag_err <= 1e-12 && secs < 1.0,
        format!("{violations} violations over m in {{2,3,4}}; d(8,0) = {diag} (error {diag_err:.1e}), {secs:.3}s"),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Median greedy path length over `runs` trainings; failed rollouts count
/// as infinitely long.
fn greedy_median(world: &GridWorld, cfg: &LearnerConfig<f64>, runs: usize) -> (f64, usize) {
    let mut lengths = Vec::with_capacity(runs);
    let mut completed = 0;
    for i in 0..runs {
        let trained = run_training(world, &cfg.with_seed(run_seed(cfg.seed, i))).unwrap();
        let r = greedy_rollout(world, &trained.table, cfg.max_iterations, cfg.home_cell).unwrap();
        if r.stats.success {
            completed += 1;
            lengths.push(r.stats.total_distance);
        } else {
            lengths.push(f64::INFINITY);
        }
    }
    (median(lengths), completed)
}

fn oracle_bound(t: &mut Tally, report3: &SweepReport<f64>) {
    let start = Instant::now();
    let pinned: serde_json::Value =
        serde_json::from_str(include_str!("../oracle_constants.json")).expect("pinned constants parse");
    let pinned3 = pinned["grids"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["side"] == 3)
        .and_then(|g| g["min_distance"].as_f64())
        .expect("3x3 constant");
    let cfg = calibrated(3);
    let world = cfg.world().unwrap();
    let oracle = brute_force_min_distance(&world, None, false).unwrap();
    let pinned_ok = oracle.orders_examined == 40320 && (oracle.min_distance - pinned3).abs() < 1e-9;

    let mut successes = 0usize;
    let mut below = 0usize;
    let mut shortest = f64::INFINITY;
    for &scale in &cfg.scale_list() {
        let learner = cfg.learner::<f64>().unwrap().with_scale(scale);
        let batch = run_batch(&world, &learner).unwrap();
        for run in &batch.runs {
            for e in run.episodes.iter().filter(|e| e.success) {
                successes += 1;
                shortest = shortest.min(e.total_distance);
                if e.total_distance < pinned3 - 1e-9 {
                    below += 1;
                }
            }
        }
    }
    t.record(
        "oracle-lower-bound",
        pinned_ok && below == 0 && successes > 0,
        format!(
            "pinned minimum {pinned3} re-derived from {} orders; {successes} successful episodes over {} scales x {} runs, shortest {shortest:.6}, {below} below the bound",
            oracle.orders_examined,
            cfg.scale_list().len(),
            cfg.runs
        ),
    );

    // greedy policy after training at the selected scale
    let selected = report3.selected_scale;
    let short = cfg.learner::<f64>().unwrap().with_scale(selected);
    let (m100, done100) = greedy_median(&world, &short, 101);
    println!(
        "INFO greedy after {} episodes at s={selected}: median {m100:.4} ({:.3} x oracle), {done100}/101 rollouts complete",
        short.episodes_per_run,
        m100 / pinned3
    );
    let long = LearnerConfig {
        episodes_per_run: 2000,
        ..short
    };
    let (m, done) = greedy_median(&world, &long, 101);
    let ratio = m / pinned3;
    let secs = start.elapsed().as_secs_f64();
    t.record(
        "greedy-within-15pct",
        ratio <= 1.15 && secs < 120.0,
        format!(
            "training {} episodes at selected s={selected}: median greedy distance {m:.4} = {ratio:.3} x oracle (limit 1.15), {done}/101 complete, {secs:.1}s total",
            long.episodes_per_run
        ),
    );
}

fn trends(t: &mut Tally, report3: &SweepReport<f64>, report4: &SweepReport<f64>) {
    let base3 = stat_at(report3, 0.0).max_success_rate;
    t.record(
        "plateau-3x3",
        (base3 - 86.0).abs() <= 10.0,
        format!("max success at s=0 is {base3:.1}% (target 86 +/- 10)"),
    );

    let best4 = report4
        .stats
        .iter()
        .max_by(|a, b| a.max_success_rate.total_cmp(&b.max_success_rate))
        .unwrap();
    t.record(
        "plateau-4x4",
        (best4.max_success_rate - 59.0).abs() <= 10.0,
        format!(
            "best max success {:.1}% at s={} (target 59 +/- 10)",
            best4.max_success_rate, best4.scale
        ),
    );

    let top3 = stat_at(report3, 0.24).max_success_rate;
    let base4 = stat_at(report4, 0.0).max_success_rate;
    let top4 = stat_at(report4, 0.12).max_success_rate;
    t.record(
        "degradation",
        base3 - top3 >= 15.0 && base4 - top4 >= 15.0,
        format!(
            "3x3 {base3:.1}% -> {top3:.1}% at s=0.24 (drop {:.1}pp); 4x4 {base4:.1}% -> {top4:.1}% at s=0.12 (drop {:.1}pp); need >= 15pp",
            base3 - top3,
            base4 - top4
        ),
    );

    let totals: Vec<f64> = report3.stats.iter().map(|s| s.total_distance).collect();
    let argmin = (0..totals.len()).min_by(|&a, &b| totals[a].total_cmp(&totals[b])).unwrap();
    t.record(
        "u-shape-3x3",
        argmin > 0 && argmin + 1 < totals.len(),
        format!(
            "total distance ({}) minimal at s={} ({:.4}); endpoints {:.4} and {:.4}",
            report3.options.stats.total_distance_mode.name(),
            report3.scales[argmin],
            totals[argmin],
            totals[0],
            totals[totals.len() - 1]
        ),
    );

    let drop3 = distance_drop_pct(report3, report3.selected_scale).unwrap_or(f64::NAN);
    let drop4 = distance_drop_pct(report4, report4.selected_scale).unwrap_or(f64::NAN);
    let total_drop = |r: &SweepReport<f64>| {
        let b = stat_at(r, 0.0).total_distance;
        100.0 * (b - stat_at(r, r.selected_scale).total_distance) / b
    };
    let published_total = 100.0 * (15.45 - 15.08) / 15.45;
    t.record(
        "distance-reduction",
        drop3 > 0.0 && drop4 > 0.0,
        format!(
            "avg distance drop at selected scale: 3x3 {drop3:.2}% at s={} (published claim {CLAIMED_DISTANCE_DROP_3X3}%), 4x4 {drop4:.2}% at s={} (published claim {CLAIMED_DISTANCE_DROP_4X4}%); total distance drop 3x3 {:.2}% (published table implies {published_total:.2}%)",
            report3.selected_scale,
            report4.selected_scale,
            total_drop(report3)
        ),
    );
}

fn published_selection(t: &mut Tally) {
    let start = Instant::now();
    let three = select_on_published(3, 5.0);
    let four = select_on_published(4, 5.0);
    let secs = start.elapsed().as_secs_f64();
    let ok = matches!(three, Ok(s) if s == 0.10) && matches!(four, Ok(s) if s == 0.08) && secs < 1.0;
    t.record(
        "selection-on-published",
        ok,
        format!("3x3 table selects {three:?} (want 0.1), 4x4 table selects {four:?} (want 0.08)"),
    );
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism(t: &mut Tally) -> Result<()> {
    let tmp = tempfile::tempdir().unwrap();
    let config = manifest_dir().join("configs/calibrated_3x3.json");
    let mut trees = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "4")] {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_qsd"))
            .args(["--config", config.to_str().unwrap(), "sweep", "--out", out.to_str().unwrap()])
            .env("QSD_WORKERS", workers)
            .output()
            .expect("spawn qsd");
        if !status.status.success() {
            t.record(
                "determinism",
                false,
                format!("sweep failed: {}", String::from_utf8_lossy(&status.stderr)),
            );
            return Ok(());
        }
        trees.push(read_tree(&out));
    }
    let manifest = qsd::output::read_manifest(&tmp.path().join("a"))?;
    qsd::output::verify_manifest(&tmp.path().join("a"), &manifest)?;
    let same = trees[0] == trees[1];
    t.record(
        "determinism",
        same && manifest.files.len() + 1 == trees[0].len(),
        format!(
            "two sweeps (1 and 4 workers) wrote {} files each, byte-identical: {same}",
            trees[0].len()
        ),
    );
    Ok(())
}

fn performance(t: &mut Tally) {
    let cfg = RunConfig::preset(3).unwrap();
    let world = cfg.world().unwrap();
    let start = Instant::now();
    let report = run_sweep_with_workers(
        &world,
        &cfg.learner::<f64>().unwrap(),
        &cfg.scale_list(),
        &cfg.sweep_options(),
        Some(4),
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    t.record(
        "performance",
        secs < 60.0,
        format!(
            "3x3 sweep, {} scales x {} runs x {} episodes (default budget {}), 4 workers: {secs:.2}s (limit 60s)",
            report.scales.len(),
            cfg.runs,
            cfg.episodes_per_run,
            cfg.max_iterations.unwrap()
        ),
    );
}

fn main() {
    let mut t = Tally { failed: Vec::new() };
    plain_q_equivalence(&mut t);
    state_space(&mut t);
    metric_axioms(&mut t);
    let report3 = sweep_of(&calibrated(3));
    let report4 = sweep_of(&calibrated(4));
    println!(
        "INFO calibrated selection: 3x3 s={}, 4x4 s={} (published picks 0.1 and 0.08)",
        report3.selected_scale, report4.selected_scale
    );
    oracle_bound(&mut t, &report3);
    trends(&mut t, &report3, &report4);
    published_selection(&mut t);
    determinism(&mut t).expect("determinism check");
    performance(&mut t);
    if t.failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", t.failed.len(), t.failed.join(", "));
        std::process::exit(1);
    }
}
