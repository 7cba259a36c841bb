//! Scans learner hyperparameters and reports which combinations reproduce
//! the qualitative trends checked by the acceptance suite.
//!
//! usage: calibrate RUNS SEED [alpha,...] [epsilon,...] [budget_factor,...] [gamma]
//!
//! The iteration budget is `ceil(factor * free_cells)`.

use qsd::config::{SCALES_3X3, SCALES_4X4};
use qsd::env::GridSpec;
use qsd::learner::{greedy_rollout, run_seed, run_training, LearnerConfig};
use qsd::oracle::exact_min_distance;
use qsd::sweep::{distance_drop_pct, run_sweep, CountReading, SelectionOptions, SweepOptions};

fn list(arg: Option<&String>, default: &[f64]) -> Vec<f64> {
    arg.map(|s| s.split(',').map(|x| x.parse().expect("number")).collect())
        .unwrap_or_else(|| default.to_vec())
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let runs: usize = args.get(1).map_or(500, |s| s.parse().expect("runs"));
    let seed: u64 = args.get(2).map_or(42, |s| s.parse().expect("seed"));
    let alphas = list(args.get(3), &[0.1, 0.15, 0.2, 0.25, 0.3]);
    let epsilons = list(args.get(4), &[0.1, 0.2, 0.3, 0.4]);
    let factors = list(args.get(5), &[1.25, 1.375, 1.5, 1.75]);
    let gamma: f64 = args.get(6).map_or(0.9, |s| s.parse().expect("gamma"));
    // (side, scales, collapse scale, plateau target)
    let grids = [(3usize, &SCALES_3X3[..], 0.24, 86.0), (4, &SCALES_4X4[..], 0.12, 59.0)];

    for &alpha in &alphas {
        for &epsilon in &epsilons {
            for &factor in &factors {
                for reading in [CountReading::BelowCount, CountReading::StaysBelowFrom] {
                    let mut line = format!("a={alpha} e={epsilon} f={factor} {}:", reading.name());
                    let mut all_ok = true;
                    for &(side, scales, high, target) in &grids {
                        let world = GridSpec::preset(side).unwrap().build().unwrap();
                        let oracle = exact_min_distance(&world, None, false).unwrap().min_distance;
                        let budget = (factor * world.num_free() as f64).ceil() as usize;
                        let cfg = LearnerConfig {
                            alpha,
                            gamma,
                            epsilon,
                            max_iterations: budget,
                            runs,
                            seed,
                            ..LearnerConfig::<f64>::defaults_for(&world)
                        };
                        let opts = SweepOptions {
                            selection: SelectionOptions {
                                count_reading: reading,
                                ..Default::default()
                            },
                            ..Default::default()
                        };
                        let r = run_sweep(&world, &cfg, scales, &opts).unwrap();
                        let succ = |s: f64| r.stats.iter().find(|x| x.scale == s).unwrap().max_success_rate;
                        let plateau = if side == 3 {
                            succ(0.0)
                        } else {
                            r.stats.iter().map(|s| s.max_success_rate).fold(0.0, f64::max)
                        };
                        let drop = succ(0.0) - succ(high);
                        let totals: Vec<f64> = r.stats.iter().map(|s| s.total_distance).collect();
                        let argmin = (0..totals.len()).min_by(|&a, &b| totals[a].total_cmp(&totals[b])).unwrap();
                        let interior = argmin > 0 && argmin + 1 < totals.len();
                        let reduction = distance_drop_pct(&r, r.selected_scale).unwrap_or(0.0);

                        let mut greedy: Vec<f64> = (0..101)
                            .map(|i| {
                                let trained = run_training(
                                    &world,
                                    &cfg.with_scale(r.selected_scale).with_seed(run_seed(seed, i)),
                                )
                                .unwrap();
                                let roll = greedy_rollout(&world, &trained.table, budget, None).unwrap();
                                if roll.stats.success { roll.stats.total_distance } else { f64::INFINITY }
                            })
                            .collect();
                        greedy.sort_by(f64::total_cmp);
                        let ratio = greedy[50] / oracle;

                        let ok = (plateau - target).abs() <= 10.0
                            && drop >= 15.0
                            && reduction > 0.0
                            && (side == 4 || interior);
                        all_ok &= ok;
                        line += &format!(
                            " [{side}x{side} budget={budget} plateau={plateau:.1} drop={drop:.1} argmin={} selected={} reduction={reduction:.2}% greedy={ratio:.3} {}]",
                            scales[argmin],
                            r.selected_scale,
                            if ok { "ok" } else { "--" }
                        );
                    }
                    println!("{} {line}", if all_ok { "PASS" } else { "fail" });
                }
            }
        }
    }
}
