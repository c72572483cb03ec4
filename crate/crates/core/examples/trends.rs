//! Runs a small in-memory campaign over sampled ternary systems and prints per-policy
//! metric means.
//!
//! cargo run --release --example trends -p discobench-core -- [systems] [episodes] [budget]

use std::time::Instant;

use discobench_core::campaign::{plan_cells, CampaignConfig};
use discobench_core::env::run_episode;
use discobench_core::metrics::{aggregate, episode_metrics, LabeledLog, AGGREGATED};
use rayon::prelude::*;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let systems = args.first().copied().unwrap_or(5);
    let episodes = args.get(1).copied().unwrap_or(5);
    let budget = args.get(2).copied().unwrap_or(50);
    let yaml = format!(
        "sample: {{size: 3, count: {systems}, seed: 11}}\n\
         policies:\n\
         \x20 - {{name: random}}\n\
         \x20 - {{name: surrogate, selector: {{kind: surrogate, noise_sigma: 0.05}}}}\n\
         \x20 - {{name: diversity, planner: {{kind: diversity}}}}\n\
         baseline: random\nepisodes: {episodes}\nbudget: {budget}\nepsilons: [0.1, 0.01]\n"
    );
    let cfg = CampaignConfig::from_yaml(&yaml).expect("valid config");
    cfg.validate().expect("valid config");
    let cells = plan_cells(&cfg).expect("cells");
    let start = Instant::now();
    let logs: Vec<LabeledLog> = cells
        .par_iter()
        .map(|c| LabeledLog {
            policy: c.policy.clone(),
            episode: c.episode,
            log: run_episode(&c.config).expect("episode runs").log,
        })
        .collect();
    println!("{} cells in {:.1}s", cells.len(), start.elapsed().as_secs_f64());
    let rows = episode_metrics(&logs, &cfg.baseline).expect("metrics");
    for r in &rows {
        println!(
            "{:<14} {:<10} eps={:<5} ep={} D={:<3} af={:?} ef={:?} comps={}",
            r.system, r.policy, r.epsilon, r.episode, r.discoveries, r.af, r.ef, r.unique_evaluated_compositions
        );
    }
    for a in aggregate(&rows) {
        print!("{:<10} eps={:<5}", a.policy, a.epsilon);
        for (name, (s, excl)) in AGGREGATED.iter().zip(&a.metrics) {
            if let Some(s) = s {
                print!(" {name}={:.3}±{:.3}(n={},x={excl})", s.mean, s.sem, s.n);
            }
        }
        println!();
    }
}
