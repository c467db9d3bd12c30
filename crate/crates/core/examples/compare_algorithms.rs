//! Trains the bundled hard task under every algorithm and prints final
//! accuracy and simulated time.
//!
//! ```text
//! cargo run --release --example compare_algorithms [path/to/config]
//! ```

use std::path::PathBuf;

use hsgd::aggregation::AggregationRule;
use hsgd::harness::{Algorithm, Experiment, ExperimentConfig, RunOptions, Summary};

fn main() -> hsgd::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/hard.conf"));
    let base = ExperimentConfig::from_file(&path)?;
    let mut variants = Vec::new();
    for algorithm in Algorithm::ALL {
        variants.push((algorithm.to_string(), base.for_algorithm(algorithm)?));
    }
    for rule in [AggregationRule::Balanced, AggregationRule::FedNova] {
        let c = base.for_algorithm(Algorithm::BiasedLocal)?.with_override("aggregation", &rule.to_string())?;
        variants.push((format!("biased_local/{rule}"), c));
    }
    let options = RunOptions::from_env()?;
    println!("{:<26} {:>8} {:>16} {:>12} {:>8}", "variant", "rounds", "final acc (%)", "sim wall (s)", "aggs");
    for (name, config) in variants {
        let exp = Experiment::new(config)?;
        let runs = exp.run(options)?;
        let s = Summary::new(&exp.config.config_hash(), &name, &runs)?;
        println!(
            "{name:<26} {:>8} {:>16} {:>12.1} {:>8}",
            exp.rounds,
            s.mean_pm_spread(),
            s.total_sim_wall_s,
            s.total_agg_count
        );
    }
    Ok(())
}
