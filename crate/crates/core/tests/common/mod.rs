//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use hsgd::harness::{Algorithm, Experiment, ExperimentConfig, RunOptions, SeedRun};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&config_path(name)).expect("bundled config parses")
}

/// `config` switched to another algorithm with that algorithm's default
/// sampler and aggregation.
pub fn as_algorithm(config: &ExperimentConfig, algorithm: Algorithm) -> ExperimentConfig {
    config.for_algorithm(algorithm).expect("algorithm switch")
}

pub fn run_all(config: ExperimentConfig) -> Vec<SeedRun> {
    Experiment::new(config).expect("experiment").run(RunOptions::serial()).expect("run")
}

pub fn final_accs(runs: &[SeedRun]) -> Vec<f64> {
    runs.iter().map(|r| r.final_record().val_acc).collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Whether `v` is the double nearest to the rational `p/q`, decided in
/// exact integer arithmetic. `v` must be positive and normal.
pub fn is_nearest_double(v: f64, p: u128, q: u128) -> bool {
    assert!(v.is_normal() && v > 0.0 && q > 0);
    let bits = v.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let m = ((bits & ((1u64 << 52) - 1)) | (1u64 << 52)) as i128;
    let e = raw_exp - 1075; // v = m·2^e
    let (q, p) = (q as i128, p as i128);
    // scale so that v ↦ a, p/q ↦ b, one ulp above v ↦ gap
    let (a, b, gap) = if e < 0 { (m * q, p << (-e), q) } else { ((m * q) << e, p, q << e) };
    let diff = (a - b).abs();
    let below = b < a;
    if below && m == 1 << 52 {
        4 * diff <= gap
    } else {
        2 * diff <= gap
    }
}
