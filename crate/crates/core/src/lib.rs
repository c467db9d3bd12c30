//! Deterministic simulation of local SGD on a mix of fast and slow workers.
//!
//! Fast workers run `τ_F` local steps per round and slow workers run
//! `τ_S = max(1, round(τ_F/α))`, so nobody waits on a simulated clock. Slow
//! workers can be fed the highest-loss samples from a random candidate pool
//! while fast workers draw uniformly. Local models are merged with one of
//! [`aggregation::AggregationRule`].
//!
//! Every random draw comes from a ChaCha stream keyed by (seed, purpose,
//! round, worker), and results are merged in worker-id order, so a run is
//! bit-identical regardless of the thread count.
//!
//! Start from [`harness::Experiment`]:
//!
//! ```no_run
//! use hsgd::harness::{Experiment, ExperimentConfig, RunOptions};
//!
//! let config = ExperimentConfig::from_file(std::path::Path::new("configs/demo.conf"))?;
//! let exp = Experiment::new(config)?;
//! for run in exp.run(RunOptions::serial())? {
//!     println!("seed {} acc {}", run.seed, run.final_record().val_acc);
//! }
//! # Ok::<(), hsgd::Error>(())
//! ```
//!
//! Runnable examples (`cargo run --example <name>`):
//!
//! * `gradcheck` analytic gradients against finite differences
//! * `biased_sampling` one round of pool-based assignment
//! * `aggregation_rules` balanced, τ-weighted and normalized merges
//! * `timing_breakdown` per-worker compute and idle time
//! * `lambda_sweep` feasible pool multipliers per (τ_F, τ_S)
//! * `compare_algorithms` all algorithms on the bundled hard task
//! * `dataset_io` CSV and binary dataset round trips

pub mod aggregation;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod math;
pub mod models;
pub mod simclock;
pub mod workers;

pub use error::{Error, Result};
