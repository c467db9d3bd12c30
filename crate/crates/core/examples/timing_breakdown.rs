//! Compute and idle time per worker for one round of each schedule, using
//! per-step costs of 0.1940 s (fast) and 6.5230 s (slow).
//!
//! ```text
//! cargo run --example timing_breakdown
//! ```

use hsgd::data::SamplerMode;
use hsgd::simclock::round_timing;
use hsgd::workers::{measure_alpha, SystemProfile};

fn main() -> hsgd::Result<()> {
    let (fast, slow) = (0.1940, 6.5230);
    let alpha = measure_alpha(&[fast], &[slow])?;
    println!("α = {alpha:.4}");
    let schedules = [
        ("synchronous", 1, 1.0),
        ("balanced local", 32, 1.0),
        ("unbalanced local", 32, alpha),
    ];
    println!("{:<17} {:>6} {:>6} {:>10} {:>10} {:>10}", "schedule", "τ_F", "τ_S", "round (s)", "fast idle", "slow idle");
    for (name, tau_f, a) in schedules {
        let profile = SystemProfile::new(a, 1, 1, 1.0, tau_f, SamplerMode::Uniform)?;
        let t = round_timing(&profile.worker_specs(fast, slow, 32), 0.0)?;
        println!(
            "{name:<17} {:>6} {:>6} {:>10.3} {:>10.3} {:>10.3}",
            profile.tau_fast, profile.tau_slow, t.round_wall, t.blocking[1], t.blocking[0]
        );
    }
    Ok(())
}
