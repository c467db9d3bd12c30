//! One round of loss-biased sample assignment.
//!
//! The slow worker gets the highest-loss samples out of a random candidate
//! pool; the fast worker draws uniformly. Run with
//!
//! ```text
//! cargo run --example biased_sampling
//! ```

use hsgd::data::{sample_separated, sample_unified, LossLedger, SamplerMode, SamplingPlan};
use hsgd::math::RngStream;

fn main() -> hsgd::Result<()> {
    let n = 64;
    // τ_F = 32, τ_S = 4 → α = 8; one worker of each kind
    let (alpha, lambda) = (8.0, 4.0);
    let plan = SamplingPlan::new(n, 1, 1, alpha, lambda, SamplerMode::Separated)?;
    println!("N={n} α={alpha} λ={lambda}: pool {} slow {} fast {}", plan.pool, plan.slow_total, plan.fast_per_worker);

    // pretend the last round saw every sample; loss grows with the index
    let mut ledger = LossLedger::new(n);
    let ids: Vec<usize> = (0..n).collect();
    let losses: Vec<f64> = ids.iter().map(|&i| (i as f64 * 0.37).sin().abs() + i as f64 / n as f64).collect();
    ledger.record(&ids, &losses, 0)?;

    let mut stream = RngStream::new(42, 0);
    let a = sample_separated(&ledger, &plan, &mut stream)?;
    let slow = a.slow_set();
    let mean = |ids: &[usize]| ids.iter().map(|&i| losses[i]).sum::<f64>() / ids.len() as f64;
    println!("slow worker  {:?}", slow);
    println!("  mean loss {:.3}", mean(&slow));
    println!("fast worker  {} samples, mean loss {:.3}", a.fast_lists()[0].len(), mean(&a.fast_lists()[0]));
    println!("dataset mean loss {:.3}", mean(&ids));

    let plan = SamplingPlan::new(n, 1, 1, alpha, lambda, SamplerMode::Unified)?;
    let a = sample_unified(&ledger, &plan, &mut stream)?;
    let overlap = a.fast_lists()[0].iter().filter(|i| a.slow_set().contains(i)).count();
    println!("unified mode: fast worker gets {} samples, {overlap} shared with the slow set", a.fast_lists()[0].len());
    Ok(())
}
