//! Simulated wall clock.
//!
//! Each round every worker computes for `τ_i·iter_cost_i` seconds, waits at
//! the barrier for the slowest one, then all pay a flat aggregation cost:
//!
//! ```text
//! round_wall   = max_i(τ_i·c_i) + agg_cost
//! blocking_i   = round_wall − agg_cost − τ_i·c_i
//! ```
//!
//! Host execution time is never measured.

use crate::error::{Error, Result};
use crate::workers::{WorkerClass, WorkerSpec};

/// Per-class iteration costs and the flat per-aggregation cost, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub fast_iter_s: f64,
    pub slow_iter_s: f64,
    pub agg_s: f64,
}

impl CostModel {
    pub fn new(fast_iter_s: f64, slow_iter_s: f64, agg_s: f64) -> Result<Self> {
        let cost = Self { fast_iter_s, slow_iter_s, agg_s };
        cost.validate()?;
        Ok(cost)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fast_iter_s > 0.0 && self.fast_iter_s.is_finite())
            || !(self.slow_iter_s > 0.0 && self.slow_iter_s.is_finite())
        {
            return Err(Error::InvalidArgument("iteration costs must be positive".into()));
        }
        if !(self.agg_s >= 0.0 && self.agg_s.is_finite()) {
            return Err(Error::InvalidArgument("aggregation cost must be nonnegative".into()));
        }
        if self.slow_iter_s < self.fast_iter_s {
            return Err(Error::InvalidArgument(format!(
                "slow iteration cost {} is below fast cost {}",
                self.slow_iter_s, self.fast_iter_s
            )));
        }
        Ok(())
    }

    pub fn iter_cost(&self, class: WorkerClass) -> f64 {
        match class {
            WorkerClass::Fast => self.fast_iter_s,
            WorkerClass::Slow => self.slow_iter_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTiming {
    pub compute: Vec<f64>,
    pub blocking: Vec<f64>,
    pub round_wall: f64,
    pub agg_count: usize,
}

impl RoundTiming {
    pub fn total_blocking(&self) -> f64 {
        self.blocking.iter().sum()
    }
}

/// Timing of one round. Uses each worker's own `iter_cost`.
pub fn round_timing(workers: &[WorkerSpec], agg_s: f64) -> Result<RoundTiming> {
    if workers.is_empty() {
        return Err(Error::Empty("workers"));
    }
    if !(agg_s >= 0.0 && agg_s.is_finite()) {
        return Err(Error::InvalidArgument("aggregation cost must be nonnegative".into()));
    }
    let compute: Vec<f64> = workers.iter().map(|w| w.tau as f64 * w.iter_cost).collect();
    let slowest = compute.iter().copied().fold(0.0, f64::max);
    let blocking = compute.iter().map(|c| slowest - c).collect();
    Ok(RoundTiming { compute, blocking, round_wall: slowest + agg_s, agg_count: 1 })
}

/// Totals over several identical rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub total_wall: f64,
    pub total_compute: Vec<f64>,
    pub total_blocking: Vec<f64>,
    pub agg_count: usize,
}

/// Accumulates [`round_timing`] over `rounds` rounds, by repeated addition
/// in the same order the training driver uses.
pub fn run_timeline(rounds: usize, workers: &[WorkerSpec], agg_s: f64) -> Result<Timeline> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be at least 1".into()));
    }
    let round = round_timing(workers, agg_s)?;
    let mut tl = Timeline {
        total_wall: 0.0,
        total_compute: vec![0.0; workers.len()],
        total_blocking: vec![0.0; workers.len()],
        agg_count: 0,
    };
    for _ in 0..rounds {
        tl.total_wall += round.round_wall;
        for (acc, c) in tl.total_compute.iter_mut().zip(&round.compute) {
            *acc += c;
        }
        for (acc, b) in tl.total_blocking.iter_mut().zip(&round.blocking) {
            *acc += b;
        }
        tl.agg_count += round.agg_count;
    }
    Ok(tl)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worker(id: usize, class: WorkerClass, tau: usize, iter_cost: f64) -> WorkerSpec {
        WorkerSpec { id, class, tau, iter_cost, batch_size: 1 }
    }

    #[test]
    fn measured_costs_with_integer_tau_residual() {
        let w = [worker(0, WorkerClass::Slow, 1, 6.5230), worker(1, WorkerClass::Fast, 32, 0.1940)];
        let t = round_timing(&w, 0.0).unwrap();
        assert!((t.compute[0] - 6.523).abs() < 1e-12);
        assert!((t.compute[1] - 6.208).abs() < 1e-12);
        assert!((t.blocking[1] - 0.315).abs() < 1e-12);
        assert_eq!(t.blocking[0], 0.0);
    }

    #[test]
    fn balanced_local_sgd_blocking() {
        let w = [worker(0, WorkerClass::Slow, 32, 6.5230), worker(1, WorkerClass::Fast, 32, 0.1940)];
        let t = round_timing(&w, 0.5).unwrap();
        assert!((t.blocking[1] - 202.528).abs() < 1e-9);
        assert!((t.round_wall - (32.0 * 6.5230 + 0.5)).abs() < 1e-9);
    }

    #[test]
    fn exact_ratio_gives_zero_blocking() {
        let w = [worker(0, WorkerClass::Slow, 8, 0.4), worker(1, WorkerClass::Fast, 32, 0.1)];
        let t = round_timing(&w, 0.0).unwrap();
        assert!(t.blocking.iter().all(|b| b.abs() <= 1e-9));
    }

    #[test]
    fn timeline_totals() {
        let w = [worker(0, WorkerClass::Fast, 4, 0.25)];
        let tl = run_timeline(10, &w, 0.0).unwrap();
        assert_eq!(tl.total_wall, 10.0);
        assert_eq!(tl.agg_count, 10);
        let doubled = [worker(0, WorkerClass::Fast, 4, 0.5)];
        let tl2 = run_timeline(10, &doubled, 0.0).unwrap();
        assert_eq!(tl2.total_compute[0], 2.0 * tl.total_compute[0]);
        assert!(run_timeline(0, &w, 0.0).is_err());
        assert!(round_timing(&[], 0.0).is_err());
    }

    #[test]
    fn cost_model_validation() {
        assert!(CostModel::new(0.1, 0.05, 0.0).is_err());
        assert!(CostModel::new(0.0, 0.05, 0.0).is_err());
        assert!(CostModel::new(0.1, 0.2, -1.0).is_err());
        let c = CostModel::new(0.1, 0.2, 0.0).unwrap();
        assert_eq!(c.iter_cost(WorkerClass::Slow), 0.2);
    }
}
