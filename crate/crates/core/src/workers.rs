//! Worker-side training: heterogeneity profile, learning-rate schedules and
//! the τ-step local SGD loop each worker runs per communication round.

use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, SamplerMode};
use crate::error::{Error, Result};
use crate::math::{axpy, ParamVector, RngStream};
use crate::models::{forward_backward, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkerClass {
    Fast,
    Slow,
}

impl fmt::Display for WorkerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WorkerClass::Fast => "fast",
            WorkerClass::Slow => "slow",
        })
    }
}

/// One simulated worker.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerSpec {
    pub id: usize,
    pub class: WorkerClass,
    /// Local updates per round.
    pub tau: usize,
    /// Simulated seconds per local update.
    pub iter_cost: f64,
    pub batch_size: usize,
}

impl WorkerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::InvalidArgument(format!("worker {} has tau = 0", self.id)));
        }
        if !(self.iter_cost > 0.0 && self.iter_cost.is_finite()) {
            return Err(Error::InvalidArgument(format!("worker {} iter_cost must be positive", self.id)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(format!("worker {} batch_size must be positive", self.id)));
        }
        Ok(())
    }
}

/// `τ_S = max(1, round(τ_F / α))`.
pub fn derive_tau_s(tau_fast: usize, alpha: f64) -> Result<usize> {
    if tau_fast == 0 {
        return Err(Error::InvalidArgument("tau_f must be at least 1".into()));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and ≥ 1 (slow/fast cost ratio), got {alpha}"
        )));
    }
    Ok(crate::data::round_half_up(tau_fast as f64 / alpha).max(1))
}

/// Slow/fast ratio of mean iteration times.
pub fn measure_alpha(iter_costs_fast: &[f64], iter_costs_slow: &[f64]) -> Result<f64> {
    if iter_costs_fast.is_empty() || iter_costs_slow.is_empty() {
        return Err(Error::Empty("iteration time measurements"));
    }
    if iter_costs_fast.iter().chain(iter_costs_slow).any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument("iteration times must be positive".into()));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(mean(iter_costs_slow) / mean(iter_costs_fast))
}

/// Two-class heterogeneity description.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemProfile {
    pub alpha: f64,
    pub p_slow: usize,
    pub p_fast: usize,
    /// Ignored when `sampler_mode` is uniform.
    pub lambda: f64,
    pub tau_fast: usize,
    pub tau_slow: usize,
    pub sampler_mode: SamplerMode,
}

impl SystemProfile {
    pub fn new(
        alpha: f64,
        p_slow: usize,
        p_fast: usize,
        lambda: f64,
        tau_fast: usize,
        sampler_mode: SamplerMode,
    ) -> Result<Self> {
        let tau_slow = derive_tau_s(tau_fast, alpha)?;
        if p_slow == 0 {
            return Err(Error::InvalidArgument("at least one slow worker is required".into()));
        }
        if sampler_mode != SamplerMode::Uniform && !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be finite and ≥ 1, got {lambda}")));
        }
        Ok(Self { alpha, p_slow, p_fast, lambda, tau_fast, tau_slow, sampler_mode })
    }

    pub fn workers(&self) -> usize {
        self.p_slow + self.p_fast
    }

    /// Gradient steps per round across all workers.
    pub fn steps_per_round(&self) -> usize {
        self.p_fast * self.tau_fast + self.p_slow * self.tau_slow
    }

    /// Slow workers get ids `0..p_slow`, fast workers follow.
    pub fn worker_specs(&self, fast_iter_s: f64, slow_iter_s: f64, batch_size: usize) -> Vec<WorkerSpec> {
        let slow = (0..self.p_slow).map(|id| WorkerSpec {
            id,
            class: WorkerClass::Slow,
            tau: self.tau_slow,
            iter_cost: slow_iter_s,
            batch_size,
        });
        let fast = (0..self.p_fast).map(|k| WorkerSpec {
            id: self.p_slow + k,
            class: WorkerClass::Fast,
            tau: self.tau_fast,
            iter_cost: fast_iter_s,
            batch_size,
        });
        slow.chain(fast).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    MultiStep,
    Cosine,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "multistep" => Ok(ScheduleKind::MultiStep),
            "cosine" => Ok(ScheduleKind::Cosine),
            other => Err(Error::Config(format!("unknown schedule `{other}`"))),
        }
    }
}

/// Learning rate as a function of the communication round.
#[derive(Debug, Clone, PartialEq)]
pub enum LrSchedule {
    Constant { base: f64 },
    /// `base·decay^k` where `k` counts milestones `≤ round`.
    MultiStep { base: f64, milestones: Vec<usize>, decay: f64 },
    /// `base/2·(1 + cos(π·round/total_rounds))`, defined for `round < total_rounds`.
    Cosine { base: f64, total_rounds: usize },
}

impl LrSchedule {
    pub fn base(&self) -> f64 {
        match self {
            LrSchedule::Constant { base } | LrSchedule::MultiStep { base, .. } | LrSchedule::Cosine { base, .. } => *base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base() > 0.0 && self.base().is_finite()) {
            return Err(Error::Config("base learning rate must be positive".into()));
        }
        match self {
            LrSchedule::Constant { .. } => Ok(()),
            LrSchedule::MultiStep { milestones, decay, .. } => {
                if milestones.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("multistep milestones must be strictly increasing".into()));
                }
                if !(*decay > 0.0 && decay.is_finite()) {
                    return Err(Error::Config("multistep decay must be positive".into()));
                }
                Ok(())
            }
            LrSchedule::Cosine { total_rounds, .. } => {
                if *total_rounds == 0 {
                    return Err(Error::Config("cosine schedule needs total_rounds ≥ 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn lr_at(&self, round: usize) -> Result<f64> {
        match self {
            LrSchedule::Constant { base } => Ok(*base),
            LrSchedule::MultiStep { base, milestones, decay } => {
                let passed = milestones.iter().filter(|&&m| m <= round).count();
                Ok(base * decay.powi(passed as i32))
            }
            LrSchedule::Cosine { base, total_rounds } => {
                if round >= *total_rounds {
                    return Err(Error::InvalidArgument(format!(
                        "round {round} is past the cosine horizon of {total_rounds}"
                    )));
                }
                let phase = std::f64::consts::PI * round as f64 / *total_rounds as f64;
                Ok(0.5 * base * (1.0 + phase.cos()))
            }
        }
    }
}

/// Free-function form of [`LrSchedule::lr_at`].
pub fn lr_at(schedule: &LrSchedule, round: usize) -> Result<f64> {
    schedule.lr_at(round)
}

/// Plain SGD hyper-parameters for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSgd {
    pub lr: f64,
    pub batch_size: usize,
    /// L2 coefficient added to the gradient as `wd·W`.
    pub weight_decay: f64,
}

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub params: ParamVector,
    /// Every `(sample_id, loss)` observed, oldest first. Losses are taken at
    /// the parameters the sample's batch was evaluated at.
    pub loss_records: Vec<(usize, f64)>,
    pub steps: usize,
}

/// Runs exactly `tau` SGD steps from `start` over mini-batches taken in order
/// from a shuffled permutation of `assigned`. When the permutation runs out
/// it is reshuffled; the last batch of a pass may be short.
pub fn local_train(
    spec: &ModelSpec,
    data: &Dataset,
    start: &ParamVector,
    assigned: &[usize],
    tau: usize,
    sgd: &LocalSgd,
    stream: &mut RngStream,
) -> Result<LocalOutcome> {
    if assigned.is_empty() {
        return Err(Error::Empty("worker assignment"));
    }
    if tau == 0 || sgd.batch_size == 0 {
        return Err(Error::InvalidArgument("tau and batch_size must be at least 1".into()));
    }
    if !(sgd.lr >= 0.0 && sgd.lr.is_finite()) || !(sgd.weight_decay >= 0.0 && sgd.weight_decay.is_finite()) {
        return Err(Error::InvalidArgument("lr and weight_decay must be finite and nonnegative".into()));
    }
    let mut order = assigned.to_vec();
    stream.shuffle(&mut order);
    let mut cursor = 0;
    let mut params = start.clone();
    let mut loss_records = Vec::with_capacity(tau * sgd.batch_size.min(assigned.len()));

    for _ in 0..tau {
        if cursor >= order.len() {
            stream.shuffle(&mut order);
            cursor = 0;
        }
        let end = (cursor + sgd.batch_size).min(order.len());
        let ids = &order[cursor..end];
        cursor = end;

        let batch = data.batch(ids)?;
        let out = forward_backward(spec, &params, &batch)?;
        loss_records.extend(ids.iter().copied().zip(out.per_sample.iter().copied()));
        let grad = if sgd.weight_decay > 0.0 {
            axpy(sgd.weight_decay, &params, &out.gradient)?
        } else {
            out.gradient
        };
        params = axpy(-sgd.lr, &grad, &params)?;
    }
    Ok(LocalOutcome { params, loss_records, steps: tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticSpec};
    use crate::models::{backward, init_params};

    #[test]
    fn tau_s_derivation() {
        assert_eq!(derive_tau_s(32, 2.0).unwrap(), 16);
        assert_eq!(derive_tau_s(32, 33.0).unwrap(), 1);
        assert_eq!(derive_tau_s(32, 33.623711340206185).unwrap(), 1);
        assert_eq!(derive_tau_s(32, 1.0).unwrap(), 32);
        assert_eq!(derive_tau_s(32, 100.0).unwrap(), 1);
        assert_eq!(derive_tau_s(10, 4.0).unwrap(), 3); // 2.5 rounds half-up
        assert!(derive_tau_s(32, 0.5).is_err());
        assert!(derive_tau_s(0, 2.0).is_err());
    }

    #[test]
    fn alpha_measurement() {
        let a = measure_alpha(&[0.1940], &[6.5230]).unwrap();
        assert!((a - 33.623_711_340_206_19).abs() < 1e-12);
        assert_eq!(measure_alpha(&[0.5, 0.5], &[0.5]).unwrap(), 1.0);
        assert_eq!(measure_alpha(&[0.1, 0.3], &[0.4, 0.4]).unwrap(), 2.0);
        assert!(measure_alpha(&[], &[1.0]).is_err());
        assert!(measure_alpha(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn schedules() {
        let ms = LrSchedule::MultiStep { base: 0.1, milestones: vec![60, 80], decay: 0.1 };
        assert_eq!(ms.lr_at(59).unwrap(), 0.1);
        assert!((ms.lr_at(70).unwrap() - 0.01).abs() < 1e-15);
        assert!((ms.lr_at(80).unwrap() - 0.001).abs() < 1e-15);
        let cos = LrSchedule::Cosine { base: 0.2, total_rounds: 100 };
        assert_eq!(cos.lr_at(0).unwrap(), 0.2);
        assert!((cos.lr_at(50).unwrap() - 0.1).abs() < 1e-12);
        assert!(cos.lr_at(99).unwrap() > 0.0);
        assert!(cos.lr_at(100).is_err());
        assert_eq!(lr_at(&LrSchedule::Constant { base: 0.3 }, 1_000).unwrap(), 0.3);
        assert!(LrSchedule::MultiStep { base: 0.1, milestones: vec![5, 5], decay: 0.1 }.validate().is_err());
        assert!(LrSchedule::Cosine { base: 0.1, total_rounds: 0 }.validate().is_err());
        assert!(LrSchedule::Constant { base: 0.0 }.validate().is_err());
    }

    #[test]
    fn profile_and_worker_specs() {
        let p = SystemProfile::new(2.0, 2, 3, 1.5, 32, SamplerMode::Separated).unwrap();
        assert_eq!(p.tau_slow, 16);
        assert_eq!(p.steps_per_round(), 3 * 32 + 2 * 16);
        let w = p.worker_specs(0.1, 0.2, 8);
        assert_eq!(w.len(), 5);
        assert_eq!(w[0].class, WorkerClass::Slow);
        assert_eq!(w[4].id, 4);
        assert_eq!(w[4].tau, 32);
        assert!(SystemProfile::new(2.0, 1, 1, 0.5, 32, SamplerMode::Separated).is_err());
        assert!(SystemProfile::new(2.0, 1, 1, 0.5, 32, SamplerMode::Uniform).is_ok());
    }

    fn fixture() -> (ModelSpec, Dataset, ParamVector) {
        let spec = ModelSpec::mlp2(3, 5, 3);
        let data = make_synthetic(
            &SyntheticSpec { n: 40, input_dim: 3, num_classes: 3, separation: 2.0, ..Default::default() },
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        let params = init_params(&spec, &mut RngStream::new(1, 0)).unwrap();
        (spec, data, params)
    }

    #[test]
    fn single_full_batch_step() {
        let (spec, data, start) = fixture();
        let assigned = vec![3, 7, 11, 19, 25];
        let sgd = LocalSgd { lr: 0.3, batch_size: 16, weight_decay: 0.0 };
        let out = local_train(&spec, &data, &start, &assigned, 1, &sgd, &mut RngStream::new(5, 0)).unwrap();
        let g = backward(&spec, &start, &data.batch(&assigned).unwrap()).unwrap();
        let expected = axpy(-0.3, &g, &start).unwrap();
        assert!(out.params.max_abs_diff(&expected) < 1e-14);
        assert_eq!(out.loss_records.len(), 5);
        assert_eq!(out.steps, 1);
    }

    #[test]
    fn zero_lr_keeps_params_but_records_losses() {
        let (spec, data, start) = fixture();
        let sgd = LocalSgd { lr: 0.0, batch_size: 4, weight_decay: 0.0 };
        let out = local_train(&spec, &data, &start, &[0, 1, 2, 3, 4, 5], 3, &sgd, &mut RngStream::new(5, 0)).unwrap();
        assert!(out.params.bit_eq(&start));
        // 4 + 2 (short tail) + 4 after the reshuffle
        assert_eq!(out.loss_records.len(), 10);
    }

    #[test]
    fn three_steps_match_unrolled_oracle() {
        let (spec, data, start) = fixture();
        let assigned = vec![2, 9, 14, 30];
        let sgd = LocalSgd { lr: 0.2, batch_size: 4, weight_decay: 0.0 };
        let out = local_train(&spec, &data, &start, &assigned, 3, &sgd, &mut RngStream::new(8, 0)).unwrap();
        let batch = data.batch(&assigned).unwrap();
        let mut p = start.clone();
        for _ in 0..3 {
            let g = backward(&spec, &p, &batch).unwrap();
            p = axpy(-0.2, &g, &p).unwrap();
        }
        assert!(out.params.max_abs_diff(&p) < 1e-13);
    }

    #[test]
    fn weight_decay_adds_l2_term() {
        let (spec, data, start) = fixture();
        let assigned = vec![1, 2, 3];
        let sgd = LocalSgd { lr: 0.1, batch_size: 3, weight_decay: 0.01 };
        let out = local_train(&spec, &data, &start, &assigned, 1, &sgd, &mut RngStream::new(2, 0)).unwrap();
        let g = backward(&spec, &start, &data.batch(&assigned).unwrap()).unwrap();
        let g = axpy(0.01, &start, &g).unwrap();
        assert!(out.params.max_abs_diff(&axpy(-0.1, &g, &start).unwrap()) < 1e-14);
    }

    #[test]
    fn reproducible_for_same_stream() {
        let (spec, data, start) = fixture();
        let assigned: Vec<usize> = (0..40).collect();
        let sgd = LocalSgd { lr: 0.1, batch_size: 7, weight_decay: 0.0 };
        let a = local_train(&spec, &data, &start, &assigned, 9, &sgd, &mut RngStream::new(3, 4)).unwrap();
        let b = local_train(&spec, &data, &start, &assigned, 9, &sgd, &mut RngStream::new(3, 4)).unwrap();
        assert!(a.params.bit_eq(&b.params));
        assert_eq!(a.loss_records, b.loss_records);
    }

    #[test]
    fn empty_assignment_is_an_error() {
        let (spec, data, start) = fixture();
        let sgd = LocalSgd { lr: 0.1, batch_size: 4, weight_decay: 0.0 };
        assert!(matches!(
            local_train(&spec, &data, &start, &[], 1, &sgd, &mut RngStream::new(0, 0)),
            Err(Error::Empty(_))
        ));
    }
}
