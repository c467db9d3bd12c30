//! Per-round data assignment.
//!
//! Loss-biased sampling runs in three steps each round:
//!
//! 1. draw a candidate pool of `λ·P_S·N / (P_S + α·P_F)` indices uniformly
//!    without replacement (one joint draw for all slow workers);
//! 2. keep the `P_S·N / (P_S + α·P_F)` pool members with the highest ledger
//!    loss and deal them round-robin to the slow workers;
//! 3. every fast worker draws `α·N / (P_S + α·P_F)` indices on its own.
//!
//! In separated mode step 3 draws from the whole dataset, so fast lists may
//! overlap the slow set and each other. In unified mode the fast workers
//! share one draw without replacement from the complement of the slow set.
//! Uniform mode replaces steps 1–2 with a plain uniform draw.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use super::LossLedger;
use crate::error::{Error, Result};
use crate::math::{Purpose, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    Separated,
    Unified,
    Uniform,
}

impl FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separated" => Ok(SamplerMode::Separated),
            "unified" => Ok(SamplerMode::Unified),
            "uniform" => Ok(SamplerMode::Uniform),
            other => Err(Error::Config(format!("unknown sampler mode `{other}`"))),
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMode::Separated => "separated",
            SamplerMode::Unified => "unified",
            SamplerMode::Uniform => "uniform",
        })
    }
}

/// How fast workers obtain their data across rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FastDraw {
    /// A fresh uniform draw every round.
    #[default]
    Fresh,
    /// Consecutive windows of a per-worker permutation of the dataset,
    /// reshuffled when a window no longer fits.
    Epoch,
}

impl FromStr for FastDraw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fresh" => Ok(FastDraw::Fresh),
            "epoch" => Ok(FastDraw::Epoch),
            other => Err(Error::Config(format!("unknown fast draw mode `{other}`"))),
        }
    }
}

/// Where never-seen samples rank in top-loss selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnseenRank {
    /// Above every observed loss.
    #[default]
    First,
    /// Below every observed loss.
    Last,
}

/// Round-half-up to a count. Negative inputs map to zero.
pub fn round_half_up(x: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    let floor = x.floor();
    let r = if x - floor >= 0.5 { floor + 1.0 } else { floor };
    r as usize
}

fn check_counts(p_slow: usize, alpha: f64) -> Result<()> {
    if p_slow == 0 {
        return Err(Error::InvalidArgument("at least one slow worker is required".into()));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be finite and ≥ 1, got {alpha}")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be finite and ≥ 1, got {lambda}")));
    }
    Ok(())
}

fn share_denominator(p_slow: usize, p_fast: usize, alpha: f64) -> f64 {
    p_slow as f64 + alpha * p_fast as f64
}

/// `λ·P_S·N / (P_S + α·P_F)`, unrounded.
pub fn pool_size_exact(n: usize, p_slow: usize, p_fast: usize, alpha: f64, lambda: f64) -> f64 {
    lambda * p_slow as f64 * n as f64 / share_denominator(p_slow, p_fast, alpha)
}

/// `P_S·N / (P_S + α·P_F)`, unrounded.
pub fn slow_total_exact(n: usize, p_slow: usize, p_fast: usize, alpha: f64) -> f64 {
    p_slow as f64 * n as f64 / share_denominator(p_slow, p_fast, alpha)
}

/// `α·N / (P_S + α·P_F)`, unrounded.
pub fn fast_per_worker_exact(n: usize, p_slow: usize, p_fast: usize, alpha: f64) -> f64 {
    alpha * n as f64 / share_denominator(p_slow, p_fast, alpha)
}

/// Whether the candidate pool fits in the dataset, i.e.
/// `λ·P_S·N / (P_S + α·P_F) ≤ N`, evaluated in its N-free form
/// `λ·P_S ≤ P_S + α·P_F`.
pub fn lambda_is_valid(p_slow: usize, p_fast: usize, alpha: f64, lambda: f64) -> bool {
    lambda * p_slow as f64 <= share_denominator(p_slow, p_fast, alpha)
}

/// Candidate pool size. A λ that would make the pool larger than the
/// dataset is an error, not a clamp.
pub fn pool_size(n: usize, p_slow: usize, p_fast: usize, alpha: f64, lambda: f64) -> Result<usize> {
    check_counts(p_slow, alpha)?;
    check_lambda(lambda)?;
    if !lambda_is_valid(p_slow, p_fast, alpha, lambda) {
        return Err(Error::InvalidLambda {
            lambda,
            pool: pool_size_exact(n, p_slow, p_fast, alpha, lambda),
            n,
        });
    }
    Ok(round_half_up(pool_size_exact(n, p_slow, p_fast, alpha, lambda)).min(n))
}

/// Total number of top-loss samples handed to slow workers.
pub fn slow_total(n: usize, p_slow: usize, p_fast: usize, alpha: f64) -> Result<usize> {
    check_counts(p_slow, alpha)?;
    Ok(round_half_up(slow_total_exact(n, p_slow, p_fast, alpha)))
}

/// Samples drawn by each fast worker.
pub fn fast_per_worker(n: usize, p_slow: usize, p_fast: usize, alpha: f64) -> Result<usize> {
    check_counts(p_slow, alpha)?;
    Ok(round_half_up(fast_per_worker_exact(n, p_slow, p_fast, alpha)))
}

/// Resolved counts for one configuration.
///
/// The formula counts are adjusted so that every worker receives at least
/// one sample, the pool holds at least the slow selection, nothing exceeds
/// `n`, and in unified mode the fast draws fit in the complement of the slow
/// set.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub n: usize,
    pub p_slow: usize,
    pub p_fast: usize,
    pub mode: SamplerMode,
    pub pool: usize,
    pub slow_total: usize,
    pub fast_per_worker: usize,
    pub unseen: UnseenRank,
}

impl SamplingPlan {
    pub fn new(
        n: usize,
        p_slow: usize,
        p_fast: usize,
        alpha: f64,
        lambda: f64,
        mode: SamplerMode,
    ) -> Result<Self> {
        check_counts(p_slow, alpha)?;
        if n < p_slow + p_fast {
            return Err(Error::InvalidArgument(format!(
                "dataset of {n} samples cannot feed {} workers",
                p_slow + p_fast
            )));
        }
        let slow = slow_total(n, p_slow, p_fast, alpha)?.clamp(p_slow, n);
        let mut fast = fast_per_worker(n, p_slow, p_fast, alpha)?.clamp(1, n);
        let pool = match mode {
            SamplerMode::Uniform => slow,
            _ => pool_size(n, p_slow, p_fast, alpha, lambda)?.max(slow),
        };
        if mode == SamplerMode::Unified && p_fast > 0 {
            fast = fast.min((n - slow) / p_fast);
            if fast == 0 {
                return Err(Error::InvalidArgument(format!(
                    "unified sampling leaves {} samples for {p_fast} fast workers",
                    n - slow
                )));
            }
        }
        Ok(Self { n, p_slow, p_fast, mode, pool, slow_total: slow, fast_per_worker: fast, unseen: UnseenRank::First })
    }

    pub fn with_unseen(mut self, unseen: UnseenRank) -> Self {
        self.unseen = unseen;
        self
    }

    pub fn workers(&self) -> usize {
        self.p_slow + self.p_fast
    }

    /// Dispatches on the plan's mode with fresh fast draws.
    pub fn sample(&self, ledger: &LossLedger, stream: &mut RngStream) -> Result<RoundAssignment> {
        match self.mode {
            SamplerMode::Separated => sample_separated(ledger, self, stream),
            SamplerMode::Unified => sample_unified(ledger, self, stream),
            SamplerMode::Uniform => sample_uniform(self, stream),
        }
    }
}

/// Sample indices per worker for one round. Slow workers occupy ids
/// `0..p_slow`, fast workers `p_slow..p_slow + p_fast`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundAssignment {
    pub per_worker: Vec<Vec<usize>>,
    pub p_slow: usize,
}

impl RoundAssignment {
    pub fn new(slow: Vec<Vec<usize>>, fast: Vec<Vec<usize>>) -> Self {
        let p_slow = slow.len();
        let mut per_worker = slow;
        per_worker.extend(fast);
        Self { per_worker, p_slow }
    }

    pub fn worker(&self, id: usize) -> &[usize] {
        &self.per_worker[id]
    }

    pub fn slow_lists(&self) -> &[Vec<usize>] {
        &self.per_worker[..self.p_slow]
    }

    pub fn fast_lists(&self) -> &[Vec<usize>] {
        &self.per_worker[self.p_slow..]
    }

    /// All slow-worker indices, in selection order.
    pub fn slow_set(&self) -> Vec<usize> {
        self.slow_lists().iter().flatten().copied().collect()
    }
}

fn rank_key(ledger: &LossLedger, id: usize, unseen: UnseenRank) -> f64 {
    match (ledger.loss(id), unseen) {
        (Some(l), _) => l,
        (None, UnseenRank::First) => f64::INFINITY,
        (None, UnseenRank::Last) => f64::NEG_INFINITY,
    }
}

fn deal_round_robin(selected: &[usize], p_slow: usize) -> Vec<Vec<usize>> {
    let mut lists = vec![Vec::with_capacity(selected.len() / p_slow + 1); p_slow];
    for (i, &id) in selected.iter().enumerate() {
        lists[i % p_slow].push(id);
    }
    lists
}

fn check_ledger(ledger: &LossLedger, plan: &SamplingPlan) -> Result<()> {
    if ledger.len() != plan.n {
        return Err(Error::LengthMismatch { expected: plan.n, found: ledger.len() });
    }
    Ok(())
}

/// Steps 1–2: candidate pool, top-loss selection under (loss desc, index
/// asc), round-robin dealing. In uniform mode the slow set is a plain
/// uniform draw.
pub fn select_slow(ledger: &LossLedger, plan: &SamplingPlan, stream: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    if plan.mode == SamplerMode::Uniform {
        let chosen = stream.choose_without_replacement(plan.n, plan.slow_total)?;
        return Ok(deal_round_robin(&chosen, plan.p_slow));
    }
    check_ledger(ledger, plan)?;
    let mut pool = stream.choose_without_replacement(plan.n, plan.pool)?;
    let cmp = |a: &usize, b: &usize| -> Ordering {
        rank_key(ledger, *b, plan.unseen)
            .total_cmp(&rank_key(ledger, *a, plan.unseen))
            .then(a.cmp(b))
    };
    if plan.slow_total < pool.len() {
        pool.select_nth_unstable_by(plan.slow_total, cmp);
        pool.truncate(plan.slow_total);
    }
    pool.sort_unstable_by(cmp);
    Ok(deal_round_robin(&pool, plan.p_slow))
}

fn draw_fast_fresh(plan: &SamplingPlan, stream: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    (0..plan.p_fast)
        .map(|_| stream.choose_without_replacement(plan.n, plan.fast_per_worker))
        .collect()
}

/// Loss-biased slow selection; every fast worker draws independently from
/// the whole dataset.
pub fn sample_separated(ledger: &LossLedger, plan: &SamplingPlan, stream: &mut RngStream) -> Result<RoundAssignment> {
    let slow = select_slow(ledger, plan, stream)?;
    let fast = draw_fast_fresh(plan, stream)?;
    Ok(RoundAssignment::new(slow, fast))
}

/// Loss-biased slow selection; the fast workers then split one draw without
/// replacement from the samples the slow workers did not get.
pub fn sample_unified(ledger: &LossLedger, plan: &SamplingPlan, stream: &mut RngStream) -> Result<RoundAssignment> {
    let slow = select_slow(ledger, plan, stream)?;
    let mut taken = vec![false; plan.n];
    for &id in slow.iter().flatten() {
        taken[id] = true;
    }
    let remainder: Vec<usize> = (0..plan.n).filter(|&i| !taken[i]).collect();
    let need = plan.p_fast * plan.fast_per_worker;
    if remainder.len() < need {
        return Err(Error::SampleSize { k: need, n: remainder.len() });
    }
    let picks = stream.choose_without_replacement(remainder.len(), need)?;
    let fast = picks
        .chunks(plan.fast_per_worker.max(1))
        .take(plan.p_fast)
        .map(|chunk| chunk.iter().map(|&p| remainder[p]).collect())
        .collect();
    Ok(RoundAssignment::new(slow, fast))
}

/// No loss bias: uniform slow draw, independent fast draws.
pub fn sample_uniform(plan: &SamplingPlan, stream: &mut RngStream) -> Result<RoundAssignment> {
    let uniform = SamplingPlan { mode: SamplerMode::Uniform, ..plan.clone() };
    let slow = select_slow(&LossLedger::new(0), &uniform, stream)?;
    let fast = draw_fast_fresh(plan, stream)?;
    Ok(RoundAssignment::new(slow, fast))
}

/// Per-fast-worker permutations consumed window by window across rounds.
#[derive(Debug, Clone)]
pub struct FastEpochSampler {
    seed: u64,
    n: usize,
    cursors: Vec<Cursor>,
}

#[derive(Debug, Clone)]
struct Cursor {
    perm: Vec<usize>,
    pos: usize,
    epoch: u64,
}

impl FastEpochSampler {
    /// `worker_offset` is the id of the first fast worker; it keys the streams.
    pub fn new(seed: u64, n: usize, p_fast: usize, worker_offset: usize) -> Self {
        let cursors = (0..p_fast)
            .map(|w| {
                let mut stream = RngStream::for_purpose(seed, Purpose::FastEpoch, 0, (worker_offset + w) as u64);
                Cursor { perm: stream.permutation(n), pos: 0, epoch: 0 }
            })
            .collect();
        Self { seed, n, cursors }
    }

    /// Next window of `k` indices for every fast worker.
    pub fn next_windows(&mut self, k: usize, worker_offset: usize) -> Result<Vec<Vec<usize>>> {
        if k > self.n {
            return Err(Error::SampleSize { k, n: self.n });
        }
        let (seed, n) = (self.seed, self.n);
        Ok(self
            .cursors
            .iter_mut()
            .enumerate()
            .map(|(w, c)| {
                if c.pos + k > n {
                    c.epoch += 1;
                    let mut stream =
                        RngStream::for_purpose(seed, Purpose::FastEpoch, c.epoch, (worker_offset + w) as u64);
                    c.perm = stream.permutation(n);
                    c.pos = 0;
                }
                let window = c.perm[c.pos..c.pos + k].to_vec();
                c.pos += k;
                window
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.4999999), 2);
        assert_eq!(round_half_up(0.49999999999999994), 0);
        assert_eq!(round_half_up(-1.0), 0);
    }

    #[test]
    fn count_formulas() {
        assert_eq!(pool_size(1000, 1, 1, 1.0, 2.0).unwrap(), 1000);
        assert_eq!(pool_size(50_000, 1, 1, 32.0, 2.0).unwrap(), 3030);
        assert_eq!(slow_total(1000, 1, 1, 1.0).unwrap(), 500);
        assert_eq!(slow_total(50_000, 2, 8, 32.0).unwrap(), 388);
        assert_eq!(fast_per_worker(1000, 1, 1, 1.0).unwrap(), 500);
        assert_eq!(fast_per_worker(900, 1, 1, 2.0).unwrap(), 600);
    }

    #[test]
    fn lambda_na_condition() {
        // α = 2, λ = 4: pool = 4N/3 > N
        assert!(matches!(pool_size(900, 1, 1, 2.0, 4.0), Err(Error::InvalidLambda { .. })));
        assert!(pool_size(900, 1, 1, 2.0, 3.0).is_ok());
        assert!(pool_size(900, 1, 1, 2.0, 0.5).is_err());
        assert!(slow_total(900, 0, 1, 2.0).is_err());
        assert!(slow_total(900, 1, 1, 0.5).is_err());
    }

    #[test]
    fn pool_grows_with_lambda() {
        let mut prev = 0;
        for lambda in [1.0, 1.5, 2.0, 4.0, 8.0, 16.0, 33.0] {
            let p = pool_size(10_000, 1, 1, 32.0, lambda).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }

    fn ledger_with(losses: &[Option<f64>]) -> LossLedger {
        let mut ledger = LossLedger::new(losses.len());
        for (i, l) in losses.iter().enumerate() {
            if let Some(l) = l {
                ledger.record(&[i], &[*l], 0).unwrap();
            }
        }
        ledger
    }

    #[test]
    fn full_pool_picks_global_top_set() {
        // N = 40, α = 1, P_S = P_F = 1: slow_total = 20, λ = 2 → pool = N
        let n = 40;
        let mut rng = RngStream::new(1, 0);
        let hot: HashSet<usize> = rng.choose_without_replacement(n, 20).unwrap().into_iter().collect();
        let losses: Vec<Option<f64>> = (0..n).map(|i| Some(if hot.contains(&i) { 10.0 } else { 0.0 })).collect();
        let ledger = ledger_with(&losses);
        let plan = SamplingPlan::new(n, 1, 1, 1.0, 2.0, SamplerMode::Separated).unwrap();
        assert_eq!(plan.pool, n);
        let a = sample_separated(&ledger, &plan, &mut rng).unwrap();
        let got: HashSet<usize> = a.slow_set().into_iter().collect();
        assert_eq!(got, hot);
        assert_eq!(a.fast_lists()[0].len(), 20);

        let u = sample_unified(&ledger, &SamplingPlan { mode: SamplerMode::Unified, ..plan }, &mut rng).unwrap();
        assert!(u.fast_lists()[0].iter().all(|i| !hot.contains(i)));
    }

    #[test]
    fn unseen_ties_break_to_lowest_index() {
        let ledger = LossLedger::new(50);
        let plan = SamplingPlan::new(50, 1, 1, 3.0, 2.0, SamplerMode::Separated).unwrap();
        let mut rng = RngStream::new(2, 0);
        let mut replay = rng.clone();
        let a = sample_separated(&ledger, &plan, &mut rng).unwrap();
        let mut pool = replay.choose_without_replacement(50, plan.pool).unwrap();
        pool.sort_unstable();
        pool.truncate(plan.slow_total);
        assert_eq!(a.slow_set(), pool);
    }

    #[test]
    fn unseen_rank_last_prefers_observed() {
        let mut losses = vec![None; 30];
        losses[29] = Some(0.01);
        let ledger = ledger_with(&losses);
        // pool = N so sample 29 is always a candidate
        let plan = SamplingPlan::new(30, 1, 1, 1.0, 2.0, SamplerMode::Separated).unwrap().with_unseen(UnseenRank::Last);
        let a = sample_separated(&ledger, &plan, &mut RngStream::new(4, 0)).unwrap();
        assert_eq!(a.slow_set()[0], 29);
    }

    #[test]
    fn round_robin_shares() {
        // N=20, P_S=2, P_F=1, α=3: slow_total = round(40/5) = 8
        let plan = SamplingPlan::new(20, 2, 1, 3.0, 2.0, SamplerMode::Separated).unwrap();
        assert_eq!(plan.slow_total, 8);
        let plan = SamplingPlan { slow_total: 5, ..plan };
        let a = sample_separated(&LossLedger::new(20), &plan, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(a.slow_lists()[0].len(), 3);
        assert_eq!(a.slow_lists()[1].len(), 2);
    }

    #[test]
    fn unified_single_fast_worker_gets_complement() {
        let n = 30;
        let plan = SamplingPlan::new(n, 1, 1, 2.0, 1.5, SamplerMode::Unified).unwrap();
        assert_eq!(plan.slow_total + plan.fast_per_worker, n);
        let a = sample_unified(&LossLedger::new(n), &plan, &mut RngStream::new(9, 0)).unwrap();
        let mut all: Vec<usize> = a.per_worker.concat();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn unified_rejects_oversized_fast_share() {
        let plan = SamplingPlan::new(30, 1, 1, 2.0, 1.5, SamplerMode::Unified).unwrap();
        let plan = SamplingPlan { fast_per_worker: plan.fast_per_worker + 1, ..plan };
        assert!(sample_unified(&LossLedger::new(30), &plan, &mut RngStream::new(9, 0)).is_err());
    }

    #[test]
    fn plan_guarantees_a_sample_per_worker() {
        let plan = SamplingPlan::new(10, 1, 1, 40.0, 1.0, SamplerMode::Separated).unwrap();
        assert_eq!(plan.slow_total, 1);
        assert!(plan.pool >= 1);
        assert!(SamplingPlan::new(1, 1, 1, 1.0, 1.0, SamplerMode::Separated).is_err());
    }

    #[test]
    fn ledger_size_must_match() {
        let plan = SamplingPlan::new(10, 1, 1, 1.0, 1.0, SamplerMode::Separated).unwrap();
        assert!(sample_separated(&LossLedger::new(9), &plan, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn epoch_windows_cover_the_permutation() {
        let mut s = FastEpochSampler::new(3, 12, 2, 1);
        let w1 = s.next_windows(5, 1).unwrap();
        let w2 = s.next_windows(5, 1).unwrap();
        for w in 0..2 {
            let mut both: Vec<usize> = w1[w].iter().chain(&w2[w]).copied().collect();
            both.sort_unstable();
            both.dedup();
            assert_eq!(both.len(), 10);
        }
        // third window no longer fits: fresh permutation
        let w3 = s.next_windows(5, 1).unwrap();
        assert_eq!(w3[0].len(), 5);
        assert!(s.next_windows(13, 1).is_err());
    }
}
