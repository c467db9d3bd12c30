//! The round driver.
//!
//! One [`Experiment`] owns the dataset, the resolved worker layout and the
//! schedule. Each seed is played by a [`SeedRunner`]: snapshot the global
//! model, assign samples, train every worker locally, merge loss records in
//! worker-id order, aggregate, advance the simulated clock, record metrics.

use rayon::prelude::*;

use super::config::{Algorithm, Budget, DataSource, ExperimentConfig, MilestoneUnit, UnseenPolicy};
use crate::aggregation::{aggregate, AggregationRule};
use crate::data::{
    load_dataset, make_synthetic, sample_uniform, select_slow, Dataset, FastDraw, FastEpochSampler,
    LossLedger, RoundAssignment, SamplerMode, SamplingPlan, UnseenRank,
};
use crate::error::{Error, Result};
use crate::math::{ParamVector, Purpose, RngStream};
use crate::models::{accuracy, forward_loss, init_params, Batch, ModelKind, ModelSpec};
use crate::simclock::{round_timing, RoundTiming};
use crate::workers::{local_train, LocalOutcome, LocalSgd, LrSchedule, ScheduleKind, SystemProfile, WorkerSpec};

/// Environment variable capping the worker executor. `0` or unset is serial.
pub const THREADS_ENV: &str = "HSGD_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; 0 runs workers one after another on the caller.
    pub threads: usize,
}

impl RunOptions {
    pub fn serial() -> Self {
        Self { threads: 0 }
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Err(_) => Ok(Self::serial()),
            Ok(v) if v.trim().is_empty() => Ok(Self::serial()),
            Ok(v) => v
                .trim()
                .parse()
                .map(|threads| Self { threads })
                .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`"))),
        }
    }
}

/// One line of the per-round metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub seed: u64,
    pub round: usize,
    pub epoch: usize,
    pub lr: f64,
    /// Mean cross-entropy over the whole training split after aggregation.
    pub train_loss: f64,
    pub val_acc: f64,
    pub sim_wall_s: f64,
    pub sim_block_s: f64,
    pub agg_count: usize,
    pub grad_steps: usize,
}

/// The configuration bound to a concrete dataset.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub dataset: Dataset,
    pub model: ModelSpec,
    pub profile: SystemProfile,
    /// Speed ratio used for the sampling shares; 1 for the balanced baselines.
    pub sampling_alpha: f64,
    pub workers: Vec<WorkerSpec>,
    pub rule: AggregationRule,
    pub n_train: usize,
    pub rounds: usize,
    pub rounds_per_epoch: usize,
    pub schedule: LrSchedule,
    pub timing: RoundTiming,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let dataset = match &config.data {
            DataSource::Synthetic { spec, seed } => {
                make_synthetic(spec, &mut RngStream::for_purpose(*seed, Purpose::Data, 0, 0))?
            }
            DataSource::File { path, format, num_classes } => load_dataset(path, *format, *num_classes)?,
        };
        Self::with_dataset(config, dataset)
    }

    /// Binds `config` to an already loaded dataset; the config's data source
    /// is ignored.
    pub fn with_dataset(config: ExperimentConfig, dataset: Dataset) -> Result<Self> {
        let m = &config.model;
        if let Some(d) = m.input_dim {
            if d != dataset.input_dim() {
                return Err(Error::Shape(format!("model input_dim {d} but dataset has {} features", dataset.input_dim())));
            }
        }
        if let Some(c) = m.num_classes {
            if c != dataset.num_classes() {
                return Err(Error::Shape(format!("model num_classes {c} but dataset has {}", dataset.num_classes())));
            }
        }
        let model = match m.kind {
            ModelKind::LogisticRegression => ModelSpec::logistic(dataset.input_dim(), dataset.num_classes()),
            ModelKind::Mlp2 => ModelSpec::mlp2(dataset.input_dim(), m.hidden_dim, dataset.num_classes()),
        };
        model.validate()?;

        let p = &config.profile;
        let mode = config.sampler.mode;
        let (tau_f, tau_alpha, sampling_alpha) = match config.algorithm {
            Algorithm::SyncSgd => (1, 1.0, 1.0),
            Algorithm::BalancedLocal => (p.tau_f, 1.0, 1.0),
            Algorithm::UnbalancedUnbiased | Algorithm::BiasedLocal => (p.tau_f, p.alpha, p.alpha),
        };
        let mut profile = SystemProfile::new(tau_alpha, p.p_slow, p.p_fast, p.lambda, tau_f, mode)?;
        profile.alpha = p.alpha;
        let workers = profile.worker_specs(config.cost.fast_iter_s, config.cost.slow_iter_s, config.batch_size);
        let timing = round_timing(&workers, config.cost.agg_s)?;

        let n = dataset.len();
        let n_val = crate::data::round_half_up(config.val_fraction * n as f64).max(1);
        if n_val >= n {
            return Err(Error::Config(format!("validation split of {n_val} leaves no training data out of {n}")));
        }
        let n_train = n - n_val;
        // λ feasibility is checked here, before any training happens
        SamplingPlan::new(n_train, p.p_slow, p.p_fast, sampling_alpha, p.lambda, mode)?;

        let steps = profile.steps_per_round() * config.batch_size;
        let rounds_per_epoch = n_train.div_ceil(steps).max(1);
        let rounds = match config.budget {
            Budget::Rounds(r) => r,
            Budget::Epochs(e) => e * rounds_per_epoch,
            Budget::FastUpdates(u) => u.div_ceil(profile.tau_fast),
        };

        let s = &config.schedule;
        let to_rounds = |m: usize| match s.milestone_unit {
            MilestoneUnit::Round => m,
            MilestoneUnit::Epoch => m * rounds_per_epoch,
        };
        let schedule = match s.kind {
            ScheduleKind::Constant => LrSchedule::Constant { base: s.base_lr },
            ScheduleKind::MultiStep => LrSchedule::MultiStep {
                base: s.base_lr,
                milestones: s.milestones.iter().map(|&m| to_rounds(m)).collect(),
                decay: s.decay,
            },
            ScheduleKind::Cosine => LrSchedule::Cosine { base: s.base_lr, total_rounds: rounds },
        };
        schedule.validate()?;

        let rule = config.aggregation;
        Ok(Self {
            config,
            dataset,
            model,
            profile,
            sampling_alpha,
            workers,
            rule,
            n_train,
            rounds,
            rounds_per_epoch,
            schedule,
            timing,
        })
    }

    pub fn taus(&self) -> Vec<usize> {
        self.workers.iter().map(|w| w.tau).collect()
    }

    pub fn run_seed(&self, seed: u64, options: RunOptions) -> Result<SeedRun> {
        let mut runner = SeedRunner::new(self, seed, options)?;
        let mut records = Vec::with_capacity(self.rounds);
        for _ in 0..self.rounds {
            records.push(runner.step()?);
        }
        Ok(runner.finish(records))
    }

    /// Every configured seed, in order.
    pub fn run(&self, options: RunOptions) -> Result<Vec<SeedRun>> {
        self.config.seeds.iter().map(|&s| self.run_seed(s, options)).collect()
    }
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub params: ParamVector,
    pub ledger: LossLedger,
}

impl SeedRun {
    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("a run has at least one round")
    }
}

enum Executor {
    Serial,
    Pool(rayon::ThreadPool),
}

impl Executor {
    fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Ok(Executor::Serial);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(Executor::Pool)
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    fn map<F>(&self, n: usize, f: F) -> Vec<Result<LocalOutcome>>
    where
        F: Fn(usize) -> Result<LocalOutcome> + Sync + Send,
    {
        match self {
            Executor::Serial => (0..n).map(f).collect(),
            // collect keeps index order whatever the scheduling was
            Executor::Pool(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

/// Plays one seed round by round.
pub struct SeedRunner<'a> {
    exp: &'a Experiment,
    seed: u64,
    train: Dataset,
    train_batch: Batch,
    val_batch: Batch,
    plan: SamplingPlan,
    fast_epoch: Option<FastEpochSampler>,
    executor: Executor,
    global: ParamVector,
    ledger: LossLedger,
    round: usize,
    sim_wall_s: f64,
    sim_block_s: f64,
    agg_count: usize,
    grad_steps: usize,
    last_assignment: Option<RoundAssignment>,
}

impl<'a> SeedRunner<'a> {
    pub fn new(exp: &'a Experiment, seed: u64, options: RunOptions) -> Result<Self> {
        let cfg = &exp.config;
        let (train, val) = exp
            .dataset
            .split(cfg.val_fraction, &mut RngStream::for_purpose(seed, Purpose::Split, 0, 0))?;
        let global = init_params(&exp.model, &mut RngStream::for_purpose(seed, Purpose::Init, 0, 0))?;
        let p = &cfg.profile;
        let plan = SamplingPlan::new(train.len(), p.p_slow, p.p_fast, exp.sampling_alpha, p.lambda, cfg.sampler.mode)?;
        let plan = match cfg.sampler.unseen {
            UnseenPolicy::Priority => plan,
            UnseenPolicy::UniformFirstRound => plan.with_unseen(UnseenRank::Last),
        };
        let fast_epoch = (cfg.sampler.fast_draw == FastDraw::Epoch && p.p_fast > 0)
            .then(|| FastEpochSampler::new(seed, train.len(), p.p_fast, p.p_slow));
        Ok(Self {
            exp,
            seed,
            train_batch: train.full_batch(),
            val_batch: val.full_batch(),
            ledger: LossLedger::new(train.len()),
            train,
            plan,
            fast_epoch,
            executor: Executor::new(options.threads)?,
            global,
            round: 0,
            sim_wall_s: 0.0,
            sim_block_s: 0.0,
            agg_count: 0,
            grad_steps: 0,
            last_assignment: None,
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn params(&self) -> &ParamVector {
        &self.global
    }

    pub fn ledger(&self) -> &LossLedger {
        &self.ledger
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn last_assignment(&self) -> Option<&RoundAssignment> {
        self.last_assignment.as_ref()
    }

    fn assign(&mut self) -> Result<RoundAssignment> {
        let round = self.round as u64;
        let mut stream = RngStream::for_purpose(self.seed, Purpose::Sample, round, 0);
        let uniform_now = self.exp.config.sampler.unseen == UnseenPolicy::UniformFirstRound
            && self.round == 0
            && self.plan.mode != SamplerMode::Uniform;
        if uniform_now {
            return sample_uniform(&self.plan, &mut stream);
        }
        match &mut self.fast_epoch {
            None => self.plan.sample(&self.ledger, &mut stream),
            Some(epochs) => {
                let slow = select_slow(&self.ledger, &self.plan, &mut stream)?;
                let fast = epochs.next_windows(self.plan.fast_per_worker, self.plan.p_slow)?;
                Ok(RoundAssignment::new(slow, fast))
            }
        }
    }

    /// Plays one round and returns its record.
    pub fn step(&mut self) -> Result<RoundRecord> {
        let exp = self.exp;
        let lr = exp.schedule.lr_at(self.round)?;
        let assignment = self.assign()?;
        let sgd = LocalSgd { lr, batch_size: exp.config.batch_size, weight_decay: exp.config.weight_decay };
        let (seed, round) = (self.seed, self.round as u64);
        let (train, global, workers) = (&self.train, &self.global, &exp.workers);
        let outcomes = self.executor.map(workers.len(), |i| {
            let w = &workers[i];
            let mut stream = RngStream::for_purpose(seed, Purpose::Train, round, w.id as u64);
            local_train(&exp.model, train, global, assignment.worker(w.id), w.tau, &sgd, &mut stream)
        });
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

        let mut models = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            self.ledger.record_pairs(&o.loss_records, round)?;
            self.grad_steps += o.steps;
            models.push(o.params);
        }
        self.global = aggregate(exp.rule, &models, &exp.taus(), &self.global)?;
        self.agg_count += exp.timing.agg_count;
        self.sim_wall_s += exp.timing.round_wall;
        self.sim_block_s += exp.timing.total_blocking();

        let (train_loss, _) = forward_loss(&exp.model, &self.global, &self.train_batch)?;
        let val_acc = accuracy(&exp.model, &self.global, std::slice::from_ref(&self.val_batch))?;
        let record = RoundRecord {
            seed: self.seed,
            round: self.round,
            epoch: self.round / exp.rounds_per_epoch,
            lr,
            train_loss,
            val_acc,
            sim_wall_s: self.sim_wall_s,
            sim_block_s: self.sim_block_s,
            agg_count: self.agg_count,
            grad_steps: self.grad_steps,
        };
        self.last_assignment = Some(assignment);
        self.round += 1;
        Ok(record)
    }

    pub fn finish(self, records: Vec<RoundRecord>) -> SeedRun {
        SeedRun { seed: self.seed, records, params: self.global, ledger: self.ledger }
    }
}
