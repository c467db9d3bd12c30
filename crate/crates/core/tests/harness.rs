mod common;

use std::path::Path;

use hsgd::data::{make_synthetic, save_binary, save_csv, SyntheticSpec};
use hsgd::error::Error;
use hsgd::harness::{Algorithm, Experiment, ExperimentConfig, RunOptions, SeedRunner, Summary};
use hsgd::math::{axpy, ParamVector, Purpose, RngStream};
use hsgd::models::backward;

use common::{as_algorithm, load_config, run_all};

const SMALL: &str = "
algorithm = biased_local
seeds = 4
synthetic.n = 600
synthetic.input_dim = 3
synthetic.num_classes = 3
synthetic.separation = 5
model.kind = mlp2
model.hidden_dim = 6
profile.alpha = 8
profile.tau_f = 8
profile.p_slow = 2
profile.p_fast = 2
train.batch_size = 8
budget.rounds = 6
cost.fast_iter_s = 0.25
cost.agg_s = 0.5
";

fn small() -> ExperimentConfig {
    ExperimentConfig::parse(SMALL, Path::new(".")).unwrap()
}

fn set(config: &ExperimentConfig, key: &str, value: &str) -> ExperimentConfig {
    config.with_override(key, value).unwrap()
}

#[test]
fn records_and_budget_accounting() {
    for algorithm in Algorithm::ALL {
        let exp = Experiment::new(as_algorithm(&small(), algorithm)).unwrap();
        let run = exp.run_seed(4, RunOptions::serial()).unwrap();
        let per_round = exp.workers.iter().map(|w| w.tau).sum::<usize>();
        let expected = match algorithm {
            Algorithm::SyncSgd => 4,
            Algorithm::BalancedLocal => 4 * 8,
            _ => 2 * 8 + 2,
        };
        assert_eq!(per_round, expected, "{algorithm}");
        let mut prev_wall = 0.0;
        for (r, rec) in run.records.iter().enumerate() {
            assert_eq!(rec.round, r);
            assert_eq!(rec.agg_count, r + 1);
            assert_eq!(rec.grad_steps, (r + 1) * expected);
            assert!(rec.sim_wall_s > prev_wall);
            assert!(rec.val_acc >= 0.0 && rec.val_acc <= 1.0);
            assert!(rec.train_loss.is_finite());
            prev_wall = rec.sim_wall_s;
        }
    }
}

#[test]
fn wall_clock_matches_closed_form() {
    let demo = load_config("demo.conf").with_override("seeds", "1").unwrap();
    let sync = Experiment::new(as_algorithm(&demo, Algorithm::SyncSgd)).unwrap();
    let biased = Experiment::new(as_algorithm(&demo, Algorithm::BiasedLocal)).unwrap();
    let s = sync.run_seed(1, RunOptions::serial()).unwrap();
    let b = biased.run_seed(1, RunOptions::serial()).unwrap();
    let (fast, slow, agg): (f64, f64, f64) = (0.1940, 6.5230, 0.05);
    // 640 single steps, each gated by the slow worker
    let sync_wall = 640.0 * (slow + agg);
    // 20 rounds of max(32 fast steps, 1 slow step)
    let biased_wall = 20.0 * ((32.0 * fast).max(slow) + agg);
    assert!((s.final_record().sim_wall_s - sync_wall).abs() < 1e-6);
    assert!((b.final_record().sim_wall_s - biased_wall).abs() < 1e-9);
    assert!(b.final_record().sim_wall_s < s.final_record().sim_wall_s);
    let blocked = 20.0 * (slow - 32.0 * fast);
    assert!((b.final_record().sim_block_s - blocked).abs() < 1e-9);
}

#[test]
fn two_seed_summary_is_mean_and_half_range() {
    let cfg = set(&small(), "seeds", "1, 2");
    let runs = run_all(cfg.clone());
    let accs: Vec<f64> = runs.iter().map(|r| r.final_record().val_acc).collect();
    let s = Summary::new(&cfg.config_hash(), "biased_local", &runs).unwrap();
    assert!((s.final_acc_mean - (accs[0] + accs[1]) / 2.0).abs() < 1e-15);
    assert!((s.final_acc_spread - (accs[0] - accs[1]).abs() / 2.0).abs() < 1e-15);
    assert!(s.final_acc_std.is_none());
    assert_eq!(s.total_agg_count, 6);
}

#[test]
fn sync_sgd_equals_gradient_averaging() {
    // one step per worker and balanced model averaging is the averaged gradient step
    let cfg = as_algorithm(&small(), Algorithm::SyncSgd);
    let exp = Experiment::new(cfg).unwrap();
    let mut runner = SeedRunner::new(&exp, 4, RunOptions::serial()).unwrap();
    for _ in 0..5 {
        let start = runner.params().clone();
        let lr = exp.schedule.lr_at(runner.round()).unwrap();
        let round = runner.round() as u64;
        runner.step().unwrap();
        let assignment = runner.last_assignment().unwrap();
        let mut mean_grad = None;
        for w in &exp.workers {
            let mut order = assignment.worker(w.id).to_vec();
            RngStream::for_purpose(4, Purpose::Train, round, w.id as u64).shuffle(&mut order);
            let batch = runner.train_set().batch(&order[..exp.config.batch_size.min(order.len())]).unwrap();
            let g = backward(&exp.model, &start, &batch).unwrap();
            let p = exp.workers.len() as f64;
            let scaled = ParamVector::new(g.as_slice().iter().map(|v| v / p).collect()).unwrap();
            mean_grad = Some(match mean_grad {
                None => scaled,
                Some(acc) => axpy(1.0, &scaled, &acc).unwrap(),
            });
        }
        let expected = axpy(-lr, &mean_grad.unwrap(), &start).unwrap();
        assert!(runner.params().max_abs_diff(&expected) < 1e-12);
    }
}

#[test]
fn unified_and_epoch_modes_run() {
    let unified = set(&small(), "sampler.mode", "unified");
    let exp = Experiment::new(unified).unwrap();
    let mut runner = SeedRunner::new(&exp, 4, RunOptions::serial()).unwrap();
    for _ in 0..3 {
        runner.step().unwrap();
        let all: Vec<usize> = runner.last_assignment().unwrap().per_worker.concat();
        let distinct: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), all.len());
    }

    let epoch = set(&small(), "sampler.fast_draw", "epoch");
    let exp = Experiment::new(epoch).unwrap();
    let mut runner = SeedRunner::new(&exp, 4, RunOptions::serial()).unwrap();
    let n = runner.train_set().len();
    let k = runner.plan().fast_per_worker;
    let mut seen = vec![0usize; n];
    // within one pass over the permutation a fast worker sees no repeats
    for _ in 0..(n / k) {
        runner.step().unwrap();
        for &i in &runner.last_assignment().unwrap().fast_lists()[0] {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c <= 1));
}

#[test]
fn uniform_first_round_changes_only_what_it_should() {
    let base = small();
    let late = set(&base, "sampler.unseen", "uniform_first_round");
    let a = run_all(base);
    let b = run_all(late);
    assert_eq!(a[0].records.len(), b[0].records.len());
    assert_ne!(a[0].records[0].train_loss, b[0].records[0].train_loss);
}

#[test]
fn infeasible_lambda_and_shape_errors() {
    let err = Experiment::new(set(&small(), "profile.lambda", "12")).unwrap_err();
    assert!(matches!(err, Error::InvalidLambda { .. }), "{err}");
    // uniform baselines ignore λ
    Experiment::new(as_algorithm(&set(&small(), "profile.lambda", "12"), Algorithm::UnbalancedUnbiased)).unwrap();
    let err = Experiment::new(set(&small(), "model.num_classes", "7")).unwrap_err();
    assert!(matches!(err, Error::Shape(_)));
}

#[test]
fn file_datasets_feed_the_driver() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { n: 200, input_dim: 2, num_classes: 2, ..SyntheticSpec::default() };
    let data = make_synthetic(&spec, &mut RngStream::new(1, 1)).unwrap();
    save_csv(&data, &dir.path().join("blobs.csv")).unwrap();
    save_binary(&data, &dir.path().join("blobs.bin")).unwrap();
    let text = "algorithm = biased_local\nprofile.alpha = 4\nprofile.tau_f = 8\nbudget.rounds = 3\n\
                data.source = file\ndata.path = blobs.csv\n";
    let csv_cfg = ExperimentConfig::parse(text, dir.path()).unwrap();
    let bin_cfg = csv_cfg.edit(&[("data.path", Some("blobs.bin")), ("data.format", Some("binary"))]).unwrap();
    let a = run_all(csv_cfg);
    let b = run_all(bin_cfg);
    // the features are f32-rounded in the binary file, so only the shape is shared
    assert_eq!(a[0].records.len(), 3);
    assert_eq!(b[0].records.len(), 3);
}

#[test]
fn schedules_in_epochs_and_cosine() {
    let cfg = small().edit(&[
        ("schedule.kind", Some("multistep")),
        ("schedule.milestones", Some("1")),
        ("schedule.milestone_unit", Some("epoch")),
        ("schedule.decay", Some("0.5")),
        ("budget.rounds", None),
        ("budget.epochs", Some("3")),
    ]);
    let exp = Experiment::new(cfg.unwrap()).unwrap();
    assert_eq!(exp.rounds, 3 * exp.rounds_per_epoch);
    let run = exp.run_seed(4, RunOptions::serial()).unwrap();
    for r in &run.records {
        let want = if r.epoch >= 1 { 0.05 } else { 0.1 };
        assert!((r.lr - want).abs() < 1e-15, "round {} epoch {} lr {}", r.round, r.epoch, r.lr);
    }

    let cosine = Experiment::new(set(&small(), "schedule.kind", "cosine")).unwrap();
    let run = cosine.run_seed(4, RunOptions::serial()).unwrap();
    assert_eq!(run.records[0].lr, 0.1);
    assert!(run.records.windows(2).all(|w| w[1].lr < w[0].lr && w[1].lr > 0.0));
}

#[test]
fn parallel_workers_match_serial() {
    let exp = Experiment::new(small()).unwrap();
    let a = exp.run_seed(4, RunOptions::serial()).unwrap();
    let b = exp.run_seed(4, RunOptions { threads: 3 }).unwrap();
    assert!(a.params.bit_eq(&b.params));
    assert_eq!(a.records, b.records);
}
