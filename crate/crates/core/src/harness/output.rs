//! Metrics persistence: the per-round CSV and the run summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::runner::{RoundRecord, SeedRun};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] =
    ["seed", "round", "epoch", "lr", "train_loss", "val_acc", "sim_wall_s", "sim_block_s", "agg_count", "grad_steps"];

/// Writes the header and every record of every seed, seeds in run order.
pub fn write_csv<W: Write>(runs: &[SeedRun], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in runs.iter().flat_map(|run| &run.records) {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

fn record_fields(r: &RoundRecord) -> [String; 10] {
    [
        r.seed.to_string(),
        r.round.to_string(),
        r.epoch.to_string(),
        r.lr.to_string(),
        r.train_loss.to_string(),
        r.val_acc.to_string(),
        r.sim_wall_s.to_string(),
        r.sim_block_s.to_string(),
        r.agg_count.to_string(),
        r.grad_steps.to_string(),
    ]
}

/// Final-accuracy summary across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub algorithm: String,
    pub final_acc_mean: f64,
    /// Half the range of the final accuracies.
    pub final_acc_spread: f64,
    /// Sample standard deviation, reported from three seeds on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_acc_std: Option<f64>,
    /// Mean over seeds; identical for every seed of one config.
    pub total_sim_wall_s: f64,
    pub total_agg_count: usize,
}

impl Summary {
    pub fn new(config_hash: &str, algorithm: &str, runs: &[SeedRun]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Empty("seed runs"));
        }
        let accs: Vec<f64> = runs.iter().map(|r| r.final_record().val_acc).collect();
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let (lo, hi) = accs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)));
        let std = (accs.len() >= 3).then(|| {
            let ss: f64 = accs.iter().map(|a| (a - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        });
        let last = runs[0].final_record();
        Ok(Self {
            config_hash: config_hash.to_string(),
            algorithm: algorithm.to_string(),
            final_acc_mean: mean,
            final_acc_spread: (hi - lo) / 2.0,
            final_acc_std: std,
            total_sim_wall_s: runs.iter().map(|r| r.final_record().sim_wall_s).sum::<f64>() / n,
            total_agg_count: last.agg_count,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }

    /// `mean ± spread` in percent, two decimals.
    pub fn mean_pm_spread(&self) -> String {
        format!("{:.2} ± {:.2}", 100.0 * self.final_acc_mean, 100.0 * self.final_acc_spread)
    }
}

/// `runs/demo.csv` → `runs/demo.summary.json`.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.json")
}

/// Writes the CSV to `path` and the summary JSON next to it.
pub fn write_outputs(path: &Path, runs: &[SeedRun], summary: &Summary) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(runs, file)?;
    std::fs::write(summary_path(path), summary.to_json() + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LossLedger;
    use crate::math::ParamVector;

    fn run(seed: u64, acc: f64) -> SeedRun {
        let record = RoundRecord {
            seed,
            round: 0,
            epoch: 0,
            lr: 0.1,
            train_loss: 0.5,
            val_acc: acc,
            sim_wall_s: 6.5,
            sim_block_s: 0.25,
            agg_count: 1,
            grad_steps: 33,
        };
        SeedRun { seed, records: vec![record], params: ParamVector::zeros(1), ledger: LossLedger::new(1) }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&[run(3, 0.75)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "seed,round,epoch,lr,train_loss,val_acc,sim_wall_s,sim_block_s,agg_count,grad_steps\n\
             3,0,0,0.1,0.5,0.75,6.5,0.25,1,33\n"
        );
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::new("abc", "biased_local", &[run(0, 0.9), run(1, 0.8)]).unwrap();
        assert!((s.final_acc_mean - 0.85).abs() < 1e-15);
        assert!((s.final_acc_spread - 0.05).abs() < 1e-15);
        assert_eq!(s.final_acc_std, None);
        assert!(!s.to_json().contains("final_acc_std"));
        let s = Summary::new("abc", "biased_local", &[run(0, 0.9), run(1, 0.8), run(2, 0.7)]).unwrap();
        assert!((s.final_acc_std.unwrap() - 0.1).abs() < 1e-12);
        assert!(s.to_json().starts_with("{\"config_hash\":\"abc\",\"algorithm\":\"biased_local\""));
        assert!(Summary::new("abc", "x", &[]).is_err());
    }

    #[test]
    fn summary_path_replaces_extension() {
        assert_eq!(summary_path(Path::new("out/run.csv")), Path::new("out/run.summary.json"));
    }
}
