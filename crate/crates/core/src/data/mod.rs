//! Datasets, the per-sample loss ledger and the per-round samplers.

mod io;
mod ledger;
mod sampling;

pub use io::{load_binary, load_csv, load_dataset, save_binary, save_csv, DatasetFormat, BINARY_MAGIC};
pub use ledger::LossLedger;
pub use sampling::{
    fast_per_worker, fast_per_worker_exact, lambda_is_valid, pool_size, pool_size_exact,
    round_half_up, sample_separated, sample_uniform, sample_unified, select_slow, slow_total,
    slow_total_exact, FastDraw, FastEpochSampler, RoundAssignment, SamplerMode, SamplingPlan,
    UnseenRank,
};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::models::Batch;

/// In-memory labelled dataset, features row-major `n × input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    input_dim: usize,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, input_dim: usize, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Shape("dataset input_dim must be at least 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::Shape(format!(
                "{} feature values for {} samples of width {input_dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, classes: num_classes });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        Ok(Self { features, input_dim, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// Gathers the given rows into a batch whose sample ids are the row indices.
    pub fn batch(&self, ids: &[usize]) -> Result<Batch> {
        let mut features = Vec::with_capacity(ids.len() * self.input_dim);
        let mut labels = Vec::with_capacity(ids.len());
        for &id in ids {
            if id >= self.len() {
                return Err(Error::IdOutOfRange { id, n: self.len() });
            }
            features.extend_from_slice(self.row(id));
            labels.push(self.labels[id]);
        }
        Batch::new(features, self.input_dim, labels, ids.to_vec())
    }

    /// The whole dataset as a single batch.
    pub fn full_batch(&self) -> Batch {
        Batch::new(self.features.clone(), self.input_dim, self.labels.clone(), (0..self.len()).collect())
            .expect("dataset invariants imply a valid batch")
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, ids: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(ids.len() * self.input_dim);
        let mut labels = Vec::with_capacity(ids.len());
        for &id in ids {
            if id >= self.len() {
                return Err(Error::IdOutOfRange { id, n: self.len() });
            }
            features.extend_from_slice(self.row(id));
            labels.push(self.labels[id]);
        }
        Dataset::new(features, self.input_dim, labels, self.num_classes)
    }

    /// Shuffles the rows with `stream` and holds out `round(val_fraction·n)`
    /// of them (at least one) for validation. Returns `(train, validation)`.
    pub fn split(&self, val_fraction: f64, stream: &mut RngStream) -> Result<(Dataset, Dataset)> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction must lie in (0, 1), got {val_fraction}"
            )));
        }
        let n = self.len();
        let n_val = round_half_up(val_fraction * n as f64).max(1);
        if n_val >= n {
            return Err(Error::InvalidArgument(format!(
                "validation split of {n_val} leaves no training data out of {n}"
            )));
        }
        let perm = stream.permutation(n);
        let (val_ids, train_ids) = perm.split_at(n_val);
        Ok((self.subset(train_ids)?, self.subset(val_ids)?))
    }
}

/// Class-conditional Gaussian blobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Distance between neighbouring class means, in units of `std`. Ignored
    /// when `means` is given.
    pub separation: f64,
    /// Per-dimension standard deviation; one value means isotropic.
    pub std: Vec<f64>,
    /// Explicit class means (`num_classes` rows of `input_dim`), overriding
    /// the default placement.
    pub means: Option<Vec<Vec<f64>>>,
    /// Probability that a sample's label is replaced by a different class.
    pub label_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            input_dim: 2,
            num_classes: 2,
            separation: 10.0,
            std: vec![1.0],
            means: None,
            label_noise: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.input_dim == 0 || self.num_classes < 2 {
            return Err(Error::Config(
                "synthetic data needs n ≥ 1, input_dim ≥ 1 and num_classes ≥ 2".into(),
            ));
        }
        if self.std.is_empty()
            || (self.std.len() != 1 && self.std.len() != self.input_dim)
            || self.std.iter().any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::Config("synthetic std must be 1 or input_dim positive values".into()));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Config("synthetic separation must be finite and nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::Config("label_noise must lie in [0, 1)".into()));
        }
        if let Some(means) = &self.means {
            if means.len() != self.num_classes || means.iter().any(|m| m.len() != self.input_dim) {
                return Err(Error::Config(format!(
                    "synthetic means must be {} rows of {} values",
                    self.num_classes, self.input_dim
                )));
            }
        }
        Ok(())
    }

    fn std_at(&self, dim: usize) -> f64 {
        if self.std.len() == 1 {
            self.std[0]
        } else {
            self.std[dim]
        }
    }

    /// Class means. Default placement puts neighbouring means `separation·σ`
    /// apart, with `σ` the first std entry: scaled basis vectors when
    /// `input_dim ≥ num_classes`, a circle in the first two dimensions
    /// otherwise, and a line for one-dimensional inputs.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        if let Some(means) = &self.means {
            return means.clone();
        }
        let (d, c) = (self.input_dim, self.num_classes);
        let dist = self.separation * self.std[0];
        (0..c)
            .map(|k| {
                let mut m = vec![0.0; d];
                if d >= c {
                    m[k] = dist / std::f64::consts::SQRT_2;
                } else if d >= 2 {
                    let radius = dist / (2.0 * (std::f64::consts::PI / c as f64).sin());
                    let angle = 2.0 * std::f64::consts::PI * k as f64 / c as f64;
                    m[0] = radius * angle.cos();
                    m[1] = radius * angle.sin();
                } else {
                    m[0] = dist * k as f64;
                }
                m
            })
            .collect()
    }
}

/// Draws a synthetic dataset. Sample `i` belongs to class `i mod C` before
/// label noise, so classes are balanced.
pub fn make_synthetic(spec: &SyntheticSpec, stream: &mut RngStream) -> Result<Dataset> {
    spec.validate()?;
    let means = spec.class_means();
    let (d, c) = (spec.input_dim, spec.num_classes);
    let mut features = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let class = i % c;
        for (dim, mean) in means[class].iter().enumerate() {
            let z: f64 = StandardNormal.sample(stream);
            features.push(mean + spec.std_at(dim) * z);
        }
        let noisy = spec.label_noise > 0.0 && stream.uniform() < spec.label_noise;
        let label = if noisy { (class + 1 + stream.below(c - 1)) % c } else { class };
        labels.push(label);
    }
    Dataset::new(features, d, labels, c)
}
