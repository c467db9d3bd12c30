//! Numeric primitives shared by every other module: flat parameter vectors,
//! seeded random streams and the softmax cross-entropy loss.
//!
//! Everything here is deterministic. All accumulation happens in `f64`.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on `Σ weights == 1` accepted by [`weighted_sum`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Flat model parameter (or gradient) vector.
///
/// The length is fixed at construction and every entry is finite. Operations
/// that would produce a NaN or an infinity return [`Error::NonFinite`] instead.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ParamVector::new"));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute element-wise difference. Panics on length mismatch.
    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.len(), other.len(), "max_abs_diff length mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Bit-level equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &ParamVector) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { expected, found });
    }
    Ok(())
}

/// `a·x + y`, element-wise.
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    check_len(x.len(), y.len())?;
    if !a.is_finite() {
        return Err(Error::NonFinite("axpy scalar"));
    }
    let out: Vec<f64> = x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("axpy"));
    }
    Ok(ParamVector(out))
}

/// Convex combination `Σ_i weights[i]·models[i]`.
///
/// Weights must be nonnegative and sum to one within [`WEIGHT_SUM_TOL`].
/// Accumulation runs in model order, so the result is reproducible bit for bit.
pub fn weighted_sum(models: &[ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let first = models.first().ok_or(Error::Empty("weighted_sum models"))?;
    check_len(models.len(), weights.len())?;
    for m in models {
        check_len(first.len(), m.len())?;
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidWeights(format!("weight {w} is negative or not finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}, expected 1")));
    }
    let mut out = vec![0.0; first.len()];
    for (model, &w) in models.iter().zip(weights) {
        for (acc, v) in out.iter_mut().zip(&model.0) {
            *acc += w * v;
        }
    }
    ParamVector::new(out).map_err(|_| Error::NonFinite("weighted_sum"))
}

/// `log Σ exp(z)` with max subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    max + sum.ln()
}

/// Softmax probabilities, written into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `−log softmax(logits)[label]`.
pub fn cross_entropy_loss(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange { label, classes: logits.len() });
    }
    let loss = log_sum_exp(logits) - logits[label];
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross_entropy_loss"));
    }
    // lse ≥ z[label] holds exactly; rounding can leave a tiny negative.
    Ok(loss.max(0.0))
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// What a random stream is used for. Folded into the stream id so that
/// different consumers never share a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Init = 1,
    Split = 2,
    Sample = 3,
    Train = 4,
    FastEpoch = 5,
    Data = 6,
    Test = 7,
}

/// Packs `(purpose, round, worker)` into a 64-bit stream id:
/// 8 bits of purpose, 32 bits of round, 24 bits of worker.
pub fn stream_id(purpose: Purpose, round: u64, worker: u64) -> u64 {
    ((purpose as u64) << 56) | ((round & 0xFFFF_FFFF) << 24) | (worker & 0xFF_FFFF)
}

/// Seeded random stream.
///
/// Backed by ChaCha8 with the seed expanded through `seed_from_u64` and the
/// stream id selecting one of its 2^64 independent streams, so the sequence
/// depends only on `(seed, stream_id)` and the call sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn for_purpose(seed: u64, purpose: Purpose, round: u64, worker: u64) -> Self {
        Self::new(seed, stream_id(purpose, round, worker))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// `k` distinct indices from `0..n`, every k-subset equally likely.
    /// The returned order is random.
    pub fn choose_without_replacement(&mut self, n: usize, k: usize) -> Result<Vec<usize>> {
        if k > n {
            return Err(Error::SampleSize { k, n });
        }
        Ok(index::sample(&mut self.rng, n, k).into_vec())
    }

    /// Uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..n).collect();
        out.shuffle(&mut self.rng);
        out
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw from `[low, high)`.
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
