//! Small differentiable classifiers with hand-written forward and backward
//! passes: multinomial logistic regression and a two-layer ReLU MLP.
//!
//! Parameters live in one flat [`ParamVector`]. Layouts (row-major):
//!
//! ```text
//! logistic_regression:  W[C×D] | b[C]
//! mlp2:                 W1[H×D] | b1[H] | W2[C×H] | b2[C]
//! ```

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{argmax, cross_entropy_loss, softmax_into, ParamVector, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LogisticRegression,
    Mlp2,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic_regression" | "logreg" => Ok(ModelKind::LogisticRegression),
            "mlp2" => Ok(ModelKind::Mlp2),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::Mlp2 => "mlp2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    /// Ignored for logistic regression.
    pub hidden_dim: usize,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn logistic(input_dim: usize, num_classes: usize) -> Self {
        Self { kind: ModelKind::LogisticRegression, input_dim, hidden_dim: 0, num_classes }
    }

    pub fn mlp2(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self { kind: ModelKind::Mlp2, input_dim, hidden_dim, num_classes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("model input_dim must be at least 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("model num_classes must be at least 2".into()));
        }
        if self.kind == ModelKind::Mlp2 && self.hidden_dim == 0 {
            return Err(Error::Config("mlp2 hidden_dim must be at least 1".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.num_classes);
        match self.kind {
            ModelKind::LogisticRegression => c * d + c,
            ModelKind::Mlp2 => h * d + h + c * h + c,
        }
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch { expected: self.param_count(), found: params.len() });
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.input_dim != self.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} features, model expects {}",
                batch.input_dim, self.input_dim
            )));
        }
        if let Some(&label) = batch.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::LabelOutOfRange { label, classes: self.num_classes });
        }
        Ok(())
    }
}

/// A mini-batch: `rows × input_dim` features, one label and one global sample
/// id per row. Sample ids are distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    features: Vec<f64>,
    input_dim: usize,
    labels: Vec<usize>,
    sample_ids: Vec<usize>,
}

impl Batch {
    pub fn new(
        features: Vec<f64>,
        input_dim: usize,
        labels: Vec<usize>,
        sample_ids: Vec<usize>,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Shape("input_dim must be at least 1".into()));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::Shape(format!(
                "{} feature values for {} rows of width {input_dim}",
                features.len(),
                labels.len()
            )));
        }
        if sample_ids.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: labels.len(), found: sample_ids.len() });
        }
        let mut seen = HashSet::with_capacity(sample_ids.len());
        if let Some(dup) = sample_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::Shape(format!("sample id {dup} appears twice in one batch")));
        }
        Ok(Self { features, input_dim, labels, sample_ids })
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

    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.input_dim..(j + 1) * self.input_dim]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_ids(&self) -> &[usize] {
        &self.sample_ids
    }
}

/// Zero-mean uniform weights in `±1/√fan_in`, zero biases.
pub fn init_params(spec: &ModelSpec, stream: &mut RngStream) -> Result<ParamVector> {
    spec.validate()?;
    let (d, h, c) = (spec.input_dim, spec.hidden_dim, spec.num_classes);
    let mut out = Vec::with_capacity(spec.param_count());
    let mut fill = |out: &mut Vec<f64>, count: usize, fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        out.extend((0..count).map(|_| stream.uniform_range(-bound, bound)));
    };
    match spec.kind {
        ModelKind::LogisticRegression => {
            fill(&mut out, c * d, d);
            out.extend(std::iter::repeat_n(0.0, c));
        }
        ModelKind::Mlp2 => {
            fill(&mut out, h * d, d);
            out.extend(std::iter::repeat_n(0.0, h));
            fill(&mut out, c * h, h);
            out.extend(std::iter::repeat_n(0.0, c));
        }
    }
    ParamVector::new(out)
}

/// Borrowed views of the parameter blocks.
struct Layers<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    // mlp2 only
    w2: &'a [f64],
    b2: &'a [f64],
}

fn split_params<'a>(spec: &ModelSpec, p: &'a [f64]) -> Layers<'a> {
    let (d, h, c) = (spec.input_dim, spec.hidden_dim, spec.num_classes);
    match spec.kind {
        ModelKind::LogisticRegression => {
            let (w1, b1) = p.split_at(c * d);
            Layers { w1, b1, w2: &[], b2: &[] }
        }
        ModelKind::Mlp2 => {
            let (w1, rest) = p.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(c * h);
            Layers { w1, b1, w2, b2 }
        }
    }
}

/// `out = W·x + b` for a row-major `W` of shape `out.len() × x.len()`.
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * n_in..(r + 1) * n_in];
        *o = b[r] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    }
}

/// Per-row scratch buffers.
struct Scratch {
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

impl Scratch {
    fn new(spec: &ModelSpec) -> Self {
        Self {
            hidden_pre: vec![0.0; spec.hidden_dim],
            hidden: vec![0.0; spec.hidden_dim],
            logits: vec![0.0; spec.num_classes],
            probs: vec![0.0; spec.num_classes],
        }
    }
}

fn forward_row(spec: &ModelSpec, layers: &Layers<'_>, x: &[f64], s: &mut Scratch) {
    match spec.kind {
        ModelKind::LogisticRegression => affine(layers.w1, layers.b1, x, &mut s.logits),
        ModelKind::Mlp2 => {
            affine(layers.w1, layers.b1, x, &mut s.hidden_pre);
            for (a, z) in s.hidden.iter_mut().zip(&s.hidden_pre) {
                *a = z.max(0.0);
            }
            affine(layers.w2, layers.b2, &s.hidden, &mut s.logits);
        }
    }
}

/// Output logits for one input row.
pub fn logits(spec: &ModelSpec, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    spec.check_params(params)?;
    if x.len() != spec.input_dim {
        return Err(Error::Shape(format!("row has {} features, expected {}", x.len(), spec.input_dim)));
    }
    let layers = split_params(spec, params.as_slice());
    let mut s = Scratch::new(spec);
    forward_row(spec, &layers, x, &mut s);
    Ok(s.logits)
}

/// Mean cross-entropy over the batch together with every per-sample loss,
/// in batch row order.
pub fn forward_loss(spec: &ModelSpec, params: &ParamVector, batch: &Batch) -> Result<(f64, Vec<f64>)> {
    spec.check_params(params)?;
    spec.check_batch(batch)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let layers = split_params(spec, params.as_slice());
    let mut s = Scratch::new(spec);
    let mut losses = Vec::with_capacity(batch.len());
    for j in 0..batch.len() {
        forward_row(spec, &layers, batch.row(j), &mut s);
        losses.push(cross_entropy_loss(&s.logits, batch.labels[j])?);
    }
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok((mean, losses))
}

/// Gradient of the mean batch loss.
pub fn backward(spec: &ModelSpec, params: &ParamVector, batch: &Batch) -> Result<ParamVector> {
    forward_backward(spec, params, batch).map(|out| out.gradient)
}

#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub mean_loss: f64,
    pub per_sample: Vec<f64>,
    pub gradient: ParamVector,
}

/// One pass computing the loss terms and the gradient of their mean.
pub fn forward_backward(spec: &ModelSpec, params: &ParamVector, batch: &Batch) -> Result<ForwardBackward> {
    spec.check_params(params)?;
    spec.check_batch(batch)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let (d, h, c) = (spec.input_dim, spec.hidden_dim, spec.num_classes);
    let layers = split_params(spec, params.as_slice());
    let mut grad = vec![0.0; spec.param_count()];
    let mut s = Scratch::new(spec);
    let mut delta_hidden = vec![0.0; h];
    let mut per_sample = Vec::with_capacity(batch.len());
    let scale = 1.0 / batch.len() as f64;

    for j in 0..batch.len() {
        let x = batch.row(j);
        let y = batch.labels[j];
        forward_row(spec, &layers, x, &mut s);
        per_sample.push(cross_entropy_loss(&s.logits, y)?);
        softmax_into(&s.logits, &mut s.probs);
        // dL/dlogits = softmax - onehot
        s.probs[y] -= 1.0;
        let dlogits = &s.probs;

        match spec.kind {
            ModelKind::LogisticRegression => {
                let (gw, gb) = grad.split_at_mut(c * d);
                for k in 0..c {
                    let g = dlogits[k] * scale;
                    gb[k] += g;
                    for (gwi, xi) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *gwi += g * xi;
                    }
                }
            }
            ModelKind::Mlp2 => {
                let (gw1, rest) = grad.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(c * h);
                delta_hidden.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..c {
                    let g = dlogits[k] * scale;
                    gb2[k] += g;
                    let w2_row = &layers.w2[k * h..(k + 1) * h];
                    for u in 0..h {
                        gw2[k * h + u] += g * s.hidden[u];
                        delta_hidden[u] += g * w2_row[u];
                    }
                }
                for u in 0..h {
                    if s.hidden_pre[u] <= 0.0 {
                        continue;
                    }
                    let g = delta_hidden[u];
                    gb1[u] += g;
                    for (gwi, xi) in gw1[u * d..(u + 1) * d].iter_mut().zip(x) {
                        *gwi += g * xi;
                    }
                }
            }
        }
    }
    let mean_loss = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    let gradient = ParamVector::new(grad).map_err(|_| Error::NonFinite("backward"))?;
    Ok(ForwardBackward { mean_loss, per_sample, gradient })
}

/// Central finite differences of an arbitrary scalar function.
pub fn finite_diff_grad_fn<F>(f: F, params: &ParamVector, h: f64) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = params.clone().into_vec();
    let mut out = Vec::with_capacity(probe.len());
    for k in 0..probe.len() {
        let orig = probe[k];
        probe[k] = orig + h;
        let plus = f(&ParamVector::new(probe.clone())?)?;
        probe[k] = orig - h;
        let minus = f(&ParamVector::new(probe.clone())?)?;
        probe[k] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    ParamVector::new(out)
}

/// Central-difference gradient of the mean batch loss. Uses only
/// [`forward_loss`], never the analytic backward pass.
pub fn finite_diff_grad(spec: &ModelSpec, params: &ParamVector, batch: &Batch, h: f64) -> Result<ParamVector> {
    finite_diff_grad_fn(|p| forward_loss(spec, p, batch).map(|(mean, _)| mean), params, h)
}

/// Hidden pre-activations for every row, row-major `rows × hidden_dim`.
/// Empty for logistic regression.
pub fn hidden_pre_activations(spec: &ModelSpec, params: &ParamVector, batch: &Batch) -> Result<Vec<f64>> {
    spec.check_params(params)?;
    spec.check_batch(batch)?;
    if spec.kind == ModelKind::LogisticRegression {
        return Ok(Vec::new());
    }
    let layers = split_params(spec, params.as_slice());
    let mut s = Scratch::new(spec);
    let mut out = Vec::with_capacity(batch.len() * spec.hidden_dim);
    for j in 0..batch.len() {
        forward_row(spec, &layers, batch.row(j), &mut s);
        out.extend_from_slice(&s.hidden_pre);
    }
    Ok(out)
}

/// Number of rows predicted correctly; ties in the logits go to the lowest class.
pub fn correct_count(spec: &ModelSpec, params: &ParamVector, batch: &Batch) -> Result<usize> {
    spec.check_params(params)?;
    spec.check_batch(batch)?;
    let layers = split_params(spec, params.as_slice());
    let mut s = Scratch::new(spec);
    let mut correct = 0;
    for j in 0..batch.len() {
        forward_row(spec, &layers, batch.row(j), &mut s);
        if argmax(&s.logits) == batch.labels[j] {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Fraction of correctly classified samples across all batches.
pub fn accuracy(spec: &ModelSpec, params: &ParamVector, batches: &[Batch]) -> Result<f64> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for b in batches {
        correct += correct_count(spec, params, b)?;
        total += b.len();
    }
    if total == 0 {
        return Err(Error::Empty("evaluation set"));
    }
    Ok(correct as f64 / total as f64)
}
