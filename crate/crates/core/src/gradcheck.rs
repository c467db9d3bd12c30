//! Analytic-vs-numeric gradient verification over random instances.
//!
//! The numeric side is [`finite_diff_grad`], built only on the forward pass.
//! For the MLP, coordinates whose ±h probe moves any hidden pre-activation
//! across the ReLU kink (or that sit within [`KINK_MARGIN`] of it) are
//! excluded, since central differences are meaningless there.

use crate::error::Result;
use crate::math::{ParamVector, RngStream};
use crate::models::{
    backward, finite_diff_grad, hidden_pre_activations, init_params, Batch, ModelKind, ModelSpec,
};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const KINK_MARGIN: f64 = 1e-7;
/// Denominator floor of [`relative_error`], so that two gradients that are
/// both numerically zero do not produce a spurious large ratio.
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// `|a − b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone)]
pub struct InstanceReport {
    pub spec: ModelSpec,
    pub batch_size: usize,
    pub max_rel_err: f64,
    pub checked: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub instances: Vec<InstanceReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.instances.iter().map(|r| r.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tolerance
    }

    pub fn checked(&self) -> usize {
        self.instances.iter().map(|r| r.checked).sum()
    }

    pub fn excluded(&self) -> usize {
        self.instances.iter().map(|r| r.excluded).sum()
    }
}

fn active_pattern(pre: &[f64]) -> Vec<bool> {
    pre.iter().map(|z| *z > 0.0).collect()
}

/// Coordinates whose central-difference probe straddles a ReLU kink.
pub fn kink_adjacent(spec: &ModelSpec, params: &ParamVector, batch: &Batch, h: f64) -> Result<Vec<bool>> {
    let mut out = vec![false; params.len()];
    if spec.kind != ModelKind::Mlp2 {
        return Ok(out);
    }
    let pre = hidden_pre_activations(spec, params, batch)?;
    let near = pre.iter().any(|z| z.abs() < KINK_MARGIN);
    let base = active_pattern(&pre);
    let mut probe = params.clone().into_vec();
    for (k, flag) in out.iter_mut().enumerate() {
        let orig = probe[k];
        for shifted in [orig + h, orig - h] {
            probe[k] = shifted;
            let p = ParamVector::new(probe.clone())?;
            let moved = hidden_pre_activations(spec, &p, batch)?;
            let crosses = active_pattern(&moved) != base;
            let touches = near && moved.iter().zip(&pre).any(|(m, z)| m != z && z.abs() < KINK_MARGIN);
            if crosses || touches {
                *flag = true;
            }
        }
        probe[k] = orig;
    }
    Ok(out)
}

pub fn check_instance(spec: &ModelSpec, params: &ParamVector, batch: &Batch, h: f64) -> Result<InstanceReport> {
    let analytic = backward(spec, params, batch)?;
    let numeric = finite_diff_grad(spec, params, batch, h)?;
    let skip = kink_adjacent(spec, params, batch, h)?;
    let mut max_rel_err: f64 = 0.0;
    let mut checked = 0;
    for ((a, n), s) in analytic.as_slice().iter().zip(numeric.as_slice()).zip(&skip) {
        if *s {
            continue;
        }
        checked += 1;
        max_rel_err = max_rel_err.max(relative_error(*a, *n));
    }
    Ok(InstanceReport {
        spec: *spec,
        batch_size: batch.len(),
        max_rel_err,
        checked,
        excluded: skip.iter().filter(|s| **s).count(),
    })
}

/// A random model, parameter vector and batch. Parameters are the standard
/// initialization plus Gaussian-scale noise so that biases are nonzero.
pub fn random_instance(stream: &mut RngStream) -> Result<(ModelSpec, ParamVector, Batch)> {
    let d = 1 + stream.below(6);
    let c = 2 + stream.below(4);
    let spec = if stream.uniform() < 0.3 {
        ModelSpec::logistic(d, c)
    } else {
        ModelSpec::mlp2(d, 1 + stream.below(8), c)
    };
    let init = init_params(&spec, stream)?;
    let params = ParamVector::new(init.as_slice().iter().map(|v| v + stream.uniform_range(-0.5, 0.5)).collect())?;
    let rows = 1 + stream.below(8);
    let features = (0..rows * d).map(|_| stream.uniform_range(-2.0, 2.0)).collect();
    let labels = (0..rows).map(|_| stream.below(c)).collect();
    let batch = Batch::new(features, d, labels, (0..rows).collect())?;
    Ok((spec, params, batch))
}

pub fn run_suite(instances: usize, seed: u64, h: f64, tolerance: f64) -> Result<GradCheckReport> {
    let mut stream = RngStream::new(seed, 0x6772_6164);
    let mut reports = Vec::with_capacity(instances);
    for _ in 0..instances {
        let (spec, params, batch) = random_instance(&mut stream)?;
        reports.push(check_instance(&spec, &params, &batch, h)?);
    }
    Ok(GradCheckReport { instances: reports, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert!(relative_error(1e-12, 0.0) <= 1e-4);
    }

    #[test]
    fn logistic_has_no_kinks() {
        let mut s = RngStream::new(1, 0);
        let spec = ModelSpec::logistic(3, 2);
        let params = init_params(&spec, &mut s).unwrap();
        let batch = Batch::new(vec![1.0, 2.0, 3.0], 3, vec![1], vec![0]).unwrap();
        assert!(kink_adjacent(&spec, &params, &batch, 1e-5).unwrap().iter().all(|k| !k));
    }

    #[test]
    fn kink_straddling_coordinate_is_excluded() {
        // one hidden unit with pre-activation 1e-6 = w·x: perturbing w by 1e-5 crosses zero
        let spec = ModelSpec::mlp2(1, 1, 2);
        let params = ParamVector::new(vec![1e-6, 0.0, 1.0, -1.0, 0.0, 0.0]).unwrap();
        let batch = Batch::new(vec![1.0], 1, vec![0], vec![0]).unwrap();
        let skip = kink_adjacent(&spec, &params, &batch, 1e-5).unwrap();
        assert!(skip[0] && skip[1]);
        assert!(!skip[2] && !skip[4]);
    }

    #[test]
    fn small_suite_passes() {
        let report = run_suite(10, 7, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err());
        assert!(report.checked() > 0);
    }
}
