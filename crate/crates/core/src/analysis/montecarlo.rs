//! Monte Carlo moment estimation over independent coupled bundles.
//!
//! Per-path values are computed in parallel but collected in path order and
//! reduced sequentially, so estimates do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_coupled_bundle, BundleParams, Model, PathBundle};
use crate::error::{Error, Result};
use crate::noisegen::PathSeed;

use super::gaps::GapSelector;

/// z-quantile of the two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPoint {
    pub epsilon: f64,
    pub delta: f64,
    pub kappa: f64,
    pub paths: usize,
    pub moment: f64,
    pub ci_half_width: f64,
}

/// Sample mean and 95% half-width `1.96 s/√N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci_half_width: f64,
    pub count: usize,
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if f64::abs(sum) >= f64::abs(v) {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub fn estimate(values: &[f64]) -> Result<Estimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Estimator(format!(
            "at least 2 paths are needed for a confidence interval, got {n}"
        )));
    }
    // Shifting by the first sample keeps identical samples at exactly zero
    // variance.
    let shift = values[0];
    let mean_shifted = compensated_sum(values.iter().map(|v| v - shift)) / n as f64;
    let ss = compensated_sum(values.iter().map(|v| {
        let d = v - shift - mean_shifted;
        d * d
    }));
    let var = ss / (n - 1) as f64;
    Ok(Estimate {
        mean: shift + mean_shifted,
        ci_half_width: Z95 * (var / n as f64).sqrt(),
        count: n,
    })
}

/// Evaluates `f` on every path index in parallel; results keep input order.
pub fn map_paths<T, F>(indices: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    indices.par_iter().map(|&i| f(i)).collect()
}

/// Several squared sup-gaps from the same bundles, one estimate per selector.
pub fn mc_moments_for_paths(
    model: &Model,
    params: BundleParams,
    selectors: &[GapSelector],
    master_seed: u64,
    indices: &[u64],
) -> Result<Vec<ExperimentPoint>> {
    if indices.len() < 2 {
        return Err(Error::Estimator(format!(
            "at least 2 paths are needed for a confidence interval, got {}",
            indices.len()
        )));
    }
    let per_path: Vec<Vec<f64>> = map_paths(indices, |i| {
        let bundle = simulate_coupled_bundle(model, params, PathSeed::new(master_seed, i))?;
        selectors.iter().map(|s| s.evaluate(&bundle)).collect()
    })?;
    let kappa = (params.delta / params.epsilon - params.c).abs();
    selectors
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let values: Vec<f64> = per_path.iter().map(|v| v[k]).collect();
            let est = estimate(&values)?;
            Ok(ExperimentPoint {
                epsilon: params.epsilon,
                delta: params.delta,
                kappa,
                paths: est.count,
                moment: est.mean,
                ci_half_width: est.ci_half_width,
            })
        })
        .collect()
}

/// `E[sup gap²]` over paths `0..paths` of `master_seed`.
pub fn mc_moment(
    model: &Model,
    params: BundleParams,
    selector: GapSelector,
    paths: usize,
    master_seed: u64,
) -> Result<ExperimentPoint> {
    let indices: Vec<u64> = (0..paths as u64).collect();
    Ok(mc_moments_for_paths(model, params, &[selector], master_seed, &indices)?[0])
}

/// Runs `f` on the bundles of paths `0..paths` in parallel.
pub fn map_bundles<T, F>(
    model: &Model,
    params: BundleParams,
    master_seed: u64,
    paths: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&PathBundle) -> Result<T> + Sync,
{
    let indices: Vec<u64> = (0..paths as u64).collect();
    map_paths(&indices, |i| {
        f(&simulate_coupled_bundle(
            model,
            params,
            PathSeed::new(master_seed, i),
        )?)
    })
}
