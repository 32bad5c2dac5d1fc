// Copyright 2026 The fdp-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Estimators of the number of true nulls built from the tail view only.
//!
//! The interval estimator on `(lo, hi]` is
//! `m (F_m(hi) - F_m(lo) + 1/m) / (hi - lo)`; the Storey estimator is the
//! interval estimator on `(lambda, 1]`. Combinations use weights `beta_i`
//! over an inspection grid `lambda = l_0 < l_1 < ... < l_k = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sample::{PValueSample, TailView};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// How the combination weights are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightRule {
    /// Fixed `beta_1..beta_k`, nonnegative, summing to one.
    Deterministic(Vec<f64>),
    /// Data-driven weights; `beta_i` reads only p-values above `l_i` and the
    /// densities `beta_i / (l_i - l_{i-1})` are nondecreasing in `i`.
    ///
    /// With `L = 1/(1-lambda)` and `G = (L + 1/(1-l_1)) / 2` the densities are
    /// `g_k = G`, `g_i = min(g_{i+1}, L + (G - L) * min(1, s_i / m))` for
    /// `1 < i < k` where `s_i` is the Storey estimate at `l_i`, and `beta_1`
    /// takes the remaining mass.
    TailAdaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    /// `m0_hat = m`.
    Trivial,
    /// Storey estimator at the view's `lambda`.
    Storey,
    IntervalCombination { grid: Vec<f64>, weights: WeightRule },
}

/// Raw estimate and its floored version.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub raw: f64,
    pub floored: f64,
    pub floor_active: bool,
}

impl EstimatorSpec {
    /// Weighted Storey combination over `grid` with the given weights.
    pub fn combination(grid: Vec<f64>, weights: Vec<f64>) -> Self {
        EstimatorSpec::IntervalCombination {
            grid,
            weights: WeightRule::Deterministic(weights),
        }
    }

    /// Checks the grid and deterministic weights against `lambda`.
    pub fn validate(&self, lambda: f64) -> Result<()> {
        let EstimatorSpec::IntervalCombination { grid, weights } = self else {
            return Ok(());
        };
        if grid.len() < 2 {
            return Err(Error::InvalidEstimator(
                "grid needs at least two inspection points".into(),
            ));
        }
        if grid[0] != lambda {
            return Err(Error::InvalidEstimator(format!(
                "grid must start at lambda={lambda}, starts at {}",
                grid[0]
            )));
        }
        if grid[grid.len() - 1] != 1.0 {
            return Err(Error::InvalidEstimator("grid must end at 1".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidEstimator("grid must be strictly increasing".into()));
        }
        if let WeightRule::Deterministic(beta) = weights {
            check_weights(beta, grid.len() - 1)?;
        }
        Ok(())
    }

    /// The constant `K` with `m0_hat <= K m`.
    pub fn a3_constant(&self, lambda: f64) -> f64 {
        match self {
            EstimatorSpec::Trivial => 1.0,
            EstimatorSpec::Storey => 2.0 / (1.0 - lambda),
            EstimatorSpec::IntervalCombination { grid, .. } => {
                2.0 * grid.windows(2).map(|w| 1.0 / (w[1] - w[0])).sum::<f64>()
            }
        }
    }

    /// Whether every evaluation is guaranteed to satisfy the density ordering.
    pub fn promises_ordering(&self) -> bool {
        match self {
            EstimatorSpec::Trivial | EstimatorSpec::Storey => true,
            EstimatorSpec::IntervalCombination { grid, weights } => match weights {
                WeightRule::TailAdaptive => true,
                WeightRule::Deterministic(beta) => weights_ordered(grid, beta),
            },
        }
    }
}

fn check_weights(beta: &[f64], k: usize) -> Result<()> {
    if beta.len() != k {
        return Err(Error::InvalidEstimator(format!(
            "expected {k} weights, got {}",
            beta.len()
        )));
    }
    if let Some(b) = beta.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::InvalidEstimator(format!("negative weight {b}")));
    }
    let sum: f64 = beta.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::InvalidEstimator(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// `beta_i / (l_i - l_{i-1})` nondecreasing in `i`.
pub fn weights_ordered(grid: &[f64], beta: &[f64]) -> bool {
    let densities: Vec<f64> = grid
        .windows(2)
        .zip(beta)
        .map(|(w, b)| b / (w[1] - w[0]))
        .collect();
    densities
        .windows(2)
        .all(|d| d[0] <= d[1] * (1.0 + 1e-12) + 1e-15)
}

/// `m (1 - F_m(lambda) + 1/m) / (1 - lambda)`.
pub fn storey_estimate(view: &TailView) -> f64 {
    (view.tail_values().len() as f64 + 1.0) / (1.0 - view.lambda())
}

/// `m (F_m(hi) - F_m(lo) + 1/m) / (hi - lo)` for `lambda <= lo < hi <= 1`.
pub fn interval_estimate(view: &TailView, lo: f64, hi: f64) -> Result<f64> {
    if !(lo >= view.lambda() && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "interval ({lo}, {hi}] not inside [{}, 1]",
            view.lambda()
        )));
    }
    let count = view.count_between(lo, hi).expect("checked interval");
    Ok((count as f64 + 1.0) / (hi - lo))
}

/// Evaluates the weight rule on the view.
pub fn evaluate_weights(grid: &[f64], rule: &WeightRule, view: &TailView) -> Result<Vec<f64>> {
    let k = grid.len() - 1;
    let beta = match rule {
        WeightRule::Deterministic(beta) => beta.clone(),
        WeightRule::TailAdaptive => {
            if k == 1 {
                vec![1.0]
            } else {
                let m = view.m() as f64;
                let low = 1.0 / (1.0 - grid[0]);
                let high = 0.5 * (low + 1.0 / (1.0 - grid[1]));
                let mut density = vec![0.0; k + 1];
                density[k] = high;
                for i in (2..k).rev() {
                    let above = view.count_between(grid[i], 1.0).expect("grid inside tail");
                    let storey_at = (above as f64 + 1.0) / (1.0 - grid[i]);
                    let candidate = low + (high - low) * (storey_at / m).min(1.0);
                    density[i] = density[i + 1].min(candidate);
                }
                let mut beta = vec![0.0; k];
                for i in 2..=k {
                    beta[i - 1] = density[i] * (grid[i] - grid[i - 1]);
                }
                let rest: f64 = beta[1..].iter().sum();
                beta[0] = (1.0 - rest).max(0.0);
                beta
            }
        }
    };
    check_weights(&beta, k)?;
    Ok(beta)
}

/// `sum_i beta_i * interval_estimate(l_{i-1}, l_i)`.
pub fn combined_estimate(spec: &EstimatorSpec, view: &TailView) -> Result<f64> {
    let EstimatorSpec::IntervalCombination { grid, weights } = spec else {
        return Err(Error::InvalidEstimator(
            "combined_estimate needs an interval combination".into(),
        ));
    };
    if grid.first() != Some(&view.lambda()) {
        return Err(Error::InvalidEstimator(
            "grid does not start at the view's lambda".into(),
        ));
    }
    let beta = evaluate_weights(grid, weights, view)?;
    if spec.promises_ordering() && !weights_ordered(grid, &beta) {
        return Err(Error::InvalidEstimator(format!(
            "weights {beta:?} violate the density ordering"
        )));
    }
    let counts = interval_counts(grid, view);
    let value = grid
        .windows(2)
        .zip(&beta)
        .zip(&counts)
        .map(|((w, b), &c)| b * (c as f64 + 1.0) / (w[1] - w[0]))
        .sum::<f64>();
    debug_assert!(value > 0.0);
    Ok(value)
}

/// Counts of tail values in each grid interval, one pass.
fn interval_counts(grid: &[f64], view: &TailView) -> Vec<usize> {
    let mut counts = vec![0usize; grid.len() - 1];
    for &p in view.tail_values() {
        // first grid point at or above p; p > grid[0] always
        let idx = grid.partition_point(|&g| g < p);
        counts[idx - 1] += 1;
    }
    counts
}

/// Raw (unfloored) estimate for any spec.
pub fn estimate(spec: &EstimatorSpec, view: &TailView) -> Result<f64> {
    match spec {
        EstimatorSpec::Trivial => Ok(view.m() as f64),
        EstimatorSpec::Storey => Ok(storey_estimate(view)),
        EstimatorSpec::IntervalCombination { .. } => combined_estimate(spec, view),
    }
}

/// `max(raw, (alpha/lambda) R_m(lambda))`.
pub fn apply_floor(raw: f64, view: &TailView, alpha: f64) -> EstimateRecord {
    let floor = alpha / view.lambda() * view.r_lambda() as f64;
    let floored = raw.max(floor);
    EstimateRecord {
        raw,
        floored,
        floor_active: floor > raw,
    }
}

/// Empirical check that the estimator never decreases when a single p-value
/// increases. Runs a chain of `trials` random increases starting at `sample`.
pub fn monotonicity_probe(
    spec: &EstimatorSpec,
    sample: &PValueSample,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<bool> {
    spec.validate(lambda)?;
    if matches!(spec, EstimatorSpec::Trivial) {
        return Ok(true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = sample.clone();
    let mut value = estimate(spec, &TailView::from_sample(&current, lambda)?)?;
    for _ in 0..trials {
        let idx = rng.random_range(0..current.m());
        let old = current.values()[idx];
        let new = old + (1.0 - old) * rng.random::<f64>();
        current.values_mut()[idx] = new;
        let next = estimate(spec, &TailView::from_sample(&current, lambda)?)?;
        if next < value {
            return Ok(false);
        }
        value = next;
    }
    Ok(true)
}
