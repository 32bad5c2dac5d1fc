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

//! Critical values and the step-up rejection rule.

use crate::error::{Error, Result};
use crate::sample::PValueSample;

/// Which family produced a vector of critical values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Bh { alpha: f64 },
    Adaptive { alpha: f64, lambda: f64, m0_hat: f64 },
    Quotient { alpha: f64, a: f64, b: f64 },
    Custom,
}

/// Anything that yields critical values `alpha_{i:m}` for `i = 1..=m`.
pub trait CriticalRule {
    fn len(&self) -> usize;

    /// `alpha_{i:m}`, 1-based.
    fn alpha(&self, i: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest `i` with `p <= alpha_{i:m}`, or `None` if `p` exceeds them all.
    fn rank_of(&self, p: f64) -> Option<usize> {
        let m = self.len();
        if m == 0 || p > self.alpha(m) {
            return None;
        }
        let (mut lo, mut hi) = (1usize, m);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if p <= self.alpha(mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo)
    }
}

/// A validated chain `0 < alpha_1 <= ... <= alpha_m < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValues {
    alphas: Vec<f64>,
    provenance: Provenance,
}

impl CriticalValues {
    pub fn new(alphas: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidCriticalValues("empty".into()));
        }
        if !(alphas[0] > 0.0) {
            return Err(Error::InvalidCriticalValues(format!(
                "alpha_1={} must be positive",
                alphas[0]
            )));
        }
        if let Some(w) = alphas.windows(2).position(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidCriticalValues(format!(
                "not nondecreasing at i={}",
                w + 1
            )));
        }
        let last = alphas[alphas.len() - 1];
        if !(last < 1.0) {
            return Err(Error::InvalidCriticalValues(format!(
                "alpha_m={last} must be below 1"
            )));
        }
        Ok(Self { alphas, provenance })
    }

    /// Materializes a closed-form rule.
    pub fn from_rule<R: CriticalRule>(rule: &R, provenance: Provenance) -> Result<Self> {
        Self::new((1..=rule.len()).map(|i| rule.alpha(i)).collect(), provenance)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

impl CriticalRule for CriticalValues {
    fn len(&self) -> usize {
        self.alphas.len()
    }

    fn alpha(&self, i: usize) -> f64 {
        self.alphas[i - 1]
    }

    fn rank_of(&self, p: f64) -> Option<usize> {
        let idx = self.alphas.partition_point(|&a| a < p);
        (idx < self.alphas.len()).then_some(idx + 1)
    }
}

/// `R_m = max{i : p_{i:m} <= alpha_{i:m}}` with `p_{0:m} = 0`.
pub fn step_up_count<R: CriticalRule + ?Sized>(sorted_pvalues: &[f64], critical: &R) -> Result<usize> {
    if sorted_pvalues.len() != critical.len() {
        return Err(Error::LengthMismatch {
            expected: critical.len(),
            actual: sorted_pvalues.len(),
        });
    }
    Ok((1..=sorted_pvalues.len())
        .rev()
        .find(|&i| sorted_pvalues[i - 1] <= critical.alpha(i))
        .unwrap_or(0))
}

/// `V_m`: true nulls at or below the realized threshold `alpha_{R:m}`.
pub fn false_rejection_count<R: CriticalRule + ?Sized>(
    sample: &PValueSample,
    order: &[usize],
    r: usize,
    critical: &R,
) -> usize {
    if r == 0 {
        return 0;
    }
    let threshold = critical.alpha(r);
    let values = sample.values();
    let nulls = sample.is_null();
    order
        .iter()
        .take_while(|&&i| values[i] <= threshold)
        .filter(|&&i| nulls[i])
        .count()
}

/// Full result of one step-up run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepUpOutcome {
    pub r: usize,
    pub v: usize,
    /// Rejected hypothesis indices, ascending.
    pub rejected: Vec<usize>,
    pub m0_hat: Option<f64>,
    /// `alpha_{R:m}`, or 0 when nothing is rejected.
    pub threshold: f64,
}

impl StepUpOutcome {
    /// `V/R` with `0/0 = 0`.
    pub fn fdp(&self) -> f64 {
        if self.r == 0 {
            0.0
        } else {
            self.v as f64 / self.r as f64
        }
    }
}

/// Runs the step-up rule on an unsorted sample.
pub fn step_up<R: CriticalRule + ?Sized>(sample: &PValueSample, critical: &R) -> Result<StepUpOutcome> {
    let order = crate::sample::sort_pvalues(sample);
    let sorted: Vec<f64> = order.iter().map(|&i| sample.values()[i]).collect();
    let r = step_up_count(&sorted, critical)?;
    let v = false_rejection_count(sample, &order, r, critical);
    let threshold = if r > 0 { critical.alpha(r) } else { 0.0 };
    let mut rejected: Vec<usize> = if r > 0 {
        order
            .iter()
            .copied()
            .take_while(|&i| sample.values()[i] <= threshold)
            .collect()
    } else {
        Vec::new()
    };
    rejected.sort_unstable();
    debug_assert_eq!(rejected.len(), r);
    Ok(StepUpOutcome {
        r,
        v,
        rejected,
        m0_hat: None,
        threshold,
    })
}

/// Counts of p-values by the rank bucket `min{i : p <= alpha_i}`.
///
/// `R = max{i : N(alpha_i) >= i}` where `N(alpha_i)` is the cumulative count up
/// to bucket `i`, so the step-up count follows from one linear pass without
/// sorting. Replacing values by 0 moves them into bucket 1.
#[derive(Debug, Clone, Default)]
pub(crate) struct RankHistogram {
    counts: Vec<u32>,
    total: usize,
}

impl RankHistogram {
    pub(crate) fn reset(&mut self, m: usize) {
        self.counts.clear();
        self.counts.resize(m + 1, 0);
        self.total = 0;
    }

    pub(crate) fn add(&mut self, bucket: usize) {
        self.counts[bucket] += 1;
        self.total += 1;
    }

    /// Step-up count after moving the values in `removed` buckets to 0.
    ///
    /// `removed` must be ascending; `zeros` counts all replaced values,
    /// including those that had no bucket.
    pub(crate) fn step_up(&self, zeros: usize, removed: &[usize]) -> usize {
        let m = self.counts.len() - 1;
        let bound = (self.total + zeros - removed.len()).min(m);
        let mut cumulative = zeros;
        let mut next_removed = 0;
        let mut r = 0;
        for i in 1..=bound {
            cumulative += self.counts[i] as usize;
            while next_removed < removed.len() && removed[next_removed] == i {
                cumulative -= 1;
                next_removed += 1;
            }
            if cumulative >= i {
                r = i;
            }
        }
        r
    }
}
