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

//! Realized p-value vectors and the label-free view estimators are allowed to see.

use crate::error::{Error, Result};

/// One draw of the BI model: `m` p-values with oracle labels.
///
/// Labels are only read by oracle quantities (false rejections, leave-j-out
/// substitution). Estimators receive a [`TailView`], which carries none.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueSample {
    values: Vec<f64>,
    is_null: Vec<bool>,
    m0: usize,
}

impl PValueSample {
    pub fn new(values: Vec<f64>, is_null: Vec<bool>) -> Result<Self> {
        if values.len() != is_null.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                actual: is_null.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::InvalidSample("empty sample".into()));
        }
        if let Some((i, p)) = values
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidSample(format!(
                "p-value {p} at index {i} outside [0,1]"
            )));
        }
        let m0 = is_null.iter().filter(|&&b| b).count();
        if m0 == 0 {
            return Err(Error::InvalidSample("at least one true null required".into()));
        }
        Ok(Self {
            values,
            is_null,
            m0,
        })
    }

    /// Sample laid out with the true nulls first, as `I0 = {0..m0}`.
    pub fn from_blocks(nulls: &[f64], alternatives: &[f64]) -> Result<Self> {
        let values = nulls.iter().chain(alternatives).copied().collect();
        let is_null = std::iter::repeat(true)
            .take(nulls.len())
            .chain(std::iter::repeat(false).take(alternatives.len()))
            .collect();
        Self::new(values, is_null)
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn m1(&self) -> usize {
        self.values.len() - self.m0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_null(&self) -> &[bool] {
        &self.is_null
    }

    /// `R_m(t)`: number of p-values at or below `t`.
    pub fn count_le(&self, t: f64) -> usize {
        self.values.iter().filter(|&&p| p <= t).count()
    }

    /// `V_m(t)`: number of true-null p-values at or below `t`.
    pub fn null_count_le(&self, t: f64) -> usize {
        self.values
            .iter()
            .zip(&self.is_null)
            .filter(|(&p, &null)| null && p <= t)
            .count()
    }

    /// Copy of the sample with one value replaced; labels unchanged.
    pub fn with_value(&self, index: usize, p: f64) -> Result<Self> {
        if index >= self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "index {index} out of range for m={}",
                self.values.len()
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidSample(format!("p-value {p} outside [0,1]")));
        }
        let mut out = self.clone();
        out.values[index] = p;
        Ok(out)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Permutation that sorts the p-values nondecreasingly, ties kept in index order.
pub fn sort_pvalues(sample: &PValueSample) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sample.m()).collect();
    let values = sample.values();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// The empirical distribution function restricted to `[lambda, 1]`.
///
/// Holds `R_m(lambda)` and the multiset of p-values above `lambda`, which is
/// exactly the information an estimator of `m0` may depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct TailView {
    m: usize,
    lambda: f64,
    r_lambda: usize,
    tail_values: Vec<f64>,
}

impl TailView {
    /// Builds the view without the `alpha <= lambda` check of [`tail_view`].
    pub fn from_sample(sample: &PValueSample, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda={lambda} must lie in (0,1)"
            )));
        }
        let tail_values: Vec<f64> = sample
            .values()
            .iter()
            .copied()
            .filter(|&p| p > lambda)
            .collect();
        Ok(Self {
            m: sample.m(),
            lambda,
            r_lambda: sample.m() - tail_values.len(),
            tail_values,
        })
    }

    /// Assembles a view from pre-partitioned parts (the simulation hot path).
    pub fn from_parts(m: usize, lambda: f64, r_lambda: usize, tail_values: Vec<f64>) -> Self {
        debug_assert_eq!(r_lambda + tail_values.len(), m);
        debug_assert!(tail_values.iter().all(|&p| p > lambda && p <= 1.0));
        Self {
            m,
            lambda,
            r_lambda,
            tail_values,
        }
    }

    pub fn into_tail_values(self) -> Vec<f64> {
        self.tail_values
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn r_lambda(&self) -> usize {
        self.r_lambda
    }

    pub fn tail_values(&self) -> &[f64] {
        &self.tail_values
    }

    /// `m * F_m(t)` for `t >= lambda`; `None` below `lambda`.
    pub fn count_le(&self, t: f64) -> Option<usize> {
        if t < self.lambda {
            return None;
        }
        Some(self.r_lambda + self.tail_values.iter().filter(|&&p| p <= t).count())
    }

    /// `F_m(t)` for `t >= lambda`.
    pub fn ecdf(&self, t: f64) -> Option<f64> {
        self.count_le(t).map(|c| c as f64 / self.m as f64)
    }

    /// Number of p-values in `(lo, hi]`, both ends inside `[lambda, 1]`.
    pub fn count_between(&self, lo: f64, hi: f64) -> Option<usize> {
        if lo < self.lambda || hi < lo {
            return None;
        }
        Some(
            self.tail_values
                .iter()
                .filter(|&&p| p > lo && p <= hi)
                .count(),
        )
    }
}

/// Partition of the sample at `lambda`, requiring `alpha <= lambda < 1`.
pub fn tail_view(sample: &PValueSample, lambda: f64, alpha: f64) -> Result<TailView> {
    if !(lambda >= alpha && lambda < 1.0) {
        return Err(Error::LambdaOutOfRange { lambda, alpha });
    }
    TailView::from_sample(sample, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_null(values: &[f64]) -> PValueSample {
        PValueSample::from_blocks(values, &[]).unwrap()
    }

    #[test]
    fn sort_permutation_examples() {
        assert_eq!(sort_pvalues(&all_null(&[0.3, 0.1, 0.2])), vec![1, 2, 0]);
        assert_eq!(sort_pvalues(&all_null(&[0.5, 0.5])), vec![0, 1]);
        assert_eq!(sort_pvalues(&all_null(&[0.1, 0.2, 0.3])), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_invalid_samples() {
        assert!(PValueSample::from_blocks(&[1.2], &[]).is_err());
        assert!(PValueSample::from_blocks(&[], &[0.1]).is_err());
        assert!(PValueSample::new(vec![0.1, 0.2], vec![true]).is_err());
        assert!(PValueSample::from_blocks(&[f64::NAN], &[]).is_err());
    }

    #[test]
    fn tail_view_partitions() {
        let s = all_null(&[1.0, 1.0, 1.0]);
        let v = tail_view(&s, 0.5, 0.1).unwrap();
        assert_eq!(v.r_lambda(), 0);
        assert_eq!(v.tail_values().len(), 3);

        let s = all_null(&[0.0, 0.0]);
        let v = tail_view(&s, 0.5, 0.1).unwrap();
        assert_eq!(v.r_lambda(), 2);
        assert!(v.tail_values().is_empty());

        let s = all_null(&[0.2, 0.6, 0.9]);
        let v = tail_view(&s, 0.5, 0.1).unwrap();
        assert_eq!(v.r_lambda(), 1);
        assert_eq!(v.tail_values(), &[0.6, 0.9]);
    }

    #[test]
    fn lambda_value_belongs_to_decision_region() {
        let s = all_null(&[0.5, 0.7]);
        let v = tail_view(&s, 0.5, 0.1).unwrap();
        assert_eq!(v.r_lambda(), 1);
    }

    #[test]
    fn tail_view_rejects_bad_lambda() {
        let s = all_null(&[0.2]);
        assert!(matches!(
            tail_view(&s, 0.05, 0.1),
            Err(Error::LambdaOutOfRange { .. })
        ));
        assert!(tail_view(&s, 1.0, 0.1).is_err());
    }

    #[test]
    fn ecdf_undefined_below_lambda() {
        let s = all_null(&[0.2, 0.6]);
        let v = tail_view(&s, 0.5, 0.1).unwrap();
        assert_eq!(v.ecdf(0.4), None);
        assert_eq!(v.ecdf(0.5), Some(0.5));
        assert_eq!(v.ecdf(1.0), Some(1.0));
    }
}
