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

//! Finite-sample moment identities of step-up procedures.
//!
//! Every identity is stated through a per-replicate pair `(lhs, rhs)` whose
//! expectations agree: conditional expectations given the tail sigma-field
//! only ever appear multiplied by tail-measurable factors, so a single-level
//! Monte-Carlo average of `lhs - rhs` is an unbiased estimate of zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::procedures::{estimate_m0, run_procedure, ProcedureSpec};
use crate::sample::PValueSample;
use crate::stats::{combined_se, McEstimate};
use crate::stepup::CriticalRule;

/// Largest moment order supported by [`c_coefficient`].
pub const MAX_MOMENT_ORDER: usize = 20;

/// Replaces the first `min(j, V(lambda))` true-null p-values that are
/// `<= lambda` (by index) with 0.
pub fn leave_j_out(sample: &PValueSample, j: usize, lambda: f64) -> Result<PValueSample> {
    if j > sample.m0() {
        return Err(Error::InvalidArgument(format!(
            "cannot leave out j={j} of m0={} true nulls",
            sample.m0()
        )));
    }
    let targets: Vec<usize> = (0..sample.m())
        .filter(|&i| sample.is_null()[i] && sample.values()[i] <= lambda)
        .take(j)
        .collect();
    let mut out = sample.clone();
    let values = out.values_mut();
    for i in targets {
        values[i] = 0.0;
    }
    Ok(out)
}

/// Rejection count of `spec` on the leave-`j`-out sample.
///
/// The estimate is unaffected because only values `<= lambda` change.
pub fn r_leave_j(spec: &ProcedureSpec, sample: &PValueSample, j: usize) -> Result<usize> {
    let replaced = leave_j_out(sample, j, spec.lambda())?;
    Ok(run_procedure(spec, &replaced)?.r)
}

fn binomial_row(n: usize) -> Vec<i128> {
    let mut row = vec![1i128];
    for _ in 0..n {
        let mut next = vec![1i128; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// `C_{j,k} = (1/j!) sum_r (-1)^r binom(j, r) (j - r)^k`, the number of
/// partitions of a `k`-set into `j` blocks.
pub fn c_coefficient(j: usize, k: usize) -> Result<u64> {
    if j == 0 || j > k {
        return Err(Error::InvalidArgument(format!("need 1 <= j <= k, got j={j} k={k}")));
    }
    if k > MAX_MOMENT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "moment order k={k} exceeds {MAX_MOMENT_ORDER}"
        )));
    }
    let binom = binomial_row(j);
    let surjections: i128 = (0..=j)
        .map(|r| {
            let sign = if r % 2 == 0 { 1 } else { -1 };
            sign * binom[r] * (j as i128 - r as i128).pow(k as u32)
        })
        .sum();
    let factorial: i128 = (1..=j as i128).product();
    debug_assert_eq!(surjections % factorial, 0);
    Ok((surjections / factorial) as u64)
}

/// `n (n-1) ... (n-j+1)`.
pub fn falling_factorial(n: usize, j: usize) -> f64 {
    if j > n {
        return 0.0;
    }
    (0..j).map(|i| (n - i) as f64).product()
}

/// One replicate of a moment identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedStatistics {
    pub lhs: f64,
    pub rhs: f64,
    pub k: usize,
    pub replicate: Option<u64>,
}

impl PairedStatistics {
    pub fn diff(&self) -> f64 {
        self.lhs - self.rhs
    }
}

fn pair(lhs: f64, rhs: f64, k: usize) -> PairedStatistics {
    PairedStatistics {
        lhs,
        rhs,
        k,
        replicate: None,
    }
}

struct AdaptiveParts {
    alpha: f64,
    lambda: f64,
    m0_hat: f64,
    v_lambda: usize,
    v: usize,
    r: usize,
}

fn adaptive_parts(spec: &ProcedureSpec, sample: &PValueSample) -> Result<AdaptiveParts> {
    if !spec.is_adaptive() {
        return Err(Error::InvalidProcedure(format!(
            "{} is not an adaptive procedure",
            spec.label()
        )));
    }
    let out = run_procedure(spec, sample)?;
    let record = estimate_m0(spec, sample)?.expect("adaptive");
    Ok(AdaptiveParts {
        alpha: spec.alpha(),
        lambda: spec.lambda(),
        m0_hat: record.floored,
        v_lambda: sample.null_count_le(spec.lambda()),
        v: out.v,
        r: out.r,
    })
}

fn ratio(v: usize, r: usize) -> f64 {
    if r == 0 {
        0.0
    } else {
        v as f64 / r as f64
    }
}

/// `C_{j,k}` for `j = 1..=k` as floats, for repeated evaluation.
pub fn c_row(k: usize) -> Result<Vec<f64>> {
    (1..=k).map(|j| c_coefficient(j, k).map(|c| c as f64)).collect()
}

/// Right side of the `k`-th moment identity from its ingredients.
///
/// `r_leave[j - 1]` holds `R^(j)`; only `j <= min(k, v_lambda)` is read.
/// `c_row` is [`c_row`]`(k)`.
pub fn moment_rhs(q: f64, m0_hat: f64, v_lambda: usize, r_leave: &[usize], c_row: &[f64]) -> f64 {
    let k = c_row.len() as i32;
    let mut rhs = 0.0;
    for j in 1..=c_row.len().min(v_lambda) {
        rhs += (q / m0_hat).powi(j as i32)
            * c_row[j - 1]
            * falling_factorial(v_lambda, j)
            * (r_leave[j - 1] as f64).powi(j as i32 - k);
    }
    rhs
}

/// Right side of the first (`r2 = None`) or second moment identity for
/// deterministic critical values.
pub fn deterministic_rhs<R: CriticalRule + ?Sized>(critical: &R, m0: usize, r1: usize, r2: Option<usize>) -> f64 {
    let m0f = m0 as f64;
    let a1 = critical.alpha(r1) / r1 as f64;
    match r2 {
        None => m0f * a1,
        Some(r2) => {
            let second = if m0 >= 2 {
                (critical.alpha(r2) / r2 as f64).powi(2)
            } else {
                0.0
            };
            m0f * a1 / r1 as f64 + m0f * (m0f - 1.0) * second
        }
    }
}

/// `(V/R)^k` against `sum_j (alpha/lambda)^j C_{j,k} V(lambda)_(j) / m0_hat^j * (R^(j))^(j-k)`.
pub fn paired_moment_k(spec: &ProcedureSpec, sample: &PValueSample, k: usize) -> Result<PairedStatistics> {
    let parts = adaptive_parts(spec, sample)?;
    let c = c_row(k)?;
    let r_leave = (1..=k.min(parts.v_lambda))
        .map(|j| r_leave_j(spec, sample, j))
        .collect::<Result<Vec<_>>>()?;
    let rhs = moment_rhs(parts.alpha / parts.lambda, parts.m0_hat, parts.v_lambda, &r_leave, &c);
    Ok(pair(ratio(parts.v, parts.r).powi(k as i32), rhs, k))
}

/// `V/R` against `(alpha/lambda) V(lambda)/m0_hat`.
pub fn paired_fdr(spec: &ProcedureSpec, sample: &PValueSample) -> Result<PairedStatistics> {
    let parts = adaptive_parts(spec, sample)?;
    let rhs = parts.alpha / parts.lambda * parts.v_lambda as f64 / parts.m0_hat;
    Ok(pair(ratio(parts.v, parts.r), rhs, 1))
}

/// `V` against `(alpha/lambda) (V(lambda)/m0_hat) R^(1)`.
pub fn paired_ev(spec: &ProcedureSpec, sample: &PValueSample) -> Result<PairedStatistics> {
    let parts = adaptive_parts(spec, sample)?;
    let rhs = if parts.v_lambda == 0 {
        0.0
    } else {
        let r1 = r_leave_j(spec, sample, 1)?;
        parts.alpha / parts.lambda * parts.v_lambda as f64 / parts.m0_hat * r1 as f64
    };
    Ok(pair(parts.v as f64, rhs, 1))
}

/// Moment identities for deterministic critical values, `k` in {1, 2}.
pub fn deterministic_moment_pair(spec: &ProcedureSpec, sample: &PValueSample, k: usize) -> Result<PairedStatistics> {
    if spec.is_adaptive() {
        return Err(Error::InvalidProcedure(format!(
            "{} has data-dependent critical values",
            spec.label()
        )));
    }
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidArgument(format!("k={k} must be 1 or 2")));
    }
    let out = run_procedure(spec, sample)?;
    let formula = spec.formula(sample.m(), sample.m() as f64);
    let r1 = r_leave_j(spec, sample, 1)?;
    let r2 = if k == 2 && sample.m0() >= 2 {
        Some(r_leave_j(spec, sample, 2)?)
    } else if k == 2 {
        Some(r1)
    } else {
        None
    };
    let rhs = deterministic_rhs(&formula, sample.m0(), r1, r2);
    Ok(pair(ratio(out.v, out.r).powi(k as i32), rhs, k))
}

/// `2 / (lambda (m0 + 1))`.
pub fn slack_term(lambda: f64, m0: usize) -> f64 {
    2.0 / (lambda * (m0 as f64 + 1.0))
}

/// `lambda m0 K_m / (alpha exp(m0 lambda / 8))`.
pub fn hoeffding_term(m0: usize, lambda: f64, k_m: f64, alpha: f64) -> f64 {
    lambda * m0 as f64 * k_m / (alpha * (m0 as f64 * lambda / 8.0).exp())
}

/// `K_m = K m / m0` for an estimator constant `K`.
pub fn k_m(k: f64, m: usize, m0: usize) -> f64 {
    k * m as f64 / m0 as f64
}

/// Monte-Carlo estimates feeding [`lemma_bounds`]; with `X = V(lambda)/m0_hat`.
#[derive(Debug, Clone, Default)]
pub struct BoundInputs {
    /// Variance of `V/R`.
    pub var_fdp: Option<McEstimate>,
    /// Mean of `X / R^(1)`, taken as 0 when `V(lambda) = 0`.
    pub x_over_r1: Option<McEstimate>,
    /// Variance of `X`.
    pub var_x: Option<McEstimate>,
    /// Mean of `V(lambda) / m0_hat^2`.
    pub v_lambda_over_m0hat_sq: Option<McEstimate>,
}

/// Variance bounds for `V/R` evaluated on Monte-Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub c_m_lambda: McEstimate,
    pub var_fdp: McEstimate,
    pub slack_term: f64,
    /// `Var - C`; the stated lower bound needs it nonnegative.
    pub lower_margin: f64,
    pub lower_se: f64,
    /// `C + slack - Var`.
    pub upper_margin: f64,
    pub upper_se: f64,
    /// `(lambda/alpha)^2 slack`, the bound on `E(V(lambda)/m0_hat^2)`.
    pub tail_bound: f64,
    pub tail_estimate: McEstimate,
    /// `Var - (C - (alpha/lambda)^2 E(V(lambda)/m0_hat^2))`, which is zero in
    /// expectation.
    pub exact_gap: f64,
    pub exact_gap_se: f64,
    pub k_m: f64,
    pub hoeffding_term: f64,
    pub d_m_lambda: McEstimate,
}

impl BoundReport {
    pub fn lower_holds(&self, k: f64) -> bool {
        self.lower_margin >= -k * self.lower_se
    }

    pub fn upper_holds(&self, k: f64) -> bool {
        self.upper_margin >= -k * self.upper_se
    }

    pub fn tail_holds(&self, k: f64) -> bool {
        self.tail_estimate.mean <= self.tail_bound + k * self.tail_estimate.se
    }

    pub fn exact_gap_holds(&self, k: f64) -> bool {
        self.exact_gap.abs() <= k * self.exact_gap_se
    }
}

fn need(x: Option<McEstimate>, name: &'static str) -> Result<McEstimate> {
    x.ok_or(Error::MissingComponent(name))
}

/// Evaluates `C_{m,lambda}`, the variance sandwich, the tail bound and
/// `D_{m,lambda}`. Standard errors of sums treat the terms as independent.
pub fn lemma_bounds(inputs: &BoundInputs, m0: usize, lambda: f64, alpha: f64, k_m: f64) -> Result<BoundReport> {
    let var_fdp = need(inputs.var_fdp, "var_fdp")?;
    let x_r1 = need(inputs.x_over_r1, "x_over_r1")?;
    let var_x = need(inputs.var_x, "var_x")?;
    let tail = need(inputs.v_lambda_over_m0hat_sq, "v_lambda_over_m0hat_sq")?;
    if !(alpha > 0.0 && alpha <= lambda && lambda <= 1.0) || m0 == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 0 < alpha <= lambda <= 1 and m0 >= 1, got alpha={alpha} lambda={lambda} m0={m0}"
        )));
    }
    let q = alpha / lambda;
    let c_value = q * x_r1.mean + q * q * var_x.mean;
    let c_se = combined_se(q * x_r1.se, q * q * var_x.se);
    let c = McEstimate {
        mean: c_value,
        variance: c_se * c_se * x_r1.n as f64,
        se: c_se,
        n: x_r1.n,
    };
    let slack = slack_term(lambda, m0);
    let pair_se = combined_se(var_fdp.se, c_se);
    let exact_gap = var_fdp.mean - (c_value - q * q * tail.mean);
    let exact_gap_se = combined_se(pair_se, q * q * tail.se);
    let hoeff = hoeffding_term(m0, lambda, k_m, alpha);
    let scale = 4.0 * k_m * k_m / (alpha * alpha);
    let d_se = scale * combined_se(var_fdp.se, q * q * var_x.se);
    let d = McEstimate {
        mean: scale * (var_fdp.mean + slack - q * q * var_x.mean) + hoeff,
        variance: d_se * d_se * var_fdp.n as f64,
        se: d_se,
        n: var_fdp.n,
    };
    Ok(BoundReport {
        c_m_lambda: c,
        var_fdp,
        slack_term: slack,
        lower_margin: var_fdp.mean - c_value,
        lower_se: pair_se,
        upper_margin: c_value + slack - var_fdp.mean,
        upper_se: pair_se,
        tail_bound: slack / (q * q),
        tail_estimate: tail,
        exact_gap,
        exact_gap_se,
        k_m,
        hoeffding_term: hoeff,
        d_m_lambda: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorSpec;

    fn surjections_over_factorial(j: usize, k: usize) -> u64 {
        let mut count = 0u64;
        let total = j.pow(k as u32);
        for code in 0..total {
            let mut hit = vec![false; j];
            let mut c = code;
            for _ in 0..k {
                hit[c % j] = true;
                c /= j;
            }
            if hit.iter().all(|&h| h) {
                count += 1;
            }
        }
        count / (1..=j as u64).product::<u64>()
    }

    #[test]
    fn c_coefficient_matches_enumeration() {
        for k in 1..=8 {
            for j in 1..=k {
                assert_eq!(c_coefficient(j, k).unwrap(), surjections_over_factorial(j, k), "j={j} k={k}");
            }
        }
        assert_eq!(c_coefficient(2, 3).unwrap(), 3);
        assert_eq!(c_coefficient(2, 4).unwrap(), 7);
        assert_eq!(c_coefficient(3, 4).unwrap(), 6);
        for k in 1..=10 {
            assert_eq!(c_coefficient(1, k).unwrap(), 1);
            assert_eq!(c_coefficient(k, k).unwrap(), 1);
        }
        assert!(c_coefficient(3, 2).is_err());
        assert!(c_coefficient(0, 2).is_err());
        // S(20, 10)
        assert_eq!(c_coefficient(10, 20).unwrap(), 5_917_584_964_655);
    }

    #[test]
    fn leave_j_out_examples() {
        let s = PValueSample::from_blocks(&[0.2, 0.4, 0.8], &[0.1]).unwrap();
        assert_eq!(leave_j_out(&s, 1, 0.5).unwrap().values(), &[0.0, 0.4, 0.8, 0.1]);
        assert_eq!(leave_j_out(&s, 3, 0.5).unwrap().values(), &[0.0, 0.0, 0.8, 0.1]);
        assert!(leave_j_out(&s, 4, 0.5).is_err());
        let tail = PValueSample::from_blocks(&[0.7, 0.9], &[0.1]).unwrap();
        assert_eq!(leave_j_out(&tail, 2, 0.5).unwrap(), tail);
    }

    #[test]
    fn r_leave_j_examples() {
        let spec = ProcedureSpec::storey(0.2, 0.5);
        let s = PValueSample::from_blocks(&[0.04, 0.3, 0.9, 0.45], &[0.01, 0.03, 0.6]).unwrap();
        let r0 = r_leave_j(&spec, &s, 0).unwrap();
        assert_eq!(r0, run_procedure(&spec, &s).unwrap().r);
        let mut prev = r0;
        for j in 1..=3 {
            let r = r_leave_j(&spec, &s, j).unwrap();
            assert!(r >= prev && r >= j);
            prev = r;
        }
    }

    #[test]
    fn hand_second_moment() {
        // m=4, lambda=0.5, alpha=0.2, nulls (0.04, 0.9), alternatives (0.01, 0.03)
        let spec = ProcedureSpec::storey(0.2, 0.5);
        let s = PValueSample::from_blocks(&[0.04, 0.9], &[0.01, 0.03]).unwrap();
        // tail {0.9}: raw (1+1)/0.5 = 4; floor (0.2/0.5)*3 = 1.2; m0_hat = 4
        // critical values min(0.05 i, 0.5): (0.05, 0.1, 0.15, 0.2); R = 3, V = 1
        // leave-one-out (0, 0.9, 0.01, 0.03) also gives R^(1) = 3
        let p = paired_moment_k(&spec, &s, 2).unwrap();
        assert!((p.lhs - 1.0 / 9.0).abs() < 1e-15);
        let expected = 0.4 * (1.0 / 4.0) * (1.0 / 3.0);
        assert!((p.rhs - expected).abs() < 1e-15);
    }

    #[test]
    fn first_moment_reduces_to_fdr_pair() {
        let spec = ProcedureSpec::AdaptiveCapped {
            alpha: 0.1,
            lambda: 0.5,
            estimator: EstimatorSpec::combination(vec![0.5, 0.75, 1.0], vec![1.0 / 3.0, 2.0 / 3.0]),
        };
        let s = PValueSample::from_blocks(&[0.01, 0.2, 0.45, 0.7, 0.95], &[0.0, 0.001, 0.02]).unwrap();
        let a = paired_moment_k(&spec, &s, 1).unwrap();
        let b = paired_fdr(&spec, &s).unwrap();
        assert_eq!(a.rhs, b.rhs);
        assert_eq!(a.lhs, b.lhs);
    }

    #[test]
    fn degenerate_tail_pairs() {
        let spec = ProcedureSpec::storey(0.1, 0.5);
        let s = PValueSample::from_blocks(&[0.6, 0.8, 0.99], &[0.0, 0.0]).unwrap();
        for p in [
            paired_fdr(&spec, &s).unwrap(),
            paired_ev(&spec, &s).unwrap(),
            paired_moment_k(&spec, &s, 3).unwrap(),
        ] {
            assert_eq!((p.lhs, p.rhs), (0.0, 0.0));
        }
    }

    #[test]
    fn deterministic_all_null_bh_is_alpha() {
        let spec = ProcedureSpec::Bh { alpha: 0.1 };
        let s = PValueSample::from_blocks(&[0.3, 0.001, 0.5, 0.02, 0.7], &[]).unwrap();
        let p = deterministic_moment_pair(&spec, &s, 1).unwrap();
        assert!((p.rhs - 0.1).abs() < 1e-15);
        let q = ProcedureSpec::Quotient { alpha: 0.1, a: 0.0, b: 0.0 };
        assert_eq!(deterministic_moment_pair(&q, &s, 2).unwrap(), deterministic_moment_pair(&spec, &s, 2).unwrap());
        assert!(deterministic_moment_pair(&ProcedureSpec::storey(0.1, 0.5), &s, 1).is_err());
        assert!(deterministic_moment_pair(&spec, &s, 3).is_err());
    }

    #[test]
    fn bound_arithmetic() {
        assert!((slack_term(0.5, 99) - 0.04).abs() < 1e-15);
        let h = hoeffding_term(200, 0.5, 2.0, 0.1);
        assert!((h - 2000.0 * (-12.5f64).exp()).abs() < 1e-15);
        assert!((h - 7.45e-3).abs() < 1e-4);
        assert_eq!(k_m(EstimatorSpec::Trivial.a3_constant(0.5), 100, 100), 1.0);
        assert_eq!(
            lemma_bounds(&BoundInputs::default(), 10, 0.5, 0.1, 1.0).unwrap_err(),
            Error::MissingComponent("var_fdp")
        );
    }
}
