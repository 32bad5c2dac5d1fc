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

//! Critical-value families and the end-to-end procedure runner.

use crate::error::{Error, Result};
use crate::estimators::{self, EstimateRecord, EstimatorSpec};
use crate::sample::{tail_view, PValueSample};
use crate::stepup::{step_up, CriticalRule, CriticalValues, Provenance, StepUpOutcome};

#[derive(Debug, Clone, PartialEq)]
pub enum ProcedureSpec {
    /// Benjamini-Hochberg, `alpha_i = i alpha / m`.
    Bh { alpha: f64 },
    /// Plug-in critical values `min(i alpha / m0_hat, lambda)`.
    AdaptiveCapped {
        alpha: f64,
        lambda: f64,
        estimator: EstimatorSpec,
    },
    /// `alpha_i = i alpha / (m + b - a i)`.
    Quotient { alpha: f64, a: f64, b: f64 },
}

impl ProcedureSpec {
    pub fn storey(alpha: f64, lambda: f64) -> Self {
        ProcedureSpec::AdaptiveCapped {
            alpha,
            lambda,
            estimator: EstimatorSpec::Storey,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            ProcedureSpec::Bh { alpha }
            | ProcedureSpec::AdaptiveCapped { alpha, .. }
            | ProcedureSpec::Quotient { alpha, .. } => *alpha,
        }
    }

    /// Same family at another level.
    pub fn with_alpha(&self, level: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ProcedureSpec::Bh { alpha }
            | ProcedureSpec::AdaptiveCapped { alpha, .. }
            | ProcedureSpec::Quotient { alpha, .. } => *alpha = level,
        }
        out
    }

    /// Tuning parameter; deterministic families use the `lambda = 1` convention.
    pub fn lambda(&self) -> f64 {
        match self {
            ProcedureSpec::AdaptiveCapped { lambda, .. } => *lambda,
            _ => 1.0,
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, ProcedureSpec::AdaptiveCapped { .. })
    }

    pub fn estimator(&self) -> Option<&EstimatorSpec> {
        match self {
            ProcedureSpec::AdaptiveCapped { estimator, .. } => Some(estimator),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidProcedure(format!(
                "alpha={alpha} must lie in (0,1)"
            )));
        }
        match self {
            ProcedureSpec::Bh { .. } => Ok(()),
            ProcedureSpec::AdaptiveCapped {
                lambda, estimator, ..
            } => {
                if !(*lambda >= alpha && *lambda < 1.0) {
                    return Err(Error::LambdaOutOfRange {
                        lambda: *lambda,
                        alpha,
                    });
                }
                estimator.validate(*lambda)
            }
            ProcedureSpec::Quotient { a, b, .. } => check_quotient(alpha, *a, *b),
        }
    }

    /// Short label for tables, e.g. `storey(0.1,0.5)`.
    pub fn label(&self) -> String {
        match self {
            ProcedureSpec::Bh { alpha } => format!("bh({alpha})"),
            ProcedureSpec::Quotient { alpha, a, b } => format!("quotient({alpha},{a},{b})"),
            ProcedureSpec::AdaptiveCapped {
                alpha,
                lambda,
                estimator,
            } => match estimator {
                EstimatorSpec::Trivial => format!("capped-bh({alpha},{lambda})"),
                EstimatorSpec::Storey => format!("storey({alpha},{lambda})"),
                EstimatorSpec::IntervalCombination { grid, weights } => {
                    let grid: Vec<String> = grid.iter().map(|g| g.to_string()).collect();
                    let rule = match weights {
                        estimators::WeightRule::Deterministic(beta) => beta
                            .iter()
                            .map(|b| format!("{b:.4}"))
                            .collect::<Vec<_>>()
                            .join("/"),
                        estimators::WeightRule::TailAdaptive => "tail-adaptive".into(),
                    };
                    format!("combination({alpha},[{}],{rule})", grid.join("/"))
                }
            },
        }
    }

    /// Closed-form critical values for a sample of size `m`; `m0_hat` is only
    /// read by the adaptive family.
    pub fn formula(&self, m: usize, m0_hat: f64) -> CriticalFormula {
        match *self {
            ProcedureSpec::Bh { alpha } => CriticalFormula::Bh { m, alpha },
            ProcedureSpec::AdaptiveCapped { alpha, lambda, .. } => CriticalFormula::Adaptive {
                m,
                alpha,
                lambda,
                m0_hat,
            },
            ProcedureSpec::Quotient { alpha, a, b } => CriticalFormula::Quotient { m, alpha, a, b },
        }
    }
}

fn check_quotient(alpha: f64, a: f64, b: f64) -> Result<()> {
    let ok = (b > 0.0 && (0.0..=1.0 - alpha).contains(&a)) || (b == 0.0 && a >= 0.0 && a < 1.0 - alpha);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidProcedure(format!(
            "quotient critical values need b>0 and 0<=a<=1-alpha, or b=0 and 0<=a<1-alpha \
             (alpha_m:m must stay below 1); got a={a}, b={b}, alpha={alpha}"
        )))
    }
}

/// Critical values evaluated on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalFormula {
    Bh { m: usize, alpha: f64 },
    Adaptive { m: usize, alpha: f64, lambda: f64, m0_hat: f64 },
    Quotient { m: usize, alpha: f64, a: f64, b: f64 },
}

impl CriticalFormula {
    pub fn provenance(&self) -> Provenance {
        match *self {
            CriticalFormula::Bh { alpha, .. } => Provenance::Bh { alpha },
            CriticalFormula::Adaptive {
                alpha,
                lambda,
                m0_hat,
                ..
            } => Provenance::Adaptive {
                alpha,
                lambda,
                m0_hat,
            },
            CriticalFormula::Quotient { alpha, a, b, .. } => Provenance::Quotient { alpha, a, b },
        }
    }

    /// Real-valued solution of `alpha_i = p`, used as a starting point.
    fn index_guess(&self, p: f64) -> f64 {
        match *self {
            CriticalFormula::Bh { m, alpha } => p * m as f64 / alpha,
            CriticalFormula::Adaptive { alpha, m0_hat, .. } => p * m0_hat / alpha,
            CriticalFormula::Quotient { m, alpha, a, b } => p * (m as f64 + b) / (alpha + a * p),
        }
    }
}

impl CriticalRule for CriticalFormula {
    fn len(&self) -> usize {
        match *self {
            CriticalFormula::Bh { m, .. }
            | CriticalFormula::Adaptive { m, .. }
            | CriticalFormula::Quotient { m, .. } => m,
        }
    }

    fn alpha(&self, i: usize) -> f64 {
        match *self {
            CriticalFormula::Bh { m, alpha } => i as f64 * alpha / m as f64,
            CriticalFormula::Adaptive {
                alpha,
                lambda,
                m0_hat,
                ..
            } => (i as f64 * alpha / m0_hat).min(lambda),
            CriticalFormula::Quotient { m, alpha, a, b } => {
                i as f64 * alpha / (m as f64 + b - a * i as f64)
            }
        }
    }

    fn rank_of(&self, p: f64) -> Option<usize> {
        let m = self.len();
        if p > self.alpha(m) {
            return None;
        }
        let guess = self.index_guess(p).ceil();
        let mut i = if guess.is_finite() {
            (guess.max(1.0) as usize).min(m)
        } else {
            m
        };
        while i > 1 && p <= self.alpha(i - 1) {
            i -= 1;
        }
        while p > self.alpha(i) {
            i += 1;
        }
        Some(i)
    }
}

pub fn bh_critical_values(m: usize, alpha: f64) -> Result<CriticalValues> {
    let f = CriticalFormula::Bh { m, alpha };
    CriticalValues::from_rule(&f, f.provenance())
}

pub fn adaptive_critical_values(m: usize, alpha: f64, lambda: f64, m0_hat: f64) -> Result<CriticalValues> {
    if !(m0_hat > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "m0_hat={m0_hat} must be positive"
        )));
    }
    let f = CriticalFormula::Adaptive {
        m,
        alpha,
        lambda,
        m0_hat,
    };
    CriticalValues::from_rule(&f, f.provenance())
}

pub fn quotient_critical_values(m: usize, alpha: f64, a: f64, b: f64) -> Result<CriticalValues> {
    check_quotient(alpha, a, b)?;
    let f = CriticalFormula::Quotient { m, alpha, a, b };
    CriticalValues::from_rule(&f, f.provenance())
}

/// `i alpha / (m - i (1 - alpha))` for `i < m`.
pub fn aorc_critical_value(i: usize, m: usize, alpha: f64) -> f64 {
    i as f64 * alpha / (m as f64 - i as f64 * (1.0 - alpha))
}

/// Inverse of the rejection curve `f(t) = t / (t (1 - alpha) + alpha)`.
pub fn aorc_inverse(u: f64, alpha: f64) -> f64 {
    alpha * u / (1.0 - (1.0 - alpha) * u)
}

/// Estimate record of an adaptive procedure on `sample`.
pub fn estimate_m0(spec: &ProcedureSpec, sample: &PValueSample) -> Result<Option<EstimateRecord>> {
    let ProcedureSpec::AdaptiveCapped {
        alpha,
        lambda,
        estimator,
    } = spec
    else {
        return Ok(None);
    };
    let view = tail_view(sample, *lambda, *alpha)?;
    let raw = estimators::estimate(estimator, &view)?;
    Ok(Some(estimators::apply_floor(raw, &view, *alpha)))
}

/// Runs `spec` on `sample`, materializing and validating its critical values.
pub fn run_procedure(spec: &ProcedureSpec, sample: &PValueSample) -> Result<StepUpOutcome> {
    spec.validate()?;
    let m = sample.m();
    match spec {
        ProcedureSpec::Bh { alpha } => step_up(sample, &bh_critical_values(m, *alpha)?),
        ProcedureSpec::Quotient { alpha, a, b } => {
            step_up(sample, &quotient_critical_values(m, *alpha, *a, *b)?)
        }
        ProcedureSpec::AdaptiveCapped { alpha, lambda, .. } => {
            let record = estimate_m0(spec, sample)?.expect("adaptive");
            let critical = adaptive_critical_values(m, *alpha, *lambda, record.floored)?;
            let mut out = step_up(sample, &critical)?;
            out.m0_hat = Some(record.floored);
            debug_assert!(out.threshold <= *lambda);
            Ok(out)
        }
    }
}

/// Adaptive run using the raw, unfloored estimate in the critical values.
pub fn run_unfloored(spec: &ProcedureSpec, sample: &PValueSample) -> Result<StepUpOutcome> {
    let ProcedureSpec::AdaptiveCapped { alpha, lambda, .. } = spec else {
        return run_procedure(spec, sample);
    };
    spec.validate()?;
    let record = estimate_m0(spec, sample)?.expect("adaptive");
    let critical = adaptive_critical_values(sample.m(), *alpha, *lambda, record.raw)?;
    let mut out = step_up(sample, &critical)?;
    out.m0_hat = Some(record.raw);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn bh_examples() {
        let c = bh_critical_values(10, 0.1).unwrap();
        assert!(close(c.alpha(1), 0.01));
        assert_eq!(c.alpha(10), 0.1);
        let c = bh_critical_values(4, 0.2).unwrap();
        for (got, want) in c.alphas().iter().zip([0.05, 0.10, 0.15, 0.20]) {
            assert!(close(*got, want));
        }
    }

    #[test]
    fn adaptive_examples() {
        let capped = adaptive_critical_values(10, 0.1, 0.5, 10.0).unwrap();
        let bh = bh_critical_values(10, 0.1).unwrap();
        assert_eq!(capped.alphas(), bh.alphas());

        let c = adaptive_critical_values(10, 0.1, 0.5, 2.0).unwrap();
        for i in 1..=10 {
            assert!(close(c.alpha(i), (0.05 * i as f64).min(0.5)));
        }
        assert_eq!(c.alpha(10), 0.5);

        let c = adaptive_critical_values(10, 0.1, 0.5, 1e6).unwrap();
        assert!(c.alphas().iter().all(|&a| a < 0.5));
        assert!(adaptive_critical_values(10, 0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn quotient_examples() {
        let q = quotient_critical_values(7, 0.05, 0.0, 0.0).unwrap();
        assert_eq!(q.alphas(), bh_critical_values(7, 0.05).unwrap().alphas());
        let q = quotient_critical_values(100, 0.05, 0.5, 0.0).unwrap();
        assert!(close(q.alpha(50), 1.0 / 30.0));
        assert!(quotient_critical_values(10, 0.05, 0.95, 0.0).is_err());
        assert!(quotient_critical_values(10, 0.05, 0.95, 1.0).is_ok());
        assert!(quotient_critical_values(10, 0.05, 0.96, 1.0).is_err());
        assert!(quotient_critical_values(10, 0.05, -0.1, 1.0).is_err());
    }

    #[test]
    fn quotient_matches_aorc_below_m() {
        for &alpha in &[0.01, 0.05, 0.1, 0.25] {
            for &m in &[2usize, 10, 97, 1000] {
                let a = 1.0 - alpha;
                for i in 1..m {
                    let q = CriticalFormula::Quotient { m, alpha, a, b: 0.0 }.alpha(i);
                    let curve = aorc_inverse(i as f64 / m as f64, alpha);
                    assert!((q - aorc_critical_value(i, m, alpha)).abs() <= 1e-12 * q.max(1.0));
                    assert!((q - curve).abs() <= 1e-12 * q.max(1.0), "m={m} i={i}");
                }
            }
        }
    }

    #[test]
    fn formula_rank_matches_materialized() {
        let forms = [
            CriticalFormula::Bh { m: 37, alpha: 0.1 },
            CriticalFormula::Adaptive {
                m: 37,
                alpha: 0.1,
                lambda: 0.5,
                m0_hat: 9.3,
            },
            CriticalFormula::Quotient {
                m: 37,
                alpha: 0.05,
                a: 0.7,
                b: 1.0,
            },
        ];
        for f in forms {
            let c = CriticalValues::from_rule(&f, f.provenance()).unwrap();
            for k in 0..=2000 {
                let p = k as f64 / 2000.0;
                assert_eq!(f.rank_of(p), c.rank_of(p), "{f:?} p={p}");
            }
            for i in 1..=37 {
                let p = c.alpha(i);
                assert_eq!(f.rank_of(p), c.rank_of(p));
            }
        }
    }

    #[test]
    fn run_procedure_examples() {
        let s = PValueSample::new(vec![0.01, 0.02, 0.30, 0.90], vec![true, false, true, true]).unwrap();
        let out = run_procedure(&ProcedureSpec::Bh { alpha: 0.2 }, &s).unwrap();
        assert_eq!(out.r, 2);
        assert_eq!(out.rejected, vec![0, 1]);
        assert_eq!(out.m0_hat, None);

        // DU: alternatives at 0 are always rejected
        let du = PValueSample::from_blocks(&[0.4, 0.7, 0.2], &[0.0, 0.0]).unwrap();
        let out = run_procedure(&ProcedureSpec::Bh { alpha: 0.05 }, &du).unwrap();
        assert!(out.r >= 2);

        let high = PValueSample::from_blocks(&[0.6, 0.7, 0.8], &[0.55]).unwrap();
        let out = run_procedure(&ProcedureSpec::storey(0.5, 0.5), &high).unwrap();
        assert_eq!((out.r, out.v, out.fdp()), (0, 0, 0.0));
        assert!(out.m0_hat.unwrap() > 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let s = PValueSample::from_blocks(&[0.1], &[]).unwrap();
        assert!(run_procedure(&ProcedureSpec::storey(0.1, 0.05), &s).is_err());
        assert!(run_procedure(&ProcedureSpec::Bh { alpha: 1.0 }, &s).is_err());
        assert!(run_procedure(
            &ProcedureSpec::Quotient {
                alpha: 0.05,
                a: 0.95,
                b: 0.0
            },
            &s
        )
        .is_err());
    }
}
