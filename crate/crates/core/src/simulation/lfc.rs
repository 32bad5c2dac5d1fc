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

//! Least favorable configuration comparisons.

use serde::Serialize;

use crate::error::Result;
use crate::estimators::monotonicity_probe;
use crate::models::{AltModel, ScenarioConfig};
use crate::procedures::ProcedureSpec;
use crate::stats::{combined_se, McEstimate};

use super::checks::Z_PASS;
use super::engine::{run_mc, McOptions};

/// Probe trials used to screen the estimator before a comparison.
pub const PROBE_TRIALS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LfcRow {
    pub alt: String,
    pub is_du: bool,
    /// Alternatives lie in `[0, lambda]` almost surely.
    pub below_lambda: bool,
    pub fdr: McEstimate,
    pub var_fdp: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LfcReport {
    pub m: usize,
    pub m1: usize,
    pub procedure: String,
    pub rows: Vec<LfcRow>,
    pub estimator_monotone: bool,
    /// `FDR(DU) >= FDR(alt) - 4 se` for every alternative; withheld when the
    /// estimator failed the monotonicity probe.
    pub fdr_pass: Option<bool>,
    /// `Var(DU) <= Var(alt) + 4 se` over alternatives below `lambda`.
    pub var_pass: Option<bool>,
    pub warnings: Vec<String>,
}

impl LfcReport {
    pub fn du(&self) -> &LfcRow {
        self.rows.iter().find(|r| r.is_du).expect("DU row is always present")
    }
}

/// Runs `procedure` under DU and every model in `alts` with the same seed.
pub fn lfc_compare(
    m: usize,
    m1: usize,
    procedure: &ProcedureSpec,
    alts: &[AltModel],
    replicates: u64,
    seed: u64,
    options: &McOptions,
) -> Result<LfcReport> {
    procedure.validate()?;
    let lambda = procedure.lambda();
    let mut warnings = Vec::new();
    let estimator_monotone = match procedure.estimator() {
        Some(est) => {
            let probe_sample = crate::models::sample_scenario(&ScenarioConfig::new(m, m1, AltModel::Uniform { b: 1.0 }, seed)?, 0);
            let ok = monotonicity_probe(est, &probe_sample, lambda, PROBE_TRIALS, seed)?;
            if !ok {
                warnings.push(format!(
                    "estimator of {} decreased under a p-value increase; pass flags withheld",
                    procedure.label()
                ));
            }
            ok
        }
        None => true,
    };

    let mut models = vec![AltModel::du()];
    models.extend(alts.iter().filter(|a| **a != AltModel::du()).cloned());
    let mut rows = Vec::with_capacity(models.len());
    for (i, alt) in models.iter().enumerate() {
        let sc = ScenarioConfig::new(m, m1, alt.clone(), seed)?;
        let s = run_mc(&sc, procedure, replicates, options)?;
        rows.push(LfcRow {
            alt: alt.label(),
            is_du: i == 0,
            below_lambda: alt.supported_below(lambda),
            fdr: s.fdr(),
            var_fdp: s.var_fdp(),
        });
    }
    let du = rows[0].clone();
    let fdr_ok = rows[1..]
        .iter()
        .all(|r| du.fdr.mean >= r.fdr.mean - Z_PASS * combined_se(du.fdr.se, r.fdr.se));
    let var_ok = rows[1..]
        .iter()
        .filter(|r| r.below_lambda)
        .all(|r| du.var_fdp.mean <= r.var_fdp.mean + Z_PASS * combined_se(du.var_fdp.se, r.var_fdp.se));
    Ok(LfcReport {
        m,
        m1,
        procedure: procedure.label(),
        rows,
        estimator_monotone,
        fdr_pass: estimator_monotone.then_some(fdr_ok),
        var_pass: estimator_monotone.then_some(var_ok),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{EstimatorSpec, WeightRule};

    #[test]
    fn du_is_maximal_for_storey() {
        let spec = ProcedureSpec::storey(0.1, 0.5);
        let alts = [AltModel::Uniform { b: 0.5 }, AltModel::Dirac { c: 0.8 }];
        let rep = lfc_compare(100, 40, &spec, &alts, 4000, 9, &McOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.estimator_monotone);
        assert_eq!(rep.fdr_pass, Some(true));
        assert!(rep.du().fdr.mean > rep.rows[2].fdr.mean);
        assert!(!rep.rows[2].below_lambda);
    }

    #[test]
    fn no_alternatives_is_trivial() {
        let spec = ProcedureSpec::storey(0.1, 0.5);
        let rep = lfc_compare(50, 0, &spec, &[AltModel::Uniform { b: 0.3 }], 500, 1, &McOptions::default()).unwrap();
        assert_eq!(rep.rows[0].fdr, rep.rows[1].fdr);
        assert_eq!(rep.fdr_pass, Some(true));
    }

    #[test]
    fn non_monotone_estimator_withholds_flags() {
        let est = EstimatorSpec::IntervalCombination {
            grid: vec![0.5, 0.75, 1.0],
            weights: WeightRule::Deterministic(vec![0.9, 0.1]),
        };
        let spec = ProcedureSpec::AdaptiveCapped {
            alpha: 0.1,
            lambda: 0.5,
            estimator: est,
        };
        let rep = lfc_compare(60, 20, &spec, &[], 300, 2, &McOptions::default()).unwrap();
        assert!(!rep.estimator_monotone);
        assert_eq!(rep.fdr_pass, None);
        assert_eq!(rep.warnings.len(), 1);
    }
}
