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

//! Sweeps over the number of hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AltModel, ScenarioConfig};
use crate::procedures::ProcedureSpec;
use crate::stats::McEstimate;

use super::checks::Z_PASS;
use super::engine::{run_mc, McOptions, McSummary};

/// How the number of false nulls grows with `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum M1Rule {
    Fixed { m1: usize },
    /// `m1 = round(fraction * m)`.
    Proportional { fraction: f64 },
    /// `m1 = ceil(c * sqrt(m))`.
    SqrtScaled { c: f64 },
}

impl M1Rule {
    pub fn m1(&self, m: usize) -> usize {
        match *self {
            M1Rule::Fixed { m1 } => m1,
            M1Rule::Proportional { fraction } => (fraction * m as f64).round() as usize,
            M1Rule::SqrtScaled { c } => (c * (m as f64).sqrt()).ceil() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            M1Rule::Proportional { fraction } if !(fraction > 0.0 && fraction < 1.0) => Err(
                Error::InvalidScenario(format!("fraction={fraction} must lie in (0,1)")),
            ),
            M1Rule::SqrtScaled { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::InvalidScenario(format!("sqrt scale c={c} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub m_grid: Vec<usize>,
    pub m1_rule: M1Rule,
    pub procedure: ProcedureSpec,
    pub alt: AltModel,
    pub replicates: u64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_grid.is_empty() {
            return Err(Error::InvalidScenario("m_grid is empty".into()));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScenario("m_grid must be strictly increasing".into()));
        }
        self.m1_rule.validate()?;
        self.procedure.validate()?;
        self.scenarios().map(|_| ())
    }

    /// One scenario per grid point, sharing the seed.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        self.m_grid
            .iter()
            .map(|&m| ScenarioConfig::new(m, self.m1_rule.m1(m), self.alt.clone(), self.seed))
            .collect()
    }
}

/// Summary of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub m1: usize,
    pub fdr: McEstimate,
    pub var_fdp: McEstimate,
    pub p_v0: McEstimate,
    pub mean_r: McEstimate,
    pub mean_m0hat_over_m: McEstimate,
    /// Variance of `V(lambda) / m0_hat`.
    pub var_m0hat_ratio: McEstimate,
    pub mean_threshold: McEstimate,
    /// `P(R^(1) <= c)` for `c` = 1, 5, 25.
    pub r1_le: [McEstimate; 3],
    /// `P(m0_hat / m0 <= 0.9)`.
    pub underestimate: McEstimate,
    /// FDR estimate at most `alpha + 4 se`.
    pub pass: bool,
}

impl SweepRow {
    pub fn from_summary(m1: usize, s: &McSummary) -> Self {
        let fdr = s.fdr();
        Self {
            m: s.m,
            m1,
            fdr,
            var_fdp: s.var_fdp(),
            p_v0: s.p_v0(),
            mean_r: s.mean_r(),
            mean_m0hat_over_m: s.m0hat_over_m.mean_estimate(),
            var_m0hat_ratio: s.x.variance_estimate(),
            mean_threshold: s.threshold.mean_estimate(),
            r1_le: s.r1_le.map(|acc| acc.mean_estimate()),
            underestimate: s.underestimate.mean_estimate(),
            pass: fdr.mean <= s.alpha + Z_PASS * fdr.se,
        }
    }
}

/// Runs the procedure at every grid point.
pub fn consistency_sweep(config: &SweepConfig, options: &McOptions) -> Result<Vec<SweepRow>> {
    config.validate()?;
    config
        .scenarios()?
        .iter()
        .map(|sc| run_mc(sc, &config.procedure, config.replicates, options).map(|s| SweepRow::from_summary(sc.m1, &s)))
        .collect()
}

/// Per-`m` quantities governing consistency of quotient critical values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientRow {
    pub m: usize,
    pub m1: usize,
    /// `P(R^(1) <= c)` for `c` = 1, 5, 25.
    pub r1_le: [McEstimate; 3],
    /// Mean of `(a/m)(R^(2) - R^(1))`.
    pub spread: McEstimate,
    /// Variance of `(m + b - a R^(1)) / m0`.
    pub denominator_var: McEstimate,
    pub fdr: McEstimate,
    pub var_fdp: McEstimate,
}

pub fn quotient_consistency_diagnostics(config: &SweepConfig, options: &McOptions) -> Result<Vec<QuotientRow>> {
    if !matches!(config.procedure, ProcedureSpec::Quotient { .. }) {
        return Err(Error::InvalidProcedure(format!(
            "quotient diagnostics need quotient critical values, got {}",
            config.procedure.label()
        )));
    }
    config.validate()?;
    config
        .scenarios()?
        .iter()
        .map(|sc| {
            let s = run_mc(sc, &config.procedure, config.replicates, options)?;
            Ok(QuotientRow {
                m: sc.m,
                m1: sc.m1,
                r1_le: s.r1_le.map(|acc| acc.mean_estimate()),
                spread: s.quotient_spread.mean_estimate(),
                denominator_var: s.quotient_denominator.variance_estimate(),
                fdr: s.fdr(),
                var_fdp: s.var_fdp(),
            })
        })
        .collect()
}

/// One level of [`level_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub alpha: f64,
    pub m: usize,
    pub m1: usize,
    pub mean_v: McEstimate,
    pub fdr: McEstimate,
    pub var_fdp: McEstimate,
}

/// Runs the sweep at five levels evenly spaced inside `(alpha_lo, alpha_hi)`.
///
/// Only a finite footprint of a statement about all levels in the interval;
/// growth of `E(V)` with `m` is what to look for.
pub fn level_probe(config: &SweepConfig, alpha_lo: f64, alpha_hi: f64, options: &McOptions) -> Result<Vec<LevelRow>> {
    if !(0.0 < alpha_lo && alpha_lo < alpha_hi && alpha_hi < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < alpha_lo < alpha_hi < 1, got ({alpha_lo}, {alpha_hi})"
        )));
    }
    let mut rows = Vec::new();
    for i in 1..=5 {
        let alpha = alpha_lo + (alpha_hi - alpha_lo) * i as f64 / 6.0;
        let probe = SweepConfig {
            procedure: config.procedure.with_alpha(alpha),
            ..config.clone()
        };
        probe.validate()?;
        for sc in probe.scenarios()? {
            let s = run_mc(&sc, &probe.procedure, probe.replicates, options)?;
            rows.push(LevelRow {
                alpha,
                m: sc.m,
                m1: sc.m1,
                mean_v: s.v.mean_estimate(),
                fdr: s.fdr(),
                var_fdp: s.var_fdp(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::du_limit_p_v0;

    fn base(procedure: ProcedureSpec, rule: M1Rule, alt: AltModel) -> SweepConfig {
        SweepConfig {
            m_grid: vec![100, 400, 1600],
            m1_rule: rule,
            procedure,
            alt,
            replicates: 4000,
            seed: 21,
        }
    }

    #[test]
    fn m1_rules() {
        assert_eq!(M1Rule::Fixed { m1: 3 }.m1(1000), 3);
        assert_eq!(M1Rule::Proportional { fraction: 0.5 }.m1(101), 51);
        assert_eq!(M1Rule::SqrtScaled { c: 2.0 }.m1(100), 20);
        assert_eq!(M1Rule::SqrtScaled { c: 1.5 }.m1(10), 5);
        assert!(M1Rule::Proportional { fraction: 1.0 }.validate().is_err());
    }

    #[test]
    fn invalid_sweeps() {
        let mut c = base(ProcedureSpec::Bh { alpha: 0.1 }, M1Rule::Fixed { m1: 3 }, AltModel::du());
        c.m_grid = vec![100, 100];
        assert!(c.validate().is_err());
        c.m_grid = vec![];
        assert!(c.validate().is_err());
        c.m_grid = vec![2, 10];
        assert!(c.validate().is_err());
    }

    #[test]
    fn fixed_m1_keeps_v_zero_mass() {
        let c = base(ProcedureSpec::Bh { alpha: 0.1 }, M1Rule::Fixed { m1: 3 }, AltModel::du());
        let rows = consistency_sweep(&c, &McOptions::default()).unwrap();
        assert_eq!(rows.len(), 3);
        let limit = du_limit_p_v0(0.1, 3);
        for row in &rows {
            assert!(row.pass);
            assert!(row.p_v0.mean > 0.5 * limit, "{row:?}");
        }
        assert!((rows[2].p_v0.mean - limit).abs() < 0.03);
    }

    #[test]
    fn quotient_diagnostics_zero_spread_at_a0() {
        let c = base(
            ProcedureSpec::Quotient { alpha: 0.1, a: 0.0, b: 1.0 },
            M1Rule::Proportional { fraction: 0.2 },
            AltModel::du(),
        );
        let rows = quotient_consistency_diagnostics(&c, &McOptions::default()).unwrap();
        for row in &rows {
            assert_eq!(row.spread.mean, 0.0);
            assert_eq!(row.spread.se, 0.0);
        }
        let c = base(ProcedureSpec::Quotient { alpha: 0.1, a: 0.5, b: 1.0 }, M1Rule::Proportional { fraction: 0.2 }, AltModel::du());
        let rows = quotient_consistency_diagnostics(&c, &McOptions::default()).unwrap();
        assert!(rows.last().unwrap().r1_le[2].mean <= rows[0].r1_le[2].mean);
        let not_quotient = base(ProcedureSpec::Bh { alpha: 0.1 }, M1Rule::Fixed { m1: 1 }, AltModel::du());
        assert!(quotient_consistency_diagnostics(&not_quotient, &McOptions::default()).is_err());
    }

    #[test]
    fn level_probe_shape() {
        let mut c = base(ProcedureSpec::storey(0.1, 0.5), M1Rule::Proportional { fraction: 0.5 }, AltModel::du());
        c.m_grid = vec![20, 40];
        c.replicates = 200;
        let rows = level_probe(&c, 0.05, 0.2, &McOptions::default()).unwrap();
        assert_eq!(rows.len(), 10);
        assert!((rows[0].alpha - 0.075).abs() < 1e-12);
        assert!(level_probe(&c, 0.2, 0.05, &McOptions::default()).is_err());
    }
}
