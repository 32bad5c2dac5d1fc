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

//! Data-generating configurations of the BI model.
//!
//! True nulls are i.i.d. uniform; false nulls are i.i.d. from an alternative
//! distribution `F1` drawn by inverse transform. The Dirac model at 0 is the
//! Dirac-uniform configuration `DU(m, m1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::PValueSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AltModel {
    /// Point mass at `c`.
    Dirac { c: f64 },
    /// Uniform on `[0, b]`.
    Uniform { b: f64 },
    /// `min(U, x0)` for uniform `U`.
    MinUniform { x0: f64 },
    /// CDF through the knots `(t, F1(t))`, linear in between; starts at
    /// `t = 0` and ends at `(1, 1)`.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

impl AltModel {
    pub fn du() -> Self {
        AltModel::Dirac { c: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        match self {
            AltModel::Dirac { c } if !(0.0..=1.0).contains(c) => bad(format!("dirac c={c} outside [0,1]")),
            AltModel::Uniform { b } if !(*b > 0.0 && *b <= 1.0) => bad(format!("uniform b={b} outside (0,1]")),
            AltModel::MinUniform { x0 } if !(0.0..=1.0).contains(x0) => {
                bad(format!("min-uniform x0={x0} outside [0,1]"))
            }
            AltModel::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return bad("piecewise-linear CDF needs at least two knots".into());
                }
                if knots[0][0] != 0.0 || knots[knots.len() - 1] != [1.0, 1.0] {
                    return bad("knots must start at t=0 and end at (1,1)".into());
                }
                if knots.iter().any(|k| !(0.0..=1.0).contains(&k[1])) {
                    return bad("knot values must lie in [0,1]".into());
                }
                if knots.windows(2).any(|w| w[1][0] < w[0][0] || w[1][1] < w[0][1]) {
                    return bad("knots must be nondecreasing in both coordinates".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Inverse CDF `inf{t : F1(t) >= u}` for `u` in `[0,1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            AltModel::Dirac { c } => *c,
            AltModel::Uniform { b } => u * b,
            AltModel::MinUniform { x0 } => u.min(*x0),
            AltModel::PiecewiseLinear { knots } => {
                if u <= knots[0][1] {
                    return knots[0][0];
                }
                let i = knots.partition_point(|k| k[1] < u);
                let (lo, hi) = (knots[i - 1], knots[i]);
                lo[0] + (u - lo[1]) / (hi[1] - lo[1]) * (hi[0] - lo[0])
            }
        }
    }

    /// Whether all alternative p-values lie in `[0, lambda]` almost surely.
    pub fn supported_below(&self, lambda: f64) -> bool {
        match self {
            AltModel::Dirac { c } => *c <= lambda,
            AltModel::Uniform { b } => *b <= lambda,
            AltModel::MinUniform { x0 } => *x0 <= lambda,
            AltModel::PiecewiseLinear { .. } => alt_cdf(self, lambda) >= 1.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            AltModel::Dirac { c } => format!("dirac({c})"),
            AltModel::Uniform { b } => format!("uniform(0,{b})"),
            AltModel::MinUniform { x0 } => format!("min-uniform({x0})"),
            AltModel::PiecewiseLinear { knots } => format!("piecewise({} knots)", knots.len()),
        }
    }
}

/// `F1(t)`, right-continuous.
pub fn alt_cdf(alt: &AltModel, t: f64) -> f64 {
    match alt {
        AltModel::Dirac { c } => {
            if t >= *c {
                1.0
            } else {
                0.0
            }
        }
        AltModel::Uniform { b } => (t / b).clamp(0.0, 1.0),
        AltModel::MinUniform { x0 } => {
            if t >= *x0 {
                1.0
            } else {
                t.max(0.0)
            }
        }
        AltModel::PiecewiseLinear { knots } => {
            if t >= 1.0 {
                return 1.0;
            }
            // last knot with abscissa <= t gives right-continuity at jumps
            let i = knots.partition_point(|k| k[0] <= t);
            if i == 0 {
                return 0.0;
            }
            let lo = knots[i - 1];
            let hi = knots[i];
            lo[1] + (t - lo[0]) / (hi[0] - lo[0]) * (hi[1] - lo[1])
        }
    }
}

/// One data-generating regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m: usize,
    pub m1: usize,
    pub alt: AltModel,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(m: usize, m1: usize, alt: AltModel, seed: u64) -> Result<Self> {
        let config = Self { m, m1, alt, seed };
        config.validate()?;
        Ok(config)
    }

    pub fn m0(&self) -> usize {
        self.m - self.m1
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 >= self.m {
            return Err(Error::InvalidScenario(format!(
                "need 0 <= m1 < m, got m={} m1={}",
                self.m, self.m1
            )));
        }
        self.alt.validate()
    }

    /// Substream for one replicate; independent of evaluation order.
    pub(crate) fn rng(&self, replicate: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate);
        rng
    }

    /// Writes the replicate's p-values into `buf`, true nulls first.
    pub(crate) fn fill(&self, replicate: u64, buf: &mut Vec<f64>) {
        let mut rng = self.rng(replicate);
        buf.clear();
        buf.extend((0..self.m0()).map(|_| rng.random::<f64>()));
        buf.extend((0..self.m1).map(|_| self.alt.quantile(rng.random::<f64>())));
    }
}

/// Draws replicate `replicate` of the scenario.
pub fn sample_scenario(config: &ScenarioConfig, replicate: u64) -> PValueSample {
    let mut values = Vec::with_capacity(config.m);
    config.fill(replicate, &mut values);
    let is_null = (0..config.m).map(|i| i < config.m0()).collect();
    PValueSample::new(values, is_null).expect("valid scenario yields a valid sample")
}

/// Limit of `P(V = 0)` for BH under `DU(m, m1)` as `m` grows: `(1-alpha) exp(-m1 alpha)`.
pub fn du_limit_p_v0(alpha: f64, m1: usize) -> f64 {
    (1.0 - alpha) * (-(m1 as f64) * alpha).exp()
}

/// `(m1/m) F1(t)/t - (c0/alpha - m0/m)`; positive when the rejection curve
/// is crossed at `t` at this sample size.
pub fn sufficiency_margin(config: &ScenarioConfig, alpha: f64, c0: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("t={t} must lie in (0,1]")));
    }
    let m = config.m as f64;
    Ok(config.m1 as f64 / m * alt_cdf(&config.alt, t) / t - (c0 / alpha - config.m0() as f64 / m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn du_sample_is_exact() {
        let cfg = ScenarioConfig::new(10, 3, AltModel::du(), 5).unwrap();
        let s = sample_scenario(&cfg, 0);
        let zeros: Vec<usize> = (0..10).filter(|&i| s.values()[i] == 0.0).collect();
        assert_eq!(zeros, vec![7, 8, 9]);
        assert!(s.is_null()[..7].iter().all(|&b| b));
        assert!(s.is_null()[7..].iter().all(|&b| !b));
    }

    #[test]
    fn reproducible_and_order_independent() {
        let cfg = ScenarioConfig::new(50, 10, AltModel::MinUniform { x0: 1.0 / 6.0 }, 99).unwrap();
        let late_first = sample_scenario(&cfg, 7);
        let _ = sample_scenario(&cfg, 3);
        assert_eq!(late_first, sample_scenario(&cfg, 7));
        assert_ne!(sample_scenario(&cfg, 7), sample_scenario(&cfg, 8));
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(alt_cdf(&AltModel::du(), 0.0), 1.0);
        assert_eq!(alt_cdf(&AltModel::Uniform { b: 0.4 }, 0.2), 0.5);
        let mu = AltModel::MinUniform { x0: 1.0 / 6.0 };
        assert_eq!(alt_cdf(&mu, 0.1), 0.1);
        assert_eq!(alt_cdf(&mu, 0.2), 1.0);
        assert_eq!(alt_cdf(&AltModel::Dirac { c: 0.3 }, 0.29), 0.0);
    }

    #[test]
    fn piecewise_cdf_and_quantile() {
        // mass 0.2 at 0, linear to 0.6 at t=0.5, flat to 0.8, jump to 1 at 0.8
        let alt = AltModel::PiecewiseLinear {
            knots: vec![[0.0, 0.2], [0.5, 0.6], [0.8, 0.6], [0.8, 1.0], [1.0, 1.0]],
        };
        alt.validate().unwrap();
        assert_eq!(alt_cdf(&alt, 0.0), 0.2);
        assert!((alt_cdf(&alt, 0.25) - 0.4).abs() < 1e-12);
        assert_eq!(alt_cdf(&alt, 0.7), 0.6);
        assert_eq!(alt_cdf(&alt, 0.8), 1.0);
        assert_eq!(alt.quantile(0.1), 0.0);
        assert!((alt.quantile(0.4) - 0.25).abs() < 1e-12);
        assert_eq!(alt.quantile(0.7), 0.8);
        assert!(alt.supported_below(0.8));
        assert!(!alt.supported_below(0.7));
    }

    #[test]
    fn invalid_scenarios() {
        assert!(ScenarioConfig::new(5, 5, AltModel::du(), 0).is_err());
        assert!(ScenarioConfig::new(5, 1, AltModel::Uniform { b: 0.0 }, 0).is_err());
        let bad = AltModel::PiecewiseLinear {
            knots: vec![[0.0, 0.5], [0.5, 0.4], [1.0, 1.0]],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn du_limit_examples() {
        assert!((du_limit_p_v0(0.1, 0) - 0.9).abs() < 1e-15);
        assert!((du_limit_p_v0(0.1, 5) - 0.545_877_593_741_370_1).abs() < 1e-12);
        assert!((du_limit_p_v0(1e-12, 5) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sufficiency_margin_examples() {
        // DU at t = (m1/m)(K+2)
        let cfg = ScenarioConfig::new(1000, 100, AltModel::du(), 0).unwrap();
        let (k, c0, alpha) = (2.0, 0.9, 0.1);
        let t = 0.1 * (k + 2.0);
        let margin = sufficiency_margin(&cfg, alpha, c0, t).unwrap();
        assert!((margin - (1.0 / (k + 2.0) - c0 / alpha + 0.9)).abs() < 1e-12);

        // linear CDF: independent of t below b
        let cfg = ScenarioConfig::new(100, 50, AltModel::Uniform { b: 0.5 }, 0).unwrap();
        let a = sufficiency_margin(&cfg, 0.1, 1.0, 0.1).unwrap();
        let b = sufficiency_margin(&cfg, 0.1, 1.0, 0.4).unwrap();
        assert!((a - b).abs() < 1e-12);

        // m0 = m1 with min(U, 1/6): BH(1/2) crosses at x0, BH(1/4) does not
        let cfg = ScenarioConfig::new(100, 50, AltModel::MinUniform { x0: 1.0 / 6.0 }, 0).unwrap();
        let half = sufficiency_margin(&cfg, 0.5, 1.0, 1.0 / 6.0).unwrap();
        assert!((half - 1.5).abs() < 1e-12);
        assert!(sufficiency_margin(&cfg, 0.25, 1.0, 1.0 / 6.0).unwrap() < 0.0);
        assert!(sufficiency_margin(&cfg, 0.5, 1.0, 0.0).is_err());
    }
}
