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

//! Calibration of the quotient slope `a` so that the worst-case FDR over
//! Dirac-uniform configurations equals the level.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{AltModel, ScenarioConfig};
use crate::procedures::ProcedureSpec;
use crate::stats::{combined_se, McEstimate};

use super::checks::Z_PASS;
use super::engine::{run_mc, McOptions};

const MAX_STEPS: usize = 60;

/// `{1, ceil(m/10), ceil(m/4), ceil(m/2), m-1}` without duplicates.
pub fn default_m1_grid(m: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = [1, m.div_ceil(10), m.div_ceil(4), m.div_ceil(2), m.saturating_sub(1)]
        .into_iter()
        .filter(|&m1| m1 >= 1 && m1 < m)
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub m: usize,
    pub b: f64,
    pub alpha: f64,
    pub m1_grid: Vec<usize>,
    pub replicates: u64,
    pub tolerance: f64,
    pub seed: u64,
}

impl CalibrationConfig {
    pub fn new(m: usize, b: f64, alpha: f64, replicates: u64, tolerance: f64, seed: u64) -> Self {
        Self {
            m,
            b,
            alpha,
            m1_grid: default_m1_grid(m),
            replicates,
            tolerance,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::Calibration(format!("b={} must be positive", self.b)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Calibration(format!("tolerance={} must be positive", self.tolerance)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Calibration(format!("alpha={} must lie in (0,1)", self.alpha)));
        }
        if self.m1_grid.is_empty() {
            return Err(Error::Calibration("m1 grid is empty".into()));
        }
        if let Some(m1) = self.m1_grid.iter().find(|&&m1| m1 >= self.m) {
            return Err(Error::Calibration(format!("m1={m1} must be below m={}", self.m)));
        }
        Ok(())
    }

    /// Upper end of the search interval, `min(b, 1 - alpha)`.
    pub fn a_max(&self) -> f64 {
        self.b.min(1.0 - self.alpha)
    }
}

/// Worst-case FDR over the DU grid at slope `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupFdr {
    pub a: f64,
    pub fdr: McEstimate,
    pub argmax_m1: usize,
}

/// Evaluates the objective with the given seed; every `a` sees the same draws.
pub fn sup_fdr_du(config: &CalibrationConfig, a: f64, seed: u64, options: &McOptions) -> Result<SupFdr> {
    let spec = ProcedureSpec::Quotient {
        alpha: config.alpha,
        a,
        b: config.b,
    };
    let mut best: Option<SupFdr> = None;
    for &m1 in &config.m1_grid {
        let sc = ScenarioConfig::new(config.m, m1, AltModel::du(), seed)?;
        let fdr = run_mc(&sc, &spec, config.replicates, options)?.fdr();
        if best.is_none_or(|b| fdr.mean > b.fdr.mean) {
            best = Some(SupFdr { a, fdr, argmax_m1: m1 });
        }
    }
    best.ok_or_else(|| Error::Calibration("m1 grid is empty".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationExit {
    /// Objective within tolerance of the level.
    Objective,
    /// Bracket narrower than the tolerance.
    Bracket,
    /// Even the largest admissible slope keeps the objective below the level.
    UpperEnd,
    /// Step limit reached.
    Steps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub a_m: f64,
    pub achieved: SupFdr,
    pub bracket: (f64, f64),
    pub path: Vec<SupFdr>,
    /// Objective nondecreasing in `a` along the path, up to 4 se.
    pub monotone_path: bool,
    pub exit: CalibrationExit,
}

impl CalibrationResult {
    pub fn within_tolerance(&self, alpha: f64, tolerance: f64) -> bool {
        (self.achieved.fdr.mean - alpha).abs() <= tolerance
    }
}

/// Bisection on `a` in `[0, min(b, 1 - alpha)]`.
pub fn calibrate_aorc_a(config: &CalibrationConfig, options: &McOptions) -> Result<CalibrationResult> {
    config.validate()?;
    let alpha = config.alpha;
    let tol = config.tolerance;
    let eval = |a: f64| sup_fdr_du(config, a, config.seed, options);

    let mut path = vec![eval(0.0)?];
    if path[0].fdr.mean > alpha {
        return Err(Error::Calibration(format!(
            "objective {} at a=0 already exceeds alpha={alpha}",
            path[0].fdr.mean
        )));
    }
    let (mut lo, mut hi) = (0.0, config.a_max());
    let top = eval(hi)?;
    path.push(top);
    let (achieved, exit) = if top.fdr.mean <= alpha {
        (top, CalibrationExit::UpperEnd)
    } else {
        let mut outcome = None;
        for _ in 0..MAX_STEPS {
            let mid = 0.5 * (lo + hi);
            let value = eval(mid)?;
            path.push(value);
            if (value.fdr.mean - alpha).abs() <= tol {
                outcome = Some((value, CalibrationExit::Objective));
                break;
            }
            if value.fdr.mean > alpha {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < tol {
                let last = eval(0.5 * (lo + hi))?;
                path.push(last);
                outcome = Some((last, CalibrationExit::Bracket));
                break;
            }
        }
        match outcome {
            Some(o) => o,
            None => {
                let last = eval(0.5 * (lo + hi))?;
                path.push(last);
                (last, CalibrationExit::Steps)
            }
        }
    };

    let mut sorted = path.clone();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    let monotone_path = sorted
        .windows(2)
        .all(|w| w[1].fdr.mean >= w[0].fdr.mean - Z_PASS * combined_se(w[0].fdr.se, w[1].fdr.se));
    Ok(CalibrationResult {
        a_m: achieved.a,
        achieved,
        bracket: (lo, hi),
        path,
        monotone_path,
        exit,
    })
}
