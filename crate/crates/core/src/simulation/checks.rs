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

//! Identity checks on Monte-Carlo output.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ScenarioConfig;
use crate::procedures::ProcedureSpec;
use crate::stats::McEstimate;

use super::engine::{run_mc, Identity, McOptions, McSummary};

/// Default z threshold of every check.
pub const Z_PASS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: Identity,
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub mean_diff: f64,
    pub se: f64,
    pub z: f64,
    /// `mean_diff + 4 se`; negative when the left side is too small.
    pub lower_margin: f64,
    /// `4 se - mean_diff`; negative when the left side is too large.
    pub upper_margin: f64,
    pub pass: bool,
}

impl IdentityReport {
    /// Builds the report for `id` from an existing run.
    pub fn from_summary(summary: &McSummary, id: Identity) -> Result<Self> {
        let acc = summary.identity(id).ok_or_else(|| {
            Error::UnknownIdentity(format!("{id} was not tracked in this run"))
        })?;
        let d = acc.diff.mean_estimate();
        let z = if d.se > 0.0 {
            d.mean / d.se
        } else if d.mean == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d.mean)
        };
        Ok(Self {
            identity: id,
            lhs: acc.lhs.mean_estimate(),
            rhs: acc.rhs.mean_estimate(),
            mean_diff: d.mean,
            se: d.se,
            z,
            lower_margin: d.mean + Z_PASS * d.se,
            upper_margin: Z_PASS * d.se - d.mean,
            pass: d.mean.abs() <= Z_PASS * d.se,
        })
    }
}

/// Runs `spec` on `scenario` and checks identity `id`.
pub fn check_identity(
    id: Identity,
    scenario: &ScenarioConfig,
    spec: &ProcedureSpec,
    replicates: u64,
    options: &McOptions,
) -> Result<IdentityReport> {
    if !id.applies_to(spec) {
        return Err(Error::UnknownIdentity(format!(
            "{id} does not apply to {}",
            spec.label()
        )));
    }
    let mut options = options.clone();
    if let Identity::Moment(k) = id {
        options.max_order = options.max_order.max(k);
    }
    let summary = run_mc(scenario, spec, replicates, &options)?;
    IdentityReport::from_summary(&summary, id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::AltModel;

    #[test]
    fn fdr_identity_and_injected_fault() {
        let sc = ScenarioConfig::new(200, 80, AltModel::du(), 5).unwrap();
        let spec = ProcedureSpec::storey(0.1, 0.5);
        let ok = check_identity(Identity::Fdr, &sc, &spec, 20_000, &McOptions::default()).unwrap();
        assert!(ok.pass, "{ok:?}");
        let faulty = McOptions {
            fault_scale: 1.05,
            ..McOptions::default()
        };
        let bad = check_identity(Identity::Fdr, &sc, &spec, 20_000, &faulty).unwrap();
        assert!(!bad.pass, "{bad:?}");
        assert!(bad.upper_margin > 0.0 && bad.lower_margin < 0.0);
    }

    #[test]
    fn inapplicable_identity() {
        let sc = ScenarioConfig::new(20, 5, AltModel::du(), 5).unwrap();
        let bh = ProcedureSpec::Bh { alpha: 0.1 };
        assert!(check_identity(Identity::Fdr, &sc, &bh, 200, &McOptions::default()).is_err());
        let storey = ProcedureSpec::storey(0.1, 0.5);
        assert!(check_identity(Identity::Deterministic(1), &sc, &storey, 200, &McOptions::default()).is_err());
    }
}
