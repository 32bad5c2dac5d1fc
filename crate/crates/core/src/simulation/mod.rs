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

//! Monte-Carlo engine, identity checks, sweeps, LFC comparisons and
//! calibration.

mod calibrate;
mod checks;
mod engine;
mod lfc;
mod sweep;

pub use calibrate::{
    calibrate_aorc_a, default_m1_grid, sup_fdr_du, CalibrationConfig, CalibrationExit, CalibrationResult, SupFdr,
};
pub use checks::{check_identity, IdentityReport, Z_PASS};
pub use engine::{
    identities_for, replicate_record, run_mc, Identity, McOptions, McSummary, PairAccumulator, ReplicateRecord,
    BATCH_SIZE, MAX_LEAVE_OUT, R1_CUTS,
};
pub use lfc::{lfc_compare, LfcReport, LfcRow, PROBE_TRIALS};
pub use sweep::{
    consistency_sweep, level_probe, quotient_consistency_diagnostics, LevelRow, M1Rule, QuotientRow, SweepConfig,
    SweepRow,
};
