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

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid critical values: {0}")]
    InvalidCriticalValues(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("tuning parameter lambda={lambda} outside [{alpha}, 1)")]
    LambdaOutOfRange { lambda: f64, alpha: f64 },

    #[error("invalid estimator: {0}")]
    InvalidEstimator(String),

    #[error("invalid procedure: {0}")]
    InvalidProcedure(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing component estimate: {0}")]
    MissingComponent(&'static str),

    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),

    #[error("calibration failed: {0}")]
    Calibration(String),
}
