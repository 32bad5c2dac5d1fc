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

//! Finite-sample FDP moments and consistency diagnostics for step-up
//! multiple testing procedures.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod models;
pub mod moments;
pub mod procedures;
pub mod sample;
pub mod simulation;
pub mod stats;
pub mod stepup;

pub use error::{Error, Result};
