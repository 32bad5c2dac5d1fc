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

//! Command-line front end: configuration files, command execution and
//! result tables.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, ConfigError, ErrorCode, Format, RunConfig};
pub use output::{emit_table, read_csv_table, render_table, Cell, Metadata, Table};
pub use run::{execute, run, Outcome, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK, SWEEP_COLUMNS};
