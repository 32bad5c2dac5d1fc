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

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fdp_lab::cli::{self, parse_config, Command, Format};

/// Monte-Carlo experiments on the false discovery proportion of step-up tests.
#[derive(Debug, Parser)]
#[command(name = "fdp-lab", version)]
struct Args {
    /// One of verify-moments, fdr-table, consistency-sweep, lfc-check,
    /// calibrate-aorc, diagnostics-quotient.
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Warn about unknown configuration keys instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let args = Args::parse();
    ExitCode::from(run(args) as u8)
}

fn run(args: Args) -> i32 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return cli::EXIT_ERROR;
        }
    };
    let (mut config, warnings) = match parse_config(&text, !args.lenient) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return cli::EXIT_ERROR;
        }
    };
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if config.command != args.command {
        eprintln!(
            "error: command {} does not match the configuration's {}",
            args.command.name(),
            config.command.name()
        );
        return cli::EXIT_ERROR;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.replicates {
        config.replicates = n;
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    if let Some(out) = args.out {
        config.output.path = Some(out);
    }
    if let Some(f) = args.format {
        config.output.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return cli::EXIT_ERROR;
    }
    cli::execute(&config, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
