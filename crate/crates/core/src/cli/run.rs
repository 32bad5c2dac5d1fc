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

//! Command execution.

use std::io::Write;

use crate::error::Error;
use crate::models::ScenarioConfig;
use crate::moments::{k_m, lemma_bounds};
use crate::procedures::ProcedureSpec;
use crate::simulation::{
    calibrate_aorc_a, consistency_sweep, identities_for, lfc_compare, quotient_consistency_diagnostics, run_mc,
    sup_fdr_du, Identity, IdentityReport, McOptions, Z_PASS,
};
use crate::stats::combined_se;

use super::config::{Command, RunConfig};
use super::output::{emit_table, render_table, Cell, Metadata, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Columns of `consistency-sweep` output.
pub const SWEEP_COLUMNS: [&str; 11] = [
    "m",
    "m1",
    "fdr_mean",
    "fdr_se",
    "var_fdp_mean",
    "var_fdp_se",
    "p_v0_mean",
    "p_v0_se",
    "mean_r",
    "m0hat_over_m",
    "pass",
];

/// Result table of a command plus any warnings raised on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.table.pass_flags().iter().all(|&p| p)
    }
}

fn options(config: &RunConfig) -> McOptions {
    McOptions {
        workers: config.workers,
        max_order: config.max_order.unwrap_or(4),
        fault_scale: config.fault_scale.unwrap_or(1.0),
    }
}

fn scenario_cells(sc: &ScenarioConfig, spec: &ProcedureSpec) -> Vec<Cell> {
    vec![sc.m.into(), sc.m1.into(), sc.alt.label().into(), spec.label().into()]
}

fn single_procedure(config: &RunConfig) -> Result<ProcedureSpec, Error> {
    let mut procedures = config.procedures();
    if procedures.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "{} takes exactly one procedure, got {}",
            config.command.name(),
            procedures.len()
        )));
    }
    Ok(procedures.remove(0))
}

fn verify_moments(config: &RunConfig) -> Result<Outcome, Error> {
    let mut table = Table::new(&[
        "m", "m1", "alt", "procedure", "identity", "lhs_mean", "rhs_mean", "mean_diff", "se", "z", "pass",
    ]);
    let opts = options(config);
    let requested: Option<Vec<Identity>> = config
        .identities
        .as_ref()
        .map(|ids| ids.iter().map(|s| s.parse()).collect::<Result<_, _>>())
        .transpose()?;
    for sc in config.scenarios() {
        for spec in config.procedures() {
            let summary = run_mc(&sc, &spec, config.replicates, &opts)?;
            let ids: Vec<Identity> = match &requested {
                Some(ids) => ids.iter().copied().filter(|id| id.applies_to(&spec)).collect(),
                None => identities_for(&spec, &opts),
            };
            for id in ids {
                let rep = IdentityReport::from_summary(&summary, id)?;
                let mut row = scenario_cells(&sc, &spec);
                row.extend([
                    id.to_string().into(),
                    rep.lhs.mean.into(),
                    rep.rhs.mean.into(),
                    rep.mean_diff.into(),
                    rep.se.into(),
                    rep.z.into(),
                    rep.pass.into(),
                ]);
                table.push(row);
            }
            if config.bounds == Some(true) {
                if let Some(est) = spec.estimator() {
                    let km = k_m(est.a3_constant(spec.lambda()), sc.m, sc.m0());
                    let b = lemma_bounds(&summary.bound_inputs(), sc.m0(), spec.lambda(), spec.alpha(), km)?;
                    let checks = [
                        ("bound_lower", b.var_fdp.mean, b.c_m_lambda.mean, b.lower_margin, b.lower_se, b.lower_holds(Z_PASS)),
                        (
                            "bound_upper",
                            b.var_fdp.mean,
                            b.c_m_lambda.mean + b.slack_term,
                            b.upper_margin,
                            b.upper_se,
                            b.upper_holds(Z_PASS),
                        ),
                        (
                            "bound_tail",
                            b.tail_estimate.mean,
                            b.tail_bound,
                            b.tail_bound - b.tail_estimate.mean,
                            b.tail_estimate.se,
                            b.tail_holds(Z_PASS),
                        ),
                    ];
                    for (name, lhs, rhs, margin, se, pass) in checks {
                        let mut row = scenario_cells(&sc, &spec);
                        let z = if se > 0.0 { margin / se } else { 0.0 };
                        row.extend([
                            name.into(),
                            lhs.into(),
                            rhs.into(),
                            margin.into(),
                            se.into(),
                            z.into(),
                            pass.into(),
                        ]);
                        table.push(row);
                    }
                }
            }
        }
    }
    Ok(Outcome {
        table,
        warnings: Vec::new(),
    })
}

fn fdr_table(config: &RunConfig) -> Result<Outcome, Error> {
    let mut columns = vec!["m", "m1", "alt", "procedure"];
    columns.extend(&SWEEP_COLUMNS[2..]);
    let mut table = Table::new(&columns);
    let opts = options(config);
    for sc in config.scenarios() {
        for spec in config.procedures() {
            let s = run_mc(&sc, &spec, config.replicates, &opts)?;
            let (fdr, var, p_v0) = (s.fdr(), s.var_fdp(), s.p_v0());
            let mut row = scenario_cells(&sc, &spec);
            row.extend([
                fdr.mean.into(),
                fdr.se.into(),
                var.mean.into(),
                var.se.into(),
                p_v0.mean.into(),
                p_v0.se.into(),
                s.mean_r().mean.into(),
                s.m0hat_over_m.mean().into(),
                (fdr.mean <= spec.alpha() + Z_PASS * fdr.se).into(),
            ]);
            table.push(row);
        }
    }
    Ok(Outcome {
        table,
        warnings: Vec::new(),
    })
}

fn sweep_table(config: &RunConfig) -> Result<Outcome, Error> {
    single_procedure(config)?;
    let mut table = Table::new(&SWEEP_COLUMNS);
    for sweep in config.sweeps() {
        for row in consistency_sweep(&sweep, &options(config))? {
            table.push(vec![
                row.m.into(),
                row.m1.into(),
                row.fdr.mean.into(),
                row.fdr.se.into(),
                row.var_fdp.mean.into(),
                row.var_fdp.se.into(),
                row.p_v0.mean.into(),
                row.p_v0.se.into(),
                row.mean_r.mean.into(),
                row.mean_m0hat_over_m.mean.into(),
                row.pass.into(),
            ]);
        }
    }
    Ok(Outcome {
        table,
        warnings: Vec::new(),
    })
}

fn quotient_table(config: &RunConfig) -> Result<Outcome, Error> {
    single_procedure(config)?;
    let mut table = Table::new(&[
        "m",
        "m1",
        "p_r1_le_1",
        "p_r1_le_5",
        "p_r1_le_25",
        "spread_mean",
        "spread_se",
        "denominator_var",
        "denominator_var_se",
        "fdr_mean",
        "fdr_se",
        "var_fdp_mean",
    ]);
    for sweep in config.sweeps() {
        for row in quotient_consistency_diagnostics(&sweep, &options(config))? {
            table.push(vec![
                row.m.into(),
                row.m1.into(),
                row.r1_le[0].mean.into(),
                row.r1_le[1].mean.into(),
                row.r1_le[2].mean.into(),
                row.spread.mean.into(),
                row.spread.se.into(),
                row.denominator_var.mean.into(),
                row.denominator_var.se.into(),
                row.fdr.mean.into(),
                row.fdr.se.into(),
                row.var_fdp.mean.into(),
            ]);
        }
    }
    Ok(Outcome {
        table,
        warnings: Vec::new(),
    })
}

fn lfc_table(config: &RunConfig) -> Result<Outcome, Error> {
    let spec = single_procedure(config)?;
    let lfc = config.lfc.as_ref().expect("validated");
    let rep = lfc_compare(lfc.m, lfc.m1, &spec, &lfc.alts, config.replicates, config.seed, &options(config))?;
    let mut table = Table::new(&[
        "alt",
        "is_du",
        "below_lambda",
        "fdr_mean",
        "fdr_se",
        "var_fdp_mean",
        "var_fdp_se",
        "pass",
    ]);
    let du = rep.du().clone();
    for row in &rep.rows {
        let fdr_ok = du.fdr.mean >= row.fdr.mean - Z_PASS * combined_se(du.fdr.se, row.fdr.se);
        let var_ok = !row.below_lambda
            || du.var_fdp.mean <= row.var_fdp.mean + Z_PASS * combined_se(du.var_fdp.se, row.var_fdp.se);
        table.push(vec![
            row.alt.clone().into(),
            row.is_du.into(),
            row.below_lambda.into(),
            row.fdr.mean.into(),
            row.fdr.se.into(),
            row.var_fdp.mean.into(),
            row.var_fdp.se.into(),
            (rep.estimator_monotone && fdr_ok && var_ok).into(),
        ]);
    }
    Ok(Outcome {
        table,
        warnings: rep.warnings,
    })
}

fn calibration_table(config: &RunConfig) -> Result<Outcome, Error> {
    let cal = config.calibration_config().expect("validated");
    let opts = options(config);
    let res = calibrate_aorc_a(&cal, &opts)?;
    let mut table = Table::new(&["kind", "a", "sup_fdr_mean", "sup_fdr_se", "argmax_m1", "pass"]);
    let mut warnings = Vec::new();
    for step in &res.path {
        table.push(vec![
            "step".into(),
            step.a.into(),
            step.fdr.mean.into(),
            step.fdr.se.into(),
            step.argmax_m1.into(),
            true.into(),
        ]);
    }
    if !res.monotone_path {
        warnings.push("objective decreased in a along the bisection path".into());
    }
    let ok = res.within_tolerance(cal.alpha, cal.tolerance) && res.monotone_path;
    table.push(vec![
        "result".into(),
        res.a_m.into(),
        res.achieved.fdr.mean.into(),
        res.achieved.fdr.se.into(),
        res.achieved.argmax_m1.into(),
        ok.into(),
    ]);
    if let Some(seed) = config.calibration.as_ref().and_then(|c| c.verify_seed) {
        let check = sup_fdr_du(&cal, res.a_m, seed, &opts)?;
        table.push(vec![
            "verify".into(),
            check.a.into(),
            check.fdr.mean.into(),
            check.fdr.se.into(),
            check.argmax_m1.into(),
            ((check.fdr.mean - cal.alpha).abs() <= cal.tolerance).into(),
        ]);
    }
    Ok(Outcome { table, warnings })
}

/// Runs the command and returns its table.
pub fn run(config: &RunConfig) -> Result<Outcome, Error> {
    match config.command {
        Command::VerifyMoments => verify_moments(config),
        Command::FdrTable => fdr_table(config),
        Command::ConsistencySweep => sweep_table(config),
        Command::LfcCheck => lfc_table(config),
        Command::CalibrateAorc => calibration_table(config),
        Command::DiagnosticsQuotient => quotient_table(config),
    }
}

pub fn metadata(config: &RunConfig) -> Metadata {
    Metadata {
        command: config.command.name().to_string(),
        seed: config.seed,
        replicates: config.replicates,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.echo(),
    }
}

/// Runs the command, writes its table and maps the result to an exit code:
/// 0 when every check passed, 2 when one failed, 1 on error. Diagnostics go
/// to `err`; the table goes to the configured path or to `out`.
pub fn execute(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let outcome = match run(config) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    for w in &outcome.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let meta = metadata(config);
    let format = config.output.format;
    let written = match &config.output.path {
        Some(path) => emit_table(&outcome.table, &meta, format, path)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => render_table(&outcome.table, &meta, format)
            .and_then(|bytes| out.write_all(&bytes))
            .map_err(|e| format!("cannot write output: {e}")),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_ERROR;
    }
    if outcome.all_pass() {
        EXIT_OK
    } else {
        let failed = outcome.table.pass_flags().iter().filter(|&&p| !p).count();
        let _ = writeln!(err, "{failed} check(s) failed");
        EXIT_CHECK_FAILED
    }
}

