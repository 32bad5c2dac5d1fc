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

//! Replicate evaluation and parallel aggregation.
//!
//! A replicate is evaluated without sorting: each p-value at or below the
//! largest critical value is filed under its rank bucket
//! `min{i : p <= alpha_i}`, the step-up count is read off the cumulative
//! bucket counts, and leave-`j`-out counts move the replaced values into
//! bucket 1.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators;
use crate::models::ScenarioConfig;
use crate::moments::{self, BoundInputs};
use crate::procedures::ProcedureSpec;
use crate::sample::TailView;
use crate::stats::{McEstimate, Moments4};
use crate::stepup::{CriticalRule, RankHistogram};

/// Largest leave-out order tracked per replicate.
pub const MAX_LEAVE_OUT: usize = 8;

/// Replicates per batch; batches are merged in index order.
pub const BATCH_SIZE: u64 = 512;

/// Thresholds `c` of the reported masses `P(R^(1) <= c)`.
pub const R1_CUTS: [usize; 3] = [1, 5, 25];

/// Moment identity checked by paired replicate statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Identity {
    Fdr,
    Ev,
    Moment(usize),
    Deterministic(usize),
}

impl Identity {
    pub fn applies_to(&self, spec: &ProcedureSpec) -> bool {
        match self {
            Identity::Fdr | Identity::Ev | Identity::Moment(_) => spec.is_adaptive(),
            Identity::Deterministic(_) => !spec.is_adaptive(),
        }
    }

    fn order(&self) -> usize {
        match *self {
            Identity::Fdr | Identity::Ev => 1,
            Identity::Moment(k) | Identity::Deterministic(k) => k,
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identity::Fdr => write!(f, "fdr"),
            Identity::Ev => write!(f, "ev"),
            Identity::Moment(k) => write!(f, "moment_k{k}"),
            Identity::Deterministic(k) => write!(f, "deterministic_k{k}"),
        }
    }
}

impl FromStr for Identity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownIdentity(s.to_string());
        let order = |rest: &str| rest.trim_start_matches('k').parse::<usize>().map_err(|_| unknown());
        match s {
            "fdr" => Ok(Identity::Fdr),
            "ev" => Ok(Identity::Ev),
            _ => {
                if let Some(rest) = s.strip_prefix("moment_") {
                    let k = order(rest)?;
                    if (2..=MAX_LEAVE_OUT).contains(&k) {
                        return Ok(Identity::Moment(k));
                    }
                } else if let Some(rest) = s.strip_prefix("deterministic_") {
                    let k = order(rest)?;
                    if (1..=2).contains(&k) {
                        return Ok(Identity::Deterministic(k));
                    }
                }
                Err(unknown())
            }
        }
    }
}

impl Serialize for Identity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Tuning knobs that do not change the estimand.
#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    /// Worker threads; `None` uses the global pool. Output does not depend on it.
    pub workers: Option<usize>,
    /// Highest moment order whose identity is tracked for adaptive procedures.
    pub max_order: usize,
    /// Multiplies every right-hand side, to test the checker's power.
    pub fault_scale: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            workers: None,
            max_order: 4,
            fault_scale: 1.0,
        }
    }
}

impl McOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: Some(workers),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(2..=MAX_LEAVE_OUT).contains(&self.max_order) {
            return Err(Error::InvalidArgument(format!(
                "max_order={} must lie in 2..={MAX_LEAVE_OUT}",
                self.max_order
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be positive".into()));
        }
        if !self.fault_scale.is_finite() {
            return Err(Error::InvalidArgument("fault_scale must be finite".into()));
        }
        Ok(())
    }
}

/// Everything observed in one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateRecord {
    pub v: usize,
    pub r: usize,
    pub v_lambda: usize,
    pub r_lambda: usize,
    /// Floored estimate; `m` for deterministic critical values.
    pub m0_hat: f64,
    pub threshold: f64,
    r_leave: [usize; MAX_LEAVE_OUT],
    leave_len: usize,
}

impl ReplicateRecord {
    /// `R^(j)` for `j = 1..=len`.
    pub fn r_leave(&self) -> &[usize] {
        &self.r_leave[..self.leave_len]
    }

    pub fn fdp(&self) -> f64 {
        if self.r == 0 {
            0.0
        } else {
            self.v as f64 / self.r as f64
        }
    }
}

/// Reusable buffers for replicate evaluation.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    values: Vec<f64>,
    tail: Vec<f64>,
    null_buckets: Vec<usize>,
    removed: Vec<usize>,
    hist: RankHistogram,
}

/// Evaluates one replicate through the histogram path.
pub(crate) fn evaluate(
    spec: &ProcedureSpec,
    scenario: &ScenarioConfig,
    replicate: u64,
    leave_out: usize,
    ws: &mut Workspace,
) -> Result<ReplicateRecord> {
    let m = scenario.m;
    let m0 = scenario.m0();
    scenario.fill(replicate, &mut ws.values);
    let lambda = spec.lambda();

    let m0_hat = match spec {
        ProcedureSpec::AdaptiveCapped { alpha, estimator, .. } => {
            let mut tail = std::mem::take(&mut ws.tail);
            tail.clear();
            tail.extend(ws.values.iter().copied().filter(|&p| p > lambda));
            let view = TailView::from_parts(m, lambda, m - tail.len(), tail);
            let raw = estimators::estimate(estimator, &view);
            let floored = raw.map(|raw| estimators::apply_floor(raw, &view, *alpha).floored);
            ws.tail = view.into_tail_values();
            floored?
        }
        _ => m as f64,
    };
    let formula = spec.formula(m, m0_hat);

    ws.hist.reset(m);
    ws.null_buckets.clear();
    let mut v_lambda = 0;
    let mut r_lambda = 0;
    for (i, &p) in ws.values.iter().enumerate() {
        let bucket = formula.rank_of(p).unwrap_or(0);
        if bucket > 0 {
            ws.hist.add(bucket);
        }
        if p <= lambda {
            r_lambda += 1;
            if i < m0 {
                v_lambda += 1;
            }
        }
        if i < m0 {
            ws.null_buckets.push(bucket);
        }
    }
    let r = ws.hist.step_up(0, &[]);
    let v = ws.null_buckets.iter().filter(|&&b| b > 0 && b <= r).count();
    let threshold = if r > 0 { formula.alpha(r) } else { 0.0 };

    let mut record = ReplicateRecord {
        v,
        r,
        v_lambda,
        r_lambda,
        m0_hat,
        threshold,
        r_leave: [0; MAX_LEAVE_OUT],
        leave_len: leave_out.min(m0),
    };
    // the first `j` nulls at or below lambda, with the convention that
    // fewer candidates leave the remaining replacements out
    ws.removed.clear();
    let mut zeros = 0;
    let mut next = 0;
    for j in 1..=record.leave_len {
        while next < m0 && ws.values[next] > lambda {
            next += 1;
        }
        if next < m0 {
            zeros += 1;
            let bucket = ws.null_buckets[next];
            if bucket > 0 {
                let at = ws.removed.partition_point(|&b| b <= bucket);
                ws.removed.insert(at, bucket);
            }
            next += 1;
        }
        record.r_leave[j - 1] = ws.hist.step_up(zeros, &ws.removed);
    }
    debug_assert!(
        r_lambda >= v_lambda && (r == 0 || record.threshold > 0.0),
        "inconsistent replicate"
    );
    Ok(record)
}

/// Evaluates a single replicate; allocates fresh buffers.
pub fn replicate_record(
    spec: &ProcedureSpec,
    scenario: &ScenarioConfig,
    replicate: u64,
    leave_out: usize,
) -> Result<ReplicateRecord> {
    if leave_out > MAX_LEAVE_OUT {
        return Err(Error::InvalidArgument(format!(
            "leave_out={leave_out} exceeds {MAX_LEAVE_OUT}"
        )));
    }
    evaluate(spec, scenario, replicate, leave_out, &mut Workspace::default())
}

/// Streaming sums of the two sides of an identity and their difference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairAccumulator {
    pub lhs: Moments4,
    pub rhs: Moments4,
    pub diff: Moments4,
}

impl PairAccumulator {
    fn push(&mut self, lhs: f64, rhs: f64) {
        self.lhs.push(lhs);
        self.rhs.push(rhs);
        self.diff.push(lhs - rhs);
    }

    fn merge(&mut self, other: &Self) {
        self.lhs.merge(&other.lhs);
        self.rhs.merge(&other.rhs);
        self.diff.merge(&other.diff);
    }
}

/// Aggregated replicate statistics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub m: usize,
    pub m0: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub fdp: Moments4,
    pub v: Moments4,
    pub r: Moments4,
    pub v_lambda: Moments4,
    pub m0hat_over_m: Moments4,
    /// `V(lambda) / m0_hat`.
    pub x: Moments4,
    /// `V(lambda) / (m0_hat R^(1))`, 0 when `V(lambda) = 0`.
    pub x_over_r1: Moments4,
    pub v_lambda_over_m0hat_sq: Moments4,
    pub threshold: Moments4,
    pub v_zero: Moments4,
    /// Indicator of `m0_hat / m0 <= 0.9`.
    pub underestimate: Moments4,
    /// Indicators of `R^(1) <= c` for `c` in [`R1_CUTS`].
    pub r1_le: [Moments4; 3],
    pub identities: Vec<(Identity, PairAccumulator)>,
    /// `(a/m)(R^(2) - R^(1))`, quotient family only.
    pub quotient_spread: Moments4,
    /// `(m + b - a R^(1)) / m0`, quotient family only.
    pub quotient_denominator: Moments4,
}

impl McSummary {
    fn empty(spec: &ProcedureSpec, scenario: &ScenarioConfig, identities: &[Identity]) -> Self {
        Self {
            m: scenario.m,
            m0: scenario.m0(),
            alpha: spec.alpha(),
            lambda: spec.lambda(),
            fdp: Moments4::new(),
            v: Moments4::new(),
            r: Moments4::new(),
            v_lambda: Moments4::new(),
            m0hat_over_m: Moments4::new(),
            x: Moments4::new(),
            x_over_r1: Moments4::new(),
            v_lambda_over_m0hat_sq: Moments4::new(),
            threshold: Moments4::new(),
            v_zero: Moments4::new(),
            underestimate: Moments4::new(),
            r1_le: [Moments4::new(); 3],
            identities: identities.iter().map(|&id| (id, PairAccumulator::default())).collect(),
            quotient_spread: Moments4::new(),
            quotient_denominator: Moments4::new(),
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in [
            (&mut self.fdp, &other.fdp),
            (&mut self.v, &other.v),
            (&mut self.r, &other.r),
            (&mut self.v_lambda, &other.v_lambda),
            (&mut self.m0hat_over_m, &other.m0hat_over_m),
            (&mut self.x, &other.x),
            (&mut self.x_over_r1, &other.x_over_r1),
            (&mut self.v_lambda_over_m0hat_sq, &other.v_lambda_over_m0hat_sq),
            (&mut self.threshold, &other.threshold),
            (&mut self.v_zero, &other.v_zero),
            (&mut self.underestimate, &other.underestimate),
            (&mut self.quotient_spread, &other.quotient_spread),
            (&mut self.quotient_denominator, &other.quotient_denominator),
        ] {
            a.merge(b);
        }
        for (a, b) in self.r1_le.iter_mut().zip(&other.r1_le) {
            a.merge(b);
        }
        for ((_, a), (_, b)) in self.identities.iter_mut().zip(&other.identities) {
            a.merge(b);
        }
    }

    pub fn replicates(&self) -> u64 {
        self.fdp.n()
    }

    pub fn fdr(&self) -> McEstimate {
        self.fdp.mean_estimate()
    }

    pub fn var_fdp(&self) -> McEstimate {
        self.fdp.variance_estimate()
    }

    pub fn p_v0(&self) -> McEstimate {
        self.v_zero.mean_estimate()
    }

    pub fn mean_r(&self) -> McEstimate {
        self.r.mean_estimate()
    }

    pub fn identity(&self, id: Identity) -> Option<&PairAccumulator> {
        self.identities.iter().find(|(i, _)| *i == id).map(|(_, acc)| acc)
    }

    /// Inputs of the variance bounds, all from this replicate set.
    pub fn bound_inputs(&self) -> BoundInputs {
        BoundInputs {
            var_fdp: Some(self.var_fdp()),
            x_over_r1: Some(self.x_over_r1.mean_estimate()),
            var_x: Some(self.x.variance_estimate()),
            v_lambda_over_m0hat_sq: Some(self.v_lambda_over_m0hat_sq.mean_estimate()),
        }
    }
}

/// Identities tracked for `spec` under `options`.
pub fn identities_for(spec: &ProcedureSpec, options: &McOptions) -> Vec<Identity> {
    if spec.is_adaptive() {
        let mut ids = vec![Identity::Fdr, Identity::Ev];
        ids.extend((2..=options.max_order).map(Identity::Moment));
        ids
    } else {
        vec![Identity::Deterministic(1), Identity::Deterministic(2)]
    }
}

struct Pusher<'a> {
    spec: &'a ProcedureSpec,
    c_rows: Vec<Vec<f64>>,
    fault: f64,
}

impl Pusher<'_> {
    fn push(&self, acc: &mut McSummary, rec: &ReplicateRecord) {
        let m = acc.m as f64;
        let m0 = acc.m0;
        let q = acc.alpha / acc.lambda;
        let fdp = rec.fdp();
        let x = rec.v_lambda as f64 / rec.m0_hat;
        let r1 = rec.r_leave().first().copied();

        acc.fdp.push(fdp);
        acc.v.push(rec.v as f64);
        acc.r.push(rec.r as f64);
        acc.v_lambda.push(rec.v_lambda as f64);
        acc.m0hat_over_m.push(rec.m0_hat / m);
        acc.x.push(x);
        acc.x_over_r1.push(match r1 {
            Some(r1) if rec.v_lambda > 0 => x / r1 as f64,
            _ => 0.0,
        });
        acc.v_lambda_over_m0hat_sq.push(rec.v_lambda as f64 / (rec.m0_hat * rec.m0_hat));
        acc.threshold.push(rec.threshold);
        acc.v_zero.push(indicator(rec.v == 0));
        acc.underestimate.push(indicator(rec.m0_hat / m0 as f64 <= 0.9));
        if let Some(r1) = r1 {
            for (cut, slot) in R1_CUTS.iter().zip(acc.r1_le.iter_mut()) {
                slot.push(indicator(r1 <= *cut));
            }
        }
        if let ProcedureSpec::Quotient { a, b, .. } = *self.spec {
            let r = rec.r_leave();
            if let Some(&r1) = r.first() {
                let r2 = r.get(1).copied().unwrap_or(r1);
                acc.quotient_spread.push(a / m * (r2 as f64 - r1 as f64));
                acc.quotient_denominator.push((m + b - a * r1 as f64) / m0 as f64);
            }
        }

        let formula = self.spec.formula(acc.m, rec.m0_hat);
        for (id, pair) in acc.identities.iter_mut() {
            let (lhs, rhs) = match *id {
                Identity::Fdr => (fdp, q * x),
                Identity::Ev => (
                    rec.v as f64,
                    if rec.v_lambda == 0 {
                        0.0
                    } else {
                        q * x * rec.r_leave()[0] as f64
                    },
                ),
                Identity::Moment(k) => (
                    fdp.powi(k as i32),
                    moments::moment_rhs(q, rec.m0_hat, rec.v_lambda, rec.r_leave(), &self.c_rows[k]),
                ),
                Identity::Deterministic(k) => {
                    let r = rec.r_leave();
                    let r2 = (k == 2).then(|| r.get(1).copied().unwrap_or(r[0]));
                    (fdp.powi(k as i32), moments::deterministic_rhs(&formula, m0, r[0], r2))
                }
            };
            pair.push(lhs, rhs * self.fault);
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Runs `f` over consecutive replicate batches and returns the batch results
/// in index order; the split does not depend on the worker count.
pub(crate) fn run_batches<T, F>(replicates: u64, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync,
{
    let batches: Vec<Range<u64>> = (0..replicates.div_ceil(BATCH_SIZE))
        .map(|b| b * BATCH_SIZE..((b + 1) * BATCH_SIZE).min(replicates))
        .collect();
    let work = || batches.par_iter().cloned().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} workers: {e}")))?
            .install(work),
    }
}

/// Monte-Carlo run of `spec` on `scenario`.
pub fn run_mc(
    scenario: &ScenarioConfig,
    spec: &ProcedureSpec,
    replicates: u64,
    options: &McOptions,
) -> Result<McSummary> {
    scenario.validate()?;
    spec.validate()?;
    options.validate()?;
    if replicates < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    let identities = identities_for(spec, options);
    let leave_out = identities.iter().map(Identity::order).max().unwrap_or(1).max(2);
    let pusher = Pusher {
        spec,
        c_rows: (0..=options.max_order)
            .map(|k| if k == 0 { Ok(Vec::new()) } else { moments::c_row(k) })
            .collect::<Result<_>>()?,
        fault: options.fault_scale,
    };
    let parts = run_batches(replicates, options.workers, |range| {
        let mut ws = Workspace::default();
        let mut acc = McSummary::empty(spec, scenario, &identities);
        for rep in range {
            let rec = evaluate(spec, scenario, rep, leave_out, &mut ws)?;
            pusher.push(&mut acc, &rec);
        }
        Ok(acc)
    })?;
    let mut total = McSummary::empty(spec, scenario, &identities);
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorSpec;
    use crate::models::{sample_scenario, AltModel};
    use crate::moments::r_leave_j;
    use crate::procedures::run_procedure;

    fn procedures() -> Vec<ProcedureSpec> {
        vec![
            ProcedureSpec::Bh { alpha: 0.1 },
            ProcedureSpec::storey(0.1, 0.5),
            ProcedureSpec::AdaptiveCapped {
                alpha: 0.2,
                lambda: 0.5,
                estimator: EstimatorSpec::combination(vec![0.5, 0.75, 1.0], vec![1.0 / 3.0, 2.0 / 3.0]),
            },
            ProcedureSpec::AdaptiveCapped {
                alpha: 0.05,
                lambda: 0.4,
                estimator: EstimatorSpec::IntervalCombination {
                    grid: vec![0.4, 0.6, 0.8, 1.0],
                    weights: estimators::WeightRule::TailAdaptive,
                },
            },
            ProcedureSpec::Quotient { alpha: 0.1, a: 0.5, b: 1.0 },
        ]
    }

    #[test]
    fn histogram_path_matches_reference() {
        let alts = [
            AltModel::du(),
            AltModel::MinUniform { x0: 1.0 / 6.0 },
            AltModel::Uniform { b: 0.5 },
        ];
        for spec in procedures() {
            for alt in &alts {
                for (m, m1) in [(7, 2), (40, 10), (120, 90)] {
                    let sc = ScenarioConfig::new(m, m1, alt.clone(), 17).unwrap();
                    for rep in 0..40 {
                        let fast = replicate_record(&spec, &sc, rep, 4).unwrap();
                        let sample = sample_scenario(&sc, rep);
                        let slow = run_procedure(&spec, &sample).unwrap();
                        assert_eq!((fast.r, fast.v), (slow.r, slow.v), "{} rep {rep}", spec.label());
                        assert_eq!(fast.threshold, slow.threshold);
                        assert_eq!(fast.m0_hat, slow.m0_hat.unwrap_or(m as f64));
                        assert_eq!(fast.v_lambda, sample.null_count_le(spec.lambda()));
                        for j in 1..=4 {
                            assert_eq!(fast.r_leave()[j - 1], r_leave_j(&spec, &sample, j).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn identity_names_round_trip() {
        for id in [
            Identity::Fdr,
            Identity::Ev,
            Identity::Moment(3),
            Identity::Deterministic(2),
        ] {
            assert_eq!(id.to_string().parse::<Identity>().unwrap(), id);
        }
        assert!("moment_k9".parse::<Identity>().is_err());
        assert!("deterministic_k3".parse::<Identity>().is_err());
        assert!("variance".parse::<Identity>().is_err());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let sc = ScenarioConfig::new(60, 20, AltModel::Uniform { b: 0.5 }, 3).unwrap();
        let spec = ProcedureSpec::storey(0.1, 0.5);
        let a = run_mc(&sc, &spec, 3000, &McOptions::with_workers(1)).unwrap();
        let b = run_mc(&sc, &spec, 3000, &McOptions::with_workers(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bh_fdr_under_du() {
        let sc = ScenarioConfig::new(100, 50, AltModel::du(), 11).unwrap();
        let s = run_mc(&sc, &ProcedureSpec::Bh { alpha: 0.1 }, 20_000, &McOptions::default()).unwrap();
        assert!(s.fdr().within(0.05, 4.0), "{:?}", s.fdr());
        let all_null = ScenarioConfig::new(30, 0, AltModel::du(), 11).unwrap();
        let s = run_mc(&all_null, &ProcedureSpec::Bh { alpha: 0.1 }, 20_000, &McOptions::default()).unwrap();
        assert!(s.fdr().within(0.1, 4.0), "{:?}", s.fdr());
        assert_eq!(s.replicates(), 20_000);
    }

    #[test]
    fn rejects_bad_options() {
        let sc = ScenarioConfig::new(10, 2, AltModel::du(), 0).unwrap();
        let spec = ProcedureSpec::Bh { alpha: 0.1 };
        assert!(run_mc(&sc, &spec, 1, &McOptions::default()).is_err());
        let opts = McOptions {
            max_order: 9,
            ..McOptions::default()
        };
        assert!(run_mc(&sc, &spec, 100, &opts).is_err());
    }
}
