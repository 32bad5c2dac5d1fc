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

//! Randomized invariants of the step-up engine, estimators and procedures.

use fdp_lab::estimators::{estimate, EstimatorSpec, WeightRule};
use fdp_lab::moments::{deterministic_moment_pair, leave_j_out, paired_fdr, paired_moment_k, r_leave_j};
use fdp_lab::procedures::{
    aorc_critical_value, estimate_m0, quotient_critical_values, run_procedure, run_unfloored, ProcedureSpec,
};
use fdp_lab::sample::{sort_pvalues, PValueSample, TailView};
use fdp_lab::stepup::{step_up, step_up_count, CriticalRule, CriticalValues, Provenance};
use proptest::prelude::*;

fn pvalue() -> impl Strategy<Value = f64> {
    prop_oneof![
        3 => 0.0..=1.0f64,
        1 => prop::sample::select(vec![0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 1.0]),
    ]
}

/// Values with labels, at least one true null.
fn sample(max_m: usize) -> impl Strategy<Value = PValueSample> {
    prop::collection::vec((pvalue(), any::<bool>()), 1..=max_m).prop_map(|mut pairs| {
        pairs[0].1 = true;
        let (values, nulls): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
        PValueSample::new(values, nulls).unwrap()
    })
}

fn critical(m: usize) -> impl Strategy<Value = CriticalValues> {
    prop::collection::vec(0.001..0.999f64, m).prop_map(|mut a| {
        a.sort_by(f64::total_cmp);
        CriticalValues::new(a, Provenance::Custom).unwrap()
    })
}

fn sample_and_critical(max_m: usize) -> impl Strategy<Value = (PValueSample, CriticalValues)> {
    sample(max_m).prop_flat_map(|s| {
        let m = s.m();
        (Just(s), critical(m))
    })
}

fn sorted(s: &PValueSample) -> Vec<f64> {
    sort_pvalues(s).iter().map(|&i| s.values()[i]).collect()
}

fn adaptive_procedures() -> impl Strategy<Value = ProcedureSpec> {
    prop_oneof![
        Just(ProcedureSpec::storey(0.1, 0.5)),
        Just(ProcedureSpec::storey(0.25, 0.6)),
        Just(ProcedureSpec::AdaptiveCapped {
            alpha: 0.1,
            lambda: 0.5,
            estimator: EstimatorSpec::combination(vec![0.5, 0.75, 1.0], vec![1.0 / 3.0, 2.0 / 3.0]),
        }),
        Just(ProcedureSpec::AdaptiveCapped {
            alpha: 0.05,
            lambda: 0.4,
            estimator: EstimatorSpec::IntervalCombination {
                grid: vec![0.4, 0.6, 0.8, 0.9, 1.0],
                weights: WeightRule::TailAdaptive,
            },
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn step_up_fixed_point((s, c) in sample_and_critical(40)) {
        let p = sorted(&s);
        let r = step_up_count(&p, &c).unwrap();
        if r > 0 {
            prop_assert!(p[r - 1] <= c.alpha(r));
        }
        for j in r + 1..=s.m() {
            prop_assert!(p[j - 1] > c.alpha(j));
        }
        let out = step_up(&s, &c).unwrap();
        prop_assert!(out.v <= out.r.min(s.m0()));
        prop_assert_eq!(out.rejected.len(), out.r);
        let expected: Vec<usize> = (0..s.m()).filter(|&i| out.r > 0 && s.values()[i] <= out.threshold).collect();
        prop_assert_eq!(&out.rejected, &expected);
    }

    #[test]
    fn brute_force_small_m((s, c) in sample_and_critical(8)) {
        let p = sorted(&s);
        let brute = (1..=s.m()).filter(|&i| p[i - 1] <= c.alpha(i)).max().unwrap_or(0);
        prop_assert_eq!(step_up_count(&p, &c).unwrap(), brute);
    }

    #[test]
    fn larger_critical_values_reject_more((s, c) in sample_and_critical(30), bumps in prop::collection::vec(0.0..0.5f64, 30)) {
        let raised: Vec<f64> = c.alphas().iter().zip(&bumps).map(|(a, b)| (a + b).min(0.999)).collect();
        let mut mono = raised.clone();
        for i in 1..mono.len() {
            mono[i] = mono[i].max(mono[i - 1]);
        }
        let c2 = CriticalValues::new(mono, Provenance::Custom).unwrap();
        let p = sorted(&s);
        prop_assert!(step_up_count(&p, &c2).unwrap() >= step_up_count(&p, &c).unwrap());
    }

    #[test]
    fn smaller_pvalue_rejects_more((s, c) in sample_and_critical(30), idx in any::<prop::sample::Index>(), u in 0.0..=1.0f64) {
        let i = idx.index(s.m());
        let lowered = s.with_value(i, s.values()[i] * u).unwrap();
        prop_assert!(step_up(&lowered, &c).unwrap().r >= step_up(&s, &c).unwrap().r);
    }

    #[test]
    fn ties_do_not_matter((s, c) in sample_and_critical(20), seed in any::<u64>()) {
        // reverse-and-rotate permutation; ties change their index order
        let m = s.m();
        let perm: Vec<usize> = (0..m).map(|k| (m - 1 - k + seed as usize % m) % m).collect();
        let values: Vec<f64> = perm.iter().map(|&i| s.values()[i]).collect();
        let nulls: Vec<bool> = perm.iter().map(|&i| s.is_null()[i]).collect();
        let t = PValueSample::new(values, nulls).unwrap();
        let a = step_up(&s, &c).unwrap();
        let b = step_up(&t, &c).unwrap();
        prop_assert_eq!((a.r, a.v), (b.r, b.v));
        let mut back: Vec<usize> = b.rejected.iter().map(|&k| perm[k]).collect();
        back.sort_unstable();
        prop_assert_eq!(a.rejected, back);
    }

    #[test]
    fn tail_view_reconstructs_ecdf(s in sample(60), lambda in 0.05..0.95f64, ts in prop::collection::vec(0.0..=1.0f64, 100)) {
        let view = TailView::from_sample(&s, lambda).unwrap();
        prop_assert_eq!(view.r_lambda() + view.tail_values().len(), s.m());
        for t in ts {
            let t = lambda + (1.0 - lambda) * t;
            prop_assert_eq!(view.count_le(t), Some(s.count_le(t)));
        }
        prop_assert_eq!(view.count_le(1.0), Some(s.m()));
    }

    #[test]
    fn estimators_positive_and_bounded(s in sample(60), proc_ in adaptive_procedures()) {
        let est = proc_.estimator().unwrap();
        let view = TailView::from_sample(&s, proc_.lambda()).unwrap();
        let value = estimate(est, &view).unwrap();
        prop_assert!(value > 0.0);
        if matches!(est, EstimatorSpec::IntervalCombination { .. }) {
            prop_assert!(value <= est.a3_constant(proc_.lambda()) * s.m() as f64 + 1e-9);
        }
    }

    #[test]
    fn estimator_ignores_values_below_lambda(s in sample(40), proc_ in adaptive_procedures(), u in 0.0..=1.0f64) {
        let lambda = proc_.lambda();
        let est = proc_.estimator().unwrap();
        let moved: Vec<f64> = s.values().iter().map(|&p| if p <= lambda { lambda * u } else { p }).collect();
        let t = PValueSample::new(moved, s.is_null().to_vec()).unwrap();
        let a = estimate(est, &TailView::from_sample(&s, lambda).unwrap()).unwrap();
        let b = estimate(est, &TailView::from_sample(&t, lambda).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn storey_as_combination(s in sample(60), cuts in prop::collection::btree_set(1u32..99, 1..5)) {
        let lambda = 0.5;
        let mut grid = vec![lambda];
        grid.extend(cuts.iter().map(|&c| lambda + (1.0 - lambda) * c as f64 / 100.0));
        grid.push(1.0);
        let k = grid.len() - 1;
        let beta: Vec<f64> = grid.windows(2).map(|w| (w[1] - w[0]) / (1.0 - lambda)).collect();
        let view = TailView::from_sample(&s, lambda).unwrap();
        let combined = estimate(&EstimatorSpec::combination(grid, beta), &view).unwrap();
        let m = s.m() as f64;
        let tail = view.tail_values().len() as f64;
        let storey_k = m * (tail / m + k as f64 / m) / (1.0 - lambda);
        prop_assert!((combined - storey_k).abs() <= 1e-10 * storey_k.max(1.0));
    }

    #[test]
    fn floor_does_not_change_rejections(s in sample(50), proc_ in adaptive_procedures()) {
        let a = run_procedure(&proc_, &s).unwrap();
        let b = run_unfloored(&proc_, &s).unwrap();
        prop_assert_eq!((a.r, a.v, &a.rejected), (b.r, b.v, &b.rejected));
        prop_assert!(a.threshold <= proc_.lambda());
    }

    #[test]
    fn adaptive_rejections_monotone(s in sample(50), proc_ in adaptive_procedures(), idx in any::<prop::sample::Index>(), u in 0.0..=1.0f64) {
        let i = idx.index(s.m());
        let lowered = s.with_value(i, s.values()[i] * u).unwrap();
        prop_assert!(run_procedure(&proc_, &lowered).unwrap().r >= run_procedure(&proc_, &s).unwrap().r);
    }

    #[test]
    fn leave_out_keeps_tail_and_grows_r(s in sample(40), proc_ in adaptive_procedures()) {
        let lambda = proc_.lambda();
        let base = estimate_m0(&proc_, &s).unwrap().unwrap();
        let v_lambda = s.null_count_le(lambda);
        let mut prev = run_procedure(&proc_, &s).unwrap().r;
        for j in 1..=s.m0().min(4) {
            let t = leave_j_out(&s, j, lambda).unwrap();
            prop_assert_eq!(estimate_m0(&proc_, &t).unwrap().unwrap(), base);
            prop_assert_eq!(t.null_count_le(lambda), v_lambda);
            prop_assert_eq!(t.count_le(lambda), s.count_le(lambda));
            let r = r_leave_j(&proc_, &s, j).unwrap();
            prop_assert!(r >= prev);
            if v_lambda >= j {
                prop_assert!(r >= j);
            }
            prev = r;
        }
    }

    #[test]
    fn quotient_reaches_aorc(m in 2usize..400, alpha in 0.01..0.5f64) {
        // b = 0, a = 1 - alpha is rejected as a procedure; compare values only
        let a = 1.0 - alpha;
        for i in 1..m {
            let q = i as f64 * alpha / (m as f64 - a * i as f64);
            prop_assert!((q - aorc_critical_value(i, m, alpha)).abs() <= 1e-12);
        }
        prop_assert!(quotient_critical_values(m, alpha, a, 0.0).is_err());
    }

    #[test]
    fn first_moment_matches_fdr_pair(s in sample(40), proc_ in adaptive_procedures()) {
        let a = paired_moment_k(&proc_, &s, 1).unwrap();
        let b = paired_fdr(&proc_, &s).unwrap();
        prop_assert!((a.lhs - b.lhs).abs() <= 1e-12);
        prop_assert!((a.rhs - b.rhs).abs() <= 1e-12 * b.rhs.abs().max(1.0));
    }

    #[test]
    fn bh_all_null_rhs_is_alpha(values in prop::collection::vec(0.0..=1.0f64, 1..60), alpha in 0.01..0.5f64) {
        let s = PValueSample::from_blocks(&values, &[]).unwrap();
        let pair = deterministic_moment_pair(&ProcedureSpec::Bh { alpha }, &s, 1).unwrap();
        prop_assert!((pair.rhs - alpha).abs() <= 1e-12);
    }
}
