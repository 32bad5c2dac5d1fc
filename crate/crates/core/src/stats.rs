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

//! Streaming moment accumulators and Monte-Carlo estimates.

use serde::Serialize;

/// Running count, mean and central sums of powers 2..=4.
///
/// Updates and merges follow the one-pass formulas of Pébay (2008), so a
/// batch split yields the same values as a single pass up to rounding.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments4 {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments4 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn merge(&mut self, other: &Moments4) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += other.n;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 below two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    pub fn central_moment(&self, order: u32) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        match order {
            0 => 1.0,
            1 => 0.0,
            2 => self.m2 / n,
            3 => self.m3 / n,
            4 => self.m4 / n,
            _ => panic!("central moments are tracked up to order 4"),
        }
    }

    /// Estimate of the population mean with its standard error.
    pub fn mean_estimate(&self) -> McEstimate {
        let variance = self.variance();
        McEstimate {
            mean: self.mean,
            variance,
            se: (variance / self.n.max(1) as f64).sqrt(),
            n: self.n,
        }
    }

    /// Estimate of the population variance; the standard error uses the
    /// fourth central moment, `sqrt((mu4 - sigma^4) / n)`.
    pub fn variance_estimate(&self) -> McEstimate {
        let s2 = self.central_moment(2);
        let spread = (self.central_moment(4) - s2 * s2).max(0.0);
        McEstimate {
            mean: self.variance(),
            variance: spread,
            se: (spread / self.n.max(1) as f64).sqrt(),
            n: self.n,
        }
    }
}

/// A Monte-Carlo point estimate: `mean` is the estimated quantity, `variance`
/// the per-replicate spread behind `se`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub n: u64,
}

impl McEstimate {
    /// Exact value with zero standard error.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            variance: 0.0,
            se: 0.0,
            n: 0,
        }
    }

    /// `|mean - target| <= k * se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Standard error of a sum or difference of two estimates treated as independent.
pub fn combined_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}
