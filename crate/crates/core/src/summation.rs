//! Order-independent floating-point reductions.
//!
//! [`ExactSum`] keeps a non-overlapping expansion of the running total
//! (Shewchuk's partials), so the rounded result is the correctly rounded
//! value of the exact real sum. Totals do not depend on the order in which
//! values are added or on how a parallel reduction is partitioned, which is
//! what makes oracle means reproducible across thread counts.

use rayon::prelude::*;

/// Exact accumulator for `f64` values.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let mut x = value;
        let mut kept = 0;
        for i in 0..self.partials.len() {
            let mut y = self.partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// Folds another accumulator in without rounding.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded total.
    pub fn value(&self) -> f64 {
        let mut n = self.partials.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = self.partials[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = self.partials[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even correction when the remaining tail decides the tie.
        if n > 0 && ((lo < 0.0 && self.partials[n - 1] < 0.0) || (lo > 0.0 && self.partials[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        acc.extend(iter);
        acc
    }
}

/// Exact sum of a slice, reduced in parallel.
pub fn exact_sum(values: &[f64]) -> f64 {
    par_exact(values.par_iter().copied()).value()
}

/// Parallel exact reduction of an indexed stream of values.
pub fn par_exact<I>(iter: I) -> ExactSum
where
    I: ParallelIterator<Item = f64>,
{
    iter.fold(ExactSum::new, |mut acc, v| {
        acc.add(v);
        acc
    })
    .reduce(ExactSum::new, |mut a, b| {
        a.merge(&b);
        a
    })
}

const PAIRWISE_BLOCK: usize = 128;

/// Pairwise (cascade) summation with a fixed split pattern.
///
/// Deterministic for a given slice; error grows as O(log n) ulps.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean and sample standard deviation, both from exact sums.
///
/// Returns `None` for an empty slice; the SD is 0 for a single value.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = exact_sum(values) / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let ss = par_exact(values.par_iter().map(|v| (v - mean) * (v - mean))).value();
    Some((mean, (ss / (n - 1) as f64).sqrt()))
}
