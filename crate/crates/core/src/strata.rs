//! Principal strata and oracle stratum effects.
//!
//! Oracle quantities use both potential outcomes of every subject, which only
//! a simulation can provide. All means come from exact summation, so they are
//! invariant to record order and to the rayon pool size.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::datagen::SubjectRecord;
use crate::summation::{mean_sd, par_exact, ExactSum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrataError {
    #[error("empty stratum {0}")]
    EmptyStratum(StratumLabel),
    #[error("n_bins must be >= 2 (got {0})")]
    TooFewBins(usize),
    #[error("stratum {label} has {members} members, fewer than {bins} bins")]
    TooFewMembers { label: StratumLabel, members: usize, bins: usize },
}

/// Requirement on one arm's overall adherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Requirement {
    NonAdherent,
    Adherent,
    Any,
}

impl Requirement {
    fn admits(self, adhered: bool) -> bool {
        match self {
            Requirement::NonAdherent => !adhered,
            Requirement::Adherent => adhered,
            Requirement::Any => true,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Requirement::NonAdherent => "minus",
            Requirement::Adherent => "plus",
            Requirement::Any => "star",
        }
    }
}

/// A principal stratum defined over `(A(0), A(1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StratumLabel {
    pub req0: Requirement,
    pub req1: Requirement,
}

impl StratumLabel {
    /// Adheres under both arms.
    pub const PLUS_PLUS: StratumLabel = StratumLabel { req0: Requirement::Adherent, req1: Requirement::Adherent };
    /// Adheres under the experimental arm, whatever happens under control.
    pub const STAR_PLUS: StratumLabel = StratumLabel { req0: Requirement::Any, req1: Requirement::Adherent };
    /// Adheres under control.
    pub const PLUS_STAR: StratumLabel = StratumLabel { req0: Requirement::Adherent, req1: Requirement::Any };
    pub const EVERYONE: StratumLabel = StratumLabel { req0: Requirement::Any, req1: Requirement::Any };

    pub fn admits(&self, a: [bool; 2]) -> bool {
        self.req0.admits(a[0]) && self.req1.admits(a[1])
    }

    pub fn name(&self) -> String {
        format!("S_{}_{}", self.req0.symbol(), self.req1.symbol())
    }
}

impl fmt::Display for StratumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Point value, standard error and membership count of a stratum effect.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    pub value: f64,
    pub se: f64,
    pub n_members: usize,
    pub stratum: StratumLabel,
}

impl EffectEstimate {
    /// `|value - target| <= z * se`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.se
    }
}

pub fn classify(record: &SubjectRecord, label: StratumLabel) -> bool {
    label.admits(record.a)
}

fn member_effects(records: &[SubjectRecord], label: StratumLabel) -> Vec<f64> {
    records.par_iter().filter(|r| classify(r, label)).map(SubjectRecord::effect).collect()
}

/// Mean of `y(1) - y(0)` over stratum members, with the paired SE
/// `sd / sqrt(n_members)`.
pub fn oracle_effect(records: &[SubjectRecord], label: StratumLabel) -> Result<EffectEstimate, StrataError> {
    let d = member_effects(records, label);
    let (value, sd) = mean_sd(&d).ok_or(StrataError::EmptyStratum(label))?;
    Ok(EffectEstimate { value, se: sd / (d.len() as f64).sqrt(), n_members: d.len(), stratum: label })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinSummary {
    pub n: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub mean: f64,
}

/// Direct stratum mean versus the membership-weighted average of
/// within-X-bin means.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Paired SE of `lhs`.
    pub se: f64,
    pub bins: Vec<BinSummary>,
}

pub const DEFAULT_TOWER_BINS: usize = 20;

/// Iterated-expectation check over equal-frequency X bins of the stratum.
///
/// Members are ordered by `(x, id)` and cut into `n_bins` contiguous groups
/// whose sizes differ by at most one. Each bin's total is kept as an exact
/// expansion; the weighted combination `sum_b (n_b / N) * (S_b / n_b)` is
/// therefore evaluated without intermediate rounding and lands on the same
/// double as the direct mean.
pub fn tower_check(records: &[SubjectRecord], label: StratumLabel, n_bins: usize) -> Result<TowerCheck, StrataError> {
    if n_bins < 2 {
        return Err(StrataError::TooFewBins(n_bins));
    }
    let mut members: Vec<(f64, u64, f64)> =
        records.par_iter().filter(|r| classify(r, label)).map(|r| (r.x, r.id, r.effect())).collect();
    if members.is_empty() {
        return Err(StrataError::EmptyStratum(label));
    }
    if members.len() < n_bins {
        return Err(StrataError::TooFewMembers { label, members: members.len(), bins: n_bins });
    }
    members.par_sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let total_n = members.len();
    let diffs: Vec<f64> = members.iter().map(|m| m.2).collect();
    let (lhs, sd) = mean_sd(&diffs).expect("non-empty");

    let mut combined = ExactSum::new();
    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let lo = b * total_n / n_bins;
        let hi = (b + 1) * total_n / n_bins;
        let slice = &members[lo..hi];
        let bin_sum = par_exact(slice.par_iter().map(|m| m.2));
        let n_b = slice.len();
        bins.push(BinSummary { n: n_b, x_lo: slice[0].0, x_hi: slice[n_b - 1].0, mean: bin_sum.value() / n_b as f64 });
        combined.merge(&bin_sum);
    }
    let rhs = combined.value() / total_n as f64;
    Ok(TowerCheck { lhs, rhs, se: sd / (total_n as f64).sqrt(), bins })
}

/// Selection shifts of each arm's mean outcome when conditioning on `A(1) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub mean_y1_given_a1: f64,
    pub mean_y0_given_a1: f64,
    pub mean_y1: f64,
    pub mean_y0: f64,
    pub n: usize,
    pub n_members: usize,
    /// SE of `shift_arm1() - shift_arm0()`.
    pub gap_se: f64,
}

impl BiasReport {
    pub fn shift_arm1(&self) -> f64 {
        self.mean_y1_given_a1 - self.mean_y1
    }

    pub fn shift_arm0(&self) -> f64 {
        self.mean_y0_given_a1 - self.mean_y0
    }

    pub fn shift_gap(&self) -> f64 {
        self.shift_arm1() - self.shift_arm0()
    }
}

pub fn bias_decomposition(records: &[SubjectRecord]) -> Result<BiasReport, StrataError> {
    let label = StratumLabel::STAR_PLUS;
    let n = records.len();
    let mean = |f: &(dyn Fn(&SubjectRecord) -> Option<f64> + Sync)| -> (f64, usize) {
        let vals: Vec<f64> = records.par_iter().filter_map(f).collect();
        let m = par_exact(vals.par_iter().copied()).value() / vals.len() as f64;
        (m, vals.len())
    };
    let (mean_y1_given_a1, n_members) = mean(&|r| classify(r, label).then_some(r.y[1]));
    if n_members == 0 {
        return Err(StrataError::EmptyStratum(label));
    }
    let (mean_y0_given_a1, _) = mean(&|r| classify(r, label).then_some(r.y[0]));
    let (mean_y1, _) = mean(&|r| Some(r.y[1]));
    let (mean_y0, _) = mean(&|r| Some(r.y[0]));

    // Influence-function SE for (mean d | member) - (mean d).
    let share = n_members as f64 / n as f64;
    let d_member = mean_y1_given_a1 - mean_y0_given_a1;
    let d_all = mean_y1 - mean_y0;
    let psi: Vec<f64> = records
        .par_iter()
        .map(|r| {
            let d = r.effect();
            let sel = if classify(r, label) { (d - d_member) / share } else { 0.0 };
            sel - (d - d_all)
        })
        .collect();
    let (_, sd) = mean_sd(&psi).expect("non-empty");
    Ok(BiasReport {
        mean_y1_given_a1,
        mean_y0_given_a1,
        mean_y1,
        mean_y0,
        n,
        n_members,
        gap_se: sd / (n as f64).sqrt(),
    })
}
