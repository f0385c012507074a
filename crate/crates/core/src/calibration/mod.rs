//! Observed-data estimators of the `{A(1) = 1}` stratum effect and the
//! random-split null calibration.
//!
//! Estimators see only [`ObservedRecord`]s. Internally they work on
//! [`Unit`]s, a record paired with the arm it is analysed under, so that
//! bootstrap resamples and pseudo-trials built from the control arm need no
//! record copies.

mod estimators;
mod logistic;
mod ols;
mod split;

use thiserror::Error;

use crate::datagen::ObservedRecord;

pub use estimators::{estimate_naive, estimate_plugin, Estimator, MarginalModel, PluginOptions};
pub use logistic::{fit_irls, fit_sequential_logistic, IrlsFit, LogisticFit, VisitFit};
pub use ols::{fit_linear, LinearFit, OutcomeFit};
pub use split::{split_calibrate, SplitCalibration};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("quasi-separation: coefficient reached {coefficient}")]
    QuasiSeparation { coefficient: f64 },
    #[error("visit {visit} has {at_risk} at-risk subjects, need at least {}", logistic::MIN_AT_RISK)]
    UnderPopulated { visit: usize, at_risk: usize },
    #[error("singular information matrix")]
    Singular,
    #[error("visit {visit}: {source}")]
    AtVisit {
        visit: usize,
        #[source]
        source: Box<FitError>,
    },
}

impl FitError {
    fn at_visit(self, visit: usize) -> FitError {
        match self {
            e @ (FitError::UnderPopulated { .. } | FitError::AtVisit { .. }) => e,
            e => FitError::AtVisit { visit, source: Box::new(e) },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("no adherers with an observed outcome in arm {arm}")]
    NoAdherers { arm: usize },
    #[error("arm {arm} has too few subjects with an observed outcome")]
    EmptyArm { arm: usize },
    #[error("{failed} of {total} {what} failed (limit 10%); first error: {first}")]
    TooManyFailures { what: &'static str, failed: usize, total: usize, first: String },
    #[error("split calibration expects control-arm records only (subject {id} is in arm 1)")]
    NotControl { id: u64 },
    #[error("split calibration needs R >= 2 (got {0})")]
    TooFewSplits(usize),
    #[error("unknown estimator `{0}` (expected `naive` or `plugin`)")]
    UnknownEstimator(String),
}

/// A record analysed under `arm`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Unit<'a> {
    pub rec: &'a ObservedRecord,
    pub arm: usize,
}

pub(crate) fn own_arms(observed: &[ObservedRecord]) -> Vec<Unit<'_>> {
    observed.iter().map(|rec| Unit { rec, arm: rec.t_assigned }).collect()
}

/// More than 10% failures is an error.
pub(crate) fn too_many_failures(failed: usize, total: usize) -> bool {
    failed * 10 > total
}
