use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::datagen::ObservedRecord;
use crate::rng::{Domain, StreamFamily};
use crate::summation::mean_sd;

use super::{too_many_failures, CalibrationError, Estimator, Unit};

/// Null-reference offsets from repeated random halvings of the control arm.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCalibration {
    /// One estimate per successful split, in split order.
    pub offsets: Vec<f64>,
    pub mean_offset: f64,
    /// `sd(offsets) / sqrt(R)`.
    pub se_offset: f64,
    /// Number of successful splits.
    pub r: usize,
    pub n_failed: usize,
}

impl SplitCalibration {
    /// Sample SD of the offsets, i.e. the spread of the estimator over
    /// pseudo-trials.
    pub fn sd_offset(&self) -> f64 {
        self.se_offset * (self.r as f64).sqrt()
    }
}

/// Runs `estimator` on `r` pseudo-trials carved out of the control arm.
///
/// Subjects are sorted by id and shuffled by the stream for `(seed, split)`;
/// the first `floor(n / 2)` become pseudo-arm 1 and the rest (one more when
/// `n` is odd) stay in pseudo-control. Failed splits are skipped and counted;
/// more than 10% failures is an error.
pub fn split_calibrate(
    control: &[ObservedRecord],
    estimator: &Estimator,
    r: usize,
    seed: u64,
) -> Result<SplitCalibration, CalibrationError> {
    if r < 2 {
        return Err(CalibrationError::TooFewSplits(r));
    }
    if let Some(rec) = control.iter().find(|rec| rec.t_assigned != 0) {
        return Err(CalibrationError::NotControl { id: rec.id });
    }
    let mut sorted: Vec<&ObservedRecord> = control.iter().collect();
    sorted.sort_by_key(|rec| rec.id);
    let half = sorted.len() / 2;
    let streams = StreamFamily::new(seed, Domain::Split);

    let results: Vec<Result<f64, CalibrationError>> = (0..r as u64)
        .into_par_iter()
        .map(|i| {
            let mut order = sorted.clone();
            order.shuffle(&mut streams.stream(i));
            let units: Vec<Unit<'_>> =
                order.iter().enumerate().map(|(j, &rec)| Unit { rec, arm: usize::from(j < half) }).collect();
            estimator.point(&units)
        })
        .collect();

    let n_failed = results.iter().filter(|res| res.is_err()).count();
    if too_many_failures(n_failed, r) {
        let first = results.iter().find_map(|res| res.as_ref().err()).expect("at least one failure");
        return Err(CalibrationError::TooManyFailures {
            what: "splits",
            failed: n_failed,
            total: r,
            first: first.to_string(),
        });
    }
    let offsets: Vec<f64> = results.into_iter().filter_map(Result::ok).collect();
    let (mean_offset, sd) = mean_sd(&offsets).expect("at least 90% of splits succeeded");
    Ok(SplitCalibration { mean_offset, se_offset: sd / (offsets.len() as f64).sqrt(), r: offsets.len(), offsets, n_failed })
}
