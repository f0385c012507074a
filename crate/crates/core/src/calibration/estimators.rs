use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::datagen::ObservedRecord;
use crate::math::logistic;
use crate::rng::{Domain, StreamFamily};
use crate::strata::{EffectEstimate, StratumLabel};
use crate::summation::mean_sd;

use super::logistic::{fit_irls, fit_sequential_units, IrlsFit, LogisticFit};
use super::ols::{fit_linear, LinearFit};
use super::{own_arms, too_many_failures, CalibrationError, Unit};

/// How the plug-in estimator gets `P(A(1) = 1 | X = x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalModel {
    /// Integrate the fitted visit-level models over simulated `z` paths.
    Simulated,
    /// One logistic regression of overall adherence on `x` (misspecified).
    OneShot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PluginOptions {
    /// Simulated `z` paths per evaluation point.
    pub paths: usize,
    /// Evaluation points for the adherence curve; linear interpolation between.
    pub grid: usize,
    /// Bootstrap resamples for the SE; 0 skips the bootstrap.
    pub bootstrap: usize,
    pub seed: u64,
    pub marginal: MarginalModel,
}

impl Default for PluginOptions {
    fn default() -> Self {
        PluginOptions { paths: 200, grid: 257, bootstrap: 200, seed: 0, marginal: MarginalModel::Simulated }
    }
}

/// Named estimators; calibration treats them as opaque point estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Naive,
    Plugin(PluginOptions),
}

impl Estimator {
    pub fn from_name(name: &str, plugin: PluginOptions) -> Result<Self, CalibrationError> {
        match name {
            "naive" => Ok(Estimator::Naive),
            "plugin" => Ok(Estimator::Plugin(plugin)),
            other => Err(CalibrationError::UnknownEstimator(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::Plugin(_) => "plugin",
        }
    }

    pub(crate) fn point(&self, units: &[Unit<'_>]) -> Result<f64, CalibrationError> {
        match self {
            Estimator::Naive => naive(units).map(|(v, _, _)| v),
            Estimator::Plugin(opts) => plugin_point(units, opts),
        }
    }

    /// Point estimate on a trial as observed.
    pub fn estimate(&self, observed: &[ObservedRecord]) -> Result<f64, CalibrationError> {
        self.point(&own_arms(observed))
    }
}

fn adherer_outcomes(units: &[Unit<'_>], arm: usize) -> Vec<f64> {
    units.iter().filter(|u| u.arm == arm && u.rec.a_obs).filter_map(|u| u.rec.y_obs).collect()
}

fn naive(units: &[Unit<'_>]) -> Result<(f64, f64, usize), CalibrationError> {
    let y1 = adherer_outcomes(units, 1);
    let y0 = adherer_outcomes(units, 0);
    let (m1, s1) = mean_sd(&y1).ok_or(CalibrationError::NoAdherers { arm: 1 })?;
    let (m0, s0) = mean_sd(&y0).ok_or(CalibrationError::NoAdherers { arm: 0 })?;
    let se = (s1 * s1 / y1.len() as f64 + s0 * s0 / y0.len() as f64).sqrt();
    Ok((m1 - m0, se, y1.len() + y0.len()))
}

/// Adherers-versus-adherers mean difference with a two-sample SE.
pub fn estimate_naive(observed: &[ObservedRecord]) -> Result<EffectEstimate, CalibrationError> {
    let (value, se, n_members) = naive(&own_arms(observed))?;
    Ok(EffectEstimate { value, se, n_members, stratum: StratumLabel::STAR_PLUS })
}

/// Fitted `P(A(1) = 1 | x)`.
enum AdherenceCurve {
    Simulated { visits: LogisticFit, z_models: Vec<LinearFit>, normals: Vec<f64>, k: usize },
    OneShot(IrlsFit<2>),
}

impl AdherenceCurve {
    fn fit(units: &[Unit<'_>], opts: &PluginOptions) -> Result<Self, CalibrationError> {
        match opts.marginal {
            MarginalModel::Simulated => {
                let visits = fit_sequential_units(units, 1)?;
                let k = visits.visits.len();
                let z_models = (0..k)
                    .map(|j| {
                        let pts: Vec<(f64, f64)> = units
                            .iter()
                            .filter(|u| u.arm == 1)
                            .filter_map(|u| u.rec.z_obs[j].map(|z| (u.rec.x, z)))
                            .collect();
                        fit_linear(&pts)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let mut rng = StreamFamily::new(opts.seed, Domain::PathSim).stream(0);
                let normals = (0..opts.paths * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                Ok(AdherenceCurve::Simulated { visits, z_models, normals, k })
            }
            MarginalModel::OneShot => {
                let (design, y): (Vec<[f64; 2]>, Vec<bool>) =
                    units.iter().filter(|u| u.arm == 1).map(|u| ([1.0, u.rec.x], u.rec.a_obs)).unzip();
                Ok(AdherenceCurve::OneShot(fit_irls(&design, &y)?))
            }
        }
    }

    fn at(&self, x: f64) -> f64 {
        match self {
            AdherenceCurve::Simulated { visits, z_models, normals, k } => {
                let paths = normals.len() / k;
                let mut total = 0.0;
                for path in normals.chunks_exact(*k) {
                    let mut prob = 1.0;
                    for ((v, zm), e) in visits.visits.iter().zip(z_models).zip(path) {
                        let z = zm.predict(x) + zm.residual_sd * e;
                        prob *= v.probability(x, z);
                    }
                    total += prob;
                }
                total / paths as f64
            }
            AdherenceCurve::OneShot(fit) => logistic(fit.coef[0] + fit.coef[1] * x),
        }
    }
}

/// Curve tabulated on an even grid over `[lo, hi]`.
struct Tabulated {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl Tabulated {
    fn new(curve: &AdherenceCurve, lo: f64, hi: f64, points: usize) -> Self {
        let points = points.max(2);
        let step = if hi > lo { (hi - lo) / (points - 1) as f64 } else { 1.0 };
        let values = (0..points).map(|i| curve.at(lo + step * i as f64)).collect();
        Tabulated { lo, step, values }
    }

    fn at(&self, x: f64) -> f64 {
        let pos = ((x - self.lo) / self.step).max(0.0);
        let last = self.values.len() - 1;
        let i = (pos.floor() as usize).min(last - 1);
        let frac = (pos - i as f64).min(1.0);
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

fn plugin_point(units: &[Unit<'_>], opts: &PluginOptions) -> Result<f64, CalibrationError> {
    let y1 = adherer_outcomes(units, 1);
    if y1.is_empty() {
        return Err(CalibrationError::NoAdherers { arm: 1 });
    }
    let term1 = y1.iter().sum::<f64>() / y1.len() as f64;

    let control: Vec<(f64, f64)> =
        units.iter().filter(|u| u.arm == 0).filter_map(|u| u.rec.y_obs.map(|y| (u.rec.x, y))).collect();
    let outcome = fit_linear(&control).map_err(|_| CalibrationError::EmptyArm { arm: 0 })?;

    let curve = AdherenceCurve::fit(units, opts)?;
    let (lo, hi) = units.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u.rec.x), hi.max(u.rec.x)));
    let table = Tabulated::new(&curve, lo, hi, opts.grid);
    let (mut num, mut den) = (0.0, 0.0);
    for u in units {
        let p = table.at(u.rec.x);
        num += p * outcome.predict(u.rec.x);
        den += p;
    }
    Ok(term1 - num / den)
}

/// `mean(Y | T = 1, A = 1)` minus the adherence-weighted control outcome
/// model, `sum_i pi(x_i) m0(x_i) / sum_i pi(x_i)` over all subjects.
///
/// The SE is the SD of `opts.bootstrap` subject-level resamples (0 when the
/// bootstrap is disabled).
pub fn estimate_plugin(observed: &[ObservedRecord], opts: &PluginOptions) -> Result<EffectEstimate, CalibrationError> {
    let units = own_arms(observed);
    let value = plugin_point(&units, opts)?;
    let n_members = units.iter().filter(|u| u.arm == 1 && u.rec.a_obs).count();
    let se = if opts.bootstrap == 0 { 0.0 } else { bootstrap_se(&units, opts)? };
    Ok(EffectEstimate { value, se, n_members, stratum: StratumLabel::STAR_PLUS })
}

fn bootstrap_se(units: &[Unit<'_>], opts: &PluginOptions) -> Result<f64, CalibrationError> {
    let streams = StreamFamily::new(opts.seed, Domain::Bootstrap);
    let n = units.len();
    let results: Vec<Result<f64, CalibrationError>> = (0..opts.bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.stream(b);
            let sample: Vec<Unit<'_>> = (0..n).map(|_| units[rng.random_range(0..n)]).collect();
            plugin_point(&sample, opts)
        })
        .collect();
    let failed: Vec<&CalibrationError> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    if too_many_failures(failed.len(), results.len()) {
        return Err(CalibrationError::TooManyFailures {
            what: "bootstrap resamples",
            failed: failed.len(),
            total: results.len(),
            first: failed[0].to_string(),
        });
    }
    let values: Vec<f64> = results.into_iter().filter_map(Result::ok).collect();
    Ok(mean_sd(&values).map(|(_, sd)| sd).unwrap_or(0.0))
}
