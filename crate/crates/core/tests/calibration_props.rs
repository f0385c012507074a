#![allow(clippy::needless_range_loop)]

use stratum_bias::calibration::{
    estimate_naive, estimate_plugin, fit_linear, fit_sequential_logistic, split_calibrate, Estimator, FitError,
    PluginOptions,
};
use stratum_bias::datagen::{generate_with, observe, ObservedRecord};
use stratum_bias::params::ModelParams;
use stratum_bias::quadrature::{mu_star_plus, QuadratureSpec};
use stratum_bias::rng::derive_seed;
use stratum_bias::summation::mean_sd;

fn trial(p: &ModelParams, n: usize, seed: u64) -> Vec<ObservedRecord> {
    observe(&generate_with(p, n, seed), true)
}

fn control(observed: &[ObservedRecord]) -> Vec<ObservedRecord> {
    observed.iter().filter(|r| r.t_assigned == 0).cloned().collect()
}

fn no_bootstrap(seed: u64) -> PluginOptions {
    PluginOptions { seed, bootstrap: 0, ..Default::default() }
}

#[test]
fn sequential_logistic_recovers_generating_coefficients() {
    let p = ModelParams::demonstration();
    let fit = fit_sequential_logistic(&trial(&p, 100_000, 12), 1).unwrap();
    assert_eq!(fit.visits.len(), 3);
    for v in &fit.visits {
        assert!(v.fit.converged);
        let truth = [p.gamma0 + p.gamma2, p.gamma1, p.gamma3[v.visit]];
        for j in 0..3 {
            let z = (v.fit.coef[j] - truth[j]) / v.fit.se[j];
            assert!(z.abs() <= 3.5, "visit {} coef {j}: {} vs {} (z {z:.2})", v.visit, v.fit.coef[j], truth[j]);
        }
        assert!(v.fit.loglik_trace.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn sequential_logistic_finds_null_slopes() {
    let mut p = ModelParams::demonstration();
    p.gamma1 = 0.0;
    p.gamma3 = vec![0.0; 3];
    let fit = fit_sequential_logistic(&trial(&p, 100_000, 13), 0).unwrap();
    for v in &fit.visits {
        assert!(((v.g0() - p.gamma0) / v.fit.se[0]).abs() <= 3.5);
        assert!((v.g1() / v.fit.se[1]).abs() <= 3.5);
        assert!((v.g3() / v.fit.se[2]).abs() <= 3.5);
    }
}

#[test]
fn sure_adherence_is_separation() {
    let mut p = ModelParams::demonstration();
    p.gamma0 = 50.0;
    let err = fit_sequential_logistic(&trial(&p, 2_000, 14), 1).unwrap_err();
    assert!(matches!(err, FitError::AtVisit { visit: 1, .. }), "{err}");
    assert!(err.to_string().contains("separation"), "{err}");
}

#[test]
fn outcome_fit_satisfies_normal_equations() {
    let obs = trial(&ModelParams::demonstration(), 20_000, 15);
    let pts: Vec<(f64, f64)> = obs.iter().filter_map(|r| r.y_obs.map(|y| (r.x, y))).collect();
    let fit = fit_linear(&pts).unwrap();
    let (mut r0, mut r1, mut scale) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        let r = y - fit.predict(x);
        r0 += r;
        r1 += r * x;
        scale += (y * x).abs();
    }
    assert!(r0.abs() <= 1e-10 * scale && r1.abs() <= 1e-10 * scale);
}

#[test]
fn naive_is_centred_under_the_full_null() {
    let e = estimate_naive(&trial(&ModelParams::demonstration(), 100_000, 16)).unwrap();
    assert!(e.within(0.0, 3.5), "{e:?}");
}

#[test]
fn naive_misses_the_stratum_effect() {
    let p = ModelParams::demonstration();
    let e = estimate_naive(&trial(&p, 1_000_000, 17)).unwrap();
    let truth = mu_star_plus(&p, &QuadratureSpec::default()).unwrap();
    assert!(e.within(0.0, 3.5), "{e:?}");
    assert!(!e.within(truth, 3.5));
}

#[test]
fn naive_without_selection_is_the_arm_difference() {
    let mut p = ModelParams::demonstration();
    p.gamma0 = 50.0;
    let obs = trial(&p, 10_000, 18);
    assert!(obs.iter().all(|r| r.a_obs));
    let arm_mean = |t: usize| {
        let ys: Vec<f64> = obs.iter().filter(|r| r.t_assigned == t).filter_map(|r| r.y_obs).collect();
        mean_sd(&ys).unwrap().0
    };
    let e = estimate_naive(&obs).unwrap();
    assert!((e.value - (arm_mean(1) - arm_mean(0))).abs() <= 1e-14);
}

#[test]
fn plugin_is_close_to_the_stratum_effect() {
    let p = ModelParams::demonstration();
    let truth = mu_star_plus(&p, &QuadratureSpec::default()).unwrap();
    let e = estimate_plugin(&trial(&p, 1_000_000, 19), &no_bootstrap(19)).unwrap();
    assert!((e.value - truth).abs() <= 0.02f64.max(3.5 * e.se), "{} vs {truth}", e.value);
}

#[test]
fn plugin_is_centred_in_the_zero_regimes() {
    for (i, zero_beta) in [false, true].into_iter().enumerate() {
        let mut p = ModelParams::demonstration();
        if zero_beta {
            p.beta3 = vec![0.0; 3];
        } else {
            p.gamma3 = vec![0.0; 3];
        }
        let seed = 20 + i as u64;
        let e = estimate_plugin(&trial(&p, 100_000, seed), &PluginOptions { seed, ..Default::default() }).unwrap();
        assert!(e.se > 0.0);
        assert!(e.within(0.0, 3.5), "{e:?}");
    }
}

#[test]
fn plugin_without_selection_slopes_reduces_to_unweighted_control_model() {
    let mut p = ModelParams::demonstration();
    p.gamma1 = 0.0;
    p.gamma3 = vec![0.0; 3];
    let obs = trial(&p, 100_000, 22);
    let e = estimate_plugin(&obs, &no_bootstrap(22)).unwrap();
    let y1: Vec<f64> = obs.iter().filter(|r| r.t_assigned == 1 && r.a_obs).filter_map(|r| r.y_obs).collect();
    let pts: Vec<(f64, f64)> =
        obs.iter().filter(|r| r.t_assigned == 0).filter_map(|r| r.y_obs.map(|y| (r.x, y))).collect();
    let m0 = fit_linear(&pts).unwrap();
    let xs: Vec<f64> = obs.iter().map(|r| m0.predict(r.x)).collect();
    let reduced = mean_sd(&y1).unwrap().0 - mean_sd(&xs).unwrap().0;
    assert!((e.value - reduced).abs() <= 0.01, "{} vs {reduced}", e.value);
}

#[test]
fn naive_split_offsets_are_centred() {
    let obs = trial(&ModelParams::demonstration(), 100_000, 23);
    let cal = split_calibrate(&control(&obs), &Estimator::Naive, 200, 23).unwrap();
    assert_eq!(cal.offsets.len(), 200);
    assert!((cal.mean_offset / cal.se_offset).abs() <= 3.5, "{} ± {}", cal.mean_offset, cal.se_offset);
}

#[test]
fn split_offsets_spread_like_real_trials() {
    let p = ModelParams::demonstration();
    let obs = trial(&p, 100_000, 24);
    let ctrl = control(&obs);
    let cal = split_calibrate(&ctrl, &Estimator::Naive, 500, 24).unwrap();
    let real: Vec<f64> = (0..500u64)
        .map(|i| estimate_naive(&trial(&p, ctrl.len(), derive_seed(2400, i))).unwrap().value)
        .collect();
    let (_, sd_real) = mean_sd(&real).unwrap();
    let ratio = cal.sd_offset().powi(2) / (sd_real * sd_real);
    assert!((0.7..=1.4).contains(&ratio), "variance ratio {ratio}");
}
