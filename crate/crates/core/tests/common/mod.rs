//! Helpers shared by the integration tests. Each test binary uses a subset.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stratum_bias::params::ModelParams;

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

pub fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// `2 b g E[sigma'(g xi)]`, xi ~ N(0, 1), by one-dimensional integration.
pub fn stein_value(b: f64, g: f64) -> f64 {
    let integrand = |u: f64| {
        let s = sigmoid(g * u);
        s * (1.0 - s) * normal_pdf(u)
    };
    // Split at 0 so both halves are smooth and well resolved.
    let e = adaptive_simpson(&integrand, -40.0, 0.0, 1e-16) + adaptive_simpson(&integrand, 0.0, 40.0, 1e-16);
    2.0 * b * g * e
}

/// K = 1 model where the stratum effect reduces to the Stein form.
pub fn reduced_params(b: f64, g: f64) -> ModelParams {
    ModelParams {
        mu_x: 0.7,
        sigma_x: 1.3,
        alpha0: vec![0.0],
        alpha1: vec![0.0],
        alpha2: vec![0.0],
        beta0: 0.2,
        beta1: 0.5,
        beta2: 0.0,
        beta3: vec![b],
        sigma_eta: 1.0,
        sigma_eps: 0.5,
        gamma0: 0.0,
        gamma1: 0.0,
        gamma2: 0.0,
        gamma3: vec![g],
        k: 1,
        p_treat: 0.5,
    }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

/// Random parameter draw with beta3[k] * gamma3[k] > 0 for every visit.
pub fn random_same_sign(rng: &mut ChaCha8Rng) -> ModelParams {
    let k = rng.random_range(1..=4usize);
    let mut p = ModelParams::demonstration();
    p.k = k;
    p.mu_x = rng.random_range(-1.0..1.0);
    p.sigma_x = rng.random_range(0.3..2.0);
    p.alpha0 = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    p.alpha1 = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    p.alpha2 = vec![0.0; k];
    p.sigma_eta = rng.random_range(0.2..2.0);
    p.gamma0 = rng.random_range(-1.0..2.0);
    p.gamma1 = rng.random_range(-1.0..1.0);
    p.gamma2 = rng.random_range(-1.0..1.0);
    p.beta3 = Vec::with_capacity(k);
    p.gamma3 = Vec::with_capacity(k);
    for _ in 0..k {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        p.beta3.push(sign * rng.random_range(0.05..1.5));
        p.gamma3.push(sign * rng.random_range(0.05..1.5));
    }
    p.check().unwrap();
    p
}

