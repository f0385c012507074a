//! Deterministic evaluation of the null-scenario effect in the stratum
//! `{A(1) = 1}`.
//!
//! Under the outcome null (no treatment effect on the intermediates or on the
//! outcome) `Y(1) - Y(0)` reduces to `sum_k beta3[k] * (eta_k(1) - eta_k(0))`,
//! and only the arm-1 terms correlate with `A(1)`. With `xi_k = eta_k(1)` the
//! stratum effect is
//!
//! ```text
//!   E_x[ sum_k beta3[k] N_k(x) prod_{j != k} D_j(x) ]  /  E_x[ prod_k D_k(x) ]
//!   D_k(x) = E[w_k(x, xi)],   N_k(x) = E[xi w_k(x, xi)],   xi ~ N(0, sigma_eta^2)
//!   w_k(x, xi) = logistic(gamma0 + gamma2 + gamma3[k] alpha0[k]
//!                         + (gamma1 + gamma3[k] alpha1[k]) x + gamma3[k] xi)
//! ```
//!
//! The integrand factors over the `xi_k` given `x`, so the `(K+1)`-dimensional
//! integral collapses to one outer Gauss-Hermite rule over `x` and `2K`
//! one-dimensional rules per outer node.

use thiserror::Error;

use crate::datagen::generate_with;
use crate::hermite::NormalRule;
use crate::math::logistic;
use crate::params::ModelParams;
use crate::strata::{oracle_effect, EffectEstimate, StrataError, StratumLabel};
use crate::summation::ExactSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error(
        "the closed-form stratum effect requires the outcome null (alpha2 = 0 and beta2 = 0); \
         use the Monte Carlo method for this scenario"
    )]
    NotOutcomeNull,
    #[error("refinement failed: {nodes_x}x{nodes_xi} nodes gave {coarse:e}, doubled rule gave {fine:e}")]
    Refinement { nodes_x: usize, nodes_xi: usize, coarse: f64, fine: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
}

/// Node counts and refinement policy.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub nodes_x: usize,
    pub nodes_xi: usize,
    /// Re-evaluate with doubled node counts and require agreement.
    pub refine: bool,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes_x: 64, nodes_xi: 64, refine: true, rel_tol: 1e-9 }
    }
}

impl QuadratureSpec {
    pub fn with_nodes(nodes: usize) -> Self {
        QuadratureSpec { nodes_x: nodes, nodes_xi: nodes, ..Default::default() }
    }

    fn check(&self) -> Result<(), QuadratureError> {
        if self.nodes_x < 2 || self.nodes_xi < 2 {
            return Err(QuadratureError::InvalidSpec("node counts must be >= 2"));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(QuadratureError::InvalidSpec("rel_tol must be > 0"));
        }
        Ok(())
    }
}

/// True stratum effect `E[Y(1) - Y(0) | A(1) = 1]` under the outcome null.
///
/// `gamma2` is honoured: it shifts the arm-1 selection intercept.
pub fn mu_star_plus(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64, QuadratureError> {
    spec.check()?;
    if !params.is_y_null() {
        return Err(QuadratureError::NotOutcomeNull);
    }
    let coarse = evaluate(params, spec.nodes_x, spec.nodes_xi);
    if !spec.refine {
        return Ok(coarse);
    }
    let fine = evaluate(params, 2 * spec.nodes_x, 2 * spec.nodes_xi);
    if (coarse - fine).abs() > spec.rel_tol * coarse.abs().max(fine.abs()) {
        return Err(QuadratureError::Refinement { nodes_x: spec.nodes_x, nodes_xi: spec.nodes_xi, coarse, fine });
    }
    Ok(fine)
}

/// Per-visit factors `(D_k(x), N_k(x))`.
fn visit_factors(p: &ModelParams, rule: &NormalRule, x: f64, k: usize) -> (f64, f64) {
    let g = p.gamma3[k];
    let c = p.gamma0 + p.gamma2 + g * p.alpha0[k] + (p.gamma1 + g * p.alpha1[k]) * x;
    let s = g * p.sigma_eta;
    let mut d = 0.0;
    let mut nk = 0.0;
    if let Some(w0) = rule.center_weight {
        d += w0 * logistic(c);
    }
    let odd_vanishes = g == 0.0 || p.sigma_eta == 0.0;
    for (&xi, &w) in rule.positive.iter().zip(&rule.pair_weights) {
        let up = logistic(c + s * xi);
        let down = logistic(c - s * xi);
        d += w * (up + down);
        if !odd_vanishes {
            nk += w * p.sigma_eta * xi * (up - down);
        }
    }
    (d, nk)
}

fn evaluate(p: &ModelParams, nodes_x: usize, nodes_xi: usize) -> f64 {
    let outer = NormalRule::new(nodes_x);
    let inner = NormalRule::new(nodes_xi);
    let mut num = ExactSum::new();
    let mut den = ExactSum::new();
    let mut d = vec![0.0; p.k];
    let mut nk = vec![0.0; p.k];
    for (node, wx) in outer.points() {
        let x = p.mu_x + p.sigma_x * node;
        for k in 0..p.k {
            (d[k], nk[k]) = visit_factors(p, &inner, x, k);
        }
        let mut numerator = 0.0;
        for k in 0..p.k {
            let mut term = p.beta3[k] * nk[k];
            for (j, dj) in d.iter().enumerate() {
                if j != k {
                    term *= dj;
                }
            }
            numerator += term;
        }
        num.add(wx * numerator);
        den.add(wx * d.iter().product::<f64>());
    }
    num.value() / den.value()
}

/// Quadrature value next to a brute-force Monte Carlo oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct McCheck {
    pub quad: f64,
    pub mc: EffectEstimate,
}

impl McCheck {
    pub fn agrees(&self, z: f64) -> bool {
        self.mc.within(self.quad, z)
    }
}

#[derive(Debug, Error)]
pub enum McCheckError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Strata(#[from] StrataError),
}

/// Runs the generator and the oracle at `(n, seed)` and returns both values.
pub fn mu_star_plus_mc_check(
    params: &ModelParams,
    spec: &QuadratureSpec,
    n: usize,
    seed: u64,
) -> Result<McCheck, McCheckError> {
    let quad = mu_star_plus(params, spec)?;
    let records = generate_with(params, n, seed);
    let mc = oracle_effect(&records, StratumLabel::STAR_PLUS)?;
    Ok(McCheck { quad, mc })
}
