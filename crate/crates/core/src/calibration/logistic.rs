//! Per-visit logistic regression by iteratively reweighted least squares.

use std::io::Write;

use crate::datagen::ObservedRecord;
use crate::math::{fmt17, log1p_exp, logistic};

use super::{FitError, Unit};

pub const MAX_ITERATIONS: usize = 50;
/// Convergence threshold on the max-norm of the mean log-likelihood gradient.
pub const GRADIENT_TOL: f64 = 1e-8;
/// Any coefficient beyond this magnitude is treated as quasi-separation.
pub const SEPARATION_BOUND: f64 = 30.0;
pub const MIN_AT_RISK: usize = 10;

/// Maximum-likelihood fit of one logistic model with `P` covariates
/// (intercept included in the design).
#[derive(Debug, Clone, PartialEq)]
pub struct IrlsFit<const P: usize> {
    pub coef: [f64; P],
    /// Asymptotic standard errors from the inverse observed information.
    pub se: [f64; P],
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    /// Log-likelihood after each accepted iteration, starting at the initial point.
    pub loglik_trace: Vec<f64>,
    pub n: usize,
}

fn loglik<const P: usize>(design: &[[f64; P]], y: &[bool], coef: &[f64; P]) -> f64 {
    design
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = dot(row, coef);
            if yi {
                -log1p_exp(-eta)
            } else {
                -log1p_exp(eta)
            }
        })
        .sum()
}

fn dot<const P: usize>(a: &[f64; P], b: &[f64; P]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient and negative Hessian of the log-likelihood.
fn score_information<const P: usize>(design: &[[f64; P]], y: &[bool], coef: &[f64; P]) -> ([f64; P], [[f64; P]; P]) {
    let mut g = [0.0; P];
    let mut h = [[0.0; P]; P];
    for (row, &yi) in design.iter().zip(y) {
        let p = logistic(dot(row, coef));
        let r = f64::from(u8::from(yi)) - p;
        let w = p * (1.0 - p);
        for i in 0..P {
            g[i] += r * row[i];
            for j in 0..=i {
                h[i][j] += w * row[i] * row[j];
            }
        }
    }
    for i in 0..P {
        for j in 0..i {
            h[j][i] = h[i][j];
        }
    }
    (g, h)
}

/// Cholesky factor of a symmetric positive definite matrix.
fn cholesky<const P: usize>(a: &[[f64; P]; P]) -> Option<[[f64; P]; P]> {
    let mut l = [[0.0; P]; P];
    for i in 0..P {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve<const P: usize>(l: &[[f64; P]; P], b: &[f64; P]) -> [f64; P] {
    let mut y = [0.0; P];
    for i in 0..P {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0; P];
    for i in (0..P).rev() {
        let mut s = y[i];
        for k in i + 1..P {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

fn inverse_diagonal<const P: usize>(l: &[[f64; P]; P]) -> [f64; P] {
    let mut d = [0.0; P];
    for i in 0..P {
        let mut e = [0.0; P];
        e[i] = 1.0;
        d[i] = cholesky_solve(l, &e)[i];
    }
    d
}

/// Newton-Raphson (IRLS) with step halving, so the log-likelihood never
/// decreases between accepted iterations.
pub fn fit_irls<const P: usize>(design: &[[f64; P]], y: &[bool]) -> Result<IrlsFit<P>, FitError> {
    let n = design.len();
    let successes = y.iter().filter(|&&b| b).count();
    if successes == 0 || successes == n {
        return Err(FitError::QuasiSeparation { coefficient: f64::INFINITY });
    }
    let mut coef = [0.0; P];
    coef[0] = (successes as f64 / (n - successes) as f64).ln();
    let mut ll = loglik(design, y, &coef);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let nf = n as f64;
    loop {
        let (g, h) = score_information(design, y, &coef);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / nf;
        if gmax <= GRADIENT_TOL {
            converged = true;
            break;
        }
        if iterations == MAX_ITERATIONS {
            break;
        }
        let l = cholesky(&h).ok_or(FitError::Singular)?;
        let step = cholesky_solve(&l, &g);
        let mut scale = 1.0;
        let (next, next_ll) = loop {
            let mut cand = coef;
            for i in 0..P {
                cand[i] += scale * step[i];
            }
            let cand_ll = loglik(design, y, &cand);
            if cand_ll >= ll || scale < 1e-10 {
                break (cand, cand_ll);
            }
            scale *= 0.5;
        };
        iterations += 1;
        if next_ll < ll {
            // No ascent possible along the Newton direction; stop at the current optimum.
            break;
        }
        coef = next;
        ll = next_ll;
        trace.push(ll);
        if let Some(c) = coef.iter().find(|c| c.abs() > SEPARATION_BOUND) {
            return Err(FitError::QuasiSeparation { coefficient: *c });
        }
    }
    let (_, h) = score_information(design, y, &coef);
    let l = cholesky(&h).ok_or(FitError::Singular)?;
    let var = inverse_diagonal(&l);
    let mut se = [0.0; P];
    for i in 0..P {
        se[i] = var[i].sqrt();
    }
    Ok(IrlsFit { coef, se, converged, iterations, loglik: ll, loglik_trace: trace, n })
}

/// Working model for one visit: `logit P(A_k = 1 | A_{k-1} = 1) = g0 + g1 x + g3 z_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitFit {
    pub visit: usize,
    pub fit: IrlsFit<3>,
}

impl VisitFit {
    pub fn g0(&self) -> f64 {
        self.fit.coef[0]
    }
    pub fn g1(&self) -> f64 {
        self.fit.coef[1]
    }
    pub fn g3(&self) -> f64 {
        self.fit.coef[2]
    }

    pub fn probability(&self, x: f64, z: f64) -> f64 {
        logistic(self.g0() + self.g1() * x + self.g3() * z)
    }
}

/// Sequential adherence model, one logistic fit per visit.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub arm: usize,
    pub visits: Vec<VisitFit>,
}

impl LogisticFit {
    pub fn converged(&self) -> bool {
        self.visits.iter().all(|v| v.fit.converged)
    }

    pub fn iterations(&self) -> usize {
        self.visits.iter().map(|v| v.fit.iterations).max().unwrap_or(0)
    }

    pub fn loglik(&self) -> f64 {
        self.visits.iter().map(|v| v.fit.loglik).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "arm", "visit", "n_at_risk", "g0", "g1", "g3", "se_g0", "se_g1", "se_g3", "converged", "iterations",
            "loglik",
        ])?;
        for v in &self.visits {
            let f = &v.fit;
            w.write_record([
                self.arm.to_string(),
                (v.visit + 1).to_string(),
                f.n.to_string(),
                fmt17(f.coef[0]),
                fmt17(f.coef[1]),
                fmt17(f.coef[2]),
                fmt17(f.se[0]),
                fmt17(f.se[1]),
                fmt17(f.se[2]),
                f.converged.to_string(),
                f.iterations.to_string(),
                fmt17(f.loglik),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fit_sequential_units(units: &[Unit<'_>], arm: usize) -> Result<LogisticFit, FitError> {
    let k_max = units.first().map(|u| u.rec.z_obs.len()).unwrap_or(0);
    let mut visits = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let mut design = Vec::new();
        let mut y = Vec::new();
        for u in units.iter().filter(|u| u.arm == arm) {
            if let (Some(z), Some(a)) = (u.rec.z_obs[k], u.rec.adherence_at(k)) {
                design.push([1.0, u.rec.x, z]);
                y.push(a);
            }
        }
        if design.len() < MIN_AT_RISK {
            return Err(FitError::UnderPopulated { visit: k + 1, at_risk: design.len() });
        }
        let fit = fit_irls(&design, &y).map_err(|e| e.at_visit(k + 1))?;
        visits.push(VisitFit { visit: k, fit });
    }
    Ok(LogisticFit { arm, visits })
}

/// Fits the sequential adherence model on one arm's observed records.
///
/// The at-risk set for visit `k` is the subjects still adherent after visit
/// `k - 1`, i.e. those whose `z_k` was observed.
pub fn fit_sequential_logistic(observed: &[ObservedRecord], arm: usize) -> Result<LogisticFit, FitError> {
    let units = super::own_arms(observed);
    fit_sequential_units(&units, arm)
}
