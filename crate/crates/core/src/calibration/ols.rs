//! Simple linear regression of a response on `x`.

use super::FitError;

/// Least-squares line `E[response | x] = intercept + slope_x * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope_x: f64,
    pub residual_sd: f64,
    pub n: usize,
}

/// Outcome model for the control arm.
pub type OutcomeFit = LinearFit;

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope_x * x
    }
}

/// Fits by centred sums; needs at least 3 points with distinct `x`.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<LinearFit, FitError> {
    let n = points.len();
    if n < 3 {
        return Err(FitError::UnderPopulated { visit: 0, at_risk: n });
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(FitError::Singular);
    }
    let slope_x = sxy / sxx;
    let intercept = my - slope_x * mx;
    let rss: f64 = points.iter().map(|&(x, y)| (y - intercept - slope_x * x).powi(2)).sum();
    Ok(LinearFit { intercept, slope_x, residual_sd: (rss / (nf - 2.0)).sqrt(), n })
}
