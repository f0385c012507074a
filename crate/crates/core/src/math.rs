//! Scalar helpers shared by the generator, the integrator and the fitters.

/// Numerically stable logistic function `1 / (1 + exp(-u))`.
#[inline]
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(u))` without overflow.
#[inline]
pub fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Formats a float with 17 significant digits, the export format for CSVs.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_is_symmetric_and_saturates() {
        for u in [-40.0, -3.0, -0.1, 0.0, 0.7, 12.0] {
            assert!((logistic(u) + logistic(-u) - 1.0).abs() < 1e-15);
        }
        assert_eq!(logistic(800.0), 1.0);
        assert_eq!(logistic(-800.0), 0.0);
    }

    #[test]
    fn log1p_exp_matches_direct_formula() {
        for u in [-30.0, -1.0, 0.0, 1.0, 30.0] {
            assert!((log1p_exp(u) - (1.0 + f64::exp(u)).ln()).abs() < 1e-12);
        }
        assert_eq!(log1p_exp(1000.0), 1000.0);
    }

    #[test]
    fn fmt17_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123_456_789.123_456_79] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }
}
