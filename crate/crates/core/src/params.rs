//! Model parameters and scenario configuration.
//!
//! A scenario file is a flat JSON object. Every generative coefficient lives in
//! [`ModelParams`]; run-level knobs (sample size, seed, replicate count, label)
//! live in [`ScenarioConfig`]. Parsing is fail-closed: unknown keys are rejected
//! and every error names the offending key.

use serde_json::{Map, Number, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` must be {expected}")]
    WrongType { key: String, expected: &'static str },
    #[error("{key} length {len} \u{2260} K={k}")]
    LengthMismatch { key: String, len: usize, k: usize },
    #[error("{key} must be {constraint}")]
    OutOfRange { key: String, constraint: &'static str },
    #[error("scenario file is not a JSON object: {0}")]
    Malformed(String),
}

impl ParamError {
    /// Name of the offending key, when the error is attached to one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ParamError::MissingKey(k) | ParamError::UnknownKey(k) => Some(k),
            ParamError::WrongType { key, .. }
            | ParamError::LengthMismatch { key, .. }
            | ParamError::OutOfRange { key, .. } => Some(key),
            ParamError::Malformed(_) => None,
        }
    }
}

/// Coefficients of the generative model.
///
/// `x ~ N(mu_x, sigma_x^2)`,
/// `z_k(t) = alpha0[k] + alpha1[k] x + alpha2[k] t + eta_k(t)`,
/// `y(t) = beta0 + beta1 x + beta2 t + sum_k beta3[k] z_k(t) + eps(t)`,
/// `logit P(adhere at visit k | still adherent) = gamma0 + gamma2 t + gamma1 x + gamma3[k] z_k(t)`.
///
/// `gamma2` is an extension (default 0) that lets treatment move adherence
/// without moving the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mu_x: f64,
    pub sigma_x: f64,
    pub alpha0: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: Vec<f64>,
    pub sigma_eta: f64,
    pub sigma_eps: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: Vec<f64>,
    pub k: usize,
    pub p_treat: f64,
}

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_P_TREAT: f64 = 0.5;

pub const PARAM_KEYS: [&str; 17] = [
    "mu_x", "sigma_x", "alpha0", "alpha1", "alpha2", "beta0", "beta1", "beta2", "beta3", "sigma_eta",
    "sigma_eps", "gamma0", "gamma1", "gamma2", "gamma3", "K", "p_treat",
];
pub const SCENARIO_KEYS: [&str; 4] = ["n", "seed", "replicate_count", "label"];

impl ModelParams {
    /// The demonstration scenario: full null with outcome-relevant,
    /// adherence-relevant intermediates (beta3, gamma3 both nonzero).
    pub fn demonstration() -> Self {
        ModelParams {
            mu_x: 0.0,
            sigma_x: 1.0,
            alpha0: vec![0.0; 3],
            alpha1: vec![0.5; 3],
            alpha2: vec![0.0; 3],
            beta0: 0.0,
            beta1: 0.5,
            beta2: 0.0,
            beta3: vec![0.4; 3],
            sigma_eta: 1.0,
            sigma_eps: 0.5,
            gamma0: 1.0,
            gamma1: 0.3,
            gamma2: 0.0,
            gamma3: vec![0.5; 3],
            k: 3,
            p_treat: 0.5,
        }
    }

    /// Checks every invariant; returns the first violation.
    pub fn check(&self) -> Result<(), ParamError> {
        if self.k < 1 {
            return Err(out_of_range("K", ">= 1"));
        }
        for (key, v) in [
            ("alpha0", &self.alpha0),
            ("alpha1", &self.alpha1),
            ("alpha2", &self.alpha2),
            ("beta3", &self.beta3),
            ("gamma3", &self.gamma3),
        ] {
            if v.len() != self.k {
                return Err(ParamError::LengthMismatch { key: key.into(), len: v.len(), k: self.k });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(out_of_range(key, "finite"));
            }
        }
        for (key, v) in [
            ("mu_x", self.mu_x),
            ("beta0", self.beta0),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("gamma0", self.gamma0),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            if !v.is_finite() {
                return Err(out_of_range(key, "finite"));
            }
        }
        if !(self.sigma_x > 0.0 && self.sigma_x.is_finite()) {
            return Err(out_of_range("sigma_x", "> 0"));
        }
        if !(self.sigma_eta >= 0.0 && self.sigma_eta.is_finite()) {
            return Err(out_of_range("sigma_eta", ">= 0"));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(out_of_range("sigma_eps", ">= 0"));
        }
        if !(self.p_treat > 0.0 && self.p_treat < 1.0) {
            return Err(out_of_range("p_treat", "in (0, 1)"));
        }
        Ok(())
    }

    /// No treatment effect on any generated variable.
    pub fn is_full_null(&self) -> bool {
        self.is_y_null() && self.gamma2 == 0.0
    }

    /// No treatment effect on the intermediates or the outcome; adherence may
    /// still differ by arm through `gamma2`.
    pub fn is_y_null(&self) -> bool {
        self.alpha2.iter().all(|&a| a == 0.0) && self.beta2 == 0.0
    }

    /// Structural conditions under which `Y(1) - Y(0)` is independent of
    /// `A(1)` given `X` in this model family.
    pub fn sufficient_condition_holds(&self) -> bool {
        self.beta3.iter().all(|&b| b == 0.0) || self.gamma3.iter().all(|&g| g == 0.0) || self.sigma_eta == 0.0
    }

    /// Parses and validates the parameter keys of a scenario document.
    ///
    /// Run-level keys (`n`, `seed`, ...) are tolerated here; any other key
    /// is an error.
    pub fn validate(doc: &Map<String, Value>) -> Result<Self, ParamError> {
        for key in doc.keys() {
            if !PARAM_KEYS.contains(&key.as_str()) && !SCENARIO_KEYS.contains(&key.as_str()) {
                return Err(ParamError::UnknownKey(key.clone()));
            }
        }
        let k = match doc.get("K") {
            None => DEFAULT_K,
            Some(v) => {
                let k = v.as_u64().ok_or_else(|| wrong_type("K", "a positive integer"))?;
                if k < 1 {
                    return Err(out_of_range("K", ">= 1"));
                }
                k as usize
            }
        };
        let params = ModelParams {
            mu_x: req_f64(doc, "mu_x")?,
            sigma_x: req_f64(doc, "sigma_x")?,
            alpha0: req_vec(doc, "alpha0", k)?,
            alpha1: req_vec(doc, "alpha1", k)?,
            alpha2: req_vec(doc, "alpha2", k)?,
            beta0: req_f64(doc, "beta0")?,
            beta1: req_f64(doc, "beta1")?,
            beta2: req_f64(doc, "beta2")?,
            beta3: req_vec(doc, "beta3", k)?,
            sigma_eta: req_f64(doc, "sigma_eta")?,
            sigma_eps: req_f64(doc, "sigma_eps")?,
            gamma0: req_f64(doc, "gamma0")?,
            gamma1: req_f64(doc, "gamma1")?,
            gamma2: opt_f64(doc, "gamma2")?.unwrap_or(0.0),
            gamma3: req_vec(doc, "gamma3", k)?,
            k,
            p_treat: opt_f64(doc, "p_treat")?.unwrap_or(DEFAULT_P_TREAT),
        };
        params.check()?;
        Ok(params)
    }

    /// Writes every parameter key into `doc`.
    pub fn write_into(&self, doc: &mut Map<String, Value>) {
        let num = |v: f64| Value::Number(Number::from_f64(v).expect("finite parameter"));
        let arr = |v: &[f64]| Value::Array(v.iter().map(|&x| num(x)).collect());
        doc.insert("mu_x".into(), num(self.mu_x));
        doc.insert("sigma_x".into(), num(self.sigma_x));
        doc.insert("alpha0".into(), arr(&self.alpha0));
        doc.insert("alpha1".into(), arr(&self.alpha1));
        doc.insert("alpha2".into(), arr(&self.alpha2));
        doc.insert("beta0".into(), num(self.beta0));
        doc.insert("beta1".into(), num(self.beta1));
        doc.insert("beta2".into(), num(self.beta2));
        doc.insert("beta3".into(), arr(&self.beta3));
        doc.insert("sigma_eta".into(), num(self.sigma_eta));
        doc.insert("sigma_eps".into(), num(self.sigma_eps));
        doc.insert("gamma0".into(), num(self.gamma0));
        doc.insert("gamma1".into(), num(self.gamma1));
        doc.insert("gamma2".into(), num(self.gamma2));
        doc.insert("gamma3".into(), arr(&self.gamma3));
        doc.insert("K".into(), Value::from(self.k as u64));
        doc.insert("p_treat".into(), num(self.p_treat));
    }
}

/// A complete scenario: parameters plus run-level settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub n: usize,
    pub seed: u64,
    pub replicate_count: usize,
    pub label: String,
}

impl ScenarioConfig {
    pub fn new(params: ModelParams, n: usize, seed: u64, label: impl Into<String>) -> Self {
        ScenarioConfig { params, n, seed, replicate_count: 1, label: label.into() }
    }

    pub fn check(&self) -> Result<(), ParamError> {
        self.params.check()?;
        if self.n < 2 {
            return Err(out_of_range("n", ">= 2"));
        }
        if self.replicate_count < 1 {
            return Err(out_of_range("replicate_count", ">= 1"));
        }
        Ok(())
    }

    pub fn validate(doc: &Map<String, Value>) -> Result<Self, ParamError> {
        let params = ModelParams::validate(doc)?;
        let n = doc.get("n").ok_or_else(|| ParamError::MissingKey("n".into()))?;
        let n = n.as_u64().ok_or_else(|| wrong_type("n", "a positive integer"))? as usize;
        let seed = doc.get("seed").ok_or_else(|| ParamError::MissingKey("seed".into()))?;
        let seed = seed.as_u64().ok_or_else(|| wrong_type("seed", "an unsigned 64-bit integer"))?;
        let replicate_count = match doc.get("replicate_count") {
            None => 1,
            Some(v) => v.as_u64().ok_or_else(|| wrong_type("replicate_count", "a positive integer"))? as usize,
        };
        let label = match doc.get("label") {
            None => String::from("unnamed"),
            Some(v) => v.as_str().ok_or_else(|| wrong_type("label", "a string"))?.to_string(),
        };
        let cfg = ScenarioConfig { params, n, seed, replicate_count, label };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ParamError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ParamError::Malformed(e.to_string()))?;
        match value {
            Value::Object(map) => Self::validate(&map),
            _ => Err(ParamError::Malformed("top level must be an object".into())),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut doc = Map::new();
        self.params.write_into(&mut doc);
        doc.insert("n".into(), Value::from(self.n as u64));
        doc.insert("seed".into(), Value::from(self.seed));
        doc.insert("replicate_count".into(), Value::from(self.replicate_count as u64));
        doc.insert("label".into(), Value::from(self.label.clone()));
        Value::Object(doc)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("scenario serializes")
    }
}

fn wrong_type(key: &str, expected: &'static str) -> ParamError {
    ParamError::WrongType { key: key.into(), expected }
}

fn out_of_range(key: &str, constraint: &'static str) -> ParamError {
    ParamError::OutOfRange { key: key.into(), constraint }
}

fn opt_f64(doc: &Map<String, Value>, key: &str) -> Result<Option<f64>, ParamError> {
    match doc.get(key) {
        None => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| wrong_type(key, "a number")),
    }
}

fn req_f64(doc: &Map<String, Value>, key: &str) -> Result<f64, ParamError> {
    opt_f64(doc, key)?.ok_or_else(|| ParamError::MissingKey(key.into()))
}

fn req_vec(doc: &Map<String, Value>, key: &str, k: usize) -> Result<Vec<f64>, ParamError> {
    let arr = doc
        .get(key)
        .ok_or_else(|| ParamError::MissingKey(key.into()))?
        .as_array()
        .ok_or_else(|| wrong_type(key, "an array of numbers"))?;
    let v = arr
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| wrong_type(key, "an array of numbers")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != k {
        return Err(ParamError::LengthMismatch { key: key.into(), len: v.len(), k });
    }
    Ok(v)
}
