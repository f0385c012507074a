//! Potential-outcome data generation and the observed-data projection.
//!
//! Each subject carries both arms' intermediates, outcomes and adherence
//! sequences. Subject `id` draws from its own counter-based stream in a fixed
//! order: `x`, the arm assignment, `eta[0][..]`, `eta[1][..]`, `eps[0]`,
//! `eps[1]`, then the adherence uniforms `u[0][..]`, `u[1][..]`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::math::{fmt17, logistic};
use crate::params::{ModelParams, ScenarioConfig};
use crate::rng::{Domain, StreamFamily};

/// One simulated subject with both potential-outcome blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: u64,
    pub x: f64,
    /// Assigned arm, 0 or 1.
    pub t_assigned: usize,
    /// `z[t][k]`: intermediate at visit `k` under arm `t`.
    pub z: [Vec<f64>; 2],
    pub eta: [Vec<f64>; 2],
    pub eps: [f64; 2],
    pub y: [f64; 2],
    /// `a_seq[t][k]`: still adherent right after visit `k` under arm `t`.
    pub a_seq: [Vec<bool>; 2],
    /// Overall adherence under each arm.
    pub a: [bool; 2],
}

impl SubjectRecord {
    /// Individual effect `y(1) - y(0)`.
    pub fn effect(&self) -> f64 {
        self.y[1] - self.y[0]
    }
}

/// The trial-visible view of a subject under its assigned arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedRecord {
    pub id: u64,
    pub x: f64,
    pub t_assigned: usize,
    /// `z_obs[k]` is present iff the subject was still adherent after visit
    /// `k - 1`; the first visit is always observed.
    pub z_obs: Vec<Option<f64>>,
    pub a_obs: bool,
    pub y_obs: Option<f64>,
}

impl ObservedRecord {
    /// Adherence indicator right after visit `k`, recovered from the
    /// missingness pattern, or `None` if the subject was not at risk.
    pub fn adherence_at(&self, k: usize) -> Option<bool> {
        self.z_obs[k]?;
        if k + 1 < self.z_obs.len() {
            Some(self.z_obs[k + 1].is_some())
        } else {
            Some(self.a_obs)
        }
    }
}

pub fn intermediate(p: &ModelParams, x: f64, t: usize, k: usize, eta: f64) -> f64 {
    p.alpha0[k] + p.alpha1[k] * x + p.alpha2[k] * t as f64 + eta
}

pub fn outcome(p: &ModelParams, x: f64, t: usize, z: &[f64], eps: f64) -> f64 {
    let mut y = p.beta0 + p.beta1 * x + p.beta2 * t as f64;
    for (b, zk) in p.beta3.iter().zip(z) {
        y += b * zk;
    }
    y + eps
}

/// Probability of staying adherent after visit `k` given adherence so far.
pub fn adherence_probability(p: &ModelParams, x: f64, t: usize, k: usize, z: f64) -> f64 {
    logistic(p.gamma0 + p.gamma2 * t as f64 + p.gamma1 * x + p.gamma3[k] * z)
}

/// Subject streams for a seed.
pub fn subject_streams(seed: u64) -> StreamFamily {
    StreamFamily::new(seed, Domain::Subject)
}

/// Simulates one subject from its own stream.
pub fn simulate_subject(p: &ModelParams, streams: &StreamFamily, id: u64) -> SubjectRecord {
    let mut rng = streams.stream(id);
    let k_max = p.k;
    let x = p.mu_x + p.sigma_x * rng.sample::<f64, _>(StandardNormal);
    let t_assigned = usize::from(rng.random::<f64>() < p.p_treat);
    let mut eta = [Vec::with_capacity(k_max), Vec::with_capacity(k_max)];
    for arm in eta.iter_mut() {
        for _ in 0..k_max {
            arm.push(p.sigma_eta * rng.sample::<f64, _>(StandardNormal));
        }
    }
    let mut eps = [0.0; 2];
    for e in eps.iter_mut() {
        *e = p.sigma_eps * rng.sample::<f64, _>(StandardNormal);
    }
    let mut z: [Vec<f64>; 2] = [Vec::with_capacity(k_max), Vec::with_capacity(k_max)];
    let mut y = [0.0; 2];
    let mut a_seq: [Vec<bool>; 2] = [Vec::with_capacity(k_max), Vec::with_capacity(k_max)];
    let mut a = [false; 2];
    for t in 0..2 {
        for k in 0..k_max {
            z[t].push(intermediate(p, x, t, k, eta[t][k]));
        }
        y[t] = outcome(p, x, t, &z[t], eps[t]);
    }
    for t in 0..2 {
        let mut still = true;
        for k in 0..k_max {
            let u: f64 = rng.random();
            still = still && u < adherence_probability(p, x, t, k, z[t][k]);
            a_seq[t].push(still);
        }
        a[t] = still;
    }
    SubjectRecord { id, x, t_assigned, z, eta, eps, y, a_seq, a }
}

/// Generates `config.n` subjects with ids `0..n`.
///
/// The result depends only on `(seed, params, n)`; it is identical for any
/// rayon pool size.
pub fn generate(config: &ScenarioConfig) -> Vec<SubjectRecord> {
    generate_with(&config.params, config.n, config.seed)
}

pub fn generate_with(params: &ModelParams, n: usize, seed: u64) -> Vec<SubjectRecord> {
    let streams = subject_streams(seed);
    (0..n as u64).into_par_iter().map(|id| simulate_subject(params, &streams, id)).collect()
}

/// Projects subjects onto their assigned arm.
pub fn observe(records: &[SubjectRecord], keep_y_after_dropout: bool) -> Vec<ObservedRecord> {
    records.par_iter().map(|r| observe_one(r, keep_y_after_dropout)).collect()
}

pub fn observe_one(r: &SubjectRecord, keep_y_after_dropout: bool) -> ObservedRecord {
    let t = r.t_assigned;
    let z_obs = (0..r.z[t].len())
        .map(|k| if k == 0 || r.a_seq[t][k - 1] { Some(r.z[t][k]) } else { None })
        .collect();
    let a_obs = r.a[t];
    ObservedRecord {
        id: r.id,
        x: r.x,
        t_assigned: t,
        z_obs,
        a_obs,
        y_obs: (a_obs || keep_y_after_dropout).then_some(r.y[t]),
    }
}

pub fn subjects_header(k: usize) -> Vec<String> {
    let mut h = vec!["id".to_string(), "x".into(), "t".into()];
    for t in 0..2 {
        h.extend((1..=k).map(|j| format!("z{t}_{j}")));
    }
    h.push("y0".into());
    h.push("y1".into());
    for t in 0..2 {
        h.extend((1..=k).map(|j| format!("a{t}_{j}")));
    }
    h.push("a0".into());
    h.push("a1".into());
    h
}

pub fn observed_header(k: usize) -> Vec<String> {
    let mut h = vec!["id".to_string(), "x".into(), "t".into()];
    h.extend((1..=k).map(|j| format!("z_{j}")));
    h.push("a".into());
    h.push("y".into());
    h
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

pub fn write_subjects_csv<W: Write>(records: &[SubjectRecord], k: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(subjects_header(k))?;
    for r in records {
        let mut row = vec![r.id.to_string(), fmt17(r.x), r.t_assigned.to_string()];
        for t in 0..2 {
            row.extend(r.z[t].iter().map(|&v| fmt17(v)));
        }
        row.push(fmt17(r.y[0]));
        row.push(fmt17(r.y[1]));
        for t in 0..2 {
            row.extend(r.a_seq[t].iter().map(|&b| flag(b)));
        }
        row.push(flag(r.a[0]));
        row.push(flag(r.a[1]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_observed_csv<W: Write>(records: &[ObservedRecord], k: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(observed_header(k))?;
    for r in records {
        let mut row = vec![r.id.to_string(), fmt17(r.x), r.t_assigned.to_string()];
        row.extend(r.z_obs.iter().map(|z| z.map(fmt17).unwrap_or_default()));
        row.push(flag(r.a_obs));
        row.push(r.y_obs.map(fmt17).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
