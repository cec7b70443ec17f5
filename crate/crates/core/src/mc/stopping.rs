//! Stopped density experiment at sublinear speed.
//!
//! `tau = t ^ inf{s : lambda^2 int_0^s V >= 2 gamma' f(t)}` is detected on the
//! simulation grid (first grid point at or past the level). The event is
//! `Z_tau >= exp((gamma_bar - gamma) f(t))`, bounded by the Chebyshev term
//! `2 gamma' / ((gamma' - gamma + gamma_bar)^2 f(t))` plus the probability of
//! never reaching the level.

use serde::{Deserialize, Serialize};

use super::stats::pairwise_sum;
use super::{map_paths, path_rng, McSettings, ProbEstimate};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::path::{stochastic_integral_sqrt_v, VariancePathSimulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingReport {
    pub gamma: f64,
    pub gamma_bar: f64,
    pub gamma_prime: f64,
    pub f_of_t: f64,
    pub t: f64,
    pub n_steps: usize,
    /// `P(Z_tau >= exp((gamma_bar - gamma) f))`.
    pub event: ProbEstimate,
    /// `P(|int_0^tau gamma_1 dW_1| >= (gamma' - gamma + gamma_bar) f)`.
    pub deviation: ProbEstimate,
    /// `P(lambda^2 int_0^t V < 2 gamma' f)`: the level is never reached.
    pub not_stopped: ProbEstimate,
    pub chebyshev_bound: f64,
    /// Chebyshev term plus the empirical `not_stopped` probability.
    pub bound: f64,
    /// Bound with the upper confidence limit of `not_stopped`.
    pub bound_upper: f64,
    /// Lower confidence limit of the event does not exceed `bound_upper`.
    pub within_bound: bool,
    pub mean_stopping_time: f64,
}

/// Runs the experiment with `gamma'` midway between `gamma_bar` and `c_1/2`,
/// `c_1 = a lambda^2 / b`.
pub fn stopping_time_experiment(
    gamma: f64,
    gamma_bar: f64,
    f_of_t: f64,
    t: f64,
    s: &McSettings,
    p: &ModelParams,
) -> Result<StoppingReport> {
    let p = p.validated()?;
    if p.b <= 0.0 {
        return Err(Error::Precondition(vec!["b > 0 required".into()]));
    }
    let half_c1 = 0.5 * p.a * p.lambda * p.lambda / p.b;
    if !(gamma_bar < half_c1) {
        return Err(Error::Precondition(vec![format!(
            "gamma_bar = {gamma_bar} must lie below c1/2 = {half_c1}"
        )]));
    }
    stopping_time_with_level(gamma, gamma_bar, 0.5 * (gamma_bar + half_c1), f_of_t, t, s, &p)
}

/// Same experiment with an explicit `gamma'` (no link to `c_1`).
pub fn stopping_time_with_level(
    gamma: f64,
    gamma_bar: f64,
    gamma_prime: f64,
    f_of_t: f64,
    t: f64,
    s: &McSettings,
    p: &ModelParams,
) -> Result<StoppingReport> {
    s.check()?;
    let p = p.validated()?;
    let mut bad = Vec::new();
    if !(gamma > 0.0) {
        bad.push(format!("gamma = {gamma} must be positive"));
    }
    if !(gamma < gamma_bar) {
        bad.push(format!("gamma = {gamma} must be below gamma_bar = {gamma_bar}"));
    }
    if !(gamma_bar < gamma_prime) {
        bad.push(format!("gamma_bar = {gamma_bar} must be below gamma' = {gamma_prime}"));
    }
    if !(f_of_t > 0.0 && f_of_t.is_finite()) {
        bad.push(format!("f(t) = {f_of_t} must be positive"));
    }
    if !bad.is_empty() {
        return Err(Error::Precondition(bad));
    }

    let n_steps = s.steps_for(t);
    let sim = VariancePathSimulator::new(&p, t, n_steps, false)?;
    let tr = *sim.transition();
    let h = tr.dt;
    let lam2 = p.lambda * p.lambda;
    let level = 2.0 * gamma_prime * f_of_t;
    let event_level = (gamma_bar - gamma) * f_of_t;
    let dev_level = (gamma_prime - gamma + gamma_bar) * f_of_t;

    let outcomes = map_paths(s.n_paths, |i| {
        let mut rng = path_rng(s.seed, i);
        let mut v = p.v0;
        let mut int_v = 0.0;
        let mut elapsed = t;
        let mut stopped = false;
        for k in 0..n_steps {
            let next = tr.sample(v, &mut rng)?;
            int_v += 0.5 * h * (v + next);
            v = next;
            if lam2 * int_v >= level {
                elapsed = (k + 1) as f64 * h;
                stopped = true;
                break;
            }
        }
        let m = p.lambda * stochastic_integral_sqrt_v(v, int_v, elapsed, &p);
        let log_z = -m - 0.5 * lam2 * int_v;
        Ok((log_z >= event_level, m.abs() >= dev_level, !stopped, elapsed))
    })?;

    let count = |f: fn(&(bool, bool, bool, f64)) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    let event = ProbEstimate::from_counts(t, count(|o| o.0), s.n_paths);
    let deviation = ProbEstimate::from_counts(t, count(|o| o.1), s.n_paths);
    let not_stopped = ProbEstimate::from_counts(t, count(|o| o.2), s.n_paths);
    let taus: Vec<f64> = outcomes.iter().map(|o| o.3).collect();
    let chebyshev_bound = 2.0 * gamma_prime / ((gamma_prime - gamma + gamma_bar).powi(2) * f_of_t);
    let bound = chebyshev_bound + not_stopped.p_hat;
    let bound_upper = chebyshev_bound + not_stopped.ci_hi;
    Ok(StoppingReport {
        gamma,
        gamma_bar,
        gamma_prime,
        f_of_t,
        t,
        n_steps,
        within_bound: event.ci_lo <= bound_upper,
        event,
        deviation,
        not_stopped,
        chebyshev_bound,
        bound,
        bound_upper,
        mean_stopping_time: pairwise_sum(&taus) / s.n_paths as f64,
    })
}
