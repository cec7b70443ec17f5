//! Empirical exponential decay rates of tail probabilities.

use serde::{Deserialize, Serialize};

use super::stats::{weighted_linear_fit, Z95};
use super::{estimate_prob, sub_seed, Direction, McSettings, ProbEstimate, Speed, TailQuery};
use crate::error::{Error, Result};
use crate::model::{FunctionalCoeffs, ModelParams};
use crate::rate::LimitCgf;

/// `r^2` above which the fitted slope is labelled as the asymptotic regime.
pub const EXPONENTIAL_R2: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub t: f64,
    pub p_hat: f64,
    pub log_p: f64,
    /// Half width of the 95% interval of `log p_hat` (delta method).
    pub ci_half_width: f64,
    pub n_paths: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    /// Fitted slope of `-log p_hat` against `t`.
    pub slope: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub intercept: f64,
    pub exponential_regime: bool,
    pub points: Vec<DecayPoint>,
}

/// Fits the decay rate to `(t, p_hat, n_paths)` triples.
///
/// `log p_hat` is weighted by its delta-method variance `(1 - p)/(n p)`.
/// Any `p_hat` outside `(0, 1)` yields a censoring error.
pub fn decay_slope_from_probabilities(points: &[(f64, f64, u64)]) -> Result<DecayEstimate> {
    let mut ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 4 {
        return Err(Error::arg(format!(
            "decay slope needs at least 4 distinct t values, got {}",
            ts.len()
        )));
    }
    let censored: Vec<f64> = points
        .iter()
        .filter(|&&(_, p, _)| !(p > 0.0 && p < 1.0))
        .map(|&(t, _, _)| t)
        .collect();
    if !censored.is_empty() {
        let n_min = points.iter().map(|p| p.2).min().unwrap_or(1);
        return Err(Error::Censored {
            ts: censored,
            n_paths: n_min,
            floor: 1.0 / n_min as f64,
        });
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut ws = Vec::with_capacity(points.len());
    let mut out = Vec::with_capacity(points.len());
    for &(t, p, n) in points {
        let var = (1.0 - p) / (n as f64 * p);
        xs.push(t);
        ys.push(-p.ln());
        ws.push(1.0 / var);
        out.push(DecayPoint {
            t,
            p_hat: p,
            log_p: p.ln(),
            ci_half_width: Z95 * var.sqrt(),
            n_paths: n,
        });
    }
    let fit = weighted_linear_fit(&xs, &ys, &ws)?;
    Ok(DecayEstimate {
        slope: fit.slope,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        intercept: fit.intercept,
        exponential_regime: fit.r_squared >= EXPONENTIAL_R2,
        points: out,
    })
}

/// Simulates every query and fits the decay rate.
pub fn decay_slope(queries: &[TailQuery], p: &ModelParams) -> Result<DecayEstimate> {
    if let Some(first) = queries.first() {
        let same = |q: &TailQuery| {
            q.coeffs == first.coeffs
                && q.threshold == first.threshold
                && q.direction == first.direction
                && std::mem::discriminant(&q.speed) == std::mem::discriminant(&first.speed)
                && q.n_paths == first.n_paths
        };
        if !queries.iter().all(same) {
            return Err(Error::arg("decay queries must differ in t only"));
        }
    }
    let ests = queries
        .iter()
        .map(|q| estimate_prob(q, p))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<_> = ests.iter().map(|e| (e.t, e.p_hat, e.n_paths)).collect();
    decay_slope_from_probabilities(&pts)
}

/// Empirical decay of `P(X_t/t` beyond `x)` against the rate function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpReport {
    pub coeffs: FunctionalCoeffs,
    pub x: f64,
    /// Tail side: away from the minimiser of the rate function.
    pub direction: Direction,
    /// Infimum of the rate function over the tail set.
    pub theory: f64,
    pub x_min: f64,
    pub points: Vec<ProbEstimate>,
    pub decay: Option<DecayEstimate>,
    pub censored: Option<String>,
    pub relative_deviation: Option<f64>,
    /// `theory <= -log(ci_lo)/t` at the largest horizon.
    pub upper_bound_consistent: Option<bool>,
    pub note: Option<String>,
}

pub fn ldp_check(
    coeffs: &FunctionalCoeffs,
    x: f64,
    t_grid: &[f64],
    s: &McSettings,
    p: &ModelParams,
) -> Result<LdpReport> {
    s.check()?;
    let p = p.validated()?;
    if p.b <= 0.0 {
        return Err(Error::Precondition(vec!["b > 0 required".into()]));
    }
    let cgf = LimitCgf::new(coeffs.beta, coeffs.delta, &p)?;
    let image = cgf.derivative_image()?;
    if !image.interior_contains(x) {
        return Err(Error::OutsideDomain {
            what: "x",
            value: x,
            domain: image.to_string(),
        });
    }
    let min = cgf.minimum()?;
    let direction = if x >= min.x_min {
        Direction::AtLeast
    } else {
        Direction::Below
    };
    let mut report = LdpReport {
        coeffs: *coeffs,
        x,
        direction,
        theory: 0.0,
        x_min: min.x_min,
        points: Vec::new(),
        decay: None,
        censored: None,
        relative_deviation: None,
        upper_bound_consistent: None,
        note: None,
    };
    if (x - min.x_min).abs() <= 1e-9 * x.abs().max(1.0) {
        report.note = Some("zero-rate point; decay check skipped".into());
        return Ok(report);
    }
    report.theory = cgf.legendre(x)?.value.to_f64();

    for (k, &t) in t_grid.iter().enumerate() {
        let q = TailQuery {
            coeffs: *coeffs,
            threshold: x,
            direction,
            t,
            speed: Speed::Linear,
            n_paths: s.n_paths,
            n_steps: s.steps_for(t),
            seed: sub_seed(s.seed, k as u64),
        };
        report.points.push(estimate_prob(&q, &p)?);
    }
    if let Some(last) = report.points.iter().max_by(|a, b| a.t.total_cmp(&b.t)) {
        if last.ci_lo > 0.0 {
            report.upper_bound_consistent = Some(report.theory <= -last.ci_lo.ln() / last.t);
        }
    }
    let pts: Vec<_> = report.points.iter().map(|e| (e.t, e.p_hat, e.n_paths)).collect();
    match decay_slope_from_probabilities(&pts) {
        Ok(d) => {
            report.relative_deviation = Some((d.slope - report.theory) / report.theory);
            report.decay = Some(d);
        }
        Err(e @ Error::Censored { .. }) => report.censored = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(report)
}
