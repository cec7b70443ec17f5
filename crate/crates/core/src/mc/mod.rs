//! Parallel Monte Carlo over variance paths.
//!
//! Path `i` of an experiment with seed `s` draws from ChaCha8 seeded with `s`
//! on stream `i`, and float reductions run over the index-ordered results with
//! [`stats::pairwise_sum`]. Outputs are therefore bit-identical for any
//! number of worker threads.

pub mod decay;
pub mod stats;
pub mod stopping;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mgf::log_mgf_alpha_beta;
use crate::model::{FunctionalCoeffs, ModelParams};
use crate::path::{functional_value, log_radon_nikodym_gamma1, VariancePathSimulator};

use stats::{variance_estimate, wilson_interval, MeanEstimate, Z95};

pub use decay::{decay_slope, decay_slope_from_probabilities, ldp_check, DecayEstimate, DecayPoint, LdpReport};
pub use stopping::{stopping_time_experiment, stopping_time_with_level, StoppingReport};

/// Minimum number of paths accepted by the tail estimator.
pub const MIN_PATHS: u64 = 100;

/// Random stream of path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derived seed for the `tag`-th sub-experiment (splitmix64 finaliser).
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps every path index through `f` in parallel, keeping index order.
pub(crate) fn map_paths<T, F>(n_paths: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n_paths).into_par_iter().map(f).collect()
}

/// Grid resolution shared by the harness operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub n_paths: u64,
    pub steps_per_unit: f64,
    pub seed: u64,
}

impl McSettings {
    pub fn steps_for(&self, t: f64) -> usize {
        ((t * self.steps_per_unit).ceil() as usize).max(1)
    }

    fn check(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::arg("n_paths must be positive"));
        }
        if !(self.steps_per_unit > 0.0 && self.steps_per_unit.is_finite()) {
            return Err(Error::arg("steps_per_unit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtLeast,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Speed {
    Linear,
    Custom { f_of_t: f64 },
}

/// Event `{X_t / f(t) >= threshold}` or `{X_t / f(t) < threshold}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailQuery {
    pub coeffs: FunctionalCoeffs,
    pub threshold: f64,
    pub direction: Direction,
    pub t: f64,
    pub speed: Speed,
    pub n_paths: u64,
    pub n_steps: usize,
    pub seed: u64,
}

impl TailQuery {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_paths < MIN_PATHS {
            bad.push(format!("n_paths must be at least {MIN_PATHS}, got {}", self.n_paths));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            bad.push(format!("t must be positive, got {}", self.t));
        }
        if self.n_steps == 0 {
            bad.push("n_steps must be positive".into());
        }
        if let Speed::Custom { f_of_t } = self.speed {
            if !(f_of_t > 0.0 && f_of_t.is_finite()) {
                bad.push(format!("f_of_t must be positive, got {f_of_t}"));
            }
        }
        if self.threshold.is_nan() {
            bad.push("threshold must not be NaN".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(bad))
        }
    }

    fn scale(&self) -> f64 {
        match self.speed {
            Speed::Linear => self.t,
            Speed::Custom { f_of_t } => f_of_t,
        }
    }

    fn hit(&self, x: f64) -> bool {
        let v = x / self.scale();
        match self.direction {
            Direction::AtLeast => v >= self.threshold,
            Direction::Below => v < self.threshold,
        }
    }
}

/// Estimated probability with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub t: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub successes: u64,
    pub n_paths: u64,
}

impl ProbEstimate {
    pub fn from_counts(t: f64, successes: u64, n_paths: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(successes, n_paths, Z95);
        ProbEstimate {
            t,
            p_hat: successes as f64 / n_paths as f64,
            ci_lo,
            ci_hi,
            successes,
            n_paths,
        }
    }
}

pub fn estimate_prob(q: &TailQuery, p: &ModelParams) -> Result<ProbEstimate> {
    q.validate()?;
    let sim = VariancePathSimulator::new(p, q.t, q.n_steps, q.coeffs.needs_inverse_integral())?;
    let hits = map_paths(q.n_paths, |i| {
        let rec = sim.simulate(&mut path_rng(q.seed, i))?;
        Ok(u64::from(q.hit(functional_value(&rec, &q.coeffs)?)))
    })?;
    Ok(ProbEstimate::from_counts(q.t, hits.iter().sum(), q.n_paths))
}

/// Time averages against their ergodic limits, plus the terminal law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub t: f64,
    pub n_paths: u64,
    pub n_steps: usize,
    /// `int V / t` against `a / b`.
    pub avg_v: MeanEstimate,
    pub target_avg_v: f64,
    /// `int 1/V / t` against `b / (a - sigma)`; absent without the Feller condition.
    pub avg_inv_v: Option<MeanEstimate>,
    pub target_avg_inv_v: Option<f64>,
    /// Terminal mean and variance against the Gamma(a/sigma, sigma/b) moments.
    pub terminal_mean: MeanEstimate,
    pub target_terminal_mean: f64,
    pub terminal_variance: MeanEstimate,
    pub target_terminal_variance: f64,
}

pub fn ergodic_check(t: f64, s: &McSettings, p: &ModelParams) -> Result<ErgodicReport> {
    s.check()?;
    let p = p.validated()?;
    if p.b <= 0.0 {
        return Err(Error::Precondition(vec!["b > 0 required for ergodic averages".into()]));
    }
    let want_inv = p.feller_strict();
    let n_steps = s.steps_for(t);
    let sim = VariancePathSimulator::new(&p, t, n_steps, want_inv)?;
    let recs = map_paths(s.n_paths, |i| sim.simulate(&mut path_rng(s.seed, i)))?;
    let avg_v: Vec<f64> = recs.iter().map(|r| r.int_v / t).collect();
    let terminal: Vec<f64> = recs.iter().map(|r| r.v_terminal).collect();
    let avg_inv_v = want_inv.then(|| {
        let xs: Vec<f64> = recs.iter().map(|r| r.int_inv_v.unwrap_or(f64::NAN) / t).collect();
        MeanEstimate::from_samples(&xs)
    });
    Ok(ErgodicReport {
        t,
        n_paths: s.n_paths,
        n_steps,
        avg_v: MeanEstimate::from_samples(&avg_v),
        target_avg_v: p.a / p.b,
        avg_inv_v,
        target_avg_inv_v: want_inv.then(|| p.b / (p.a - p.sigma)),
        terminal_mean: MeanEstimate::from_samples(&terminal),
        target_terminal_mean: p.a / p.b,
        terminal_variance: variance_estimate(&terminal),
        target_terminal_variance: p.a * p.sigma / (p.b * p.b),
    })
}

/// Monte Carlo mean of the `gamma_1` density against one and its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub t: f64,
    pub lambda: f64,
    pub n_paths: u64,
    pub n_steps: usize,
    pub mc: MeanEstimate,
    pub z_vs_one: f64,
    pub closed_form: Option<f64>,
    /// Reason the closed form is unavailable (for instance an exploding MGF).
    pub closed_form_error: Option<String>,
    pub z_vs_closed_form: Option<f64>,
    /// `1 - mean` when the mean falls below one by more than three standard errors.
    pub supermartingale_deficit: Option<f64>,
}

/// `E[Z_t]` from the MGF of `(-lambda/k) V_t + (-b lambda/k - lambda^2/2) int V`.
pub fn density_expectation(t: f64, p: &ModelParams) -> Result<f64> {
    let k = p.vol_scale();
    let lam = p.lambda;
    let shift = lam * p.v0 / k + p.a * lam * t / k;
    let lm = log_mgf_alpha_beta(-lam / k, -p.b * lam / k - 0.5 * lam * lam, t, p)?;
    Ok((shift + lm).exp())
}

pub fn martingale_check(t: f64, s: &McSettings, p: &ModelParams) -> Result<MartingaleReport> {
    s.check()?;
    let p = p.validated()?;
    let n_steps = s.steps_for(t);
    let sim = VariancePathSimulator::new(&p, t, n_steps, false)?;
    let zs = map_paths(s.n_paths, |i| {
        let rec = sim.simulate(&mut path_rng(s.seed, i))?;
        Ok(log_radon_nikodym_gamma1(&rec, &p).exp())
    })?;
    let mc = MeanEstimate::from_samples(&zs);
    let (closed_form, closed_form_error) = match density_expectation(t, &p) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let deficit = 1.0 - mc.mean;
    Ok(MartingaleReport {
        t,
        lambda: p.lambda,
        n_paths: s.n_paths,
        n_steps,
        z_vs_one: mc.z_score(1.0),
        z_vs_closed_form: closed_form.map(|c| mc.z_score(c)),
        closed_form,
        closed_form_error,
        supermartingale_deficit: (deficit > 3.0 * mc.stderr).then_some(deficit),
        mc,
    })
}
