//! Exact transition sampling for the square-root diffusion
//! `dV = (a - b V) dt + sqrt(2 sigma V) dW`.
//!
//! Conditionally on `V_s = v`, `V_{s+dt} = c * chi'^2(d, lambda_nc)` with
//!
//! ```text
//! c         = sigma (1 - exp(-b dt)) / (2 b)     (sigma dt / 2 when b = 0)
//! d         = 2 a / sigma
//! lambda_nc = v exp(-b dt) / c
//! ```
//!
//! The noncentral chi-square is drawn as a Poisson mixture of Gamma laws,
//! which is exact for every `d > 0`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Redraw limit for the (floating-point only) event of a zero Gamma draw.
const MAX_REDRAWS: usize = 64;

/// Precomputed constants of the transition over a fixed step `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirTransition {
    pub dt: f64,
    /// Scale factor `c`.
    pub scale: f64,
    /// `exp(-b dt)`.
    pub decay: f64,
    pub dof: f64,
}

impl CirTransition {
    pub fn new(p: &ModelParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::arg(format!("time step must be positive, got {dt}")));
        }
        let bdt = p.b * dt;
        // -expm1(-b dt)/b -> dt as b -> 0
        let one_minus_decay_over_b = if bdt == 0.0 { dt } else { -(-bdt).exp_m1() / p.b };
        Ok(CirTransition {
            dt,
            scale: 0.5 * p.sigma * one_minus_decay_over_b,
            decay: (-bdt).exp(),
            dof: p.degrees_of_freedom(),
        })
    }

    pub fn noncentrality(&self, v: f64) -> f64 {
        v * self.decay / self.scale
    }

    /// Conditional mean `c (d + lambda_nc)`.
    pub fn conditional_mean(&self, v: f64) -> f64 {
        self.scale * (self.dof + self.noncentrality(v))
    }

    /// Conditional variance `c^2 (2 d + 4 lambda_nc)`.
    pub fn conditional_variance(&self, v: f64) -> f64 {
        self.scale * self.scale * (2.0 * self.dof + 4.0 * self.noncentrality(v))
    }

    pub fn sample<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::arg(format!("variance must be positive, got {v}")));
        }
        let nc = self.noncentrality(v);
        for _ in 0..MAX_REDRAWS {
            let x = self.scale * sample_noncentral_chi2(self.dof, nc, rng)?;
            if x > 0.0 {
                return Ok(x);
            }
        }
        Err(Error::Internal(format!(
            "noncentral chi-square with d = {} kept returning 0",
            self.dof
        )))
    }
}

/// Draws `chi'^2(dof, nc)` as `Gamma(dof/2 + N, 2)` with `N ~ Poisson(nc/2)`.
pub fn sample_noncentral_chi2<R: Rng + ?Sized>(dof: f64, nc: f64, rng: &mut R) -> Result<f64> {
    if !(dof > 0.0) || !(nc >= 0.0) || !nc.is_finite() {
        return Err(Error::arg(format!(
            "noncentral chi-square needs dof > 0 and finite nc >= 0, got ({dof}, {nc})"
        )));
    }
    let n = if nc > 0.0 {
        Poisson::new(0.5 * nc)
            .map_err(|e| Error::Internal(format!("poisson({}) : {e}", 0.5 * nc)))?
            .sample(rng)
    } else {
        0.0
    };
    let gamma =
        Gamma::new(0.5 * dof + n, 2.0).map_err(|e| Error::Internal(format!("gamma({}) : {e}", 0.5 * dof + n)))?;
    Ok(gamma.sample(rng))
}

/// One exact step of the variance process from `v` over `dt`.
pub fn cir_step<R: Rng + ?Sized>(v: f64, dt: f64, p: &ModelParams, rng: &mut R) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::arg(format!("variance must be positive, got {v}")));
    }
    CirTransition::new(p, dt)?.sample(v, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::base;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn analytic_conditional_mean() {
        let tr = CirTransition::new(&base(), 1.0).unwrap();
        let expected = 2.0 + (1.0 - 2.0) * (-1.0f64).exp();
        assert!((tr.conditional_mean(1.0) - expected).abs() < 1e-14);
        assert!((expected - 1.632121).abs() < 5e-7);
        assert_eq!(tr.dof, 8.0);
    }

    #[test]
    fn zero_mean_reversion_limit() {
        let p = ModelParams { b: 0.0, ..base() };
        let tr = CirTransition::new(&p, 0.7).unwrap();
        assert_eq!(tr.scale, 0.5 * p.sigma * 0.7);
        assert!((tr.conditional_mean(1.3) - (1.3 + p.a * 0.7)).abs() < 1e-14);
        // continuity in b
        let near = CirTransition::new(&ModelParams { b: 1e-9, ..base() }, 0.7).unwrap();
        assert!((near.scale - tr.scale).abs() < 1e-9);
    }

    #[test]
    fn sample_mean_matches_at_stationary_level() {
        let p = base();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v_bar = p.a / p.b;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| cir_step(v_bar, 0.3, &p, &mut rng).unwrap())
            .collect();
        let (m, var) = moments(&xs);
        let se = (var / xs.len() as f64).sqrt();
        assert!((m - v_bar).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        let p = base();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(cir_step(0.0, 1.0, &p, &mut rng).is_err());
        assert!(cir_step(1.0, 0.0, &p, &mut rng).is_err());
        assert!(cir_step(1.0, -1.0, &p, &mut rng).is_err());
    }

    #[test]
    fn draws_stay_positive_below_feller() {
        // d = 2a/sigma = 0.5 < 2: the origin is attainable in continuous time
        // but the transition law has no atom at zero.
        let p = ModelParams { a: 0.25, ..base() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = 0.2;
        for _ in 0..20_000 {
            v = cir_step(v, 0.05, &p, &mut rng).unwrap();
            assert!(v > 0.0);
        }
    }
}
