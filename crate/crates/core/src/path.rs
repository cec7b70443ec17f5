//! Variance paths on a uniform grid and the pathwise quantities built from
//! them: the functional `X^{alpha,beta,delta}` and the Radon-Nikodym density.
//!
//! Variance values come from exact transitions, so only the time integrals
//! carry discretisation error (trapezoidal rule, `O(h^2)`).
//!
//! The stochastic integral `int sqrt(V) dW_1` never needs its own Brownian
//! increments: integrating the variance SDE gives, pathwise,
//!
//! ```text
//! int_0^t sqrt(V_s) dW_1(s) = (V_t - V_0 - a t + b int_0^t V_s ds) / sqrt(2 sigma)
//! ```

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cir::CirTransition;
use crate::error::{Error, Result};
use crate::model::{FunctionalCoeffs, ModelParams};

/// Summary of one simulated variance path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub t: f64,
    pub n_steps: usize,
    pub v_terminal: f64,
    /// Trapezoidal `int_0^t V ds`.
    pub int_v: f64,
    /// Trapezoidal `int_0^t V^{-1} ds`, when requested.
    pub int_inv_v: Option<f64>,
    pub v_min: f64,
    pub v_max: f64,
}

/// Reusable simulator for one `(params, t, n_steps)` configuration.
#[derive(Debug, Clone)]
pub struct VariancePathSimulator {
    params: ModelParams,
    t: f64,
    n_steps: usize,
    want_inv: bool,
    transition: CirTransition,
}

impl VariancePathSimulator {
    pub fn new(p: &ModelParams, t: f64, n_steps: usize, want_inv: bool) -> Result<Self> {
        let params = p.validated()?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::arg(format!("horizon must be positive, got {t}")));
        }
        if n_steps == 0 {
            return Err(Error::arg("n_steps must be positive"));
        }
        if want_inv {
            params.require_feller("1/V integrals")?;
        }
        let transition = CirTransition::new(&params, t / n_steps as f64)?;
        Ok(VariancePathSimulator {
            params,
            t,
            n_steps,
            want_inv,
            transition,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.transition.dt
    }

    pub fn transition(&self) -> &CirTransition {
        &self.transition
    }

    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PathRecord> {
        let h = self.transition.dt;
        let mut v = self.params.v0;
        let (mut v_min, mut v_max) = (v, v);
        let (mut int_v, mut int_inv) = (0.0, 0.0);
        for _ in 0..self.n_steps {
            let next = self.transition.sample(v, rng)?;
            int_v += 0.5 * h * (v + next);
            if self.want_inv {
                int_inv += 0.5 * h * (1.0 / v + 1.0 / next);
            }
            v_min = v_min.min(next);
            v_max = v_max.max(next);
            v = next;
        }
        Ok(PathRecord {
            t: self.t,
            n_steps: self.n_steps,
            v_terminal: v,
            int_v,
            int_inv_v: self.want_inv.then_some(int_inv),
            v_min,
            v_max,
        })
    }
}

/// Simulates one variance path with `n_steps` exact transitions on `[0, t]`.
pub fn simulate_variance_path<R: Rng + ?Sized>(
    p: &ModelParams,
    t: f64,
    n_steps: usize,
    want_inv: bool,
    rng: &mut R,
) -> Result<PathRecord> {
    VariancePathSimulator::new(p, t, n_steps, want_inv)?.simulate(rng)
}

/// `alpha V_t + beta int V + delta int 1/V` for one path.
pub fn functional_value(rec: &PathRecord, c: &FunctionalCoeffs) -> Result<f64> {
    let mut x = c.alpha * rec.v_terminal + c.beta * rec.int_v;
    if c.delta != 0.0 {
        let inv = rec
            .int_inv_v
            .ok_or_else(|| Error::arg("functional with delta != 0 needs the 1/V integral on the path record"))?;
        x += c.delta * inv;
    }
    Ok(x)
}

/// `int_0^t sqrt(V) dW_1` recovered from the variance SDE.
pub fn stochastic_integral_sqrt_v(v_end: f64, int_v: f64, elapsed: f64, p: &ModelParams) -> f64 {
    (v_end - p.v0 - p.a * elapsed + p.b * int_v) / p.vol_scale()
}

/// Logarithm of the `gamma_1` part of the Radon-Nikodym density.
pub fn log_radon_nikodym_gamma1(rec: &PathRecord, p: &ModelParams) -> f64 {
    if p.lambda == 0.0 {
        return 0.0;
    }
    let m = stochastic_integral_sqrt_v(rec.v_terminal, rec.int_v, rec.t, p);
    -p.lambda * m - 0.5 * p.lambda * p.lambda * rec.int_v
}

/// `exp(-int gamma_1 dW_1 - 1/2 int gamma_1^2 ds)` along a simulated path.
pub fn radon_nikodym_gamma1(rec: &PathRecord, p: &ModelParams) -> f64 {
    log_radon_nikodym_gamma1(rec, p).exp()
}

/// One point of a simulated price path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub t: f64,
    pub s: f64,
    pub v: f64,
}

/// Convenience price path: exact variance, log-Euler price.
///
/// The `W_1` increment of each step is the one implied by the variance
/// transition (drift frozen at the left point), `W_2` is drawn independently.
/// None of the analytic checks in this crate depend on the price path.
pub fn simulate_price_path<R: Rng + ?Sized>(
    p: &ModelParams,
    t: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<Vec<PricePoint>> {
    let sim = VariancePathSimulator::new(p, t, n_steps, false)?;
    let h = sim.dt();
    let rho_bar = (1.0 - p.rho * p.rho).sqrt();
    let mut out = Vec::with_capacity(n_steps + 1);
    let (mut s, mut v) = (p.s0, p.v0);
    out.push(PricePoint { t: 0.0, s, v });
    for k in 1..=n_steps {
        let next = sim.transition().sample(v, rng)?;
        let dw1 = (next - v - (p.a - p.b * v) * h) / (p.vol_scale() * v.sqrt());
        let z2: f64 = StandardNormal.sample(rng);
        let dw2 = z2 * h.sqrt();
        s *= ((p.mu - 0.5 * v) * h + v.sqrt() * (p.rho * dw1 + rho_bar * dw2)).exp();
        v = next;
        out.push(PricePoint { t: k as f64 * h, s, v });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::base;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_path(t: f64) -> PathRecord {
        PathRecord {
            t,
            n_steps: 10,
            v_terminal: 1.0,
            int_v: t,
            int_inv_v: Some(t),
            v_min: 1.0,
            v_max: 1.0,
        }
    }

    #[test]
    fn functional_projections() {
        let rec = PathRecord {
            v_terminal: 1.7,
            ..constant_path(2.0)
        };
        assert_eq!(
            functional_value(&rec, &FunctionalCoeffs::new(1.0, 0.0, 0.0)).unwrap(),
            1.7
        );
        let rec = constant_path(2.0);
        assert_eq!(
            functional_value(&rec, &FunctionalCoeffs::new(0.0, 1.0, 0.0)).unwrap(),
            2.0
        );
        assert_eq!(
            functional_value(&rec, &FunctionalCoeffs::new(1.0, 1.0, 1.0)).unwrap(),
            5.0
        );
    }

    #[test]
    fn functional_requires_inverse_integral() {
        let rec = PathRecord {
            int_inv_v: None,
            ..constant_path(2.0)
        };
        assert!(functional_value(&rec, &FunctionalCoeffs::new(0.0, 1.0, 1.0)).is_err());
        assert!(functional_value(&rec, &FunctionalCoeffs::new(0.0, 1.0, 0.0)).is_ok());
    }

    #[test]
    fn inverse_integral_requires_feller() {
        let p = ModelParams { a: 0.4, ..base() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = simulate_variance_path(&p, 1.0, 10, true, &mut rng).unwrap_err();
        assert_eq!(err.to_string(), "Feller condition a>sigma required for 1/V integrals");
        assert!(simulate_variance_path(&p, 1.0, 10, false, &mut rng).is_ok());
    }

    #[test]
    fn record_invariants_hold() {
        let p = base();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let rec = simulate_variance_path(&p, 3.0, 60, true, &mut rng).unwrap();
            assert!(rec.v_terminal > 0.0 && rec.v_min > 0.0);
            assert!(rec.int_v <= rec.t * rec.v_max * (1.0 + 1e-12));
            assert!(rec.int_v >= rec.t * rec.v_min * (1.0 - 1e-12));
            assert!(rec.int_inv_v.unwrap() > 0.0);
        }
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let p = base();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| simulate_variance_path(&p, 2.0, 50, true, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn density_is_one_without_risk_premium() {
        let p = ModelParams { lambda: 0.0, ..base() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let rec = simulate_variance_path(&p, 5.0, 50, false, &mut rng).unwrap();
            assert_eq!(radon_nikodym_gamma1(&rec, &p), 1.0);
        }
    }

    #[test]
    fn density_positive() {
        let p = ModelParams { lambda: 2.5, ..base() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let rec = simulate_variance_path(&p, 5.0, 50, false, &mut rng).unwrap();
            assert!(radon_nikodym_gamma1(&rec, &p) > 0.0);
        }
    }

    #[test]
    fn price_path_shape() {
        let p = base();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let path = simulate_price_path(&p, 1.0, 100, &mut rng).unwrap();
        assert_eq!(path.len(), 101);
        assert!(path.iter().all(|pt| pt.s > 0.0 && pt.v > 0.0));
        assert!((path[100].t - 1.0).abs() < 1e-12);
    }
}
