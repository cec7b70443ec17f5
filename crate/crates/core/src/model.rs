//! Model coefficients of the Heston system
//!
//! ```text
//! dS_t / S_t = mu dt + sqrt(V_t) (rho dW_1 + sqrt(1 - rho^2) dW_2)
//! dV_t       = (a - b V_t) dt + sqrt(2 sigma V_t) dW_1
//! ```
//!
//! together with the risk parameter `lambda` that selects one equivalent
//! martingale measure through the Girsanov kernels
//! `gamma_1 = lambda sqrt(V)` and
//! `gamma_2 = ((mu - r)/sqrt(V) - lambda rho sqrt(V)) / sqrt(1 - rho^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub r: f64,
    /// Variance drift level.
    pub a: f64,
    /// Mean-reversion speed; `b <= 0` is allowed (non-ergodic variance).
    pub b: f64,
    /// Diffusion coefficient: the variance noise is `sqrt(2 sigma V)`.
    pub sigma: f64,
    pub rho: f64,
    pub v0: f64,
    pub s0: f64,
    pub lambda: f64,
}

impl ModelParams {
    /// Returns `self` unchanged when every constraint holds, otherwise an
    /// error listing every violated constraint.
    pub fn validated(self) -> Result<Self> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(violations))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = [
            ("mu", self.mu),
            ("r", self.r),
            ("a", self.a),
            ("b", self.b),
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("v0", self.v0),
            ("s0", self.s0),
            ("lambda", self.lambda),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                out.push(format!("{name} must be finite"));
            }
        }
        if !(self.a > 0.0) {
            out.push("a must be positive".to_string());
        }
        if !(self.sigma > 0.0) {
            out.push("sigma must be positive".to_string());
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            out.push("rho out of (-1,1)".to_string());
        }
        if !(self.v0 > 0.0) {
            out.push("v0 must be positive".to_string());
        }
        if !(self.s0 > 0.0) {
            out.push("s0 must be positive".to_string());
        }
        out
    }

    /// Strict Feller condition `a > sigma`.
    pub fn feller_strict(&self) -> bool {
        self.a > self.sigma
    }

    /// Degrees of freedom `2a/sigma` of the exact transition law.
    pub fn degrees_of_freedom(&self) -> f64 {
        2.0 * self.a / self.sigma
    }

    /// `sqrt(2 sigma)`, the volatility of variance per unit `sqrt(V)`.
    pub fn vol_scale(&self) -> f64 {
        (2.0 * self.sigma).sqrt()
    }

    pub fn excess_return(&self) -> f64 {
        self.mu - self.r
    }

    pub(crate) fn require_feller(&self, what: &'static str) -> Result<()> {
        if self.feller_strict() {
            Ok(())
        } else {
            Err(Error::FellerRequired(what))
        }
    }
}

/// Selects the path functional
/// `X_t = alpha V_t + beta int_0^t V ds + delta int_0^t V^{-1} ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl FunctionalCoeffs {
    pub const fn new(alpha: f64, beta: f64, delta: f64) -> Self {
        FunctionalCoeffs { alpha, beta, delta }
    }

    pub fn needs_inverse_integral(&self) -> bool {
        self.delta != 0.0
    }
}

/// Girsanov kernels `(gamma_1, gamma_2)` evaluated at variance level `v`.
pub fn girsanov_kernels(v: f64, p: &ModelParams) -> Result<(f64, f64)> {
    if !(v > 0.0) {
        return Err(Error::arg(format!("variance level must be positive, got {v}")));
    }
    let sv = v.sqrt();
    let gamma1 = p.lambda * sv;
    let gamma2 = (p.excess_return() / sv - p.lambda * p.rho * sv) / (1.0 - p.rho * p.rho).sqrt();
    Ok((gamma1, gamma2))
}
