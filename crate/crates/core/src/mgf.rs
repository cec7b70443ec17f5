//! Finite-horizon moment generating functions of the variance functionals.
//!
//! Two closed forms:
//!
//! * Riccati form for `alpha V_t + beta int V`. With `lambda = -alpha`,
//!   `mu = -beta`, `chi = sqrt(b^2 + 4 sigma mu)`, `g = (1 - e^{-chi t}) / chi`
//!   and `Den = (2 sigma lambda + b - chi) g + 2`,
//!
//!   ```text
//!   phi = -(1/sigma) (ln 2 + t (b - chi)/2 - ln Den)
//!   psi = (lambda (2 - chi g) - lambda b g + 2 mu g) / Den
//!   log E[exp(alpha V_t + beta int V)] = -a phi - psi V_0
//!   ```
//!
//!   The MGF is finite on `[0, t]` iff `Den(t) > 0` (`Den` is monotone in `t`).
//!
//! * Confluent-hypergeometric form for `u (alpha V_t + beta int V + delta int 1/V)`,
//!   obtained by changing the drift `b -> A = sqrt(b^2 - 4 sigma beta u)` and the
//!   Bessel index `nu_0 = (a - sigma)/sigma -> theta = sqrt((a - sigma)^2 - 4 sigma delta u)/sigma`.
//!   The remaining expectation of a power of `V_t` times `exp(s V_t)` under the
//!   new law is a `1F1` moment of a scaled noncentral chi-square. All factors
//!   are kept in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kummer::ln_kummer_1f1;
use crate::model::{FunctionalCoeffs, ModelParams};
use crate::rate::LimitCgf;

/// Which denominator to use for `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiDenominator {
    /// Same denominator as `phi`.
    #[default]
    Corrected,
    /// Last term `(chi - b)` instead of `(chi + b)`, evaluated literally even
    /// where it turns negative; kept for regression tests.
    AsPrinted,
}

/// `log E[exp(alpha V_t + beta int_0^t V ds)]`.
pub fn log_mgf_alpha_beta(alpha: f64, beta: f64, t: f64, p: &ModelParams) -> Result<f64> {
    log_mgf_alpha_beta_with(alpha, beta, t, p, PsiDenominator::Corrected)
}

pub fn log_mgf_alpha_beta_with(alpha: f64, beta: f64, t: f64, p: &ModelParams, variant: PsiDenominator) -> Result<f64> {
    let p = p.validated()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::arg(format!("horizon must be positive, got {t}")));
    }
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(Error::arg("alpha and beta must be finite"));
    }
    if alpha == 0.0 && beta == 0.0 {
        return Ok(0.0);
    }
    let (a, b, s) = (p.a, p.b, p.sigma);
    let lam = -alpha;
    let mu = -beta;
    let chi2 = b * b + 4.0 * s * mu;
    if chi2 < 0.0 {
        return Err(Error::ComplexArgument(format!(
            "b^2 - 4 sigma beta = {chi2} < 0 for beta = {beta}"
        )));
    }
    let chi = chi2.sqrt();
    let g = if chi * t == 0.0 { t } else { -(-chi * t).exp_m1() / chi };
    let den = (2.0 * s * lam + b - chi) * g + 2.0;
    if !(den > 0.0) {
        return Err(Error::MgfExplodes { t });
    }
    let phi = -(std::f64::consts::LN_2 + 0.5 * t * (b - chi) - den.ln()) / s;
    let numer = lam * (2.0 - chi * g) - lam * b * g + 2.0 * mu * g;
    let psi_den = match variant {
        PsiDenominator::Corrected => den,
        PsiDenominator::AsPrinted => {
            if chi == 0.0 {
                return Err(Error::arg("printed psi denominator is undefined for chi = 0"));
            }
            den - 2.0 * b / chi
        }
    };
    if psi_den == 0.0 {
        return Err(Error::MgfExplodes { t });
    }
    let psi = numer / psi_den;
    Ok(-a * phi - psi * p.v0)
}

/// `log E[exp(u X_t)]` request for the full functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfQuery {
    pub coeffs: FunctionalCoeffs,
    pub t: f64,
    pub u: f64,
}

/// `log E[exp(u (alpha V_t + beta int V + delta int 1/V))]` for `b != 0`.
pub fn log_mgf_full(q: &MgfQuery, p: &ModelParams) -> Result<f64> {
    let p = p.validated()?;
    let MgfQuery { coeffs, t, u } = *q;
    let FunctionalCoeffs { alpha, beta, delta } = coeffs;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::arg(format!("horizon must be positive, got {t}")));
    }
    if !(u.is_finite() && alpha.is_finite() && beta.is_finite() && delta.is_finite()) {
        return Err(Error::arg("query values must be finite"));
    }
    if p.b == 0.0 {
        return Err(Error::Unsupported(
            "finite-horizon mgf with b = 0; use the b=0 branch of cgf_limit only".into(),
        ));
    }
    if delta != 0.0 {
        p.require_feller("functionals with delta != 0")?;
    }
    if u == 0.0 || (alpha == 0.0 && beta == 0.0 && delta == 0.0) {
        return Ok(0.0);
    }
    let (a, b, s) = (p.a, p.b, p.sigma);

    let q_arg = b * b - 4.0 * s * beta * u;
    if q_arg < 0.0 {
        return Err(Error::ComplexArgument(format!("b^2 - 4 sigma beta u = {q_arg} < 0")));
    }
    let nu0 = (a - s) / s;
    let theta = if delta == 0.0 {
        nu0
    } else {
        let p_arg = (a - s) * (a - s) - 4.0 * s * delta * u;
        if p_arg < 0.0 {
            return Err(Error::ComplexArgument(format!(
                "(a - sigma)^2 - 4 sigma delta u = {p_arg} < 0"
            )));
        }
        p_arg.sqrt() / s
    };
    let big_a = q_arg.sqrt();
    let y = 2.0 * p.v0 / s;
    let half_gap = 0.5 * (theta - nu0);
    let k0 = theta + 1.0;

    let c = if big_a * t == 0.0 {
        t
    } else {
        -(-big_a * t).exp_m1() / big_a
    };
    let lambda_nc = y * (-big_a * t).exp() / c;
    let shift = 0.5 * u * alpha * s + 0.25 * (big_a - b);
    let one_minus = 1.0 - 2.0 * shift * c;
    if !(one_minus > 0.0) {
        return Err(Error::MgfExplodes { t });
    }
    let z = lambda_nc / (2.0 * one_minus);

    let mut out = -half_gap * b * t;
    if half_gap != 0.0 {
        out += half_gap * (y.ln() - (2.0 * c).ln());
    }
    out -= 0.25 * (big_a - b) * (y + (2.0 * theta + 2.0) * t);
    out += (half_gap - k0) * one_minus.ln();
    out -= 0.5 * lambda_nc;
    out += libm::lgamma(k0 - half_gap) - libm::lgamma(k0);
    out += ln_kummer_1f1(k0 - half_gap, k0, z)?;
    Ok(out)
}

/// `|t^{-1} log E[exp(u X_t)] - L(u)|` on a grid of horizons.
pub fn convergence_gap(u: f64, coeffs: &FunctionalCoeffs, t_grid: &[f64], p: &ModelParams) -> Result<Vec<(f64, f64)>> {
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::arg("t_grid must be strictly increasing"));
    }
    let limit = LimitCgf::new(coeffs.beta, coeffs.delta, p)?.value(u)?;
    t_grid
        .iter()
        .map(|&t| {
            let lm = if coeffs.delta == 0.0 {
                log_mgf_alpha_beta(u * coeffs.alpha, u * coeffs.beta, t, p)?
            } else {
                log_mgf_full(&MgfQuery { coeffs: *coeffs, t, u }, p)?
            };
            Ok((t, (lm / t - limit).abs()))
        })
        .collect()
}
