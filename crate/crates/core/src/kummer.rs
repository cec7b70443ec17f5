//! Kummer's confluent hypergeometric function `1F1(u; v; z)`.

use crate::error::{Error, Result};

/// Largest `|z|` accepted by the series.
pub const SERIES_Z_CAP: f64 = 50.0;
const MAX_TERMS: usize = 10_000;
const REL_TOL: f64 = 1e-15;

/// `sum_n (u)_n / (v)_n * z^n / n!`.
///
/// Negative arguments go through Kummer's transformation
/// `1F1(u; v; z) = e^z 1F1(v - u; v; -z)` so the summed series never
/// alternates for positive parameters.
pub fn kummer_1f1(u: f64, v: f64, z: f64) -> Result<f64> {
    if !(u.is_finite() && v.is_finite() && z.is_finite()) {
        return Err(Error::arg(format!("1F1 arguments must be finite, got ({u}, {v}, {z})")));
    }
    if v <= 0.0 && v == v.floor() {
        return Err(Error::arg(format!(
            "1F1 lower parameter must not be a nonpositive integer, got {v}"
        )));
    }
    if z.abs() > SERIES_Z_CAP {
        return Err(Error::SeriesCap(z.abs()));
    }
    if z < 0.0 {
        Ok(z.exp() * series(v - u, v, -z)?)
    } else {
        series(u, v, z)
    }
}

/// `ln 1F1(u; v; z)` for `z >= 0` and `u, v > 0`, where the series is positive.
pub fn ln_kummer_1f1(u: f64, v: f64, z: f64) -> Result<f64> {
    let f = kummer_1f1(u, v, z)?;
    if !(f > 0.0) {
        return Err(Error::Internal(format!("1F1({u}; {v}; {z}) = {f} is not positive")));
    }
    Ok(f.ln())
}

fn series(u: f64, v: f64, z: f64) -> Result<f64> {
    let mut sum = 1.0;
    let mut term = 1.0;
    for n in 0..MAX_TERMS {
        let k = n as f64;
        term *= (u + k) / (v + k) * z / (k + 1.0);
        sum += term;
        if term == 0.0 || term.abs() < REL_TOL * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Internal(format!(
        "1F1({u}; {v}; {z}) series did not converge in {MAX_TERMS} terms"
    )))
}
