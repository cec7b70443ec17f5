//! Order-stable reductions, binomial intervals and weighted regression.

use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

const PAIRWISE_LEAF: usize = 16;

/// Pairwise (cascade) summation with a fixed split, so the result depends
/// only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 {
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            n: n as u64,
        }
    }

    /// `(mean - target) / stderr`; zero when both coincide exactly.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }

    pub fn within(&self, target: f64, k_se: f64) -> bool {
        (self.mean - target).abs() <= k_se * self.stderr
    }
}

/// Sample variance with a standard error from the fourth central moment.
pub fn variance_estimate(xs: &[f64]) -> MeanEstimate {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let d2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let d4: Vec<f64> = xs.iter().map(|x| (x - mean).powi(4)).collect();
    let m2 = pairwise_sum(&d2) / n;
    let m4 = pairwise_sum(&d4) / n;
    MeanEstimate {
        mean: m2 * n / (n - 1.0),
        stderr: ((m4 - m2 * m2) / n).max(0.0).sqrt(),
        n: xs.len() as u64,
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Inflated by `sqrt(reduced chi^2)` when that exceeds one.
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub reduced_chi2: f64,
}

/// Weighted least squares `y = intercept + slope x` with weights `1/var`.
pub fn weighted_linear_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n || ws.len() != n {
        return Err(Error::arg("regression needs at least two points of matching length"));
    }
    if ws.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::arg("regression weights must be positive and finite"));
    }
    let sw: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ybar = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - xbar;
        let dy = ys[i] - ybar;
        sxx += ws[i] * dx * dx;
        sxy += ws[i] * dx * dy;
        syy += ws[i] * dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::arg("regression needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = (0..n)
        .map(|i| ws[i] * (ys[i] - intercept - slope * xs[i]).powi(2))
        .sum();
    let reduced_chi2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    let r_squared = if syy > 0.0 {
        (1.0 - rss / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let slope_stderr = (1.0 / sxx).sqrt() * reduced_chi2.max(1.0).sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
        reduced_chi2,
    })
}
