//! Limiting cumulant generating functions of `X^{alpha,beta,delta}_t / t`
//! and their Fenchel-Legendre transforms.
//!
//! With `P(u) = (a - sigma)^2 - 4 sigma delta u` and `Q(u) = b^2 - 4 sigma beta u`:
//!
//! ```text
//! delta != 0:  L(u) = a b / (2 sigma) - sqrt(P Q) / (2 sigma) - sqrt(Q) / 2
//! delta == 0:  L(u) = a / (2 sigma) * (b - sqrt(Q))
//! ```
//!
//! on the effective domain where both square-root arguments are nonnegative
//! (the `b = 0` case uses the same expressions). Neither depends on `alpha`.
//!
//! For `b < 0` the formulas give `L(0) = a b / sigma != 0`; they are evaluated
//! as written and no zero-at-origin property is claimed there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{DomainInterval, ExtendedReal};
use crate::model::ModelParams;

const MAX_ROOT_ITERATIONS: usize = 200;
const ROOT_TOL: f64 = 1e-12;

/// The limiting CGF for one `(beta, delta)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCgf {
    beta: f64,
    delta: f64,
    a: f64,
    b: f64,
    sigma: f64,
    domain: DomainInterval,
}

impl LimitCgf {
    pub fn new(beta: f64, delta: f64, p: &ModelParams) -> Result<Self> {
        let p = p.validated()?;
        if !beta.is_finite() || !delta.is_finite() {
            return Err(Error::arg("functional coefficients must be finite"));
        }
        if delta != 0.0 {
            p.require_feller("functionals with delta != 0")?;
        }
        let mut cgf = LimitCgf {
            beta,
            delta,
            a: p.a,
            b: p.b,
            sigma: p.sigma,
            domain: DomainInterval::real_line(),
        };
        cgf.domain = cgf.compute_domain();
        Ok(cgf)
    }

    pub fn domain(&self) -> DomainInterval {
        self.domain
    }

    fn beta_edge(&self) -> f64 {
        self.b * self.b / (4.0 * self.sigma * self.beta)
    }

    fn delta_edge(&self) -> f64 {
        let am = self.a - self.sigma;
        am * am / (4.0 * self.sigma * self.delta)
    }

    fn compute_domain(&self) -> DomainInterval {
        let (beta, delta) = (self.beta, self.delta);
        let inf = f64::INFINITY;
        match (beta.partial_cmp(&0.0).unwrap(), delta.partial_cmp(&0.0).unwrap()) {
            (std::cmp::Ordering::Equal, std::cmp::Ordering::Equal) => DomainInterval::real_line(),
            (std::cmp::Ordering::Greater, std::cmp::Ordering::Less) => {
                DomainInterval::closed(self.delta_edge(), self.beta_edge())
            }
            (std::cmp::Ordering::Greater, std::cmp::Ordering::Greater) => {
                DomainInterval::new(-inf, false, self.delta_edge().min(self.beta_edge()), true)
            }
            (std::cmp::Ordering::Less, std::cmp::Ordering::Greater) => {
                DomainInterval::closed(self.beta_edge(), self.delta_edge())
            }
            (std::cmp::Ordering::Less, std::cmp::Ordering::Less) => {
                DomainInterval::new(self.delta_edge().max(self.beta_edge()), true, inf, false)
            }
            (std::cmp::Ordering::Greater, std::cmp::Ordering::Equal) => {
                DomainInterval::new(-inf, false, self.beta_edge(), true)
            }
            (std::cmp::Ordering::Less, std::cmp::Ordering::Equal) => {
                DomainInterval::new(self.beta_edge(), true, inf, false)
            }
            (std::cmp::Ordering::Equal, std::cmp::Ordering::Greater) => {
                DomainInterval::new(-inf, false, self.delta_edge(), true)
            }
            (std::cmp::Ordering::Equal, std::cmp::Ordering::Less) => {
                DomainInterval::new(self.delta_edge(), true, inf, false)
            }
        }
    }

    /// `Q(u)`, written as `4 sigma beta (edge - u)` near its root to avoid
    /// cancellation.
    fn q(&self, u: f64) -> f64 {
        let shift = 4.0 * self.sigma * self.beta * u;
        let b2 = self.b * self.b;
        let q = if self.beta != 0.0 && shift.abs() > 0.5 * b2 {
            4.0 * self.sigma * self.beta * (self.beta_edge() - u)
        } else {
            b2 - shift
        };
        q.max(0.0)
    }

    fn p(&self, u: f64) -> f64 {
        let am = self.a - self.sigma;
        let shift = 4.0 * self.sigma * self.delta * u;
        let p = if self.delta != 0.0 && shift.abs() > 0.5 * am * am {
            4.0 * self.sigma * self.delta * (self.delta_edge() - u)
        } else {
            am * am - shift
        };
        p.max(0.0)
    }

    /// `b = 0` and `beta = 0`: the CGF vanishes identically on its domain.
    fn is_flat(&self) -> bool {
        self.beta == 0.0 && (self.b == 0.0 || self.delta == 0.0)
    }

    fn check_in_domain(&self, u: f64) -> Result<()> {
        if self.domain.contains(u) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                what: "u",
                value: u,
                domain: self.domain.to_string(),
            })
        }
    }

    fn check_interior(&self, u: f64) -> Result<()> {
        if self.domain.interior_contains(u) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                what: "u (interior required)",
                value: u,
                domain: self.domain.to_string(),
            })
        }
    }

    pub fn value(&self, u: f64) -> Result<f64> {
        self.check_in_domain(u)?;
        Ok(self.value_unchecked(u))
    }

    fn value_unchecked(&self, u: f64) -> f64 {
        let (a, b, s) = (self.a, self.b, self.sigma);
        let sq = self.q(u).sqrt();
        if self.delta == 0.0 {
            a / (2.0 * s) * (b - sq)
        } else {
            let sp = self.p(u).sqrt();
            a * b / (2.0 * s) - sp * sq / (2.0 * s) - 0.5 * sq
        }
    }

    /// First and second derivative on the interior of the domain.
    pub fn derivatives(&self, u: f64) -> Result<(f64, f64)> {
        self.check_interior(u)?;
        Ok(self.derivatives_unchecked(u))
    }

    fn derivatives_unchecked(&self, u: f64) -> (f64, f64) {
        if self.is_flat() {
            return (0.0, 0.0);
        }
        let (a, b, s, beta, delta) = (self.a, self.b, self.sigma, self.beta, self.delta);
        let q = self.q(u);
        let sq = q.sqrt();
        if delta == 0.0 {
            let d1 = a * beta / sq;
            let d2 = 2.0 * s * a * beta * beta / (q * sq);
            return (d1, d2);
        }
        let am2 = (a - s) * (a - s);
        let p = self.p(u);
        let spq = p.sqrt() * sq;
        let numer = delta * b * b + beta * am2 - 8.0 * s * beta * delta * u;
        let d1 = s * beta / sq + numer / spq;
        let cross = delta * b * b - beta * am2;
        let d2 = 2.0 * s * s * beta * beta / (q * sq) + 2.0 * s * cross * cross / (spq * spq * spq);
        (d1, d2)
    }

    /// Image of the interior of the domain under the first derivative.
    pub fn derivative_image(&self) -> Result<DomainInterval> {
        let (beta, delta) = (self.beta, self.delta);
        if beta == 0.0 && delta == 0.0 {
            return Err(Error::arg("derivative image needs (beta, delta) != (0, 0)"));
        }
        let inf = f64::INFINITY;
        if self.is_flat() {
            return Ok(DomainInterval::closed(0.0, 0.0));
        }
        let image = if beta * delta < 0.0 {
            DomainInterval::real_line()
        } else if beta > 0.0 || delta > 0.0 {
            DomainInterval::open(2.0 * (beta * delta).sqrt(), inf)
        } else {
            DomainInterval::open(-inf, -2.0 * (beta * delta).sqrt())
        };
        Ok(image)
    }

    /// Fenchel-Legendre transform `sup_u { u x - L(u) }`.
    pub fn legendre(&self, x: f64) -> Result<RateEval> {
        if !x.is_finite() {
            return Err(Error::arg(format!("x must be finite, got {x}")));
        }
        if self.beta == 0.0 && self.delta == 0.0 {
            // L is constant on the whole line.
            let c = self.value_unchecked(0.0);
            let value = if x == 0.0 {
                ExtendedReal::Finite((-c).max(0.0))
            } else {
                ExtendedReal::PosInfinity
            };
            return Ok(RateEval { x, value, u_star: None });
        }
        if self.is_flat() {
            // L = 0 on a half-line: the supremum sits at the finite endpoint.
            let (lo, hi) = (self.domain.lo_f64(), self.domain.hi_f64());
            let v = (lo * x).max(hi * x);
            let value = if x == 0.0 {
                ExtendedReal::Finite(0.0)
            } else {
                ExtendedReal::from_f64(v)
            };
            return Ok(RateEval { x, value, u_star: None });
        }
        let image = self.derivative_image()?;
        if !image.interior_contains(x) {
            // Outside the image the supremum runs off along an unbounded
            // direction of the domain (finite endpoints send the derivative
            // to +-inf), so the transform diverges.
            return Ok(RateEval {
                x,
                value: ExtendedReal::PosInfinity,
                u_star: None,
            });
        }
        let u = self.solve_derivative(x)?;
        let value = (u * x - self.value_unchecked(u)).max(0.0);
        if self.delta == 0.0 {
            let closed = closed_form_rate(x, self.beta, self.a, self.b, self.sigma);
            if (closed - value).abs() > 1e-8 * closed.abs().max(1.0) {
                return Err(Error::Internal(format!(
                    "numerical Legendre transform {value} disagrees with closed form {closed} at x = {x}"
                )));
            }
        }
        Ok(RateEval {
            x,
            value: ExtendedReal::Finite(value),
            u_star: Some(u),
        })
    }

    /// Solves `L'(u) = x` on the interior by bracketed Newton with bisection
    /// fallback.
    pub fn solve_derivative(&self, x: f64) -> Result<f64> {
        let f = |u: f64| self.derivatives_unchecked(u).0 - x;
        let lo_edge = self.domain.lo_f64();
        let hi_edge = self.domain.hi_f64();

        // Finite endpoints are singular points of L' (value -inf at lo,
        // +inf at hi) and act as bracket ends without being evaluated.
        let start = 0.0f64.clamp(lo_edge, hi_edge);
        let mut hi = hi_edge;
        if hi.is_infinite() {
            let mut step = 1.0f64.max(start.abs());
            hi = start + step;
            while f(hi) <= 0.0 {
                step *= 2.0;
                hi = start + step;
                if !hi.is_finite() {
                    return Err(Error::Internal(format!("no upper bracket for L'(u) = {x}")));
                }
            }
        }
        let mut lo = lo_edge;
        if lo.is_infinite() {
            let mut step = 1.0f64.max(start.abs());
            lo = start.min(hi) - step;
            while f(lo) >= 0.0 {
                step *= 2.0;
                lo = start.min(hi) - step;
                if !lo.is_finite() {
                    return Err(Error::Internal(format!("no lower bracket for L'(u) = {x}")));
                }
            }
        }

        let tol = ROOT_TOL * x.abs().max(1.0);
        let mut u = 0.5 * (lo + hi);
        for _ in 0..MAX_ROOT_ITERATIONS {
            let (d1, d2) = self.derivatives_unchecked(u);
            let g = d1 - x;
            if g.abs() <= tol {
                return Ok(u);
            }
            if g < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
                return Ok(u);
            }
            let newton = u - g / d2;
            u = if d2 > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::Internal(format!(
            "root-finding for L'(u) = {x} did not converge in {MAX_ROOT_ITERATIONS} iterations"
        )))
    }

    /// Location and value of the minimum of the rate function.
    pub fn minimum(&self) -> Result<RateMinimum> {
        if self.beta == 0.0 && self.delta == 0.0 {
            return Err(Error::arg("rate minimum needs (beta, delta) != (0, 0)"));
        }
        let at_origin = self.value_unchecked(0.0);
        let value = (-at_origin).max(0.0);
        if self.domain.interior_contains(0.0) && !self.is_flat() {
            // u* = 0 is the maximiser at x = L'(0), where the transform equals -L(0).
            let x_min = self.derivatives_unchecked(0.0).0;
            return Ok(RateMinimum {
                x_min,
                value,
                attained: true,
                attained_zero: value <= 1e-14 * (self.a * self.b.abs() / self.sigma).max(1.0),
                u_at_min: Some(0.0),
            });
        }
        // Origin on the boundary of the domain (b = 0): the infimum -L(0) is
        // approached as x runs off to the unbounded end of the image.
        let image = self.derivative_image()?;
        let x_min = if self.domain.hi_f64() == 0.0 {
            image.hi_f64()
        } else {
            image.lo_f64()
        };
        Ok(RateMinimum {
            x_min,
            value,
            attained: false,
            attained_zero: false,
            u_at_min: None,
        })
    }
}

/// `(b x - a beta)^2 / (4 sigma |beta x|)`, the transform for `delta = 0` on
/// the half-line carrying the sign of `beta`.
pub fn closed_form_rate(x: f64, beta: f64, a: f64, b: f64, sigma: f64) -> f64 {
    let num = b * x - a * beta;
    num * num / (4.0 * sigma * (beta * x).abs())
}

/// Evaluation of the rate function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEval {
    pub x: f64,
    pub value: ExtendedReal,
    /// Maximiser of `u x - L(u)` when it lies in the interior of the domain.
    pub u_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMinimum {
    /// Minimiser of the rate function; infinite when only approached.
    pub x_min: f64,
    pub value: f64,
    pub attained: bool,
    pub attained_zero: bool,
    /// Dual point of the minimum (the origin of the `u` axis when attained).
    pub u_at_min: Option<f64>,
}

pub fn domain_of(beta: f64, delta: f64, p: &ModelParams) -> Result<DomainInterval> {
    Ok(LimitCgf::new(beta, delta, p)?.domain())
}

pub fn cgf_limit(u: f64, beta: f64, delta: f64, p: &ModelParams) -> Result<f64> {
    LimitCgf::new(beta, delta, p)?.value(u)
}

pub fn cgf_derivative(u: f64, beta: f64, delta: f64, p: &ModelParams) -> Result<(f64, f64)> {
    LimitCgf::new(beta, delta, p)?.derivatives(u)
}

pub fn derivative_image(beta: f64, delta: f64, p: &ModelParams) -> Result<DomainInterval> {
    LimitCgf::new(beta, delta, p)?.derivative_image()
}

pub fn legendre_transform(x: f64, beta: f64, delta: f64, p: &ModelParams) -> Result<RateEval> {
    LimitCgf::new(beta, delta, p)?.legendre(x)
}

pub fn rate_minimum(beta: f64, delta: f64, p: &ModelParams) -> Result<RateMinimum> {
    LimitCgf::new(beta, delta, p)?.minimum()
}
