//! Market-price-of-risk and asymptotic-arbitrage regimes.
//!
//! Every classifier evaluates sufficient conditions only. `Fails` means the
//! condition is not met, `NotCovered` means no stated condition applies, and
//! `Boundary` marks a strict inequality that holds with equality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{DomainInterval, ExtendedReal};
use crate::model::ModelParams;

const EQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// Average squared `gamma_1` above a level at linear speed.
    Gamma1Msr,
    /// Average squared `gamma_2` above a level at linear speed.
    Gamma2Msr,
    /// Strong asymptotic arbitrage at linear speed with exponential decay.
    LinearArbitrage,
    /// Thresholds `c_1`, `c_2` at sublinear speeds.
    SublinearThresholds,
    /// Strong asymptotic arbitrage at sublinear speed.
    SublinearArbitrage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Boundary,
    NotCovered,
}

/// `(C, lambda_1, lambda_2)` of an exponentially decaying failure probability
/// `P(...) <= C exp(-lambda_1 t)` with `lambda_2` the gain rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageConstants {
    pub c: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Second decision rule evaluated alongside the default one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternateRule {
    pub name: String,
    pub verdict: Verdict,
    pub lambda_intervals: Vec<DomainInterval>,
    /// Values of `lambda` where the two rules give different answers.
    pub disagreement: Vec<DomainInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub query: RegimeKind,
    /// Queried level (`c` or `gamma`), if any.
    pub level: Option<f64>,
    pub verdict: Verdict,
    /// Label of the case that decided the verdict.
    pub case: Option<String>,
    pub thresholds: BTreeMap<String, ExtendedReal>,
    /// Values of `lambda` (others fixed) for which the verdict is `Holds`, or
    /// `Fails` for the market-price-of-risk queries.
    pub lambda_intervals: Vec<DomainInterval>,
    pub constants: Option<ArbitrageConstants>,
    pub alternate: Option<AlternateRule>,
    pub notes: Vec<String>,
}

impl RegimeReport {
    fn new(query: RegimeKind, level: Option<f64>) -> Self {
        RegimeReport {
            query,
            level,
            verdict: Verdict::NotCovered,
            case: None,
            thresholds: BTreeMap::new(),
            lambda_intervals: Vec::new(),
            constants: None,
            alternate: None,
            notes: Vec::new(),
        }
    }

    fn threshold(&mut self, name: &str, value: f64) {
        self.thresholds.insert(name.to_string(), ExtendedReal::from_f64(value));
    }

    fn decide(&mut self, verdict: Verdict, case: &str) {
        self.verdict = verdict;
        self.case = Some(case.to_string());
    }
}

/// Three-way comparison with a relative tolerance for the equality case.
fn compare(lhs: f64, rhs: f64) -> std::cmp::Ordering {
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    if (lhs - rhs).abs() <= EQ_TOL * scale {
        std::cmp::Ordering::Equal
    } else if lhs < rhs {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Greater
    }
}

fn is_zero(x: f64) -> bool {
    compare(x, 0.0).is_eq()
}

fn positive_level(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be positive and finite, got {value}")))
    }
}

fn symmetric_window(half_width: f64) -> DomainInterval {
    DomainInterval::open(-half_width, half_width)
}

fn outside_window(half_width: f64) -> Vec<DomainInterval> {
    if half_width.is_infinite() {
        return Vec::new();
    }
    vec![
        DomainInterval::open(f64::NEG_INFINITY, -half_width),
        DomainInterval::open(half_width, f64::INFINITY),
    ]
}

/// Whether the average squared `gamma_1` fails to exceed `c` at linear speed.
pub fn classify_gamma1(c: f64, p: &ModelParams) -> Result<RegimeReport> {
    positive_level("c", c)?;
    let p = p.validated()?;
    let mut r = RegimeReport::new(RegimeKind::Gamma1Msr, Some(c));
    if p.lambda == 0.0 {
        r.decide(Verdict::Fails, "lambda_zero");
        r.lambda_intervals = if p.b > 0.0 {
            vec![symmetric_window((c * p.b / p.a).sqrt())]
        } else {
            vec![DomainInterval::real_line()]
        };
        r.notes.push("gamma_1 vanishes identically".into());
        return Ok(r);
    }
    if p.b <= 0.0 {
        r.decide(Verdict::Fails, "i");
        r.lambda_intervals = vec![DomainInterval::real_line()];
        return Ok(r);
    }
    let c1 = p.a * p.lambda * p.lambda / p.b;
    r.threshold("a_lambda2_over_b", c1);
    r.lambda_intervals = vec![symmetric_window((c * p.b / p.a).sqrt())];
    match compare(c, c1) {
        std::cmp::Ordering::Greater => r.decide(Verdict::Fails, "ii"),
        std::cmp::Ordering::Equal => r.decide(Verdict::Boundary, "ii"),
        std::cmp::Ordering::Less => {
            r.decide(Verdict::NotCovered, "below_threshold");
            r.notes.push(format!(
                "linear speed not covered; c < a lambda^2/b = {c1}, so the level is exceeded at every sublinear speed f(t) with t/f(t) -> inf"
            ));
        }
    }
    Ok(r)
}

/// Whether the average squared `gamma_2` fails to exceed `c` at linear speed.
pub fn classify_gamma2(c: f64, p: &ModelParams) -> Result<RegimeReport> {
    positive_level("c", c)?;
    let p = p.validated()?;
    let mut r = RegimeReport::new(RegimeKind::Gamma2Msr, Some(c));
    let excess = p.excess_return();
    let lam_rho = p.lambda * p.rho;
    let k = lam_rho * excess;
    let one_m = 1.0 - p.rho * p.rho;

    if k > 0.0 && !is_zero(k) {
        r.decide(Verdict::Fails, "i");
        return Ok(r);
    }
    if k < 0.0 && !is_zero(k) {
        let thr = -4.0 * k / one_m;
        r.threshold("minus_4_lambda_rho_excess_over_1_minus_rho2", thr);
        match compare(c, thr) {
            std::cmp::Ordering::Greater => r.decide(Verdict::Fails, "ii"),
            std::cmp::Ordering::Equal => r.decide(Verdict::Boundary, "ii"),
            std::cmp::Ordering::Less => r.decide(Verdict::NotCovered, "ii_below_threshold"),
        }
        return Ok(r);
    }
    if lam_rho != 0.0 && excess == 0.0 {
        if p.b <= 0.0 {
            r.decide(Verdict::Fails, "iii");
            return Ok(r);
        }
        let stated = p.a * p.lambda.powi(4) * p.rho * p.rho / (p.b * one_m);
        let derived = p.a * p.lambda * p.lambda * p.rho * p.rho / (p.b * one_m);
        r.threshold("a_lambda4_rho2_over_b_1_minus_rho2", stated);
        r.threshold("a_lambda2_rho2_over_b_1_minus_rho2", derived);
        if compare(stated, derived).is_ne() {
            r.notes.push(format!(
                "threshold uses lambda^4 ({stated}); the ergodic limit of the average squared gamma_2 gives lambda^2 ({derived})"
            ));
        }
        match compare(c, stated) {
            std::cmp::Ordering::Greater => r.decide(Verdict::Fails, "iv"),
            std::cmp::Ordering::Equal => r.decide(Verdict::Boundary, "iv"),
            std::cmp::Ordering::Less => r.decide(Verdict::NotCovered, "iv_below_threshold"),
        }
        return Ok(r);
    }
    if lam_rho == 0.0 {
        r.decide(Verdict::Fails, "v");
        if p.rho == 0.0 {
            r.notes.push("complete market".into());
        }
        return Ok(r);
    }
    r.decide(Verdict::NotCovered, "none");
    Ok(r)
}

/// Sets of open intervals, used to compare the two arbitrage rules.
fn symmetric_difference(x: &[(f64, f64)], y: &[(f64, f64)]) -> Vec<DomainInterval> {
    let inside = |set: &[(f64, f64)], t: f64| set.iter().any(|&(lo, hi)| t > lo && t < hi);
    let mut cuts: Vec<f64> = x.iter().chain(y).flat_map(|&(lo, hi)| [lo, hi]).collect();
    cuts.push(f64::NEG_INFINITY);
    cuts.push(f64::INFINITY);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - 1.0,
            (true, false) => lo + 1.0,
            (false, false) => 0.0,
        };
        if inside(x, mid) != inside(y, mid) {
            match out.last_mut() {
                Some(last) if last.1 == lo => last.1 = hi,
                _ => out.push((lo, hi)),
            }
        }
    }
    out.into_iter().map(|(lo, hi)| DomainInterval::open(lo, hi)).collect()
}

/// Strong asymptotic arbitrage at linear speed with decay rate `gamma`.
///
/// Default rule: `a lambda/k + gamma + L(1) < 0` with `k = sqrt(2 sigma)` and
/// `L` the limiting CGF of `beta' int V`, `beta' = -b lambda/k - lambda^2/2`.
/// Since `b^2 - 4 sigma beta' = (b + k lambda)^2`, this reads
/// `lambda < -b/k - k gamma/(2a)`.
///
/// The alternate rule is the interval in `zeta_+- = k +- 1/k`.
pub fn classify_linear_arbitrage(gamma: f64, p: &ModelParams) -> Result<RegimeReport> {
    positive_level("gamma", gamma)?;
    let p = p.validated()?;
    let mut r = RegimeReport::new(RegimeKind::LinearArbitrage, Some(gamma));
    let (a, b, s, lam) = (p.a, p.b, p.sigma, p.lambda);
    let k = p.vol_scale();

    let cgf_at_one = a / (2.0 * s) * (b - (b + k * lam).abs());
    let lhs = a * lam / k + gamma + cgf_at_one;
    let lam_exact = -b / k - k * gamma / (2.0 * a);
    r.threshold("lambda_upper_exact", lam_exact);
    r.threshold("cgf_at_one", cgf_at_one);
    r.lambda_intervals = vec![DomainInterval::open(f64::NEG_INFINITY, lam_exact)];
    match compare(lhs, 0.0) {
        std::cmp::Ordering::Less => {
            r.decide(Verdict::Holds, "exact");
            r.constants = Some(ArbitrageConstants {
                c: (lam * p.v0 / k).exp(),
                lambda1: -lhs,
                lambda2: gamma,
            });
        }
        std::cmp::Ordering::Equal => r.decide(Verdict::Boundary, "exact"),
        std::cmp::Ordering::Greater => {
            r.decide(Verdict::Fails, "exact");
            r.notes
                .push("sufficient condition not met; this does not rule out arbitrage".into());
        }
    }

    let zeta_plus = k + 1.0 / k;
    let zeta_minus = k - 1.0 / k;
    let left = -b / k - gamma / (a * zeta_plus);
    r.threshold("zeta_plus", zeta_plus);
    r.threshold("zeta_minus", zeta_minus);
    r.threshold("lambda_interval_left", left);
    let (alt_verdict, alt_sets, case) = if k > 1.0 {
        let right = -b / k + gamma / (a * zeta_minus);
        r.threshold("lambda_interval_right", right);
        let verdict = if compare(lam, left).is_eq() || compare(lam, right).is_eq() {
            Verdict::Boundary
        } else if lam > left && lam < right {
            Verdict::Fails
        } else {
            Verdict::Holds
        };
        (
            verdict,
            vec![(f64::NEG_INFINITY, left), (right, f64::INFINITY)],
            "interval_i",
        )
    } else {
        let verdict = match compare(lam, left) {
            std::cmp::Ordering::Less => Verdict::Holds,
            std::cmp::Ordering::Equal => Verdict::Boundary,
            std::cmp::Ordering::Greater => Verdict::Fails,
        };
        (verdict, vec![(f64::NEG_INFINITY, left)], "interval_ii")
    };
    let disagreement = symmetric_difference(&[(f64::NEG_INFINITY, lam_exact)], &alt_sets);
    if alt_verdict != r.verdict {
        r.notes.push(format!(
            "interval rule ({case}) gives {alt_verdict:?} and the exact inequality gives {:?} at lambda = {lam}",
            r.verdict
        ));
    }
    r.alternate = Some(AlternateRule {
        name: case.to_string(),
        verdict: alt_verdict,
        lambda_intervals: alt_sets.iter().map(|&(lo, hi)| DomainInterval::open(lo, hi)).collect(),
        disagreement,
    });
    Ok(r)
}

/// Levels `c_1` (for `gamma_1`) and `c_2` (for `gamma_2`) exceeded at every
/// sublinear speed.
pub fn sublinear_thresholds(p: &ModelParams) -> Result<RegimeReport> {
    let p = p.validated()?;
    if p.b <= 0.0 {
        return Err(Error::Precondition(
            vec!["b > 0 required (variance not ergodic)".into()],
        ));
    }
    let mut r = RegimeReport::new(RegimeKind::SublinearThresholds, None);
    let c1 = p.a * p.lambda * p.lambda / p.b;
    r.threshold("c1", c1);
    let excess = p.excess_return();
    let k = p.lambda * p.rho * excess;
    let one_m = 1.0 - p.rho * p.rho;
    r.verdict = Verdict::Holds;
    if k > 0.0 {
        r.decide(Verdict::NotCovered, "lambda_rho_excess_positive");
        r.notes.push("c2 not available when lambda rho (mu - r) > 0".into());
    } else if excess == 0.0 {
        r.threshold("c2", p.a * p.lambda * p.lambda * p.rho * p.rho / (p.b * one_m));
        r.case = Some("equal_rates".into());
    } else if k < 0.0 {
        r.threshold("c2", 0.0);
        r.case = Some("opposite_sign".into());
        r.notes.push("any c2 > 0 is exceeded".into());
    } else if p.feller_strict() {
        r.threshold("c2", excess * excess * p.b / ((p.a - p.sigma) * one_m));
        r.case = Some("uncorrelated_risk".into());
    } else {
        r.decide(Verdict::NotCovered, "feller");
        r.notes
            .push("c2 needs a > sigma when lambda rho = 0 and mu != r".into());
    }
    Ok(r)
}

/// Strong asymptotic arbitrage at sublinear speed with rate `gamma`.
pub fn classify_sublinear_arbitrage(gamma: f64, p: &ModelParams) -> Result<RegimeReport> {
    let p = p.validated()?;
    let mut violations = Vec::new();
    if !(gamma > 0.0 && gamma.is_finite()) {
        violations.push(format!("gamma must be positive, got {gamma}"));
    }
    if !p.feller_strict() {
        violations.push("Feller condition a>sigma required".into());
    }
    if p.lambda * p.rho * p.excess_return() > 0.0 {
        violations.push("lambda rho (mu - r) <= 0 required".into());
    }
    if p.b <= 0.0 {
        violations.push("b > 0 required".into());
    }
    if !violations.is_empty() {
        return Err(Error::Precondition(violations));
    }
    let mut r = RegimeReport::new(RegimeKind::SublinearArbitrage, Some(gamma));
    let (a, b, rho, lam) = (p.a, p.b, p.rho, p.lambda);
    let rho2 = rho * rho;
    let excess = p.excess_return();

    if excess == 0.0 {
        let (thr, case) = if rho2 <= 0.5 {
            let thr = if rho2 == 0.0 {
                f64::INFINITY
            } else {
                (2.0 * b * gamma * (1.0 - rho2) / (a * rho2)).sqrt()
            };
            (thr, "equal_rates_weak_correlation")
        } else {
            ((2.0 * b * gamma / a).sqrt(), "equal_rates_strong_correlation")
        };
        r.threshold("abs_lambda_lower", thr);
        r.lambda_intervals = outside_window(thr);
        let verdict = if thr.is_infinite() {
            Verdict::Fails
        } else {
            match compare(lam.abs(), thr) {
                std::cmp::Ordering::Greater => Verdict::Holds,
                std::cmp::Ordering::Equal => Verdict::Boundary,
                std::cmp::Ordering::Less => Verdict::Fails,
            }
        };
        r.decide(verdict, case);
    } else if lam * rho * excess < 0.0 {
        r.decide(Verdict::Holds, "opposite_sign");
        r.lambda_intervals = vec![if rho * excess > 0.0 {
            DomainInterval::open(f64::NEG_INFINITY, 0.0)
        } else {
            DomainInterval::open(0.0, f64::INFINITY)
        }];
    } else {
        let one_m = 1.0 - rho2;
        let thr = excess * excess * b / (2.0 * (a - p.sigma) * one_m);
        r.threshold("gamma_upper", thr);
        let verdict = match compare(gamma, thr) {
            std::cmp::Ordering::Less => Verdict::Holds,
            std::cmp::Ordering::Equal => Verdict::Boundary,
            std::cmp::Ordering::Greater => Verdict::Fails,
        };
        r.decide(verdict, "uncorrelated_risk");
        if verdict == Verdict::Holds {
            r.lambda_intervals = vec![if rho == 0.0 {
                DomainInterval::real_line()
            } else {
                DomainInterval::closed(0.0, 0.0)
            }];
        }
    }
    Ok(r)
}
