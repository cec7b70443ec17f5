//! Experiment orchestration. Every experiment is computed in memory and
//! returned as a list of named files; nothing touches the disk here.

use heston_lda::mc::stats::MeanEstimate;
use heston_lda::mc::{path_rng, stopping_time_with_level, sub_seed, ErgodicReport, MartingaleReport, StoppingReport};
use heston_lda::path::VariancePathSimulator;
use heston_lda::regimes::RegimeReport;
use heston_lda::{
    classify_gamma1, classify_gamma2, classify_linear_arbitrage, classify_sublinear_arbitrage, ergodic_check,
    functional_value, ldp_check, log_mgf_full, martingale_check, stopping_time_experiment, sublinear_thresholds,
    FunctionalCoeffs, LimitCgf, McSettings, MgfQuery, ModelParams, RateEval, Result, Verdict,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    ClassifySpec, ErgodicSpec, Experiment, ExperimentConfig, LdpVerifySpec, MartingaleSpec, MgfCheckSpec, RateFnSpec,
    StoppingSpec,
};
use crate::csv::{num, opt, Csv};
use crate::VERSION;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    fn new(name: &str, contents: String) -> Self {
        OutputFile {
            name: name.to_string(),
            contents,
        }
    }
}

/// Runs the configured experiment with the effective `seed`.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<OutputFile>> {
    let p = &cfg.params;
    let (report_name, results, tables) = match &cfg.experiment {
        Experiment::RateFn(s) => rate_fn(s, p)?,
        Experiment::MgfCheck(s) => mgf_check(s, seed, p)?,
        Experiment::Classify(s) => classify(s, p)?,
        Experiment::LdpVerify(s) => ldp_verify(s, seed, p)?,
        Experiment::ErgodicCheck(s) => ergodic(s, seed, p)?,
        Experiment::MartingaleCheck(s) => martingale(s, seed, p)?,
        Experiment::StoppingTime(s) => stopping(s, seed, p)?,
    };
    let report = json!({
        "version": VERSION,
        "experiment": cfg.experiment.name(),
        "seed": seed,
        "config": cfg,
        "results": results,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report values serialize");
    text.push('\n');
    let mut files = vec![OutputFile::new(report_name, text)];
    files.extend(tables);
    Ok(files)
}

type Produced = (&'static str, Value, Vec<OutputFile>);

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn settings(n_paths: u64, steps_per_unit: f64, seed: u64) -> McSettings {
    McSettings {
        n_paths,
        steps_per_unit,
        seed,
    }
}

fn rate_fn(s: &RateFnSpec, p: &ModelParams) -> Result<Produced> {
    let cgf = LimitCgf::new(s.beta, s.delta, p)?;
    let evals = s
        .x_grid
        .iter()
        .map(|&x| cgf.legendre(x))
        .collect::<Result<Vec<RateEval>>>()?;
    let mut csv = Csv::new(&["x", "lambda_star", "u_star"]);
    for e in &evals {
        csv.row([num(e.x), num(e.value.to_f64()), opt(e.u_star)]);
    }
    let results = json!({
        "domain": cgf.domain(),
        "derivative_image": cgf.derivative_image()?,
        "minimum": cgf.minimum()?,
        "points": evals,
    });
    Ok(("report.json", results, vec![OutputFile::new("rates.csv", csv.finish())]))
}

#[derive(Serialize)]
struct MgfRow {
    t: f64,
    log_mgf: f64,
    gap: Option<f64>,
    mc: Option<MeanEstimate>,
    z_score: Option<f64>,
}

fn mgf_check(s: &MgfCheckSpec, seed: u64, p: &ModelParams) -> Result<Produced> {
    let coeffs = FunctionalCoeffs::new(s.alpha, s.beta, s.delta);
    let limit = LimitCgf::new(s.beta, s.delta, p).and_then(|c| c.value(s.u));
    let mut rows = Vec::with_capacity(s.t_grid.len());
    for (k, &t) in s.t_grid.iter().enumerate() {
        let log_mgf = if s.delta == 0.0 {
            heston_lda::mgf::log_mgf_alpha_beta_with(s.u * s.alpha, s.u * s.beta, t, p, s.psi_denominator)?
        } else {
            log_mgf_full(&MgfQuery { coeffs, t, u: s.u }, p)?
        };
        let mc = if s.n_paths > 0 {
            Some(mc_mgf(
                &coeffs,
                s.u,
                t,
                &settings(s.n_paths, s.steps_per_unit, sub_seed(seed, k as u64)),
                p,
            )?)
        } else {
            None
        };
        rows.push(MgfRow {
            t,
            log_mgf,
            gap: limit.as_ref().ok().map(|l| (log_mgf / t - l).abs()),
            z_score: mc.map(|m| m.z_score(log_mgf.exp())),
            mc,
        });
    }
    let mut csv = Csv::new(&["t", "log_mgf", "gap"]);
    for r in &rows {
        csv.row([num(r.t), num(r.log_mgf), opt(r.gap)]);
    }
    let results = json!({
        "limit_cgf": limit.as_ref().ok(),
        "limit_error": limit.as_ref().err().map(|e| e.to_string()),
        "rows": rows,
    });
    Ok(("report.json", results, vec![OutputFile::new("mgf.csv", csv.finish())]))
}

/// Monte Carlo mean of `exp(u X_t)`.
fn mc_mgf(coeffs: &FunctionalCoeffs, u: f64, t: f64, s: &McSettings, p: &ModelParams) -> Result<MeanEstimate> {
    let sim = VariancePathSimulator::new(p, t, s.steps_for(t), coeffs.needs_inverse_integral())?;
    let xs = (0..s.n_paths)
        .into_par_iter()
        .map(|i| {
            let rec = sim.simulate(&mut path_rng(s.seed, i))?;
            Ok((u * functional_value(&rec, coeffs)?).exp())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MeanEstimate::from_samples(&xs))
}

#[derive(Serialize)]
struct ClassifyEntry {
    query: &'static str,
    level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<RegimeReport>,
    /// Verdicts of the exact and interval rules differ at the configured `lambda`.
    #[serde(skip_serializing_if = "Option::is_none")]
    rules_disagree: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl ClassifyEntry {
    fn from(query: &'static str, level: Option<f64>, r: Result<RegimeReport>) -> Self {
        let rules_disagree = r
            .as_ref()
            .ok()
            .and_then(|rep| rep.alternate.as_ref().map(|alt| alt.verdict != rep.verdict));
        let (report, error) = match r {
            Ok(rep) => (Some(rep), None),
            Err(e) => (None, Some(e.to_string())),
        };
        ClassifyEntry {
            query,
            level,
            report,
            rules_disagree,
            error,
        }
    }
}

/// Every regime query for the configured levels. Queries whose preconditions
/// fail are recorded with their error instead of aborting the run.
fn classify(s: &ClassifySpec, p: &ModelParams) -> Result<Produced> {
    let p = p.validated()?;
    let mut entries = Vec::new();
    for &c in &s.c_values {
        entries.push(ClassifyEntry::from("gamma1_msr", Some(c), classify_gamma1(c, &p)));
        entries.push(ClassifyEntry::from("gamma2_msr", Some(c), classify_gamma2(c, &p)));
    }
    entries.push(ClassifyEntry::from(
        "sublinear_thresholds",
        None,
        sublinear_thresholds(&p),
    ));
    for &g in &s.gamma_values {
        entries.push(ClassifyEntry::from(
            "linear_arbitrage",
            Some(g),
            classify_linear_arbitrage(g, &p),
        ));
        entries.push(ClassifyEntry::from(
            "sublinear_arbitrage",
            Some(g),
            classify_sublinear_arbitrage(g, &p),
        ));
    }
    let mut tables = Vec::new();
    if !s.lambda_grid.is_empty() {
        let mut csv = Csv::new(&["lambda", "gamma", "exact", "interval"]);
        for &lambda in &s.lambda_grid {
            let q = ModelParams { lambda, ..p };
            for &g in &s.gamma_values {
                let r = classify_linear_arbitrage(g, &q)?;
                let alt = r.alternate.as_ref().map(|a| a.verdict).unwrap_or(r.verdict);
                csv.row([num(lambda), num(g), verdict_name(r.verdict), verdict_name(alt)]);
            }
        }
        tables.push(OutputFile::new("regime_map.csv", csv.finish()));
    }
    Ok(("regimes.json", json!({ "entries": entries }), tables))
}

fn verdict_name(v: Verdict) -> String {
    to_value(&v).as_str().unwrap_or_default().to_string()
}

fn ldp_verify(s: &LdpVerifySpec, seed: u64, p: &ModelParams) -> Result<Produced> {
    let coeffs = FunctionalCoeffs::new(s.alpha, s.beta, s.delta);
    let r = ldp_check(&coeffs, s.x, &s.t_grid, &settings(s.n_paths, s.steps_per_unit, seed), p)?;
    let mut csv = Csv::new(&["t", "n_paths", "p_hat", "ci_lo", "ci_hi", "minus_log_p_over_t"]);
    for e in &r.points {
        csv.row([
            num(e.t),
            e.n_paths.to_string(),
            num(e.p_hat),
            num(e.ci_lo),
            num(e.ci_hi),
            num(-e.p_hat.ln() / e.t),
        ]);
    }
    csv.row([
        "theory".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        num(r.theory),
    ]);
    Ok((
        "report.json",
        to_value(&r),
        vec![OutputFile::new("ldp.csv", csv.finish())],
    ))
}

fn ergodic(s: &ErgodicSpec, seed: u64, p: &ModelParams) -> Result<Produced> {
    let r: ErgodicReport = ergodic_check(s.t, &settings(s.n_paths, s.steps_per_unit, seed), p)?;
    let mut csv = Csv::new(&["quantity", "estimate", "stderr", "target", "z_score"]);
    let mut line = |name: &str, m: &MeanEstimate, target: f64| {
        csv.row([
            name.into(),
            num(m.mean),
            num(m.stderr),
            num(target),
            num(m.z_score(target)),
        ]);
    };
    line("avg_v", &r.avg_v, r.target_avg_v);
    if let (Some(m), Some(target)) = (&r.avg_inv_v, r.target_avg_inv_v) {
        line("avg_inv_v", m, target);
    }
    line("terminal_mean", &r.terminal_mean, r.target_terminal_mean);
    line("terminal_variance", &r.terminal_variance, r.target_terminal_variance);
    Ok((
        "report.json",
        to_value(&r),
        vec![OutputFile::new("ergodic.csv", csv.finish())],
    ))
}

fn martingale(s: &MartingaleSpec, seed: u64, p: &ModelParams) -> Result<Produced> {
    let reports = s
        .t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| martingale_check(t, &settings(s.n_paths, s.steps_per_unit, sub_seed(seed, k as u64)), p))
        .collect::<Result<Vec<MartingaleReport>>>()?;
    let mut csv = Csv::new(&[
        "t",
        "lambda",
        "n_paths",
        "mc_mean",
        "mc_stderr",
        "z_vs_one",
        "closed_form",
        "z_vs_closed_form",
    ]);
    for r in &reports {
        csv.row([
            num(r.t),
            num(r.lambda),
            r.n_paths.to_string(),
            num(r.mc.mean),
            num(r.mc.stderr),
            num(r.z_vs_one),
            opt(r.closed_form),
            opt(r.z_vs_closed_form),
        ]);
    }
    Ok((
        "report.json",
        json!({ "reports": reports }),
        vec![OutputFile::new("martingale.csv", csv.finish())],
    ))
}

fn stopping(s: &StoppingSpec, seed: u64, p: &ModelParams) -> Result<Produced> {
    let reports = s
        .t_values
        .iter()
        .zip(&s.f_values)
        .enumerate()
        .map(|(k, (&t, &f))| {
            let mc = settings(s.n_paths, s.steps_per_unit, sub_seed(seed, k as u64));
            match s.gamma_prime {
                Some(gp) => stopping_time_with_level(s.gamma, s.gamma_bar, gp, f, t, &mc, p),
                None => stopping_time_experiment(s.gamma, s.gamma_bar, f, t, &mc, p),
            }
        })
        .collect::<Result<Vec<StoppingReport>>>()?;
    let mut csv = Csv::new(&[
        "t",
        "f_of_t",
        "gamma",
        "gamma_bar",
        "gamma_prime",
        "p_event",
        "ci_lo",
        "ci_hi",
        "not_stopped",
        "chebyshev_bound",
        "bound",
        "within_bound",
        "mean_stopping_time",
    ]);
    for r in &reports {
        csv.row([
            num(r.t),
            num(r.f_of_t),
            num(r.gamma),
            num(r.gamma_bar),
            num(r.gamma_prime),
            num(r.event.p_hat),
            num(r.event.ci_lo),
            num(r.event.ci_hi),
            num(r.not_stopped.p_hat),
            num(r.chebyshev_bound),
            num(r.bound),
            r.within_bound.to_string(),
            num(r.mean_stopping_time),
        ]);
    }
    Ok((
        "report.json",
        json!({ "reports": reports }),
        vec![OutputFile::new("stopping.csv", csv.finish())],
    ))
}
