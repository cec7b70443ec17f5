#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Experiment configuration: one `[params]` table plus exactly one experiment
//! table, with optional top-level `seed` and `output_dir`.
//!
//! Parsing collects every problem before failing and rejects unknown keys.

use std::collections::BTreeSet;
use std::path::PathBuf;

use heston_lda::{ModelParams, PsiDenominator};
use serde::Serialize;
use toml::{Table, Value};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_STEPS_PER_UNIT: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub params: ModelParams,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RateFn(RateFnSpec),
    MgfCheck(MgfCheckSpec),
    Classify(ClassifySpec),
    LdpVerify(LdpVerifySpec),
    ErgodicCheck(ErgodicSpec),
    MartingaleCheck(MartingaleSpec),
    StoppingTime(StoppingSpec),
}

pub const EXPERIMENT_NAMES: [&str; 7] = [
    "rate-fn",
    "mgf-check",
    "classify",
    "ldp-verify",
    "ergodic-check",
    "martingale-check",
    "stopping-time",
];

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::RateFn(_) => "rate-fn",
            Experiment::MgfCheck(_) => "mgf-check",
            Experiment::Classify(_) => "classify",
            Experiment::LdpVerify(_) => "ldp-verify",
            Experiment::ErgodicCheck(_) => "ergodic-check",
            Experiment::MartingaleCheck(_) => "martingale-check",
            Experiment::StoppingTime(_) => "stopping-time",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFnSpec {
    pub beta: f64,
    pub delta: f64,
    pub x_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfCheckSpec {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub u: f64,
    pub t_grid: Vec<f64>,
    pub psi_denominator: PsiDenominator,
    /// Monte Carlo paths per horizon; 0 skips the simulation comparison.
    pub n_paths: u64,
    pub steps_per_unit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifySpec {
    pub c_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    /// Values of `lambda` for the linear-arbitrage map over `gamma_values`.
    pub lambda_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpVerifySpec {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub x: f64,
    pub t_grid: Vec<f64>,
    pub n_paths: u64,
    pub steps_per_unit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicSpec {
    pub t: f64,
    pub n_paths: u64,
    pub steps_per_unit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleSpec {
    pub t_grid: Vec<f64>,
    pub n_paths: u64,
    pub steps_per_unit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingSpec {
    pub gamma: f64,
    pub gamma_bar: f64,
    /// Defaults to the midpoint of `gamma_bar` and `c1/2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<f64>,
    pub t_values: Vec<f64>,
    pub f_values: Vec<f64>,
    pub n_paths: u64,
    pub steps_per_unit: f64,
}

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigErrors(pub Vec<String>);

impl ExperimentConfig {
    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// TOML document that parses back into `self`.
    pub fn to_toml(&self) -> String {
        let table = Table::try_from(self).expect("config serializes to a table");
        // top-level scalars must precede the first table header
        let (tables, scalars): (Table, Table) = table.into_iter().partition(|(_, v)| v.is_table());
        format!("{scalars}{tables}")
    }
}

/// Parses and validates a TOML document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {}", e.message())]))?;
    from_table(&table)
}

/// Re-reads the `config` object embedded in a JSON report.
pub fn from_json(value: &serde_json::Value) -> Result<ExperimentConfig, ConfigErrors> {
    let table: Table =
        serde_json::from_value(value.clone()).map_err(|e| ConfigErrors(vec![format!("config object: {e}")]))?;
    from_table(&table)
}

pub fn from_table(table: &Table) -> Result<ExperimentConfig, ConfigErrors> {
    let mut errors = Vec::new();

    let present: Vec<&str> = EXPERIMENT_NAMES
        .iter()
        .copied()
        .filter(|n| table.contains_key(*n))
        .collect();
    for key in table.keys() {
        let known =
            matches!(key.as_str(), "seed" | "output_dir" | "params") || EXPERIMENT_NAMES.contains(&key.as_str());
        if !known {
            errors.push(format!("unknown key `{key}` at top level"));
        }
    }
    if present.len() != 1 {
        errors.push(format!(
            "exactly one experiment block required (one of {}), found {}",
            EXPERIMENT_NAMES.join(", "),
            if present.is_empty() {
                "none".to_string()
            } else {
                present.join(", ")
            }
        ));
    }

    let seed = match table.get("seed") {
        None => None,
        Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
        Some(other) => {
            errors.push(format!("`seed` must be a nonnegative integer, got {other}"));
            None
        }
    };
    let output_dir = match table.get("output_dir") {
        None => None,
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        Some(other) => {
            errors.push(format!("`output_dir` must be a nonempty string, got {other}"));
            None
        }
    };

    let params = match section(table, "params", &mut errors) {
        Some(t) => read_params(t, &mut errors),
        None => {
            errors.push("missing [params] table".into());
            None
        }
    };

    let experiment = match present.as_slice() {
        [name] => section(table, name, &mut errors).and_then(|t| read_experiment(name, t, &mut errors)),
        _ => None,
    };

    match (params, experiment) {
        (Some(params), Some(experiment)) if errors.is_empty() => Ok(ExperimentConfig {
            seed,
            output_dir,
            params,
            experiment,
        }),
        _ => Err(ConfigErrors(errors)),
    }
}

fn section<'a>(table: &'a Table, name: &str, errors: &mut Vec<String>) -> Option<&'a Table> {
    match table.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errors.push(format!("`{name}` must be a table"));
            None
        }
    }
}

/// Typed access to one table, tracking which keys were consumed.
struct Fields<'a> {
    name: &'a str,
    table: &'a Table,
    used: BTreeSet<&'a str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Fields<'a> {
    fn new(name: &'a str, table: &'a Table, errors: &'a mut Vec<String>) -> Self {
        Fields {
            name,
            table,
            used: BTreeSet::new(),
            errors,
        }
    }

    fn err(&mut self, msg: String) {
        self.errors.push(format!("[{}] {msg}", self.name));
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a Value> {
        self.used.insert(key);
        self.table.get(key)
    }

    fn number(&mut self, key: &'a str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(format!("`{key}` must be a number, got {other}"));
                None
            }
        }
    }

    fn f64_opt(&mut self, key: &'a str) -> Option<f64> {
        let v = self.raw(key)?;
        let x = self.number(key, v)?;
        if !x.is_finite() {
            self.err(format!("`{key}` must be finite, got {x}"));
            return None;
        }
        Some(x)
    }

    fn f64_req(&mut self, key: &'a str) -> f64 {
        if !self.table.contains_key(key) {
            self.used.insert(key);
            self.err(format!("missing required key `{key}`"));
            return f64::NAN;
        }
        self.f64_opt(key).unwrap_or(f64::NAN)
    }

    fn f64_or(&mut self, key: &'a str, default: f64) -> f64 {
        if self.table.contains_key(key) {
            self.f64_opt(key).unwrap_or(f64::NAN)
        } else {
            self.used.insert(key);
            default
        }
    }

    fn positive(&mut self, key: &'a str, x: f64) -> f64 {
        if x.is_finite() && !(x > 0.0) {
            self.err(format!("`{key}` must be positive, got {x}"));
        }
        x
    }

    fn list(&mut self, key: &'a str, required: bool) -> Vec<f64> {
        let Some(v) = self.raw(key) else {
            if required {
                self.err(format!("missing required key `{key}`"));
            }
            return Vec::new();
        };
        let Value::Array(items) = v else {
            self.err(format!("`{key}` must be an array of numbers"));
            return Vec::new();
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match self.number(key, item) {
                Some(x) if x.is_finite() => out.push(x),
                Some(x) => self.err(format!("`{key}[{i}]` must be finite, got {x}")),
                None => {}
            }
        }
        if required && items.is_empty() {
            self.err(format!("`{key}` must not be empty"));
        }
        out
    }

    fn positive_list(&mut self, key: &'a str) -> Vec<f64> {
        let xs = self.list(key, true);
        if let Some(x) = xs.iter().find(|x| !(**x > 0.0)) {
            self.err(format!("`{key}` entries must be positive, got {x}"));
        }
        xs
    }

    fn increasing_times(&mut self, key: &'a str) -> Vec<f64> {
        let xs = self.positive_list(key);
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            self.err(format!("`{key}` must be strictly increasing"));
        }
        xs
    }

    fn count(&mut self, key: &'a str, min: u64, default: Option<u64>) -> u64 {
        let v = match (self.raw(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) => return d,
            (None, None) => {
                self.err(format!("missing required key `{key}`"));
                return 0;
            }
        };
        match v {
            Value::Integer(i) if *i >= min as i64 => *i as u64,
            Value::Integer(i) => {
                self.err(format!("`{key}` must be at least {min}, got {i}"));
                0
            }
            other => {
                self.err(format!("`{key}` must be an integer, got {other}"));
                0
            }
        }
    }

    fn steps_per_unit(&mut self) -> f64 {
        let s = self.f64_or("steps_per_unit", DEFAULT_STEPS_PER_UNIT);
        self.positive("steps_per_unit", s)
    }

    fn finish(self) {
        for key in self.table.keys() {
            if !self.used.contains(key.as_str()) {
                self.errors.push(format!("[{}] unknown key `{key}`", self.name));
            }
        }
    }
}

fn read_params(t: &Table, errors: &mut Vec<String>) -> Option<ModelParams> {
    let before = errors.len();
    let mut f = Fields::new("params", t, errors);
    let p = ModelParams {
        mu: f.f64_req("mu"),
        r: f.f64_req("r"),
        a: f.f64_req("a"),
        b: f.f64_req("b"),
        sigma: f.f64_req("sigma"),
        rho: f.f64_req("rho"),
        v0: f.f64_req("v0"),
        s0: f.f64_or("s0", 1.0),
        lambda: f.f64_req("lambda"),
    };
    f.finish();
    let values = [p.mu, p.r, p.a, p.b, p.sigma, p.rho, p.v0, p.s0, p.lambda];
    if values.iter().any(|x| x.is_nan()) {
        // missing or mistyped values were already reported
        return None;
    }
    let violations = p.violations();
    if violations.is_empty() && errors.len() == before {
        Some(p)
    } else {
        errors.extend(violations.into_iter().map(|v| format!("[params] {v}")));
        None
    }
}

fn read_experiment(name: &str, t: &Table, errors: &mut Vec<String>) -> Option<Experiment> {
    let before = errors.len();
    let mut f = Fields::new(name, t, errors);
    let exp = match name {
        "rate-fn" => {
            let spec = RateFnSpec {
                beta: f.f64_req("beta"),
                delta: f.f64_or("delta", 0.0),
                x_grid: f.list("x_grid", true),
            };
            if spec.beta == 0.0 && spec.delta == 0.0 {
                f.err("`beta` and `delta` must not both be zero".into());
            }
            Experiment::RateFn(spec)
        }
        "mgf-check" => {
            let psi = match f.raw("psi_denominator") {
                None => PsiDenominator::Corrected,
                Some(Value::String(s)) if s == "corrected" => PsiDenominator::Corrected,
                Some(Value::String(s)) if s == "as_printed" => PsiDenominator::AsPrinted,
                Some(other) => {
                    f.err(format!(
                        "`psi_denominator` must be \"corrected\" or \"as_printed\", got {other}"
                    ));
                    PsiDenominator::Corrected
                }
            };
            let spec = MgfCheckSpec {
                alpha: f.f64_or("alpha", 0.0),
                beta: f.f64_or("beta", 0.0),
                delta: f.f64_or("delta", 0.0),
                u: f.f64_or("u", 1.0),
                t_grid: f.increasing_times("t_grid"),
                psi_denominator: psi,
                n_paths: f.count("n_paths", 0, Some(0)),
                steps_per_unit: f.steps_per_unit(),
            };
            if spec.psi_denominator == PsiDenominator::AsPrinted && spec.delta != 0.0 {
                f.err("`psi_denominator = \"as_printed\"` applies to delta = 0 only".into());
            }
            Experiment::MgfCheck(spec)
        }
        "classify" => {
            let c_values = f.list("c_values", false);
            let gamma_values = f.list("gamma_values", false);
            let lambda_grid = f.list("lambda_grid", false);
            if !lambda_grid.is_empty() && gamma_values.is_empty() {
                f.err("`lambda_grid` needs at least one entry in `gamma_values`".into());
            }
            for (key, xs) in [("c_values", &c_values), ("gamma_values", &gamma_values)] {
                if let Some(x) = xs.iter().find(|x| !(**x > 0.0)) {
                    f.err(format!("`{key}` entries must be positive, got {x}"));
                }
            }
            Experiment::Classify(ClassifySpec {
                c_values,
                gamma_values,
                lambda_grid,
            })
        }
        "ldp-verify" => Experiment::LdpVerify(LdpVerifySpec {
            alpha: f.f64_or("alpha", 0.0),
            beta: f.f64_req("beta"),
            delta: f.f64_or("delta", 0.0),
            x: f.f64_req("x"),
            t_grid: f.increasing_times("t_grid"),
            n_paths: f.count("n_paths", heston_lda::mc::MIN_PATHS, None),
            steps_per_unit: f.steps_per_unit(),
        }),
        "ergodic-check" => {
            let t = f.f64_req("t");
            Experiment::ErgodicCheck(ErgodicSpec {
                t: f.positive("t", t),
                n_paths: f.count("n_paths", 2, None),
                steps_per_unit: f.steps_per_unit(),
            })
        }
        "martingale-check" => Experiment::MartingaleCheck(MartingaleSpec {
            t_grid: f.positive_list("t_grid"),
            n_paths: f.count("n_paths", 2, None),
            steps_per_unit: f.steps_per_unit(),
        }),
        "stopping-time" => {
            let gamma = f.f64_req("gamma");
            let gamma_bar = f.f64_req("gamma_bar");
            let spec = StoppingSpec {
                gamma: f.positive("gamma", gamma),
                gamma_bar: f.positive("gamma_bar", gamma_bar),
                gamma_prime: f.f64_opt("gamma_prime"),
                t_values: f.positive_list("t_values"),
                f_values: f.positive_list("f_values"),
                n_paths: f.count("n_paths", 1, None),
                steps_per_unit: f.steps_per_unit(),
            };
            if spec.t_values.len() != spec.f_values.len() {
                f.err(format!(
                    "`t_values` and `f_values` must have the same length ({} vs {})",
                    spec.t_values.len(),
                    spec.f_values.len()
                ));
            }
            Experiment::StoppingTime(spec)
        }
        _ => unreachable!("experiment names are filtered before dispatch"),
    };
    f.finish();
    (errors.len() == before).then_some(exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: &str =
        "[params]\nmu = 0.05\nr = 0.0\na = 2.0\nb = 1.0\nsigma = 0.5\nrho = -0.5\nv0 = 1.0\nlambda = 1.0\n";

    fn doc(extra: &str) -> String {
        format!("{PARAMS}\n{extra}")
    }

    #[test]
    fn minimal_ldp_document() {
        let cfg = parse_config(&doc(
            "[ldp-verify]\nbeta = 1\nx = 4\nt_grid = [5, 10, 15, 20]\nn_paths = 1000\n",
        ))
        .unwrap();
        assert_eq!(cfg.seed_or_default(), 42);
        let Experiment::LdpVerify(s) = &cfg.experiment else {
            panic!()
        };
        assert_eq!(s.steps_per_unit, DEFAULT_STEPS_PER_UNIT);
        assert_eq!(s.t_grid, vec![5.0, 10.0, 15.0, 20.0]);
        assert_eq!(cfg.params.s0, 1.0);
    }

    #[test]
    fn out_of_range_rho_names_the_field() {
        let text = doc("[classify]\nc_values = [1.0]\n").replace("rho = -0.5", "rho = 1.5");
        let e = parse_config(&text).unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("rho") && m.contains("(-1,1)")), "{e}");
    }

    #[test]
    fn two_experiment_blocks() {
        let e = parse_config(&doc(
            "[classify]\nc_values = [1.0]\n[ldp-verify]\nbeta = 1\nx = 4\nt_grid = [1]\nn_paths = 100\n",
        ))
        .unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("exactly one experiment")), "{e}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = format!(
            "seeed = 3\n{}",
            doc("[ergodic-check]\nt = -1\nn_paths = \"many\"\nstep_per_unit = 10\n")
        )
        .replace("sigma = 0.5", "sigma = -0.5");
        let e = parse_config(&text).unwrap_err();
        let joined = e.0.join("\n");
        for needle in [
            "seeed",
            "sigma must be positive",
            "`t` must be positive",
            "`n_paths` must be an integer",
            "step_per_unit",
        ] {
            assert!(joined.contains(needle), "missing {needle:?} in\n{joined}");
        }
    }

    #[test]
    fn unknown_params_key() {
        let e = parse_config(&doc("[classify]\nc_values = [1.0]\n").replace("lambda", "lamda")).unwrap_err();
        let joined = e.0.join("\n");
        assert!(joined.contains("unknown key `lamda`"));
        assert!(joined.contains("missing required key `lambda`"));
    }

    #[test]
    fn stopping_lists_must_pair_up() {
        let e = parse_config(&doc(
            "[stopping-time]\ngamma = 0.1\ngamma_bar = 0.2\nt_values = [100, 400]\nf_values = [10]\nn_paths = 10\n",
        ))
        .unwrap_err();
        assert!(e.0[0].contains("same length"), "{e}");
    }

    #[test]
    fn psi_variant_is_parsed() {
        let cfg = parse_config(&doc(
            "[mgf-check]\nbeta = 0.25\nt_grid = [1, 2]\npsi_denominator = \"as_printed\"\n",
        ))
        .unwrap();
        let Experiment::MgfCheck(s) = cfg.experiment else {
            panic!()
        };
        assert_eq!(s.psi_denominator, PsiDenominator::AsPrinted);
        assert!(parse_config(&doc("[mgf-check]\nt_grid = [1]\npsi_denominator = \"minus\"\n")).is_err());
    }

    #[test]
    fn serialized_config_parses_back() {
        let cfg = parse_config(&format!(
            "seed = 7\noutput_dir = \"runs/a\"\n{PARAMS}[stopping-time]\ngamma = 0.1\ngamma_bar = 0.2\ngamma_prime = 0.5\nt_values = [100, 400]\nf_values = [10, 20]\nn_paths = 10\nsteps_per_unit = 5\n",
        ))
        .unwrap();
        let json = serde_json::to_value(&cfg).unwrap();
        assert_eq!(from_json(&json).unwrap(), cfg);
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }
}
