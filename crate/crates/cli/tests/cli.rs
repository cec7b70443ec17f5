use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heston_lda_cli::config::from_json;
use heston_lda_cli::parse_config;

const BIN: &str = env!("CARGO_BIN_EXE_heston-lda");
const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");

const PARAMS: &str =
    "[params]\nmu = 0.05\nr = 0.0\na = 2.0\nb = 1.0\nsigma = 0.5\nrho = -0.5\nv0 = 1.0\ns0 = 1.0\nlambda = 1.0\n";

/// One small configuration per experiment: (subcommand, block, csv file).
fn experiments() -> Vec<(&'static str, &'static str, Option<&'static str>)> {
    vec![
        ("rate-fn", "[rate-fn]\nbeta = 1.0\nx_grid = [0.5, 1.0, 2.0, 4.0, 8.0, -1.0]\n", Some("rates.csv")),
        ("mgf-check", "[mgf-check]\nbeta = 0.25\nt_grid = [1.0, 10.0, 100.0]\nn_paths = 200\nsteps_per_unit = 20\n", Some("mgf.csv")),
        (
            "classify",
            "[classify]\nc_values = [1.0, 3.0]\ngamma_values = [0.1]\nlambda_grid = [-3.0, -1.0, 0.0, 1.0]\n",
            Some("regime_map.csv"),
        ),
        ("ldp-verify", "[ldp-verify]\nbeta = 1.0\nx = 3.0\nt_grid = [1.0, 2.0, 3.0, 4.0]\nn_paths = 400\nsteps_per_unit = 10\n", Some("ldp.csv")),
        ("ergodic-check", "[ergodic-check]\nt = 20.0\nn_paths = 200\nsteps_per_unit = 10\n", Some("ergodic.csv")),
        ("martingale-check", "[martingale-check]\nt_grid = [1.0, 2.0]\nn_paths = 300\nsteps_per_unit = 10\n", Some("martingale.csv")),
        (
            "stopping-time",
            "[stopping-time]\ngamma = 0.01\ngamma_bar = 0.02\nt_values = [100.0, 400.0]\nf_values = [10.0, 20.0]\nn_paths = 200\nsteps_per_unit = 10\n",
            Some("stopping.csv"),
        ),
    ]
}

struct Run {
    out: Output,
    dir: PathBuf,
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str], env_seed: Option<&str>) -> Run {
    let mut cmd = Command::new(BIN);
    cmd.arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra);
    cmd.env_remove("HESTON_LDA_SEED");
    if let Some(s) = env_seed {
        cmd.env("HESTON_LDA_SEED", s);
    }
    Run {
        out: cmd.output().unwrap(),
        dir: out.to_path_buf(),
    }
}

impl Run {
    fn ok(self) -> Self {
        assert!(
            self.out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&self.out.stderr)
        );
        self
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.dir.join(name)).unwrap()
    }

    fn json(&self, name: &str) -> serde_json::Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    fn files(&self) -> Vec<String> {
        match fs::read_dir(&self.dir) {
            Ok(rd) => {
                let mut v: Vec<String> = rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
                v.sort();
                v
            }
            Err(_) => Vec::new(),
        }
    }
}

fn report_name(sub: &str) -> &'static str {
    if sub == "classify" {
        "regimes.json"
    } else {
        "report.json"
    }
}

#[test]
fn every_experiment_writes_pinned_headers_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    for (sub, block, csv) in experiments() {
        let text = format!("{PARAMS}{block}");
        let config = write_config(tmp.path(), &text);
        let r = run(sub, &config, &tmp.path().join(sub), &[], None).ok();
        if let Some(csv) = csv {
            let got = r.read(csv);
            let header = got.lines().next().unwrap();
            let golden = fs::read_to_string(Path::new(GOLDEN).join(csv)).unwrap();
            assert_eq!(header, golden.trim_end(), "{csv} header");
            assert!(!got.contains('\r'));
        }
        let report = r.json(report_name(sub));
        assert_eq!(report["experiment"], sub);
        assert_eq!(report["seed"], 42);
        assert!(report["version"]
            .as_str()
            .unwrap()
            .starts_with(env!("CARGO_PKG_VERSION")));
        let back = from_json(&report["config"]).unwrap();
        assert_eq!(back, parse_config(&text).unwrap(), "{sub} config round trip");
    }
}

#[test]
fn ldp_table_has_one_row_per_horizon_and_a_theory_row() {
    let tmp = tempfile::tempdir().unwrap();
    let (sub, block, _) = experiments()[3];
    let config = write_config(tmp.path(), &format!("{PARAMS}{block}"));
    let r = run(sub, &config, &tmp.path().join("o"), &[], None).ok();
    let csv = r.read("ldp.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 4 + 1);
    let theory: Vec<&str> = lines[5].split(',').collect();
    assert_eq!(theory[0], "theory");
    // closed form (b x - a beta)^2 / (4 sigma beta x) at x = 3
    assert!((theory[5].parse::<f64>().unwrap() - 1.0 / 6.0).abs() < 1e-12);
    for line in &lines[1..5] {
        assert_eq!(line.split(',').count(), 6);
    }
}

#[test]
fn classify_report_carries_both_rules() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{}[classify]\ngamma_values = [0.1]\n",
        PARAMS
            .replace("lambda = 1.0", "lambda = 0.0")
            .replace("sigma = 0.5", "sigma = 1.0")
    );
    let config = write_config(tmp.path(), &text);
    let r = run("classify", &config, &tmp.path().join("o"), &[], None).ok();
    let report = r.json("regimes.json");
    let entries = report["results"]["entries"].as_array().unwrap();
    let linear = entries.iter().find(|e| e["query"] == "linear_arbitrage").unwrap();
    assert_eq!(linear["report"]["verdict"], "fails");
    assert_eq!(linear["report"]["alternate"]["verdict"], "holds");
    assert_eq!(linear["rules_disagree"], true);
    assert!(!linear["report"]["alternate"]["disagreement"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn reruns_and_thread_counts_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    for (sub, block, csv) in experiments() {
        let config = write_config(tmp.path(), &format!("{PARAMS}{block}"));
        let a = run(
            sub,
            &config,
            &tmp.path().join(format!("{sub}-1")),
            &["--threads", "1"],
            None,
        )
        .ok();
        let b = run(
            sub,
            &config,
            &tmp.path().join(format!("{sub}-16")),
            &["--threads", "16"],
            None,
        )
        .ok();
        let c = run(
            sub,
            &config,
            &tmp.path().join(format!("{sub}-again")),
            &["--threads", "16"],
            None,
        )
        .ok();
        let name = csv.unwrap_or(report_name(sub));
        assert_eq!(a.read(name), b.read(name), "{sub}: 1 vs 16 threads");
        assert_eq!(b.read(name), c.read(name), "{sub}: rerun");
        assert_eq!(a.read(report_name(sub)), b.read(report_name(sub)));
    }
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("seed = 5\n{PARAMS}[ergodic-check]\nt = 2.0\nn_paths = 50\nsteps_per_unit = 5\n");
    let config = write_config(tmp.path(), &text);
    let seed_of = |r: &Run| r.json("report.json")["seed"].as_u64().unwrap();
    assert_eq!(
        seed_of(&run("ergodic-check", &config, &tmp.path().join("a"), &[], None).ok()),
        5
    );
    assert_eq!(
        seed_of(&run("ergodic-check", &config, &tmp.path().join("b"), &["--seed", "6"], None).ok()),
        6
    );
    assert_eq!(
        seed_of(
            &run(
                "ergodic-check",
                &config,
                &tmp.path().join("c"),
                &["--seed", "6"],
                Some("7")
            )
            .ok()
        ),
        7
    );

    let plain_dir = tmp.path().join("plain");
    fs::create_dir(&plain_dir).unwrap();
    let plain = write_config(&plain_dir, &text.replace("seed = 5\n", ""));
    assert_eq!(
        seed_of(&run("ergodic-check", &plain, &tmp.path().join("d"), &[], None).ok()),
        42
    );

    let a = run("ergodic-check", &config, &tmp.path().join("e"), &["--seed", "6"], None).ok();
    let b = run("ergodic-check", &config, &tmp.path().join("b"), &[], Some("6")).ok();
    assert_eq!(a.read("ergodic.csv"), b.read("ergodic.csv"));
    let other = run("ergodic-check", &config, &tmp.path().join("f"), &[], None).ok();
    assert_ne!(a.read("ergodic.csv"), other.read("ergodic.csv"));
}

#[test]
fn invalid_config_exits_with_usage_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{}[classify]\nc_values = [1.0]\n[ldp-verify]\nbetta = 1\n",
        PARAMS.replace("rho = -0.5", "rho = 1.5")
    );
    let config = write_config(tmp.path(), &text);
    let r = run("classify", &config, &tmp.path().join("o"), &[], None);
    assert_eq!(r.out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.out.stderr);
    assert!(err.contains("rho out of (-1,1)"), "{err}");
    assert!(err.contains("exactly one experiment"), "{err}");
    assert!(r.files().is_empty());
}

#[test]
fn subcommand_must_match_the_block() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &format!("{PARAMS}[classify]\nc_values = [1.0]\n"));
    let r = run("rate-fn", &config, &tmp.path().join("o"), &[], None);
    assert_eq!(r.out.status.code(), Some(2));
    assert!(r.files().is_empty());
}

#[test]
fn module_error_exits_nonzero_without_partial_files() {
    let tmp = tempfile::tempdir().unwrap();
    // no mean reversion: the decay check has no ergodic limit to compare against
    let text = format!(
        "{}[ldp-verify]\nbeta = 1.0\nx = 3.0\nt_grid = [1.0, 2.0, 3.0, 4.0]\nn_paths = 100\nsteps_per_unit = 5\n",
        PARAMS.replace("b = 1.0", "b = 0.0")
    );
    let config = write_config(tmp.path(), &text);
    let out = tmp.path().join("o");
    let r = run("ldp-verify", &config, &out, &[], None);
    assert_eq!(r.out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.out.stderr).contains("b > 0"));
    assert!(r.files().is_empty(), "{:?}", r.files());
}

#[test]
fn bad_seed_variable_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &format!("{PARAMS}[classify]\nc_values = [1.0]\n"));
    let r = run("classify", &config, &tmp.path().join("o"), &[], Some("abc"));
    assert_eq!(r.out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse_and_name_their_experiment() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = Vec::new();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = parse_config(&fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(path.file_stem().unwrap(), cfg.experiment.name());
        seen.push(cfg.experiment.name());
    }
    seen.sort();
    assert_eq!(seen.len(), experiments().len());
}
