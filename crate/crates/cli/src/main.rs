use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heston_lda_cli::{parse_config, run_experiment, write_outputs, VERSION};

const SEED_ENV: &str = "HESTON_LDA_SEED";

/// Large-deviation and asymptotic-arbitrage experiments for the Heston model.
///
/// Seed precedence: HESTON_LDA_SEED, then --seed, then `seed` in the config,
/// then 42.
#[derive(Parser)]
#[command(name = "heston-lda", version = VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate function on an x grid (rates.csv)
    RateFn(RunArgs),
    /// Finite-horizon MGF against its limit and optionally Monte Carlo (mgf.csv)
    MgfCheck(RunArgs),
    /// Regime classification (regimes.json)
    Classify(RunArgs),
    /// Empirical tail decay against the rate function (ldp.csv)
    LdpVerify(RunArgs),
    /// Ergodic averages (ergodic.csv)
    ErgodicCheck(RunArgs),
    /// Martingale property of the density (martingale.csv)
    MartingaleCheck(RunArgs),
    /// Stopped density at sublinear speed (stopping.csv)
    StoppingTime(RunArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::RateFn(a) => ("rate-fn", a),
            Command::MgfCheck(a) => ("mgf-check", a),
            Command::Classify(a) => ("classify", a),
            Command::LdpVerify(a) => ("ldp-verify", a),
            Command::ErgodicCheck(a) => ("ergodic-check", a),
            Command::MartingaleCheck(a) => ("martingale-check", a),
            Command::StoppingTime(a) => ("stopping-time", a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config `output_dir`, else `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

enum Failure {
    Usage(String),
    Run(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let (name, args) = cli.command.parts();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = parse_config(&text).map_err(|e| Failure::Usage(e.to_string()))?;
    if cfg.experiment.name() != name {
        return Err(Failure::Usage(format!(
            "subcommand {name} does not match the [{}] block in {}",
            cfg.experiment.name(),
            args.config.display()
        )));
    }

    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .map_err(|_| Failure::Usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    let seed = env_seed.or(args.seed).unwrap_or_else(|| cfg.seed_or_default());
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n as usize);
    }
    let pool = pool.build().map_err(|e| Failure::Run(format!("thread pool: {e}")))?;
    let files = pool
        .install(|| run_experiment(&cfg, seed))
        .map_err(|e| Failure::Run(e.to_string()))?;
    write_outputs(&out_dir, &files).map_err(|e| Failure::Run(format!("writing {}: {e}", out_dir.display())))
}
