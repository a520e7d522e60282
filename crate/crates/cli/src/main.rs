use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hornspde::FbmMethod;
use hornspde_cli::commands;
use hornspde_cli::{CliError, CliResult, ExperimentConfig, RunManifest, Suite};

#[derive(Parser)]
#[command(name = "hornspde", version, about = "Fractional-noise SPDE experiments on horn-shaped domains")]
struct Cli {
    /// Experiment config (TOML). Without it the built-in example is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Cholesky,
    Circulant,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the ensemble and write per-trajectory norm tables.
    Simulate,
    /// Run verification suites.
    Verify {
        /// noise, grr, lemma3, embedding, residual, uniqueness or all.
        #[arg(required = true)]
        suites: Vec<String>,
    },
    /// Simultaneous (dt, mesh) refinement study.
    Convergence {
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Sample raw fBm paths.
    FbmSample {
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 256)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, value_enum, default_value_t = Method::Cholesky)]
        method: Method,
    },
    /// Curve admissibility and domain measure.
    DomainCheck,
    /// Recompute the GRR constant.
    Calibrate {
        #[arg(long, default_value_t = 200)]
        paths: usize,
    },
    /// Print the example config.
    ExampleConfig,
}

fn parse_suites(names: &[String]) -> CliResult<Vec<Suite>> {
    if names.iter().any(|n| n == "all") {
        return Ok(Suite::ALL.to_vec());
    }
    names.iter().map(|n| n.parse()).collect()
}

fn run(cli: Cli) -> CliResult<Option<RunManifest>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::example(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.unwrap_or_else(|| cfg.output.dir.clone());
    let manifest = match cli.command {
        Command::Simulate => commands::simulate(&cfg, &out)?,
        Command::Verify { suites } => commands::verify(&cfg, &parse_suites(&suites)?, &out)?,
        Command::Convergence { levels } => commands::convergence(&cfg, levels, &out)?,
        Command::FbmSample { hurst, steps, count, method } => {
            let m = match method {
                Method::Cholesky => FbmMethod::Cholesky,
                Method::Circulant => FbmMethod::CirculantEmbedding,
            };
            commands::fbm_sample(&cfg, hurst, steps, count, m, &out)?
        }
        Command::DomainCheck => commands::domain_check(&cfg, &out)?,
        Command::Calibrate { paths } => commands::calibrate(&cfg, paths, &out)?,
        Command::ExampleConfig => {
            print!("{}", ExperimentConfig::example().to_toml());
            return Ok(None);
        }
    };
    Ok(Some(manifest))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(m)) => {
            for c in &m.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{} ({:.1} s)", if m.pass { "all checks passed" } else { "some checks failed" }, m.wall_clock_seconds);
            if m.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if let CliError::Constraint(r) = &e {
                eprintln!("{}", serde_json::to_string_pretty(r).unwrap_or_default());
            }
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
