mod cache;
mod config;
mod output;
mod suites;

use cache::Cache;
use clap::{Parser, Subcommand};
use config::{ConfigError, ExperimentConfig};
use output::Output;
use std::path::PathBuf;
use std::process::ExitCode;
use suites::Context;

const EXIT_CONFIG: u8 = 2;
const EXIT_COMPUTE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "cuspwave", version, about = "Gallery-cusp parametrix experiments")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// TOML experiment config; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory (default: config output_dir, else ./cuspwave-out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads for ladders and grid tiles
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// neither read nor write the ladder cache
    #[arg(long, global = true)]
    no_cache: bool,
    /// suite to run; for `ladder` this picks the ladder suite
    #[arg(long, global = true)]
    suite: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Airy zeros and identities
    Selftest,
    /// gallery-mode eigenvalue table
    Modes,
    /// billiard-map iterates and flow check
    Billiard,
    /// phase and ζ jets along the boundary
    Eikonal,
    /// one parametrix piece on a grid
    Cusp,
    /// boundary trace cancellation
    Trace,
    /// L^r and mixed norms over J₀
    Norms,
    /// h-ladder with fitted slopes
    Ladder,
    /// Strichartz quotient slopes
    Quotient,
    /// list the registered suites
    List,
}

impl Command {
    fn suite(self) -> Option<&'static str> {
        Some(match self {
            Command::Selftest => "airy-selftest",
            Command::Modes => "modes",
            Command::Billiard => "billiard",
            Command::Eikonal => "eikonal",
            Command::Cusp => "cusp",
            Command::Trace => "trace",
            Command::Norms => "norms",
            Command::Quotient => "quotient",
            Command::Ladder | Command::List => return None,
        })
    }
}

fn resolve_suite(cli: &Cli, cfg: &ExperimentConfig) -> Result<String, ConfigError> {
    let requested = cli.suite.clone().or_else(|| cfg.suite.clone());
    match cli.command {
        Some(Command::Ladder) => {
            let name = requested.unwrap_or_else(|| "scaling-r6".into());
            if !name.starts_with("scaling") {
                return Err(ConfigError::Invalid(format!("suite {name:?} is not a ladder suite")));
            }
            Ok(name)
        }
        Some(cmd) => {
            let fixed = cmd.suite().expect("list handled earlier");
            match cli.suite.as_deref() {
                Some(s) if s != fixed => Err(ConfigError::Invalid(format!("--suite {s} conflicts with the {fixed} subcommand"))),
                _ => Ok(fixed.to_string()),
            }
        }
        None => requested.ok_or_else(|| ConfigError::Invalid("give a subcommand or --suite".into())),
    }
}

fn run(cli: &Cli) -> Result<(), (u8, anyhow::Error)> {
    let cfg_err = |e: ConfigError| (EXIT_CONFIG, anyhow::Error::new(e));
    if cli.command == Some(Command::List) {
        for s in suites::registry() {
            println!("{:<14} {}", s.name(), s.describe());
        }
        return Ok(());
    }
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(cfg_err)?,
        None => ExperimentConfig::default(),
    };
    let name = resolve_suite(cli, &cfg).map_err(cfg_err)?;
    let suite = suites::suite(&name).map_err(cfg_err)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(cfg_err(ConfigError::Invalid("--workers must be at least 1".into())));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (EXIT_COMPUTE, e.into()))?;
    }
    let root = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| "cuspwave-out".into());
    let use_cache = !cli.no_cache && cfg.cache.unwrap_or(true);
    let cache = use_cache.then(|| Cache::new(Cache::default_dir(&root)));
    let out = Output::create(&root.join(&name)).map_err(|e| (EXIT_COMPUTE, e.into()))?;
    let mut cx = Context { config: &cfg, cache, out };
    match suite.run(&mut cx) {
        Ok(()) => {
            let dir = cx.out.dir().to_path_buf();
            cx.out.finish().map_err(|e| (EXIT_COMPUTE, e.into()))?;
            println!("{name}: ok, artifacts in {}", dir.display());
            Ok(())
        }
        Err(e) => {
            let code = if e.downcast_ref::<ConfigError>().is_some() { EXIT_CONFIG } else { EXIT_COMPUTE };
            if code == EXIT_COMPUTE {
                let _ = cx.out.finish_partial(&format!("{e:#}"));
            }
            Err((code, e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
