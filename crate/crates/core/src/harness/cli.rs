use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::config::ExperimentConfig;
use super::experiments::{run_experiment, ResultBundle, EXPERIMENTS};
use super::output::{write_bundle, OutputFormat};
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "IONSIM_THREADS";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
            Format::Both => OutputFormat::Both,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rabi scans on each ion: neighbour crosstalk and drift envelope
    Fig2,
    /// Pulse-start scans across a mirror switch: switching time
    Fig3,
    /// Beam waist from pi-times with the beam parked between the ions
    Waist,
    /// Sequential gates and tomography: gate fidelity table
    Table1,
    /// All of the above
    All,
}

#[derive(Debug, Parser)]
#[command(name = "ionsim", version, about = "MEMS-steered trapped-ion addressing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration (defaults to the built-in reference configuration)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shots per scan point / per tomography basis, overriding the configuration
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Suppress the summary on stdout
    #[arg(long, global = true)]
    quiet: bool,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::reference(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = cli.shots {
        cfg = cfg.with_shots(shots);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

fn summary(bundle: &ResultBundle) -> String {
    let mut s = format!("{}:", bundle.experiment);
    for (k, v) in &bundle.derived {
        s.push_str(&format!(" {k}={v:.6}"));
    }
    s
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Entry point of the `ionsim` binary; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match load_config(&cli).and_then(|c| thread_pool().map(|p| (c, p))) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (cfg, pool) = cfg;
    let names: Vec<&str> = match cli.command {
        Command::Fig2 => vec!["fig2"],
        Command::Fig3 => vec!["fig3"],
        Command::Waist => vec!["waist"],
        Command::Table1 => vec!["table1"],
        Command::All => EXPERIMENTS.to_vec(),
    };
    for name in names {
        let outcome = pool.install(|| run_experiment(name, &cfg)).and_then(|bundle| {
            write_bundle(&cli.out, &bundle, cli.format.into()).map(|paths| (bundle, paths))
        });
        match outcome {
            Ok((bundle, paths)) => {
                if !cli.quiet {
                    println!("{}", summary(&bundle));
                    for p in paths {
                        println!("  wrote {}", p.display());
                    }
                }
            }
            Err(e) => {
                eprintln!("error: {name}: {e}");
                return exit_code(&e);
            }
        }
    }
    EXIT_OK
}
