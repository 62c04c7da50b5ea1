use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use levyflow::config::{describe, ExperimentConfig, OutputFormat};
use levyflow::runner;

/// Runs a configured experiment. Exit status: 0 when every verdict passes,
/// 2 when a verdict fails, 1 on any error.
#[derive(Debug, Parser)]
#[command(name = "levyflow", version, about)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` (and is not part of the report).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seeds.master`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "LEVYFLOW_THREADS")]
    threads: Option<usize>,
    /// Report format; overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prints what an experiment checks and its config keys.
    Describe { tag: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    if let Some(Command::Describe { tag }) = &cli.command {
        print!("{}", describe(tag)?);
        return Ok(0);
    }
    let path = cli
        .config
        .ok_or("missing --config <path> (or use `describe <tag>`)")?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seeds.master = seed;
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    let out = match (&cli.out, &cfg.output.dir) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("out"),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err("--threads must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let outcome = runner::run(&cfg, &out, cfg.output.format)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let r = &outcome.report;
    println!(
        "{}: pass={} failures={} ({} files in {})",
        r.experiment,
        r.pass,
        r.failures,
        outcome.files.len(),
        out.display()
    );
    Ok(if r.pass { 0 } else { 2 })
}
