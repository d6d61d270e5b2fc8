use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use mixlab::{parse_config, run, ConfigErrors, Format, Kind};

#[derive(Parser)]
#[command(
    name = "mixlab",
    version,
    about = "Mixing experiments for the complete-graph exclusion process"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Worst-start distance to equilibrium over time.
    TvCurve(Common),
    /// Mixing times and windows across a grid of n.
    Sweep(Common),
    /// Coupling tail against the exact distance.
    Coupling(Common),
    /// Lower bounds against the exact distance.
    Bounds(Common),
    /// Survival of the lazy walk against its Gaussian limit.
    Hitting(Common),
    /// Cross-check every identity on small instances.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads for replica fan-out.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_ORACLE: u8 = 2;

fn split(command: Command) -> (Kind, Common) {
    match command {
        Command::TvCurve(c) => (Kind::TvCurve, c),
        Command::Sweep(c) => (Kind::Sweep, c),
        Command::Coupling(c) => (Kind::Coupling, c),
        Command::Bounds(c) => (Kind::Bounds, c),
        Command::Hitting(c) => (Kind::Hitting, c),
        Command::OracleCheck(c) => (Kind::OracleCheck, c),
    }
}

fn execute(kind: Kind, args: Common) -> anyhow::Result<usize> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = parse_config(&text, Some(kind))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(f) = args.format {
        config.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    let out = args.out.or(config.output.clone());
    if let Some(t) = args.threads.or(config.threads) {
        if t == 0 {
            anyhow::bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()?;
    }

    let started = Instant::now();
    let outcome = run(&config)?;
    let text = outcome.record.render(config.format);
    match &out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    // wall time is kept out of the output so reruns stay byte-identical
    eprintln!(
        "{}: {} rows in {:.3}s",
        kind.name(),
        outcome.record.rows.len(),
        started.elapsed().as_secs_f64()
    );
    if let Some(w) = outcome.record.meta.get("warnings") {
        eprintln!("warnings: {w}");
    }
    if let Some(f) = outcome
        .record
        .meta
        .get("failures")
        .filter(|_| outcome.failures > 0)
    {
        eprintln!("oracle failures: {f}");
    }
    Ok(outcome.failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = split(cli.command);
    match execute(kind, args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(EXIT_ORACLE),
        Err(e) => {
            match e.downcast_ref::<ConfigErrors>() {
                Some(errors) => eprint!("{errors}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
