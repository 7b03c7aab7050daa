use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cvverify::runner::{self, Mode, RunConfig};

#[derive(Parser)]
#[command(name = "cvverify", version, about = "Entanglement verification with missed counts outside the detector range")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured criterion at a single configuration point.
    Analyze(Common),
    /// Sweep the number of detector bins.
    SweepBins(Common),
    /// Sweep the symmetric no-count cutoff.
    SweepCutoff(Common),
    /// Run the pipeline on seeded Monte-Carlo detection records.
    Sample(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.json (and sweep.csv / event dumps).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the sample seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Analyze(a) => (Mode::Analyze, a),
        Command::SweepBins(a) => (Mode::SweepBins, a),
        Command::SweepCutoff(a) => (Mode::SweepCutoff, a),
        Command::Sample(a) => (Mode::Sample, a),
    };
    let mut cfg = RunConfig::from_path(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    cfg.mode = Some(mode);
    if let (Some(seed), Some(sample)) = (args.seed, cfg.sample.as_mut()) {
        sample.seed = seed;
    }
    let out = args.out.or_else(|| cfg.output.dir.as_ref().map(PathBuf::from));
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let report = runner::run(&cfg, out.as_deref())?;
    if let Some(dir) = &out {
        runner::write_outputs(&report, dir)?;
    }
    print!("{}", report.to_json()?);
    Ok(())
}
