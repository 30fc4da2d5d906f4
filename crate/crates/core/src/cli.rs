//! Command-line surface. The binary only parses and maps errors to exit codes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::batch::{self, RunConfig, SweepAxis};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "ftns", version, about = "Noise spectroscopy from qubit coherence measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON, schema_version 1).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; falls back to the config's output_dir, then ./out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides plan.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a coherence trace (trace.csv + trace.json).
    Simulate(Common),
    /// Reconstruct a spectrum from a trace, or run the configured DDNS baseline.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run several configs over one spectrum and tabulate their errors.
    Compare {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Allow configs that describe different spectra.
        #[arg(long)]
        force: bool,
    },
    /// Repeat one config over a list of values of a single parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Dump exact χ(t) and S(ω) for the configured spectrum.
    Oracle(Common),
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(&common.config)?.with_seed(common.seed);
    let out = batch::resolve_out(&cfg, common.out.as_deref());
    Ok((cfg, out))
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, out) = load(&common)?;
            print_files(&batch::cmd_simulate(&cfg, &out)?);
        }
        Command::Reconstruct { common, trace } => {
            let (cfg, out) = load(&common)?;
            print_files(&batch::cmd_reconstruct(&cfg, trace.as_deref(), &out)?);
        }
        Command::Compare { configs, out, seed, force } => {
            let cfgs: Vec<(String, RunConfig)> = configs
                .iter()
                .map(|p| {
                    let stem = p.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
                    RunConfig::load(p).map(|c| (stem, c.with_seed(seed)))
                })
                .collect::<Result<_>>()?;
            let out = out.unwrap_or_else(|| batch::resolve_out(&cfgs[0].1, None));
            let report = batch::cmd_compare(&cfgs, &out, force)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print_files(&[out.join("compare.csv"), out.join("compare.json")]);
        }
        Command::Sweep { common, axis, values } => {
            let (cfg, out) = load(&common)?;
            let rows = batch::cmd_sweep(&cfg, axis, &values, &out)?;
            for r in rows {
                println!("{}", Path::new(&out).join(r.dir).display());
            }
        }
        Command::Oracle(common) => {
            let (cfg, out) = load(&common)?;
            print_files(&batch::cmd_oracle(&cfg, &out)?);
        }
    }
    Ok(())
}
