//! `speckle-ghost`: simulate speckle stacks and reconstruct ghost images.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use speckle_ghost::gi::Technique;
use speckle_ghost::io::Scaling;
use speckle_ghost::speckle::Backend;
use speckle_ghost::{ArmLayout, LightKind, Parallelism, Roi};

use crate::commands::Context;
use crate::config::ExperimentConfig;
use crate::exit::{CliError, CliResult, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "speckle-ghost",
    version,
    about = "Ghost imaging with thermal and super-thermal speckle"
)]
struct Cli {
    /// TOML configuration with `sim.`, `run.`, `analysis.` and `output.` keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of frames (overrides `run.n_frames`).
    #[arg(long, global = true)]
    frames: Option<usize>,
    /// Master seed (overrides `run.master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    light: Option<Light>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Use the 200x200 grid, 10^5 frames and the 20x50 object as defaults.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Light {
    Thermal,
    Superthermal,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Physical,
    Compound,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Size,
    Frames,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stack and write it as an SPKS file.
    Simulate {
        /// Destination file; defaults to `<out>/stack.spks`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Autocorrelation, speckle size and mode-count estimates.
    Characterize {
        /// Stack to analyse; without it frames are simulated from the configuration.
        stack: Option<PathBuf>,
    },
    /// Ghost image of the configured object and its figures of merit.
    Gi { stack: Option<PathBuf> },
    /// Differential ghost image of the configured object and its figures of merit.
    Dgi { stack: Option<PathBuf> },
    /// Figures of merit against object size or number of frames.
    Sweep {
        #[arg(long, value_enum)]
        mode: SweepMode,
        stack: Option<PathBuf>,
    },
    /// Resolution parameter of three-slit objects for each configured gap.
    Resolution { stack: Option<PathBuf> },
    /// Convert a directory of grayscale images into an SPKS stack.
    Ingest {
        dir: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Bucket-arm rectangle `x,y,w,h`.
        #[arg(long, value_parser = parse_roi, requires = "reference_arm")]
        bucket_arm: Option<Roi>,
        /// Reference-arm rectangle `x,y,w,h`.
        #[arg(long, value_parser = parse_roi, requires = "bucket_arm")]
        reference_arm: Option<Roi>,
    },
    /// Write one frame of a stack as a 16-bit graymap.
    Export {
        stack: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        output: PathBuf,
        /// Fixed range `min,max` instead of the frame's own range.
        #[arg(long, value_parser = parse_range)]
        range: Option<(f64, f64)>,
    },
}

fn parse_roi(s: &str) -> Result<Roi, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] => Ok(Roi::new(x, y, w, h)),
        _ => Err("expected x,y,w,h".into()),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected min,max")?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn context(cli: &Cli) -> CliResult<Context> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), cli.paper_scale)?;
    if let Some(n) = cli.frames {
        cfg.run.n_frames = n;
    }
    if let Some(s) = cli.seed {
        cfg.run.master_seed = s;
    }
    if let Some(l) = cli.light {
        cfg.run.light_kind = match l {
            Light::Thermal => LightKind::Thermal,
            Light::Superthermal => LightKind::Superthermal,
        };
    }
    if let Some(b) = cli.backend {
        cfg.sim.backend = match b {
            BackendArg::Physical => Backend::Physical,
            BackendArg::Compound => Backend::Compound,
        };
    }
    if cli.workers == Some(0) {
        return Err(CliError::new(EXIT_CONFIG, "--workers must be at least 1"));
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    Ok(Context {
        cfg,
        out,
        par: Parallelism { workers: cli.workers },
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = context(&cli)?;
    match &cli.command {
        Command::Simulate { output } => commands::simulate(&ctx, output.as_deref()),
        Command::Characterize { stack } => commands::characterize(&ctx, stack.as_deref()),
        Command::Gi { stack } => commands::reconstruct(&ctx, stack.as_deref(), Technique::Gi),
        Command::Dgi { stack } => commands::reconstruct(&ctx, stack.as_deref(), Technique::Dgi),
        Command::Sweep { mode, stack } => match mode {
            SweepMode::Size => commands::sweep_sizes(&ctx, stack.as_deref()),
            SweepMode::Frames => commands::sweep_frames(&ctx, stack.as_deref()),
        },
        Command::Resolution { stack } => commands::resolution(&ctx, stack.as_deref()),
        Command::Ingest {
            dir,
            output,
            bucket_arm,
            reference_arm,
        } => {
            let layout = bucket_arm
                .zip(*reference_arm)
                .map(|(bucket, reference)| ArmLayout { bucket, reference });
            commands::ingest(dir, output, layout)
        }
        Command::Export {
            stack,
            frame,
            output,
            range,
        } => {
            let scaling = range.map_or(Scaling::Linear, |(min, max)| Scaling::Fixed { min, max });
            commands::export(stack, *frame, output, scaling)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
