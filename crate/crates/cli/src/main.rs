//! `nocs`: mask, reconstruct and evaluate spectral channels.

mod commands;
mod error;
mod io;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nocs_core::masks::{MaskPattern, DEFAULT_DENSITY};
use nocs_core::NocsParams;

use commands::{BatchConfig, MaskSource, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "nocs", version, about = "Non-local cross-spectral reconstruction of missing pixels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or load) a mask and apply it to one band of an image.
    Mask(MaskCmd),
    /// Reconstruct the masked pixels of one band from the remaining bands.
    Reconstruct(ReconstructCmd),
    /// Print PSNR and SSIM of one band against a clean image.
    Evaluate(EvaluateCmd),
    /// Mask, reconstruct and evaluate every image in a directory.
    Batch(BatchCmd),
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Edge length of the matching block.
    #[arg(long, default_value_t = 9)]
    block_size: usize,
    /// Number of matched locations per bar.
    #[arg(long, default_value_t = 44)]
    stack_size: usize,
    /// Half-width of the search window.
    #[arg(long, default_value_t = 16)]
    search_radius: usize,
    /// Share of pending pixels reconstructed per iteration.
    #[arg(long, default_value_t = 0.10)]
    batch_fraction: f64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl ParamArgs {
    fn params(&self) -> NocsParams {
        NocsParams {
            block_size: self.block_size,
            stack_size: self.stack_size,
            search_radius: self.search_radius,
            batch_fraction: self.batch_fraction,
        }
    }
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// rect_loss, hbar_loss, mixed_loss, random_unmask or four_quadrant.
    #[arg(long, default_value = "four_quadrant", value_parser = parse_pattern)]
    mask_pattern: MaskPattern,
    /// Requested share of masked pixels.
    #[arg(long, default_value_t = DEFAULT_DENSITY)]
    density: f64,
    /// Rectangle edge / bar thickness; scaled from 12 px at 1200x1200 by default.
    #[arg(long)]
    element_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_pattern(s: &str) -> Result<MaskPattern, String> {
    s.parse().map_err(|e: nocs_core::NocsError| e.to_string())
}

#[derive(Args)]
struct MaskCmd {
    #[arg(long)]
    input: PathBuf,
    /// Distorted image to write.
    #[arg(long)]
    output: PathBuf,
    /// Mask file to write (0 = masked, 255 = valid).
    #[arg(long)]
    mask_out: PathBuf,
    /// Use this mask file instead of generating one.
    #[arg(long, conflicts_with_all = ["mask_pattern", "density", "element_size", "seed"])]
    mask: Option<PathBuf>,
    #[command(flatten)]
    spec: SpecArgs,
    /// Band to distort.
    #[arg(long, default_value_t = 1)]
    channel: usize,
}

#[derive(Args)]
struct ReconstructCmd {
    /// Distorted image.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    channel: usize,
    #[command(flatten)]
    params: ParamArgs,
    /// Print per-iteration progress to stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct EvaluateCmd {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    reconstructed: PathBuf,
    #[arg(long, default_value_t = 1)]
    channel: usize,
    /// Append a row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BatchCmd {
    image_dir: PathBuf,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Save reconstructed images into this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    channel: usize,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Fill the seconds column (makes the CSV run-dependent).
    #[arg(long)]
    timing: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mask(cmd) => {
            let source = match cmd.mask {
                Some(p) => MaskSource::File(p),
                None => MaskSource::Generate {
                    pattern: cmd.spec.mask_pattern,
                    density: cmd.spec.density,
                    element_size: cmd.spec.element_size,
                    seed: cmd.spec.seed,
                },
            };
            commands::cmd_mask(&cmd.input, &cmd.output, &cmd.mask_out, &source, cmd.channel)
        }
        Command::Reconstruct(cmd) => {
            let config = RunConfig {
                channel: cmd.channel,
                params: cmd.params.params(),
                threads: cmd.params.threads,
                progress: cmd.progress,
            };
            commands::cmd_reconstruct(&cmd.input, &cmd.mask, &cmd.output, &config)
        }
        Command::Evaluate(cmd) => {
            let report = commands::cmd_evaluate(&cmd.clean, &cmd.reconstructed, cmd.channel, cmd.csv.as_deref())?;
            println!("{}", commands::format_report(&report));
            Ok(())
        }
        Command::Batch(cmd) => {
            let config = BatchConfig {
                run: RunConfig {
                    channel: cmd.channel,
                    params: cmd.params.params(),
                    threads: cmd.params.threads,
                    progress: false,
                },
                pattern: cmd.spec.mask_pattern,
                density: cmd.spec.density,
                element_size: cmd.spec.element_size,
                base_seed: cmd.spec.seed,
                out_dir: cmd.out_dir,
                timing: cmd.timing,
            };
            let csv = commands::cmd_batch(&cmd.image_dir, &config)?;
            match cmd.csv {
                Some(path) => fs::write(&path, csv).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nocs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
