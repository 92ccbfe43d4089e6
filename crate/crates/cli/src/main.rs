//! `star`: command-line front end for the csi-har toolkit.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "star",
    version,
    about = "Wi-Fi CSI activity recognition toolkit"
)]
pub struct Cli {
    /// Seed for every random choice (synthesis, initialization, batching).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML settings file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Run data-parallel loops on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Log more to standard error (repeat for debug output).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic capture.
    Synth(SynthArgs),
    /// Window and preprocess a capture into a feature file.
    Preprocess(PreprocessArgs),
    /// Print Butterworth coefficients and pole magnitudes.
    FilterDesign(FilterDesignArgs),
    /// Train an FP32 model on a synthetic dataset directory.
    Train(TrainArgs),
    /// Per-class test accuracy of a model.
    Eval(EvalArgs),
    /// Quantize an FP32 model to INT8 and report agreement.
    Quantize(QuantizeArgs),
    /// Stream a capture through the pipeline and print results.
    Replay(ReplayArgs),
    /// Measure sustained throughput, latency and CPU time per window.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for capture.csv, labels.csv and dataset.toml.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub frames_per_class: Option<usize>,
    /// Fraction of each class's windows used for training.
    #[arg(long, value_name = "RATIO")]
    pub split: Option<f64>,
    /// Standard deviation of the amplitude noise.
    #[arg(long, value_name = "STD")]
    pub noise: Option<f64>,
    #[arg(long, value_name = "FRAMES")]
    pub window_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long, value_name = "FILE")]
    pub capture: PathBuf,
    /// Label sidecar; windows then follow label spans.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Window file to write; standard output if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FRAMES")]
    pub window_len: Option<usize>,
    /// Frames between window starts when no labels are given.
    #[arg(long, value_name = "FRAMES")]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FilterDesignArgs {
    /// Cutoff frequency in Hz.
    #[arg(long, value_name = "HZ")]
    pub cutoff: Option<f64>,
    /// Sample rate in Hz.
    #[arg(long, value_name = "HZ")]
    pub fs: Option<f64>,
    #[arg(long, value_name = "N")]
    pub order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `star synth`.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub steps: Option<usize>,
    #[arg(long, value_name = "RATE")]
    pub lr: Option<f64>,
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,
    #[arg(long, value_name = "N")]
    pub hidden: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// FP32 or INT8 model file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Empty-room probability above which activities are suppressed.
    #[arg(long, value_name = "P")]
    pub threshold: Option<f64>,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    /// FP32 model to quantize.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Dataset directory; training windows calibrate, test windows compare.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// INT8 model file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write both agreement reports as JSON.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[arg(long, value_name = "P")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long, value_name = "FILE")]
    pub capture: PathBuf,
    /// FP32 or INT8 model file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Result file to write; standard output if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FRAMES")]
    pub stride: Option<usize>,
    #[arg(long, value_name = "P")]
    pub threshold: Option<f64>,
    /// Run every stage on one thread.
    #[arg(long)]
    pub single_threaded: bool,
    /// Evict the oldest queued window instead of blocking.
    #[arg(long)]
    pub drop_oldest: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_name = "FILE")]
    pub capture: PathBuf,
    /// FP32 model file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// INT8 model file; quantized from the FP32 model and the capture if omitted.
    #[arg(long, value_name = "FILE")]
    pub int8_model: Option<PathBuf>,
    /// Seconds of sustained replay.
    #[arg(long, value_name = "SECONDS", default_value_t = 3.0)]
    pub duration: f64,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.class());
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_every_flag() {
        let mut root = Cli::command();
        root.build();
        for sub in root.get_subcommands() {
            let help = sub.clone().render_long_help().to_string();
            for arg in sub.get_arguments() {
                if let Some(long) = arg.get_long() {
                    assert!(
                        help.contains(&format!("--{long}")),
                        "{} help misses --{long}",
                        sub.get_name()
                    );
                }
            }
        }
    }
}
