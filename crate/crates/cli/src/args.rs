use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use emg_hmm::pipeline::TrainingMode;

use crate::commands::{cmd_detect, cmd_report, cmd_synth, cmd_validate, SEGMENTS_FILE};
use crate::config::{parse_training, PipelineConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "emg-hmm",
    version,
    about = "HMM-based activity detection for multi-channel sEMG"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic recording and its ground truth.
    Synth(SynthArgs),
    /// Detect activity segments in a recording.
    Detect(DetectArgs),
    /// Classify edge windows around stimulus and detected edges.
    Validate(ValidateArgs),
    /// Aggregate accuracy reports into a stimulus-vs-detected table.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rate_hz: Option<f64>,
    #[arg(long = "stim-s")]
    pub stim_s: Option<f64>,
    #[arg(long = "rest-s")]
    pub rest_s: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "hw-delay-s")]
    pub hw_delay_s: Option<f64>,
}

impl CommonArgs {
    fn load(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = PipelineConfig::load(self.config.as_deref())?;
        set(&mut cfg.rate_hz, self.rate_hz);
        set(&mut cfg.schedule.stimulus_len_s, self.stim_s);
        set(&mut cfg.schedule.rest_len_s, self.rest_s);
        set(&mut cfg.schedule.repetitions, self.reps);
        set(&mut cfg.schedule.hardware_delay_s, self.hw_delay_s);
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub rest_sigma: Option<f64>,
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long)]
    pub reaction_delay_s: Option<f64>,
    #[arg(long)]
    pub reaction_jitter_s: Option<f64>,
    #[arg(long)]
    pub gesture_s: Option<f64>,
    #[arg(long)]
    pub gesture_jitter_s: Option<f64>,
    #[arg(long)]
    pub ramp_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Signal CSV with header `t,ch1,...,chC`.
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// RMS window length in samples.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub smoothing: Option<f64>,
    #[arg(long)]
    pub min_duration_s: Option<f64>,
    /// `per-repetition` or `per-recording`.
    #[arg(long, value_parser = parse_training)]
    pub training: Option<TrainingMode>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub signal: PathBuf,
    /// Detected segments; defaults to `segments.jsonl` in the output directory.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub gesture: Option<String>,
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long)]
    pub half_width_s: Option<f64>,
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Accuracy reports written by `validate`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Also write the comparison rows as JSON lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SynthArgs {
    pub fn config(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = self.common.load()?;
        let s = &mut cfg.synth;
        set(&mut s.seed, self.seed);
        set(&mut s.channels, self.channels);
        set(&mut s.rest_noise_sigma, self.rest_sigma);
        set(&mut s.activity_gain, self.gain);
        set(&mut s.reaction_delay_s.mean, self.reaction_delay_s);
        set(&mut s.reaction_delay_s.jitter, self.reaction_jitter_s);
        set(&mut s.gesture_duration_s.mean, self.gesture_s);
        set(&mut s.gesture_duration_s.jitter, self.gesture_jitter_s);
        set(&mut s.envelope_ramp_s, self.ramp_s);
        Ok(cfg)
    }
}

impl DetectArgs {
    pub fn config(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = self.common.load()?;
        let d = &mut cfg.detect;
        set(&mut d.window_len, self.window);
        set(&mut d.hop, self.hop);
        set(&mut d.num_levels, self.levels);
        set(&mut d.smoothing, self.smoothing);
        set(&mut d.min_duration_s, self.min_duration_s);
        set(&mut d.training, self.training);
        Ok(cfg)
    }
}

impl ValidateArgs {
    pub fn config(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = self.common.load()?;
        set(&mut cfg.gesture, self.gesture.clone());
        set(&mut cfg.subject, self.subject.clone());
        let v = &mut cfg.validate;
        set(&mut v.half_width_s, self.half_width_s);
        set(&mut v.c, self.c);
        set(&mut v.folds, self.folds);
        set(&mut v.seed, self.seed);
        Ok(cfg)
    }
}

/// Runs one parsed command; progress lines go to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(args) => {
            let out = cmd_synth(&args.config()?, &args.out_dir)?;
            println!("wrote {} and {}", out.signal.display(), out.truth.display());
        }
        Command::Detect(args) => {
            let summary = cmd_detect(&args.config()?, &args.signal, &args.out_dir)?;
            println!(
                "detected {} of {} repetitions ({} failures)",
                summary.detected, summary.repetitions, summary.failures
            );
        }
        Command::Validate(args) => {
            let segments = args
                .segments
                .clone()
                .unwrap_or_else(|| args.out_dir.join(SEGMENTS_FILE));
            let records = cmd_validate(&args.config()?, &args.signal, &segments, &args.out_dir)?;
            for r in records {
                println!(
                    "{:<9} {:<12} {:<11} {:6.2}%",
                    r.source.to_string(),
                    r.edge_kind.to_string(),
                    r.mode,
                    r.accuracy_pct
                );
            }
        }
        Command::Report(args) => {
            let (_, table) = cmd_report(&args.reports, args.out.as_deref())?;
            print!("{table}");
        }
    }
    Ok(())
}
