//! Pipeline configuration: built-in defaults, optionally overridden by a
//! TOML file, then by command-line flags.

use std::path::Path;

use emg_hmm::pipeline::{DetectConfig, TrainingMode, ValidateConfig};
use emg_hmm::{Jittered, StimulusSchedule, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub channels: usize,
    pub rest_noise_sigma: f64,
    pub activity_gain: f64,
    pub reaction_delay_s: Jittered,
    pub gesture_duration_s: Jittered,
    pub envelope_ramp_s: f64,
    pub seed: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            channels: d.channels,
            rest_noise_sigma: d.rest_noise_sigma,
            activity_gain: d.activity_gain,
            reaction_delay_s: d.reaction_delay_s,
            gesture_duration_s: d.gesture_duration_s,
            envelope_ramp_s: d.envelope_ramp_s,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub rate_hz: f64,
    pub gesture: String,
    pub subject: String,
    pub schedule: StimulusSchedule,
    pub synth: SynthSection,
    pub detect: DetectConfig,
    pub validate: ValidateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rate_hz: 1100.0,
            gesture: "gesture".into(),
            subject: "subject".into(),
            schedule: StimulusSchedule::default(),
            synth: SynthSection::default(),
            detect: DetectConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            schedule: self.schedule,
            channels: s.channels,
            rate_hz: self.rate_hz,
            rest_noise_sigma: s.rest_noise_sigma,
            activity_gain: s.activity_gain,
            reaction_delay_s: s.reaction_delay_s,
            gesture_duration_s: s.gesture_duration_s,
            envelope_ramp_s: s.envelope_ramp_s,
            seed: s.seed,
        }
    }
}

pub fn parse_training(s: &str) -> Result<TrainingMode, String> {
    match s {
        "per-repetition" => Ok(TrainingMode::PerRepetition),
        "per-recording" => Ok(TrainingMode::PerRecording),
        other => Err(format!("unknown training mode `{other}`")),
    }
}
