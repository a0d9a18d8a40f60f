//! The detection chain (RMS, quantize, stimulus labels, estimate, Viterbi,
//! refine) and the edge-window validation experiment over one recording.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{
    estimate_supervised, viterbi_decode, DiscreteHmm, ViterbiResult, DEFAULT_SMOOTHING,
};
use crate::refine::{
    consolidate_edges, remove_short_segments, ActivitySegment, SegmentRecord,
    DEFAULT_MIN_DURATION_S,
};
use crate::signal::{
    collapse_channels, compute_rms_envelope, csv_io, quantize_uniform_on, MultiChannelSignal,
    QuantizedSequence, DEFAULT_HOP, DEFAULT_NUM_LEVELS, DEFAULT_WINDOW_LEN,
};
use crate::stimulus::{split_repetitions, stimulus_labels, StateSequence, StimulusSchedule};
use crate::validation::{
    evaluate_split, extract_edge_windows, AccuracyRecord, EdgeKind, EdgeSource, EdgeWindowSet,
    SplitMode, DEFAULT_C, DEFAULT_FOLDS, DEFAULT_HALF_WIDTH_S,
};

/// Whether one HMM is trained per repetition or one for the whole recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingMode {
    #[default]
    PerRepetition,
    PerRecording,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub window_len: usize,
    pub hop: usize,
    pub num_levels: usize,
    pub smoothing: f64,
    pub min_duration_s: f64,
    pub training: TrainingMode,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW_LEN,
            hop: DEFAULT_HOP,
            num_levels: DEFAULT_NUM_LEVELS,
            smoothing: DEFAULT_SMOOTHING,
            min_duration_s: DEFAULT_MIN_DURATION_S,
            training: TrainingMode::PerRepetition,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepetitionDetection {
    pub repetition: usize,
    pub windows: Range<usize>,
    pub observations: QuantizedSequence,
    pub labels: StateSequence,
    pub model: DiscreteHmm,
    pub viterbi: ViterbiResult,
    pub refined: StateSequence,
    /// `None` when no activity survived refinement.
    pub segment: Option<ActivitySegment>,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub repetitions: Vec<RepetitionDetection>,
    /// Repetitions whose window range was too short to train on.
    pub untrainable: Vec<usize>,
}

impl Detection {
    pub fn segments(&self) -> Vec<SegmentRecord> {
        self.repetitions
            .iter()
            .filter_map(|r| {
                r.segment.map(|s| SegmentRecord {
                    repetition: r.repetition,
                    onset_s: s.onset_s,
                    termination_s: s.termination_s,
                })
            })
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.untrainable.len()
            + self
                .repetitions
                .iter()
                .filter(|r| r.segment.is_none())
                .count()
    }

    /// Per-window table for plotting: `repetition,window,time_s,symbol,
    /// stimulus,viterbi,refined`. `window` is the recording-global index.
    pub fn write_state_table<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "repetition",
            "window",
            "time_s",
            "symbol",
            "stimulus",
            "viterbi",
            "refined",
        ])
        .map_err(csv_io)?;
        for r in &self.repetitions {
            let grid = r.observations.grid();
            for w in 0..r.observations.len() {
                wtr.write_record([
                    r.repetition.to_string(),
                    (grid.offset + w).to_string(),
                    grid.center_s(w).to_string(),
                    r.observations.symbols()[w].to_string(),
                    (r.labels.states()[w] as u8).to_string(),
                    (r.viterbi.states.states()[w] as u8).to_string(),
                    (r.refined.states()[w] as u8).to_string(),
                ])
                .map_err(csv_io)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn detect(
    signal: &MultiChannelSignal,
    schedule: &StimulusSchedule,
    config: &DetectConfig,
) -> Result<Detection> {
    schedule.validate()?;
    let envelope = compute_rms_envelope(signal, config.window_len, config.hop)?;
    let grid = envelope.grid();
    let observations = quantize_uniform_on(&collapse_channels(&envelope), config.num_levels, grid)?;
    let labels = stimulus_labels(schedule, observations.len(), grid)?;
    let ranges = split_repetitions(observations.len(), schedule, grid);

    let recording = match config.training {
        TrainingMode::PerRecording => {
            let model = estimate_supervised(&observations, &labels, config.smoothing)?;
            let decoded = viterbi_decode(&model, &observations)?;
            Some((model, decoded))
        }
        TrainingMode::PerRepetition => None,
    };

    let mut repetitions = Vec::new();
    let mut untrainable = Vec::new();
    for (k, range) in ranges.into_iter().enumerate() {
        if range.len() < 2 {
            untrainable.push(k);
            continue;
        }
        let obs = observations.slice(range.clone());
        let lab = labels.slice(range.clone());
        let (model, viterbi) = match &recording {
            Some((model, decoded)) => (
                model.clone(),
                ViterbiResult {
                    states: decoded.states.slice(range.clone()),
                    log_likelihood: decoded.log_likelihood,
                },
            ),
            None => {
                let model = estimate_supervised(&obs, &lab, config.smoothing)?;
                let viterbi = viterbi_decode(&model, &obs)?;
                (model, viterbi)
            }
        };
        let refined = remove_short_segments(
            &viterbi.states,
            config.min_duration_s,
            grid.hop,
            grid.rate_hz,
        );
        let segment = consolidate_edges(&refined);
        repetitions.push(RepetitionDetection {
            repetition: k,
            windows: range,
            observations: obs,
            labels: lab,
            model,
            viterbi,
            refined,
            segment,
        });
    }
    Ok(Detection {
        repetitions,
        untrainable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateConfig {
    pub half_width_s: f64,
    pub c: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            half_width_s: DEFAULT_HALF_WIDTH_S,
            c: DEFAULT_C,
            folds: DEFAULT_FOLDS,
            seed: 42,
        }
    }
}

/// Edge-window sets for both sources and both edge kinds, in the order
/// stimulus onset, stimulus termination, detected onset, detected
/// termination.
pub fn edge_window_sets(
    signal: &MultiChannelSignal,
    schedule: &StimulusSchedule,
    detected: &[SegmentRecord],
    half_width_s: f64,
) -> Result<Vec<EdgeWindowSet>> {
    let stim: Vec<(f64, f64)> = (0..schedule.repetitions)
        .map(|k| schedule.stimulus_interval(k))
        .collect();
    let det: Vec<(f64, f64)> = detected
        .iter()
        .map(|r| (r.onset_s, r.termination_s))
        .collect();
    let mut sets = Vec::with_capacity(4);
    for (source, edges) in [(EdgeSource::Stimulus, &stim), (EdgeSource::Detected, &det)] {
        let onsets: Vec<f64> = edges.iter().map(|e| e.0).collect();
        let terms: Vec<f64> = edges.iter().map(|e| e.1).collect();
        sets.push(extract_edge_windows(
            signal,
            &onsets,
            EdgeKind::Onset,
            source,
            half_width_s,
        )?);
        sets.push(extract_edge_windows(
            signal,
            &terms,
            EdgeKind::Termination,
            source,
            half_width_s,
        )?);
    }
    Ok(sets)
}

/// Half-split and k-fold accuracy for each set.
pub fn accuracy_records(
    sets: &[EdgeWindowSet],
    config: &ValidateConfig,
    gesture: &str,
    subject: &str,
) -> Result<Vec<AccuracyRecord>> {
    let modes = [SplitMode::HalfSplit, SplitMode::KFold(config.folds)];
    let mut out = Vec::with_capacity(sets.len() * modes.len());
    for set in sets {
        if set.is_empty() {
            return Err(Error::invalid(format!(
                "no usable {} {} edges",
                set.source, set.edge_kind
            )));
        }
        for mode in modes {
            out.push(AccuracyRecord {
                gesture: gesture.to_string(),
                subject: subject.to_string(),
                edge_kind: set.edge_kind,
                source: set.source,
                mode: mode.to_string(),
                accuracy_pct: evaluate_split(set, config.c, mode, config.seed)?,
            });
        }
    }
    Ok(out)
}
