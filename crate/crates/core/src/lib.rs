//! HMM-based rest/activity detection for multi-channel surface EMG.
//!
//! The detection chain turns raw samples into an RMS envelope, quantizes it
//! to a small alphabet, trains a two-state discrete HMM per repetition from
//! stimulus-derived labels, decodes the most probable state path and cleans
//! it up with a minimum-duration rule and a first-onset/last-termination
//! rule. [`validation`] scores the resulting edges with a linear SVM on
//! edge-window RMS features, and [`synth`] produces recordings with known
//! ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod hmm;
pub mod pipeline;
pub mod refine;
pub mod signal;
pub mod stimulus;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
pub use hmm::{
    estimate_supervised, sequence_log_likelihood, viterbi_decode, DiscreteHmm, ViterbiResult,
};
pub use pipeline::{detect, DetectConfig, Detection, TrainingMode, ValidateConfig};
pub use refine::{
    consolidate_edges, remove_short_segments, segment_error, ActivitySegment, SegmentRecord,
    TimeSpan,
};
pub use signal::{
    collapse_channels, compute_rms_envelope, quantize_uniform, MultiChannelSignal,
    QuantizedSequence, RmsEnvelope, WindowGrid,
};
pub use stimulus::{split_repetitions, stimulus_labels, State, StateSequence, StimulusSchedule};
pub use synth::{generate, GroundTruth, Jittered, SynthConfig};
pub use validation::{
    classify, evaluate_split, extract_edge_windows, scatter_export, train_linear_svm,
    AccuracyRecord, ClassifierModel, EdgeKind, EdgeSource, EdgeWindowSet, SplitMode,
};
