//! Subcommand bodies. Each reads its inputs, runs the library and writes
//! its outputs under an output directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use emg_hmm::pipeline::{accuracy_records, detect, edge_window_sets};
use emg_hmm::refine::{read_jsonl, write_jsonl};
use emg_hmm::validation::{scatter_export, summarize, write_scatter_csv, ComparisonRow};
use emg_hmm::{generate, AccuracyRecord, EdgeKind, MultiChannelSignal, SegmentRecord};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub const SIGNAL_FILE: &str = "signal.csv";
pub const TRUTH_FILE: &str = "truth.jsonl";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const STATES_FILE: &str = "states.csv";
pub const SUMMARY_FILE: &str = "detect_summary.json";
pub const MODELS_DIR: &str = "models";
pub const REPORT_FILE: &str = "report.jsonl";

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn data_err(path: &Path) -> impl Fn(emg_hmm::Error) -> CliError + '_ {
    move |e| match e {
        emg_hmm::Error::Io(io) => CliError::io(path, io),
        other => CliError::data(path.display(), other),
    }
}

pub fn read_signal(path: &Path, rate_hz: f64) -> Result<MultiChannelSignal, CliError> {
    MultiChannelSignal::read_csv(open(path)?, rate_hz).map_err(data_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutputs {
    pub signal: PathBuf,
    pub truth: PathBuf,
}

pub fn cmd_synth(cfg: &PipelineConfig, out_dir: &Path) -> Result<SynthOutputs, CliError> {
    let (signal, truth) =
        generate(&cfg.synth_config()).map_err(|e| CliError::Usage(format!("synth config: {e}")))?;
    let out = SynthOutputs {
        signal: out_dir.join(SIGNAL_FILE),
        truth: out_dir.join(TRUTH_FILE),
    };
    signal
        .write_csv(create(&out.signal)?)
        .map_err(data_err(&out.signal))?;
    write_jsonl(&truth.records(), create(&out.truth)?).map_err(data_err(&out.truth))?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectSummary {
    pub repetitions: usize,
    pub detected: usize,
    pub failures: usize,
    pub failed_repetitions: Vec<usize>,
}

/// Writes segments, per-repetition models, the state table and a summary.
/// Returns [`CliError::NoSegments`] after writing when nothing was detected.
pub fn cmd_detect(
    cfg: &PipelineConfig,
    signal_path: &Path,
    out_dir: &Path,
) -> Result<DetectSummary, CliError> {
    let signal = read_signal(signal_path, cfg.rate_hz)?;
    let detection = detect(&signal, &cfg.schedule, &cfg.detect)
        .map_err(|e| CliError::data(signal_path.display(), e))?;

    let segments = detection.segments();
    let seg_path = out_dir.join(SEGMENTS_FILE);
    write_jsonl(&segments, create(&seg_path)?).map_err(data_err(&seg_path))?;

    for r in &detection.repetitions {
        let path = out_dir
            .join(MODELS_DIR)
            .join(format!("rep_{:03}.txt", r.repetition));
        let mut w = create(&path)?;
        w.write_all(r.model.to_text().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
    }

    let states_path = out_dir.join(STATES_FILE);
    detection
        .write_state_table(create(&states_path)?)
        .map_err(data_err(&states_path))?;

    let mut failed: Vec<usize> = detection
        .repetitions
        .iter()
        .filter(|r| r.segment.is_none())
        .map(|r| r.repetition)
        .chain(detection.untrainable.iter().copied())
        .collect();
    failed.sort_unstable();
    let summary = DetectSummary {
        repetitions: cfg.schedule.repetitions,
        detected: segments.len(),
        failures: detection.failures(),
        failed_repetitions: failed,
    };
    let summary_path = out_dir.join(SUMMARY_FILE);
    let mut w = create(&summary_path)?;
    serde_json::to_writer_pretty(&mut w, &summary)
        .map_err(|e| CliError::io(&summary_path, e.into()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&summary_path, e))?;

    if segments.is_empty() {
        return Err(CliError::NoSegments);
    }
    Ok(summary)
}

pub fn read_segments(path: &Path) -> Result<Vec<SegmentRecord>, CliError> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::data(
                path.display(),
                emg_hmm::Error::InvalidArgument(
                    "detection output missing; run `detect` first".into(),
                ),
            )
        } else {
            CliError::io(path, e)
        }
    })?;
    read_jsonl(BufReader::new(file)).map_err(data_err(path))
}

pub fn scatter_file(kind: EdgeKind) -> String {
    format!("scatter_{kind}.csv")
}

/// Accuracy report for stimulus and detected edges plus one scatter CSV per
/// edge kind.
pub fn cmd_validate(
    cfg: &PipelineConfig,
    signal_path: &Path,
    segments_path: &Path,
    out_dir: &Path,
) -> Result<Vec<AccuracyRecord>, CliError> {
    let segments = read_segments(segments_path)?;
    let signal = read_signal(signal_path, cfg.rate_hz)?;
    let sets = edge_window_sets(&signal, &cfg.schedule, &segments, cfg.validate.half_width_s)
        .map_err(|e| CliError::data(signal_path.display(), e))?;
    let records = accuracy_records(&sets, &cfg.validate, &cfg.gesture, &cfg.subject)
        .map_err(|e| CliError::data(segments_path.display(), e))?;

    let report_path = out_dir.join(REPORT_FILE);
    write_jsonl(&records, create(&report_path)?).map_err(data_err(&report_path))?;

    for kind in [EdgeKind::Onset, EdgeKind::Termination] {
        let rows: Vec<_> = sets
            .iter()
            .filter(|s| s.edge_kind == kind)
            .flat_map(scatter_export)
            .collect();
        let path = out_dir.join(scatter_file(kind));
        write_scatter_csv(&rows, create(&path)?).map_err(data_err(&path))?;
    }
    Ok(records)
}

pub fn read_report(path: &Path) -> Result<Vec<AccuracyRecord>, CliError> {
    read_jsonl(open(path)?).map_err(data_err(path))
}

/// Aggregates reports into a stimulus-vs-detected table. Writes the rows as
/// JSON lines when `out` is given and returns the rendered table.
pub fn cmd_report(
    reports: &[PathBuf],
    out: Option<&Path>,
) -> Result<(Vec<ComparisonRow>, String), CliError> {
    if reports.is_empty() {
        return Err(CliError::Usage("no report files given".into()));
    }
    let mut records = Vec::new();
    for path in reports {
        records.extend(read_report(path)?);
    }
    let rows = summarize(&records);
    if let Some(out) = out {
        write_jsonl(&rows, create(out)?).map_err(data_err(out))?;
    }
    Ok((rows.clone(), render_table(&rows)))
}

fn render_table(rows: &[ComparisonRow]) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let mut out = format!(
        "{:<16} {:<12} {:<11} {:>9} {:>9} {:>5}\n",
        "gesture", "edge", "mode", "stimulus", "detected", "n"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:<12} {:<11} {:>9} {:>9} {:>5}\n",
            r.gesture,
            r.edge_kind.to_string(),
            r.mode,
            pct(r.stimulus_pct),
            pct(r.detected_pct),
            r.recordings
        ));
    }
    out
}
