use std::fs;
use std::path::Path;
use std::process::Command;

use emg_hmm::refine::read_jsonl;
use emg_hmm::EdgeKind;
use emg_hmm::{DiscreteHmm, MultiChannelSignal, SegmentRecord};
use emg_hmm_cli::commands::{
    cmd_detect, cmd_report, cmd_synth, cmd_validate, read_report, read_segments, scatter_file,
    MODELS_DIR, SEGMENTS_FILE, STATES_FILE, TRUTH_FILE,
};
use emg_hmm_cli::{CliError, PipelineConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emg-hmm"))
}

fn short_config(reps: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.schedule.repetitions = reps;
    cfg
}

#[test]
fn synth_files_have_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let out = cmd_synth(&cfg, dir.path()).unwrap();
    let truth: Vec<SegmentRecord> = read_jsonl(fs::read(&out.truth).unwrap().as_slice()).unwrap();
    assert_eq!(truth.len(), 20);
    let text = fs::read_to_string(&out.signal).unwrap();
    let rows = text.lines().count();
    // 0.5 s delay + 20 x 8 s at 1.1 kHz, plus the header
    assert_eq!(rows, (160.5 * 1100.0) as usize + 1);
    let signal = MultiChannelSignal::read_csv(text.as_bytes(), 1100.0).unwrap();
    assert_eq!(signal.num_channels(), 3);
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = short_config(3);
    cmd_synth(&cfg, a.path()).unwrap();
    cmd_synth(&cfg, b.path()).unwrap();
    for f in ["signal.csv", TRUTH_FILE] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn outputs_round_trip_through_their_parsers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(6);
    let out = cmd_synth(&cfg, dir.path()).unwrap();
    let summary = cmd_detect(&cfg, &out.signal, dir.path()).unwrap();
    assert_eq!(summary.detected + summary.failures, 6);

    let segments = read_segments(&dir.path().join(SEGMENTS_FILE)).unwrap();
    assert_eq!(segments.len(), summary.detected);
    for k in 0..6 {
        let path = dir.path().join(MODELS_DIR).join(format!("rep_{k:03}.txt"));
        let text = fs::read_to_string(&path).unwrap();
        let model = DiscreteHmm::from_text(text.as_bytes()).unwrap();
        assert_eq!(model.to_text(), text);
        assert_eq!(model.num_symbols(), 16);
    }
    let states = fs::read_to_string(dir.path().join(STATES_FILE)).unwrap();
    assert!(states.lines().skip(1).all(|l| l.split(',').count() == 7));

    let records = cmd_validate(
        &cfg,
        &out.signal,
        &dir.path().join(SEGMENTS_FILE),
        dir.path(),
    )
    .unwrap();
    assert_eq!(records.len(), 8);
    assert_eq!(
        read_report(&dir.path().join("report.jsonl")).unwrap(),
        records
    );
    for kind in [EdgeKind::Onset, EdgeKind::Termination] {
        let scatter = fs::read_to_string(dir.path().join(scatter_file(kind))).unwrap();
        let mut lines = scatter.lines();
        assert_eq!(lines.next().unwrap(), "ch1,ch2,ch3,label,source");
        // two sub-windows per edge; stimulus edges for every repetition
        assert_eq!(lines.count(), 2 * (6 + segments.len()));
    }

    let table_out = dir.path().join("comparison.jsonl");
    let (rows, table) = cmd_report(&[dir.path().join("report.jsonl")], Some(&table_out)).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(table.starts_with("gesture"));
    assert_eq!(fs::read_to_string(table_out).unwrap().lines().count(), 8);
}

#[test]
fn validate_without_detection_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(2);
    let out = cmd_synth(&cfg, dir.path()).unwrap();
    let err = cmd_validate(
        &cfg,
        &out.signal,
        &dir.path().join("missing.jsonl"),
        dir.path(),
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("run `detect` first"));
}

fn write_constant_signal(path: &Path, seconds: f64) {
    let n = (seconds * 1100.0) as usize;
    let mut text = String::from("t,ch1,ch2,ch3\n");
    for i in 0..n {
        text.push_str(&format!("{},0,0,0\n", i as f64 / 1100.0));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn flat_signal_detects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(2);
    let signal = dir.path().join("flat.csv");
    write_constant_signal(&signal, 16.5);
    let err = cmd_detect(&cfg, &signal, dir.path()).unwrap_err();
    assert!(matches!(err, CliError::NoSegments));
    assert_eq!(err.exit_code(), 4);
    // outputs are still written
    assert_eq!(
        fs::read_to_string(dir.path().join(SEGMENTS_FILE)).unwrap(),
        ""
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let status = bin()
        .args(["detect", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,ch1\n0,1.0\n0.001,oops\n").unwrap();
    let out = bin()
        .args(["detect", "--signal"])
        .arg(&bad)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let flat = dir.path().join("flat.csv");
    write_constant_signal(&flat, 16.5);
    let status = bin()
        .args(["detect", "--reps", "2", "--signal"])
        .arg(&flat)
        .arg("--out-dir")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));

    let status = bin()
        .args(["synth", "--reps", "2", "--gain", "0.5", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    fs::write(
        &config,
        "[schedule]\nrepetitions = 3\nrest_len_s = 4.0\n[synth]\nseed = 9\nchannels = 2\n",
    )
    .unwrap();
    let out = dir.path().join("a");
    let status = bin()
        .args(["synth", "--reps", "2", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let truth: Vec<SegmentRecord> =
        read_jsonl(fs::read(out.join(TRUTH_FILE)).unwrap().as_slice()).unwrap();
    // flag wins for repetitions, file wins over default for rest length
    assert_eq!(truth.len(), 2);
    let header = fs::read_to_string(out.join("signal.csv")).unwrap();
    assert!(header.starts_with("t,ch1,ch2\n"));
    assert_eq!(header.lines().count(), (14.5 * 1100.0) as usize + 1);
}

#[test]
fn full_cli_chain() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = bin()
            .args(args)
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    };
    let signal = dir.path().join("signal.csv");
    let signal = signal.to_str().unwrap();
    run(&["synth", "--reps", "6", "--seed", "5"]);
    assert!(run(&["detect", "--reps", "6", "--signal", signal]).contains("of 6 repetitions"));
    let report = run(&[
        "validate",
        "--reps",
        "6",
        "--signal",
        signal,
        "--gesture",
        "win",
        "--subject",
        "s2",
    ]);
    assert_eq!(report.lines().count(), 8);
    let out = bin()
        .arg("report")
        .arg(dir.path().join("report.jsonl"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("win"));
}
