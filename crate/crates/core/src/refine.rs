//! Rule-based clean-up of decoded state sequences: drop short activity
//! runs, then keep the first onset and the last termination.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::WindowGrid;
use crate::stimulus::{State, StateSequence};

pub const DEFAULT_MIN_DURATION_S: f64 = 0.8;

/// An onset/termination pair in recording seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub onset_s: f64,
    pub termination_s: f64,
}

impl TimeSpan {
    pub fn duration_s(&self) -> f64 {
        self.termination_s - self.onset_s
    }
}

/// Half-open window range `[onset_window, termination_window)` of a
/// detected activity, with its times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivitySegment {
    pub onset_window: usize,
    pub termination_window: usize,
    pub onset_s: f64,
    pub termination_s: f64,
}

impl ActivitySegment {
    /// Times are window boundaries on `grid`.
    pub fn from_windows(onset_window: usize, termination_window: usize, grid: &WindowGrid) -> Self {
        Self {
            onset_window,
            termination_window,
            onset_s: grid.boundary_s(onset_window),
            termination_s: grid.boundary_s(termination_window),
        }
    }

    pub fn span(&self) -> TimeSpan {
        TimeSpan {
            onset_s: self.onset_s,
            termination_s: self.termination_s,
        }
    }
}

/// Maximal runs of activity as half-open index ranges.
pub fn activity_runs(states: &[State]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, s) in states.iter().enumerate() {
        match (s.is_active(), start) {
            (true, None) => start = Some(i),
            (false, Some(b)) => {
                runs.push((b, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(b) = start {
        runs.push((b, states.len()));
    }
    runs
}

/// Clears every activity run shorter than `min_duration_s`. Runs of exactly
/// the threshold survive.
pub fn remove_short_segments(
    states: &StateSequence,
    min_duration_s: f64,
    hop_samples: usize,
    rate_hz: f64,
) -> StateSequence {
    let hop_s = hop_samples as f64 / rate_hz;
    let mut out = states.states().to_vec();
    for (start, end) in activity_runs(states.states()) {
        let duration = (end - start) as f64 * hop_s;
        if duration + 1e-9 < min_duration_s {
            out[start..end].fill(State::Rest);
        }
    }
    StateSequence::new(out, states.grid())
}

/// First onset to last termination, or `None` when there is no activity.
/// A sequence ending in activity terminates at its end.
pub fn consolidate_edges(states: &StateSequence) -> Option<ActivitySegment> {
    let s = states.states();
    let first = s.iter().position(|x| x.is_active())?;
    let last = s.iter().rposition(|x| x.is_active())?;
    Some(ActivitySegment::from_windows(
        first,
        last + 1,
        &states.grid(),
    ))
}

/// Signed `(onset, termination)` errors in seconds, detected minus truth.
pub fn segment_error(detected: &TimeSpan, truth: &TimeSpan) -> (f64, f64) {
    (
        detected.onset_s - truth.onset_s,
        detected.termination_s - truth.termination_s,
    )
}

/// One line of the detected-segments JSON-lines file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub repetition: usize,
    pub onset_s: f64,
    pub termination_s: f64,
}

impl SegmentRecord {
    pub fn span(&self) -> TimeSpan {
        TimeSpan {
            onset_s: self.onset_s,
            termination_s: self.termination_s,
        }
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(records: &[T], mut writer: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(|e| Error::invalid(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::parse(i as u64 + 1, e.to_string()))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // 10 windows per second
    fn grid() -> WindowGrid {
        WindowGrid::new(1, 1, 10.0)
    }

    fn seq(bits: &[u8]) -> StateSequence {
        StateSequence::from_bits(bits, grid()).unwrap()
    }

    fn runs_of(pattern: &[(u8, usize)]) -> Vec<u8> {
        pattern
            .iter()
            .flat_map(|&(b, n)| std::iter::repeat_n(b, n))
            .collect()
    }

    #[test]
    fn all_zero_unchanged() {
        let s = seq(&[0; 12]);
        assert_eq!(remove_short_segments(&s, 0.8, 1, 10.0), s);
        assert_eq!(consolidate_edges(&s), None);
    }

    #[test]
    fn threshold_run_survives() {
        let s = seq(&runs_of(&[(0, 3), (1, 8), (0, 3)]));
        assert_eq!(remove_short_segments(&s, 0.8, 1, 10.0), s);
        let s = seq(&runs_of(&[(0, 3), (1, 7), (0, 3)]));
        assert_eq!(remove_short_segments(&s, 0.8, 1, 10.0).bits(), vec![0; 13]);
    }

    #[test]
    fn default_protocol_threshold_is_sixteen_windows() {
        let g = WindowGrid::new(110, 55, 1100.0);
        let bits = runs_of(&[(0, 2), (1, 16), (0, 2), (1, 15), (0, 1)]);
        let s = StateSequence::from_bits(&bits, g).unwrap();
        let out = remove_short_segments(&s, 0.8, 55, 1100.0);
        assert_eq!(out.bits(), runs_of(&[(0, 2), (1, 16), (0, 18)]));
    }

    #[test]
    fn mixed_runs() {
        let s = seq(&runs_of(&[(1, 4), (0, 2), (1, 12), (0, 2), (1, 7), (0, 1)]));
        let out = remove_short_segments(&s, 0.8, 1, 10.0);
        assert_eq!(out.bits(), runs_of(&[(0, 6), (1, 12), (0, 10)]));
    }

    #[test]
    fn consolidate_examples() {
        let seg = consolidate_edges(&seq(&[0, 0, 0, 1, 1, 1, 0, 0, 0])).unwrap();
        assert_eq!((seg.onset_window, seg.termination_window), (3, 6));
        let seg = consolidate_edges(&seq(&[0, 0, 1, 1, 0, 0, 1, 1, 0, 0])).unwrap();
        assert_eq!((seg.onset_window, seg.termination_window), (2, 8));
        let seg = consolidate_edges(&seq(&[0, 1, 1])).unwrap();
        assert_eq!(seg.termination_window, 3);
    }

    #[test]
    fn segment_times_are_boundaries() {
        let seg = consolidate_edges(&seq(&[0, 0, 0, 1, 1, 1, 0])).unwrap();
        assert!((seg.onset_s - 0.3).abs() < 1e-12);
        assert!((seg.termination_s - 0.6).abs() < 1e-12);
    }

    #[test]
    fn error_examples() {
        let t = TimeSpan {
            onset_s: 1.2,
            termination_s: 4.0,
        };
        assert_eq!(segment_error(&t, &t), (0.0, 0.0));
        let shifted = TimeSpan {
            onset_s: 1.7,
            termination_s: 4.5,
        };
        let (a, b) = segment_error(&shifted, &t);
        assert!((a - 0.5).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);
        let d = TimeSpan {
            onset_s: 1.0,
            termination_s: 3.5,
        };
        let (a, b) = segment_error(&d, &t);
        assert!((a + 0.2).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = vec![
            SegmentRecord {
                repetition: 0,
                onset_s: 1.025,
                termination_s: 3.1,
            },
            SegmentRecord {
                repetition: 3,
                onset_s: 25.5,
                termination_s: 27.95,
            },
        ];
        let mut buf = Vec::new();
        write_jsonl(&recs, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("{\"repetition\":0,\"onset_s\":1.025"));
        assert_eq!(read_jsonl::<SegmentRecord, _>(&buf[..]).unwrap(), recs);
    }

    proptest! {
        #[test]
        fn removal_idempotent_and_monotone(bits in prop::collection::vec(0u8..2, 0..80), min_w in 1usize..12) {
            let s = seq(&bits);
            let min_s = min_w as f64 / 10.0;
            let once = remove_short_segments(&s, min_s, 1, 10.0);
            let twice = remove_short_segments(&once, min_s, 1, 10.0);
            prop_assert_eq!(&once, &twice);
            for (a, b) in s.bits().iter().zip(once.bits()) {
                prop_assert!(b <= *a);
            }
            let before = activity_runs(s.states());
            for run in activity_runs(once.states()) {
                prop_assert!(before.contains(&run));
            }
        }
    }
}
