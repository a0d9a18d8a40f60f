//! Stimulus schedule of the recording protocol and the initial-guess state
//! labels derived from it.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::WindowGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusSchedule {
    pub stimulus_len_s: f64,
    pub rest_len_s: f64,
    pub repetitions: usize,
    /// Lag between the stimulus trigger and the recorded samples.
    pub hardware_delay_s: f64,
}

impl Default for StimulusSchedule {
    fn default() -> Self {
        Self {
            stimulus_len_s: 3.0,
            rest_len_s: 5.0,
            repetitions: 20,
            hardware_delay_s: 0.5,
        }
    }
}

impl StimulusSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.stimulus_len_s > 0.0) {
            return Err(Error::invalid("stimulus length must be positive"));
        }
        if !(self.rest_len_s >= 0.0) {
            return Err(Error::invalid("rest length must be non-negative"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("need at least one repetition"));
        }
        if !(self.hardware_delay_s >= 0.0) {
            return Err(Error::invalid("hardware delay must be non-negative"));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        self.stimulus_len_s + self.rest_len_s
    }

    /// Delay-compensated stimulus interval of repetition `k`, in recording time.
    pub fn stimulus_interval(&self, k: usize) -> (f64, f64) {
        let start = k as f64 * self.period_s() + self.hardware_delay_s;
        (start, start + self.stimulus_len_s)
    }

    /// Length of a recording that holds the whole schedule.
    pub fn total_duration_s(&self) -> f64 {
        self.hardware_delay_s + self.repetitions as f64 * self.period_s()
    }

    pub fn is_stimulus_at(&self, t: f64) -> bool {
        let shifted = t - self.hardware_delay_s;
        if shifted < 0.0 {
            return false;
        }
        let k = (shifted / self.period_s()).floor();
        if k >= self.repetitions as f64 {
            return false;
        }
        let (start, end) = self.stimulus_interval(k as usize);
        t >= start && t < end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum State {
    Rest = 0,
    Activity = 1,
}

impl State {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(State::Rest),
            1 => Some(State::Activity),
            _ => None,
        }
    }

    pub fn is_active(self) -> bool {
        self == State::Activity
    }
}

/// Per-window rest/activity labels, aligned to the envelope grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    states: Vec<State>,
    grid: WindowGrid,
}

impl StateSequence {
    pub fn new(states: Vec<State>, grid: WindowGrid) -> Self {
        Self { states, grid }
    }

    /// Builds from 0/1 values; anything else is an error.
    pub fn from_bits(bits: &[u8], grid: WindowGrid) -> Result<Self> {
        let states = bits
            .iter()
            .map(|&b| {
                State::from_index(b as usize)
                    .ok_or_else(|| Error::invalid(format!("state value {b} is not 0 or 1")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { states, grid })
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn bits(&self) -> Vec<u8> {
        self.states.iter().map(|&s| s as u8).collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.states.iter().map(|s| s.index()).collect()
    }

    pub fn grid(&self) -> WindowGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            states: self.states[range.clone()].to_vec(),
            grid: self.grid.shifted(range.start),
        }
    }
}

/// Window `w` is active iff its center time lies inside a delay-compensated
/// stimulus interval.
pub fn stimulus_labels(
    schedule: &StimulusSchedule,
    num_windows: usize,
    grid: WindowGrid,
) -> Result<StateSequence> {
    schedule.validate()?;
    if num_windows == 0 {
        return Err(Error::invalid("no windows to label"));
    }
    let states = (0..num_windows)
        .map(|w| {
            if schedule.is_stimulus_at(grid.center_s(w)) {
                State::Activity
            } else {
                State::Rest
            }
        })
        .collect();
    Ok(StateSequence { states, grid })
}

/// One window range per repetition, each starting at that repetition's
/// stimulus onset and running through the following rest. The first range
/// also absorbs the leading hardware-delay region; the last is truncated to
/// `seq_len`. Ranges partition `[0, seq_len)`; trailing ones may be empty
/// when the sequence is short.
pub fn split_repetitions(
    seq_len: usize,
    schedule: &StimulusSchedule,
    grid: WindowGrid,
) -> Vec<Range<usize>> {
    let first_window_at = |t: f64| -> usize {
        // smallest w with center(w) >= t
        let raw = (t * grid.rate_hz - grid.window_len as f64 / 2.0) / grid.hop as f64
            - grid.offset as f64;
        let mut w = raw.ceil().max(0.0) as usize;
        while w > 0 && grid.center_s(w - 1) >= t {
            w -= 1;
        }
        while grid.center_s(w) < t {
            w += 1;
        }
        w.min(seq_len)
    };
    let mut bounds = vec![0];
    for k in 1..schedule.repetitions {
        bounds.push(first_window_at(schedule.stimulus_interval(k).0));
    }
    bounds.push(seq_len);
    bounds.windows(2).map(|b| b[0]..b[1]).collect()
}
