//! Synthetic sEMG recordings with known activity segments.
//!
//! Each channel is zero-mean Gaussian noise whose standard deviation is
//! `rest_noise_sigma` at rest and `rest_noise_sigma * activity_gain` during a
//! gesture, with raised-cosine attack and decay of `envelope_ramp_s` inside
//! the gesture segment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::{SegmentRecord, TimeSpan};
use crate::signal::MultiChannelSignal;
use crate::stimulus::StimulusSchedule;

/// A value drawn uniformly from `[mean - jitter, mean + jitter]` per
/// repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jittered {
    pub mean: f64,
    pub jitter: f64,
}

impl Jittered {
    pub fn fixed(mean: f64) -> Self {
        Self { mean, jitter: 0.0 }
    }

    pub fn min(&self) -> f64 {
        self.mean - self.jitter
    }

    pub fn max(&self) -> f64 {
        self.mean + self.jitter
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.jitter > 0.0 {
            rng.random_range(self.min()..=self.max())
        } else {
            self.mean
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub schedule: StimulusSchedule,
    pub channels: usize,
    pub rate_hz: f64,
    pub rest_noise_sigma: f64,
    pub activity_gain: f64,
    pub reaction_delay_s: Jittered,
    pub gesture_duration_s: Jittered,
    pub envelope_ramp_s: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            schedule: StimulusSchedule::default(),
            channels: 3,
            rate_hz: 1100.0,
            rest_noise_sigma: 1.0,
            activity_gain: 5.0,
            reaction_delay_s: Jittered {
                mean: 0.5,
                jitter: 0.2,
            },
            gesture_duration_s: Jittered {
                mean: 2.0,
                jitter: 0.3,
            },
            envelope_ramp_s: 0.3,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.channels == 0 {
            return Err(Error::invalid("need at least one channel"));
        }
        if !(self.rate_hz > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(self.rest_noise_sigma > 0.0) {
            return Err(Error::invalid("rest noise sigma must be positive"));
        }
        // gain 1 is allowed: stationary noise with truth still recorded
        if !(self.activity_gain >= 1.0) {
            return Err(Error::invalid("activity gain must be at least 1"));
        }
        if self.reaction_delay_s.min() < 0.0 || self.reaction_delay_s.jitter < 0.0 {
            return Err(Error::invalid("reaction delay must be non-negative"));
        }
        if self.gesture_duration_s.min() <= 0.0 || self.gesture_duration_s.jitter < 0.0 {
            return Err(Error::invalid("gesture duration must be positive"));
        }
        if self.gesture_duration_s.max() > self.schedule.stimulus_len_s + 1e-12 {
            return Err(Error::invalid("gesture cannot outlast the stimulus"));
        }
        if self.reaction_delay_s.max() + self.gesture_duration_s.max()
            > self.schedule.period_s() + 1e-12
        {
            return Err(Error::invalid("gesture must end before the next stimulus"));
        }
        if !(self.envelope_ramp_s >= 0.0) {
            return Err(Error::invalid("ramp length must be non-negative"));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.schedule.total_duration_s() * self.rate_hz).round() as usize
    }
}

/// True activity segment of every repetition, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub segments: Vec<TimeSpan>,
}

impl GroundTruth {
    pub fn records(&self) -> Vec<SegmentRecord> {
        self.segments
            .iter()
            .enumerate()
            .map(|(k, s)| SegmentRecord {
                repetition: k,
                onset_s: s.onset_s,
                termination_s: s.termination_s,
            })
            .collect()
    }

    pub fn from_records(records: &[SegmentRecord]) -> Self {
        let mut sorted = records.to_vec();
        sorted.sort_by_key(|r| r.repetition);
        Self {
            segments: sorted.iter().map(SegmentRecord::span).collect(),
        }
    }
}

/// Amplitude multiplier at time `t` for a segment with the given gain and
/// ramp length.
fn envelope_at(t: f64, seg: &TimeSpan, gain: f64, ramp_s: f64) -> f64 {
    if t < seg.onset_s || t > seg.termination_s {
        return 1.0;
    }
    let ramp = ramp_s.min(seg.duration_s() / 2.0);
    let rise = |x: f64| 0.5 * (1.0 - (std::f64::consts::PI * x).cos());
    let shape = if ramp <= 0.0 {
        1.0
    } else if t < seg.onset_s + ramp {
        rise((t - seg.onset_s) / ramp)
    } else if t > seg.termination_s - ramp {
        rise((seg.termination_s - t) / ramp)
    } else {
        1.0
    };
    1.0 + (gain - 1.0) * shape
}

pub fn generate(config: &SynthConfig) -> Result<(MultiChannelSignal, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let segments: Vec<TimeSpan> = (0..config.schedule.repetitions)
        .map(|k| {
            let (stim_start, _) = config.schedule.stimulus_interval(k);
            let onset_s = stim_start + config.reaction_delay_s.sample(&mut rng);
            let duration = config.gesture_duration_s.sample(&mut rng);
            TimeSpan {
                onset_s,
                termination_s: onset_s + duration,
            }
        })
        .collect();

    let n = config.num_samples();
    let mut amplitude = vec![config.rest_noise_sigma; n];
    for seg in &segments {
        let first = ((seg.onset_s * config.rate_hz).floor().max(0.0) as usize).min(n);
        let last = ((seg.termination_s * config.rate_hz).ceil() as usize + 1).min(n);
        for (i, a) in amplitude.iter_mut().enumerate().take(last).skip(first) {
            let t = i as f64 / config.rate_hz;
            *a = config.rest_noise_sigma
                * envelope_at(t, seg, config.activity_gain, config.envelope_ramp_s);
        }
    }

    let data = (0..config.channels)
        .map(|_| {
            amplitude
                .iter()
                .map(|a| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    a * z
                })
                .collect()
        })
        .collect();
    let signal = MultiChannelSignal::new(config.rate_hz, data)?;
    Ok((signal, GroundTruth { segments }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::rms;

    fn samples(sig: &MultiChannelSignal, c: usize, from_s: f64, to_s: f64) -> &[f64] {
        let r = sig.rate_hz();
        &sig.channel(c)[(from_s * r) as usize..(to_s * r) as usize]
    }

    #[test]
    fn same_seed_same_signal() {
        let cfg = SynthConfig {
            seed: 7,
            ..Default::default()
        };
        let (a, ta) = generate(&cfg).unwrap();
        let (b, tb) = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn protocol_shape() {
        let (sig, truth) = generate(&SynthConfig::default()).unwrap();
        assert_eq!(sig.num_channels(), 3);
        assert_eq!(sig.samples_per_channel(), 176_550);
        assert_eq!(truth.segments.len(), 20);
    }

    #[test]
    fn truth_inside_its_repetition() {
        let cfg = SynthConfig::default();
        let (_, truth) = generate(&cfg).unwrap();
        for (k, seg) in truth.segments.iter().enumerate() {
            let (start, _) = cfg.schedule.stimulus_interval(k);
            assert!(seg.onset_s >= start);
            assert!(seg.termination_s <= start + cfg.schedule.period_s());
            assert!(seg.onset_s < seg.termination_s);
        }
        for w in truth.segments.windows(2) {
            assert!(w[0].termination_s < w[1].onset_s);
        }
    }

    #[test]
    fn no_delay_full_gesture_matches_stimulus() {
        let cfg = SynthConfig {
            reaction_delay_s: Jittered::fixed(0.0),
            gesture_duration_s: Jittered::fixed(3.0),
            ..Default::default()
        };
        let (_, truth) = generate(&cfg).unwrap();
        for (k, seg) in truth.segments.iter().enumerate() {
            let (a, b) = cfg.schedule.stimulus_interval(k);
            assert_eq!((seg.onset_s, seg.termination_s), (a, b));
        }
    }

    #[test]
    fn unit_gain_is_stationary() {
        let cfg = SynthConfig {
            activity_gain: 1.0,
            ..Default::default()
        };
        let (sig, truth) = generate(&cfg).unwrap();
        assert_eq!(truth.segments.len(), 20);
        let seg = truth.segments[3];
        let inside = rms(samples(&sig, 0, seg.onset_s, seg.termination_s));
        let outside = rms(samples(
            &sig,
            0,
            seg.termination_s + 0.5,
            seg.termination_s + 4.0,
        ));
        assert!((inside / outside - 1.0).abs() < 0.1);
    }

    #[test]
    fn rest_sigma_matches_config() {
        let cfg = SynthConfig::default();
        let (sig, truth) = generate(&cfg).unwrap();
        // rest between the end of repetition 0 and the start of repetition 1, >= 5 s
        let from = truth.segments[0].termination_s;
        let to = truth.segments[1].onset_s;
        assert!(to - from >= 5.0);
        for c in 0..3 {
            let xs = samples(&sig, c, from, to);
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
            assert!(
                (sd / cfg.rest_noise_sigma - 1.0).abs() < 0.05,
                "channel {c}: {sd}"
            );
        }
    }

    #[test]
    fn activity_to_rest_ratio() {
        let cfg = SynthConfig {
            envelope_ramp_s: 0.0,
            activity_gain: 4.0,
            ..Default::default()
        };
        let (sig, truth) = generate(&cfg).unwrap();
        for k in [0, 9, 19] {
            let seg = truth.segments[k];
            let end_of_rep = cfg.schedule.stimulus_interval(k).0 + cfg.schedule.period_s();
            let inside = rms(samples(&sig, 1, seg.onset_s, seg.termination_s));
            let outside = rms(samples(&sig, 1, seg.termination_s, end_of_rep));
            assert!((inside / outside / 4.0 - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn ramp_is_smooth_and_bounded() {
        let seg = TimeSpan {
            onset_s: 1.0,
            termination_s: 3.0,
        };
        assert_eq!(envelope_at(0.99, &seg, 5.0, 0.3), 1.0);
        assert_eq!(envelope_at(1.0, &seg, 5.0, 0.3), 1.0);
        assert!((envelope_at(1.15, &seg, 5.0, 0.3) - 3.0).abs() < 1e-9);
        assert_eq!(envelope_at(2.0, &seg, 5.0, 0.3), 5.0);
        assert!((envelope_at(3.0, &seg, 5.0, 0.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SynthConfig {
                activity_gain: 0.5,
                ..Default::default()
            },
            SynthConfig {
                gesture_duration_s: Jittered::fixed(3.5),
                ..Default::default()
            },
            SynthConfig {
                reaction_delay_s: Jittered {
                    mean: 0.1,
                    jitter: 0.2,
                },
                ..Default::default()
            },
            SynthConfig {
                channels: 0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(generate(&cfg), Err(Error::InvalidArgument(_))));
        }
    }
}
