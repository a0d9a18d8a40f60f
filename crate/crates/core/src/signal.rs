//! Raw multi-channel sEMG, its sliding-window RMS envelope and the
//! quantized observation stream fed to the HMM.

use std::io::{Read, Write};
use std::ops::Range;

use crate::error::{Error, Result};

/// Default RMS window: 100 ms at 1.1 kHz.
pub const DEFAULT_WINDOW_LEN: usize = 110;
/// Default hop: 50% overlap with the default window.
pub const DEFAULT_HOP: usize = 55;
pub const DEFAULT_NUM_LEVELS: usize = 16;

/// Raw samples, one `Vec` per channel, all the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelSignal {
    rate_hz: f64,
    data: Vec<Vec<f64>>,
}

impl MultiChannelSignal {
    pub fn new(rate_hz: f64, data: Vec<Vec<f64>>) -> Result<Self> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {rate_hz}"
            )));
        }
        if data.is_empty() {
            return Err(Error::invalid("signal needs at least one channel"));
        }
        let len = data[0].len();
        if let Some(c) = data.iter().position(|ch| ch.len() != len) {
            return Err(Error::invalid(format!(
                "channel {c} has {} samples, expected {len}",
                data[c].len()
            )));
        }
        Ok(Self { rate_hz, data })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn num_channels(&self) -> usize {
        self.data.len()
    }

    pub fn samples_per_channel(&self) -> usize {
        self.data[0].len()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples_per_channel() as f64 / self.rate_hz
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.iter().map(Vec::as_slice)
    }

    /// Per-channel RMS over the sample range `[start, end)`.
    pub fn rms_over(&self, samples: Range<usize>) -> Vec<f64> {
        self.data
            .iter()
            .map(|ch| rms(&ch[samples.clone()]))
            .collect()
    }

    /// Reads the `t,ch1,...,chC` CSV format. The `t` column is ignored; the
    /// rate always comes from the caller.
    pub fn read_csv<R: Read>(reader: R, rate_hz: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        if header.len() < 2 || &header[0] != "t" {
            return Err(Error::parse(1, "expected header `t,ch1,...`"));
        }
        let n_channels = header.len() - 1;
        let mut data = vec![Vec::new(); n_channels];
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::parse(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != n_channels + 1 {
                return Err(Error::parse(
                    line,
                    format!("expected {} fields, found {}", n_channels + 1, record.len()),
                ));
            }
            for (c, field) in record.iter().skip(1).enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line, format!("invalid amplitude `{field}`")))?;
                data[c].push(v);
            }
        }
        Self::new(rate_hz, data)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.num_channels()).map(|c| format!("ch{c}")));
        wtr.write_record(&header).map_err(csv_io)?;
        let mut row = Vec::with_capacity(self.num_channels() + 1);
        for i in 0..self.samples_per_channel() {
            row.clear();
            row.push((i as f64 / self.rate_hz).to_string());
            row.extend(self.data.iter().map(|ch| ch[i].to_string()));
            wtr.write_record(&row).map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}

pub fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Maps window indices of an envelope back to sample positions and seconds.
///
/// `offset` is the global index of local window 0, so slices of a sequence
/// keep reporting recording-relative times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGrid {
    pub window_len: usize,
    pub hop: usize,
    pub rate_hz: f64,
    pub offset: usize,
}

impl WindowGrid {
    pub fn new(window_len: usize, hop: usize, rate_hz: f64) -> Self {
        Self {
            window_len,
            hop,
            rate_hz,
            offset: 0,
        }
    }

    /// Center time of local window `w`. Sample `i` spans `[i, i+1) / rate`.
    pub fn center_s(&self, w: usize) -> f64 {
        ((self.offset + w) as f64 * self.hop as f64 + self.window_len as f64 / 2.0) / self.rate_hz
    }

    /// Time of the boundary just before local window `w`: midway between the
    /// centers of windows `w - 1` and `w`.
    pub fn boundary_s(&self, w: usize) -> f64 {
        self.center_s(w) - self.hop_s() / 2.0
    }

    pub fn hop_s(&self) -> f64 {
        self.hop as f64 / self.rate_hz
    }

    /// Number of windows that fit into `samples` samples.
    pub fn num_windows(&self, samples: usize) -> usize {
        if samples < self.window_len {
            0
        } else {
            (samples - self.window_len) / self.hop + 1
        }
    }

    pub(crate) fn shifted(&self, by: usize) -> Self {
        Self {
            offset: self.offset + by,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmsEnvelope {
    values: Vec<Vec<f64>>,
    grid: WindowGrid,
}

impl RmsEnvelope {
    pub fn grid(&self) -> WindowGrid {
        self.grid
    }

    pub fn num_windows(&self) -> usize {
        self.values[0].len()
    }

    pub fn num_channels(&self) -> usize {
        self.values.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c]
    }
}

/// Sliding-window RMS of every channel. Entry `(c, w)` covers samples
/// `[w*hop, w*hop + window_len)`.
pub fn compute_rms_envelope(
    signal: &MultiChannelSignal,
    window_len: usize,
    hop: usize,
) -> Result<RmsEnvelope> {
    if window_len == 0 || hop == 0 {
        return Err(Error::invalid("window length and hop must be at least 1"));
    }
    let n = signal.samples_per_channel();
    if window_len > n {
        return Err(Error::invalid(format!(
            "window of {window_len} samples is longer than the signal ({n} samples)"
        )));
    }
    let grid = WindowGrid::new(window_len, hop, signal.rate_hz());
    let n_windows = grid.num_windows(n);
    let values = signal
        .channels()
        .map(|ch| {
            (0..n_windows)
                .map(|w| rms(&ch[w * hop..w * hop + window_len]))
                .collect()
        })
        .collect();
    Ok(RmsEnvelope { values, grid })
}

/// Per-window mean of the channel envelopes.
pub fn collapse_channels(envelope: &RmsEnvelope) -> Vec<f64> {
    let c = envelope.num_channels() as f64;
    (0..envelope.num_windows())
        .map(|w| envelope.values.iter().map(|ch| ch[w]).sum::<f64>() / c)
        .collect()
}

/// Observation symbols in `[0, num_levels)` together with the range used to
/// produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSequence {
    symbols: Vec<usize>,
    num_levels: usize,
    min: f64,
    max: f64,
    grid: WindowGrid,
}

impl QuantizedSequence {
    /// Builds a sequence from raw symbols, e.g. for hand-made test inputs.
    pub fn from_symbols(symbols: Vec<usize>, num_levels: usize, grid: WindowGrid) -> Result<Self> {
        if num_levels < 2 {
            return Err(Error::invalid("need at least two quantization levels"));
        }
        if let Some(s) = symbols.iter().find(|&&s| s >= num_levels) {
            return Err(Error::invalid(format!(
                "symbol {s} out of range 0..{num_levels}"
            )));
        }
        Ok(Self {
            symbols,
            num_levels,
            min: 0.0,
            max: (num_levels - 1) as f64,
            grid,
        })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn grid(&self) -> WindowGrid {
        self.grid
    }

    /// Bin center of `symbol` in the original value units.
    pub fn dequantize(&self, symbol: usize) -> f64 {
        let width = (self.max - self.min) / self.num_levels as f64;
        self.min + (symbol as f64 + 0.5) * width
    }

    /// Sub-sequence over local window indices; keeps the quantizer range.
    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            symbols: self.symbols[range.clone()].to_vec(),
            num_levels: self.num_levels,
            min: self.min,
            max: self.max,
            grid: self.grid.shifted(range.start),
        }
    }
}

/// Uniform quantizer over `[min(values), max(values)]`. A constant input maps
/// to symbol 0 everywhere.
pub fn quantize_uniform(values: &[f64], num_levels: usize) -> Result<QuantizedSequence> {
    quantize_uniform_on(values, num_levels, WindowGrid::new(1, 1, 1.0))
}

pub fn quantize_uniform_on(
    values: &[f64],
    num_levels: usize,
    grid: WindowGrid,
) -> Result<QuantizedSequence> {
    if num_levels < 2 {
        return Err(Error::invalid("need at least two quantization levels"));
    }
    if values.is_empty() {
        return Err(Error::invalid("cannot quantize an empty sequence"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let symbols = values
        .iter()
        .map(|&v| {
            if span <= 0.0 {
                0
            } else {
                let level = ((v - min) / span * num_levels as f64).floor() as usize;
                level.min(num_levels - 1)
            }
        })
        .collect();
    Ok(QuantizedSequence {
        symbols,
        num_levels,
        min,
        max,
        grid,
    })
}
