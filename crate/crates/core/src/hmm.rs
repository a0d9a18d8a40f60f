//! Discrete first-order HMM: supervised estimation by counting and
//! log-space Viterbi decoding.
//!
//! Probabilities are stored linearly and converted to natural logs for
//! decoding, with `f64::NEG_INFINITY` standing in for `ln 0`.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::signal::QuantizedSequence;
use crate::stimulus::{State, StateSequence};

pub const DEFAULT_SMOOTHING: f64 = 1.0;
const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHmm {
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    emission: Vec<Vec<f64>>,
}

impl DiscreteHmm {
    /// Checks shapes and that `initial` and every row are probability vectors.
    pub fn new(
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = initial.len();
        if n == 0 {
            return Err(Error::invalid("model needs at least one state"));
        }
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("transition matrix must be {n}x{n}")));
        }
        if emission.len() != n || emission.is_empty() || emission[0].is_empty() {
            return Err(Error::invalid(format!(
                "emission matrix must have {n} non-empty rows"
            )));
        }
        let m = emission[0].len();
        if emission.iter().any(|r| r.len() != m) {
            return Err(Error::invalid("emission rows differ in length"));
        }
        check_distribution("initial", &initial)?;
        for row in transition.iter().chain(emission.iter()) {
            check_distribution("matrix row", row)?;
        }
        Ok(Self {
            initial,
            transition,
            emission,
        })
    }

    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.emission[0].len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn emission(&self) -> &[Vec<f64>] {
        &self.emission
    }

    /// Most probable state path for raw symbols, with its joint log
    /// probability. Ties go to the lower state index.
    pub fn decode_path(&self, symbols: &[usize]) -> Result<(Vec<usize>, f64)> {
        if symbols.is_empty() {
            return Err(Error::invalid(
                "cannot decode an empty observation sequence",
            ));
        }
        self.check_symbols(symbols)?;
        let n = self.num_states();
        let log_pi: Vec<f64> = self.initial.iter().map(|p| p.ln()).collect();
        let log_t: Vec<Vec<f64>> = self
            .transition
            .iter()
            .map(|r| r.iter().map(|p| p.ln()).collect())
            .collect();
        let log_e: Vec<Vec<f64>> = self
            .emission
            .iter()
            .map(|r| r.iter().map(|p| p.ln()).collect())
            .collect();

        let len = symbols.len();
        let mut score: Vec<f64> = (0..n).map(|i| log_pi[i] + log_e[i][symbols[0]]).collect();
        let mut back = vec![0usize; len * n];
        let mut next = vec![0.0; n];
        for t in 1..len {
            for j in 0..n {
                let (best_i, best) = argmax((0..n).map(|i| score[i] + log_t[i][j]));
                back[t * n + j] = best_i;
                next[j] = best + log_e[j][symbols[t]];
            }
            std::mem::swap(&mut score, &mut next);
        }

        let (mut state, log_likelihood) = argmax(score.iter().copied());
        let mut path = vec![0usize; len];
        path[len - 1] = state;
        for t in (1..len).rev() {
            state = back[t * n + state];
            path[t - 1] = state;
        }
        Ok((path, log_likelihood))
    }

    /// Joint log probability of `path` and `symbols`; `-inf` if any factor
    /// is zero.
    pub fn path_log_likelihood(&self, symbols: &[usize], path: &[usize]) -> Result<f64> {
        if symbols.len() != path.len() {
            return Err(Error::invalid(format!(
                "{} observations but {} states",
                symbols.len(),
                path.len()
            )));
        }
        if symbols.is_empty() {
            return Err(Error::invalid("empty sequence"));
        }
        self.check_symbols(symbols)?;
        if let Some(s) = path.iter().find(|&&s| s >= self.num_states()) {
            return Err(Error::invalid(format!("state {s} out of range")));
        }
        let mut ll = self.initial[path[0]].ln() + self.emission[path[0]][symbols[0]].ln();
        for t in 1..path.len() {
            ll = ll
                + self.transition[path[t - 1]][path[t]].ln()
                + self.emission[path[t]][symbols[t]].ln();
        }
        Ok(ll)
    }

    fn check_symbols(&self, symbols: &[usize]) -> Result<()> {
        match symbols.iter().find(|&&s| s >= self.num_symbols()) {
            Some(s) => Err(Error::invalid(format!(
                "symbol {s} outside the model alphabet of {}",
                self.num_symbols()
            ))),
            None => Ok(()),
        }
    }

    /// Plain-text dump: `N`, `M`, `pi`, one `T` line per row, one `E` line
    /// per row. Values use the shortest round-tripping decimal form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(out, "N {}", self.num_states()).unwrap();
        writeln!(out, "M {}", self.num_symbols()).unwrap();
        writeln!(out, "pi {}", join(&self.initial)).unwrap();
        for row in &self.transition {
            writeln!(out, "T {}", join(row)).unwrap();
        }
        for row in &self.emission {
            writeln!(out, "E {}", join(row)).unwrap();
        }
        out
    }

    pub fn from_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut n = None;
        let mut m = None;
        let mut pi = None;
        let mut t_rows = Vec::new();
        let mut e_rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i as u64 + 1;
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else { continue };
            let nums = |parts: std::str::SplitWhitespace| -> Result<Vec<f64>> {
                parts
                    .map(|p| {
                        p.parse::<f64>()
                            .map_err(|_| Error::parse(lineno, format!("bad number `{p}`")))
                    })
                    .collect()
            };
            match key {
                "N" | "M" => {
                    let v: usize = parts
                        .next()
                        .and_then(|p| p.parse().ok())
                        .ok_or_else(|| Error::parse(lineno, format!("`{key}` needs a count")))?;
                    if key == "N" {
                        n = Some(v)
                    } else {
                        m = Some(v)
                    }
                }
                "pi" => pi = Some(nums(parts)?),
                "T" => t_rows.push(nums(parts)?),
                "E" => e_rows.push(nums(parts)?),
                other => return Err(Error::parse(lineno, format!("unknown key `{other}`"))),
            }
        }
        let n = n.ok_or_else(|| Error::parse(0, "missing `N`"))?;
        let m = m.ok_or_else(|| Error::parse(0, "missing `M`"))?;
        let pi = pi.ok_or_else(|| Error::parse(0, "missing `pi`"))?;
        if pi.len() != n
            || t_rows.len() != n
            || e_rows.len() != n
            || e_rows.iter().any(|r| r.len() != m)
        {
            return Err(Error::parse(0, "model dimensions do not match N and M"));
        }
        Self::new(pi, t_rows, e_rows)
    }
}

fn check_distribution(what: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::invalid(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

/// First index of the maximum; `-inf` everywhere yields index 0.
fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Supervised counting estimate over raw symbol/state indices, with additive
/// smoothing on every count.
pub fn estimate_from_indices(
    symbols: &[usize],
    labels: &[usize],
    num_states: usize,
    num_symbols: usize,
    smoothing: f64,
) -> Result<DiscreteHmm> {
    if symbols.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} observations but {} labels",
            symbols.len(),
            labels.len()
        )));
    }
    if labels.len() < 2 {
        return Err(Error::invalid("need at least two labeled observations"));
    }
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(Error::invalid("smoothing must be a non-negative real"));
    }
    if let Some(s) = labels.iter().find(|&&s| s >= num_states) {
        return Err(Error::invalid(format!("label {s} is not a valid state")));
    }
    if let Some(s) = symbols.iter().find(|&&s| s >= num_symbols) {
        return Err(Error::invalid(format!(
            "symbol {s} out of range 0..{num_symbols}"
        )));
    }

    let mut trans_counts = vec![vec![0.0; num_states]; num_states];
    for pair in labels.windows(2) {
        trans_counts[pair[0]][pair[1]] += 1.0;
    }
    let mut emit_counts = vec![vec![0.0; num_symbols]; num_states];
    for (&s, &q) in symbols.iter().zip(labels) {
        emit_counts[q][s] += 1.0;
    }
    let mut first = vec![0.0; num_states];
    first[labels[0]] = 1.0;

    let normalize = |counts: &[f64], matrix: &'static str, state: usize| -> Result<Vec<f64>> {
        let total: f64 = counts.iter().sum::<f64>() + smoothing * counts.len() as f64;
        if total <= 0.0 {
            return Err(Error::DegenerateRow { matrix, state });
        }
        Ok(counts.iter().map(|c| (c + smoothing) / total).collect())
    };

    let initial = normalize(&first, "initial", labels[0])?;
    let transition = trans_counts
        .iter()
        .enumerate()
        .map(|(i, row)| normalize(row, "transition", i))
        .collect::<Result<Vec<_>>>()?;
    let emission = emit_counts
        .iter()
        .enumerate()
        .map(|(i, row)| normalize(row, "emission", i))
        .collect::<Result<Vec<_>>>()?;
    DiscreteHmm::new(initial, transition, emission)
}

/// Two-state (rest/activity) estimate from a quantized sequence and its
/// labels.
pub fn estimate_supervised(
    observations: &QuantizedSequence,
    labels: &StateSequence,
    smoothing: f64,
) -> Result<DiscreteHmm> {
    estimate_from_indices(
        observations.symbols(),
        &labels.indices(),
        2,
        observations.num_levels(),
        smoothing,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiResult {
    pub states: StateSequence,
    pub log_likelihood: f64,
}

/// Decodes a two-state model; the returned sequence inherits the
/// observation grid.
pub fn viterbi_decode(
    model: &DiscreteHmm,
    observations: &QuantizedSequence,
) -> Result<ViterbiResult> {
    if model.num_states() != 2 {
        return Err(Error::invalid(
            "rest/activity decoding needs a two-state model",
        ));
    }
    let (path, log_likelihood) = model.decode_path(observations.symbols())?;
    let states = path
        .into_iter()
        .map(|i| State::from_index(i).expect("two-state path"))
        .collect();
    Ok(ViterbiResult {
        states: StateSequence::new(states, observations.grid()),
        log_likelihood,
    })
}

pub fn sequence_log_likelihood(
    model: &DiscreteHmm,
    observations: &QuantizedSequence,
    states: &StateSequence,
) -> Result<f64> {
    model.path_log_likelihood(observations.symbols(), &states.indices())
}
