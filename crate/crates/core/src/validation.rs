//! Edge-window validation: per-channel RMS features on either side of an
//! onset or termination edge, classified rest/activity with a linear
//! soft-margin SVM.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{csv_io, MultiChannelSignal};

pub const DEFAULT_HALF_WIDTH_S: f64 = 0.25;
pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_FOLDS: usize = 5;

const SVM_TOLERANCE: f64 = 1e-6;
const SVM_MAX_ITER: usize = 10_000_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Onset,
    Termination,
}

impl EdgeKind {
    /// Labels of the (pre-edge, post-edge) halves.
    pub fn labels(self) -> (u8, u8) {
        match self {
            EdgeKind::Onset => (0, 1),
            EdgeKind::Termination => (1, 0),
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Onset => "onset",
            EdgeKind::Termination => "termination",
        })
    }
}

/// Where the edge times came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSource {
    Stimulus,
    Detected,
}

impl fmt::Display for EdgeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeSource::Stimulus => "stimulus",
            EdgeSource::Detected => "detected",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWindowSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub edge_kind: EdgeKind,
    pub source: EdgeSource,
    /// Edges dropped because their window crossed the recording boundary.
    pub skipped: usize,
}

impl EdgeWindowSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn subset(&self, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<u8>) {
        (
            idx.iter().map(|&i| self.features[i].clone()).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

/// Two feature vectors per edge: per-channel RMS over
/// `[edge - half_width, edge)` with the pre-edge label and over
/// `[edge, edge + half_width)` with the post-edge label.
pub fn extract_edge_windows(
    signal: &MultiChannelSignal,
    edges_s: &[f64],
    edge_kind: EdgeKind,
    source: EdgeSource,
    half_width_s: f64,
) -> Result<EdgeWindowSet> {
    if !(half_width_s > 0.0) {
        return Err(Error::invalid("half width must be positive"));
    }
    let rate = signal.rate_hz();
    let n = signal.samples_per_channel() as i64;
    let (pre, post) = edge_kind.labels();
    let mut set = EdgeWindowSet {
        features: Vec::new(),
        labels: Vec::new(),
        edge_kind,
        source,
        skipped: 0,
    };
    for &edge in edges_s {
        let left = ((edge - half_width_s) * rate).round() as i64;
        let mid = (edge * rate).round() as i64;
        let right = ((edge + half_width_s) * rate).round() as i64;
        if left < 0 || right > n || left >= mid || mid >= right {
            set.skipped += 1;
            continue;
        }
        set.features
            .push(signal.rms_over(left as usize..mid as usize));
        set.labels.push(pre);
        set.features
            .push(signal.rms_over(mid as usize..right as usize));
        set.labels.push(post);
    }
    Ok(set)
}

/// Linear decision function `w.x + b`; positive maps to activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl ClassifierModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn classify(model: &ClassifierModel, features: &[Vec<f64>]) -> Result<Vec<u8>> {
    if let Some(x) = features.iter().find(|x| x.len() != model.weights.len()) {
        return Err(Error::invalid(format!(
            "feature dimension {} does not match model dimension {}",
            x.len(),
            model.weights.len()
        )));
    }
    Ok(features.iter().map(|x| model.predict(x)).collect())
}

pub fn train_linear_svm(train: &EdgeWindowSet, c: f64) -> Result<ClassifierModel> {
    fit_linear_svm(&train.features, &train.labels, c)
}

/// Soft-margin linear SVM, `min 1/2 |w|^2 + C sum hinge`, with an
/// unregularized bias. Solved in the dual by SMO with maximal-violating-pair
/// selection until the KKT gap drops below 1e-6.
pub fn fit_linear_svm(features: &[Vec<f64>], labels: &[u8], c: f64) -> Result<ClassifierModel> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid("C must be a positive real"));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid("features and labels differ in length"));
    }
    if features.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let dim = features[0].len();
    if features.iter().any(|x| x.len() != dim) {
        return Err(Error::invalid("ragged feature vectors"));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("label {l} is not 0 or 1")));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::invalid("training set contains a single class"));
    }

    let n = features.len();
    let y: Vec<f64> = labels
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let k = |i: usize, j: usize| dot(&features[i], &features[j]);
    let diag: Vec<f64> = (0..n).map(|i| k(i, i)).collect();
    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a'Qa - e'a
    let mut grad = vec![-1.0; n];

    for _ in 0..SVM_MAX_ITER {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if up && v > g_max {
                g_max = v;
                i = t;
            }
            if low && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < SVM_TOLERANCE {
            break;
        }

        let q_ij = y[i] * y[j] * k(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (d_i, d_j) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(i, t) * d_i + y[j] * k(j, t) * d_j);
        }
    }

    let mut weights = vec![0.0; dim];
    for t in 0..n {
        if alpha[t] != 0.0 {
            for (w, x) in weights.iter_mut().zip(&features[t]) {
                *w += alpha[t] * y[t] * x;
            }
        }
    }

    // rho as in the usual SMO bias recovery
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };

    Ok(ClassifierModel {
        weights,
        bias: -rho,
        c,
    })
}

pub fn accuracy_pct(predicted: &[u8], truth: &[u8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    100.0 * hits as f64 / truth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitMode {
    HalfSplit,
    KFold(usize),
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitMode::HalfSplit => f.write_str("half-split"),
            SplitMode::KFold(k) => write!(f, "{k}-fold"),
        }
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "half-split" {
            return Ok(SplitMode::HalfSplit);
        }
        s.strip_suffix("-fold")
            .and_then(|k| k.parse().ok())
            .filter(|&k: &usize| k >= 2)
            .map(SplitMode::KFold)
            .ok_or_else(|| Error::invalid(format!("unknown split mode `{s}`")))
    }
}

/// Held-out accuracy in percent. Samples are shuffled with `seed` first;
/// half-split trains on the first half and tests on the rest, k-fold
/// averages the k held-out fold accuracies.
pub fn evaluate_split(set: &EdgeWindowSet, c: f64, mode: SplitMode, seed: u64) -> Result<f64> {
    let n = set.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let run = |train: &[usize], test: &[usize]| -> Result<f64> {
        let (xf, xl) = set.subset(train);
        let model = fit_linear_svm(&xf, &xl, c)?;
        let (tf, tl) = set.subset(test);
        Ok(accuracy_pct(&classify(&model, &tf)?, &tl))
    };
    match mode {
        SplitMode::HalfSplit => {
            if n < 4 {
                return Err(Error::invalid(format!(
                    "half split needs at least 4 samples, got {n}"
                )));
            }
            let (train, test) = idx.split_at(n / 2);
            run(train, test)
        }
        SplitMode::KFold(k) => {
            if k < 2 || n < 2 * k {
                return Err(Error::invalid(format!(
                    "{k}-fold needs at least {} samples, got {n}",
                    2 * k
                )));
            }
            let mut total = 0.0;
            for f in 0..k {
                let (lo, hi) = (f * n / k, (f + 1) * n / k);
                let train: Vec<usize> = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
                total += run(&train, &idx[lo..hi])?;
            }
            Ok(total / k as f64)
        }
    }
}

/// One row of the scatter export: features, label and source.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub features: Vec<f64>,
    pub label: u8,
    pub source: EdgeSource,
}

pub fn scatter_export(set: &EdgeWindowSet) -> Vec<ScatterRow> {
    set.features
        .iter()
        .zip(&set.labels)
        .map(|(x, &label)| ScatterRow {
            features: x.clone(),
            label,
            source: set.source,
        })
        .collect()
}

/// Header `ch1,...,chD,label,source`.
pub fn write_scatter_csv<W: Write>(rows: &[ScatterRow], writer: W) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.features.len());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=dim).map(|c| format!("ch{c}")).collect();
    header.push("label".into());
    header.push("source".into());
    wtr.write_record(&header).map_err(csv_io)?;
    for r in rows {
        let mut rec: Vec<String> = r.features.iter().map(f64::to_string).collect();
        rec.push(r.label.to_string());
        rec.push(r.source.to_string());
        wtr.write_record(&rec).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One line of an accuracy report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub gesture: String,
    pub subject: String,
    pub edge_kind: EdgeKind,
    pub source: EdgeSource,
    pub mode: String,
    pub accuracy_pct: f64,
}

/// Stimulus-vs-detected comparison for one gesture, edge kind and mode,
/// averaged over subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub gesture: String,
    pub edge_kind: EdgeKind,
    pub mode: String,
    pub stimulus_pct: Option<f64>,
    pub detected_pct: Option<f64>,
    pub recordings: usize,
}

/// Groups records by gesture, edge kind and mode. An extra `*` gesture row
/// holds the averages over all gestures.
pub fn summarize(records: &[AccuracyRecord]) -> Vec<ComparisonRow> {
    type Key = (String, EdgeKind, String);
    let mut groups: BTreeMap<Key, BTreeMap<EdgeSource, Vec<f64>>> = BTreeMap::new();
    for r in records {
        for gesture in [r.gesture.clone(), "*".to_string()] {
            groups
                .entry((gesture, r.edge_kind, r.mode.clone()))
                .or_default()
                .entry(r.source)
                .or_default()
                .push(r.accuracy_pct);
        }
    }
    let mean = |v: Option<&Vec<f64>>| {
        v.filter(|v| !v.is_empty())
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    groups
        .into_iter()
        .map(|((gesture, edge_kind, mode), by_source)| ComparisonRow {
            recordings: by_source.values().map(Vec::len).max().unwrap_or(0),
            stimulus_pct: mean(by_source.get(&EdgeSource::Stimulus)),
            detected_pct: mean(by_source.get(&EdgeSource::Detected)),
            gesture,
            edge_kind,
            mode,
        })
        .collect()
}
