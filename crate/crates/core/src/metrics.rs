//! Agreement between model judgments and gold labels.
//!
//! Krippendorff's α is computed from a value-by-value coincidence matrix:
//! every unit with `m ≥ 2` values contributes each ordered pair of values
//! from distinct coders with weight `1/(m-1)`. Then
//!
//! ```text
//! α = 1 - D_o / D_e
//! D_o = Σ_{c≠k} o_ck · δ²(c,k)
//! D_e = Σ_{c≠k} n_c · n_k / (n-1) · δ²(c,k)
//! ```
//!
//! with `n_c` the matrix marginals and `n` the number of pairable values.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoldInstance, LabelHistogram};
use crate::parse::{Judgment, ParseFailure};
use crate::scale::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("agreement undefined: no pairable values")]
    Undefined,
    #[error("gold has {gold} items but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("annotation for unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("instance `{0}` annotated more than once")]
    DuplicateAnnotation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Nominal,
    Ordinal,
    Interval,
}

/// Reliability data: one list of values per unit. Units may hold any number
/// of values; only units with two or more take part in pairing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReliabilityData {
    pub units: Vec<Vec<Label>>,
}

impl ReliabilityData {
    pub fn new(units: Vec<Vec<Label>>) -> Self {
        ReliabilityData { units }
    }

    /// Two coders, one unit per position. Missing values drop out of the unit.
    pub fn from_pairs(a: &[Option<Label>], b: &[Option<Label>]) -> Self {
        let units = a
            .iter()
            .zip(b)
            .map(|(x, y)| x.iter().chain(y.iter()).copied().collect())
            .collect();
        ReliabilityData { units }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMatrix {
    pub cells: [[f64; 4]; 4],
    pub marginals: [f64; 4],
    pub total: f64,
}

pub fn coincidence_matrix(data: &ReliabilityData) -> Result<CoincidenceMatrix, MetricError> {
    let mut cells = [[0.0; 4]; 4];
    let mut pairable = false;
    for unit in &data.units {
        let m = unit.len();
        if m < 2 {
            continue;
        }
        pairable = true;
        let mut counts = [0.0f64; 4];
        for label in unit {
            counts[label.index()] += 1.0;
        }
        let weight = 1.0 / (m - 1) as f64;
        for c in 0..4 {
            for k in 0..4 {
                let pairs = if c == k { counts[c] * (counts[c] - 1.0) } else { counts[c] * counts[k] };
                cells[c][k] += pairs * weight;
            }
        }
    }
    if !pairable {
        return Err(MetricError::Undefined);
    }
    let marginals = cells.map(|row| row.iter().sum());
    let total = marginals.iter().sum();
    Ok(CoincidenceMatrix { cells, marginals, total })
}

/// Squared ordinal distance between two scale values given the value
/// marginals: `(Σ_{g=c..k} n_g - (n_c + n_k)/2)²`.
pub fn ordinal_delta_sq(marginals: &[f64; 4], c: Label, k: Label) -> f64 {
    if c == k {
        return 0.0;
    }
    let (lo, hi) = if c < k { (c.index(), k.index()) } else { (k.index(), c.index()) };
    let span: f64 = marginals[lo..=hi].iter().sum();
    let d = span - (marginals[lo] + marginals[hi]) / 2.0;
    d * d
}

fn delta_sq(metric: Metric, marginals: &[f64; 4], c: Label, k: Label) -> f64 {
    match metric {
        Metric::Nominal => f64::from(u8::from(c != k)),
        Metric::Interval => {
            let d = f64::from(c.value()) - f64::from(k.value());
            d * d
        }
        Metric::Ordinal => ordinal_delta_sq(marginals, c, k),
    }
}

/// An α value. `degenerate` marks the case where only one value was ever
/// used, so expected disagreement is zero and α is reported as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    pub value: f64,
    pub degenerate: bool,
}

pub fn krippendorff_alpha(data: &ReliabilityData, metric: Metric) -> Result<Alpha, MetricError> {
    let matrix = coincidence_matrix(data)?;
    Ok(alpha_from_matrix(&matrix, metric))
}

pub fn alpha_from_matrix(matrix: &CoincidenceMatrix, metric: Metric) -> Alpha {
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in Label::ALL {
        for k in Label::ALL {
            if c == k {
                continue;
            }
            let d = delta_sq(metric, &matrix.marginals, c, k);
            observed += matrix.cells[c.index()][k.index()] * d;
            expected += matrix.marginals[c.index()] * matrix.marginals[k.index()] * d;
        }
    }
    expected /= matrix.total - 1.0;
    if expected == 0.0 {
        return Alpha { value: 1.0, degenerate: true };
    }
    if observed == 0.0 {
        return Alpha { value: 1.0, degenerate: false };
    }
    Alpha { value: 1.0 - observed / expected, degenerate: false }
}

/// Share of exact matches over the items where a prediction is present.
pub fn percentage_agreement(gold: &[Label], pred: &[Option<Label>]) -> Result<f64, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch { gold: gold.len(), pred: pred.len() });
    }
    let (scored, matched) = gold
        .iter()
        .zip(pred)
        .filter_map(|(g, p)| p.map(|p| p == *g))
        .fold((0usize, 0usize), |(s, m), hit| (s + 1, m + usize::from(hit)));
    if scored == 0 {
        return Err(MetricError::Undefined);
    }
    Ok(matched as f64 / scored as f64)
}

/// Why an instance has no usable model judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnotationFailure {
    Parse { reason: ParseFailure },
    Provider { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub instance_id: String,
    pub outcome: Result<Judgment, AnnotationFailure>,
}

impl Annotation {
    pub fn judgment(&self) -> Option<Judgment> {
        self.outcome.as_ref().ok().copied()
    }
}

/// Model-vs-gold agreement for one trial. `alpha` and `percent` are `None`
/// when no annotation could be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub alpha: Option<f64>,
    pub alpha_degenerate: bool,
    pub percent: Option<f64>,
    pub n_items: usize,
    pub n_missing: usize,
    pub pred_histogram: LabelHistogram,
    pub gold_histogram: LabelHistogram,
}

pub fn evaluate(gold: &[GoldInstance], annotations: &[Annotation]) -> Result<AgreementReport, MetricError> {
    let gold_by_id: HashMap<&str, Label> =
        gold.iter().map(|g| (g.instance_id(), g.gold_label)).collect();
    let mut seen = HashSet::new();
    let mut gold_labels = Vec::with_capacity(annotations.len());
    let mut preds = Vec::with_capacity(annotations.len());
    for annotation in annotations {
        let id = annotation.instance_id.as_str();
        let label = *gold_by_id
            .get(id)
            .ok_or_else(|| MetricError::UnknownInstance(id.to_string()))?;
        if !seen.insert(id) {
            return Err(MetricError::DuplicateAnnotation(id.to_string()));
        }
        gold_labels.push(label);
        preds.push(annotation.judgment());
    }

    let gold_opt: Vec<Option<Label>> = gold_labels.iter().copied().map(Some).collect();
    let data = ReliabilityData::from_pairs(&gold_opt, &preds);
    let alpha = match krippendorff_alpha(&data, Metric::Ordinal) {
        Ok(a) => Some(a),
        Err(MetricError::Undefined) => None,
        Err(e) => return Err(e),
    };
    let percent = match percentage_agreement(&gold_labels, &preds) {
        Ok(p) => Some(p),
        Err(MetricError::Undefined) => None,
        Err(e) => return Err(e),
    };
    Ok(AgreementReport {
        alpha: alpha.map(|a| a.value),
        alpha_degenerate: alpha.is_some_and(|a| a.degenerate),
        percent,
        n_items: annotations.len(),
        n_missing: preds.iter().filter(|p| p.is_none()).count(),
        pred_histogram: preds.iter().flatten().copied().collect(),
        gold_histogram: gold_labels.iter().copied().collect(),
    })
}
