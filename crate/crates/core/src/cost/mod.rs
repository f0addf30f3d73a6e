//! Keyword classifier from specification text to CSI division, with the
//! classification-metrics and estimator labor-savings harness.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const UNCLASSIFIED: &str = "unclassified";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("predictions and labels differ in length ({predictions} vs {labels})")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no samples")]
    Empty,
    #[error("manual hours must be positive for phase {0}")]
    ZeroManual(String),
    #[error("invalid ruleset: {0}")]
    InvalidRuleset(String),
    #[error("corpus row {row}: {reason}")]
    Corpus { row: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecLine {
    pub text: String,
    pub true_division: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisionRule {
    pub code: String,
    #[serde(default)]
    pub name: String,
    pub keywords: Vec<Keyword>,
}

/// Division keyword lists. Matching is case-insensitive on whole words;
/// multi-word terms match as phrases.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ruleset {
    pub divisions: Vec<DivisionRule>,
}

impl Ruleset {
    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let rules: Ruleset = serde_json::from_str(text).map_err(|e| CostError::InvalidRuleset(e.to_string()))?;
        rules.validate()?;
        Ok(rules)
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let mut seen = BTreeSet::new();
        for d in &self.divisions {
            if d.code.is_empty() || d.code == UNCLASSIFIED {
                return Err(CostError::InvalidRuleset(format!("bad division code {:?}", d.code)));
            }
            if !seen.insert(d.code.as_str()) {
                return Err(CostError::InvalidRuleset(format!("duplicate division {}", d.code)));
            }
            if let Some(k) = d.keywords.iter().find(|k| !(k.weight > 0.0) || k.term.trim().is_empty()) {
                return Err(CostError::InvalidRuleset(format!("bad keyword {:?} in {}", k.term, d.code)));
            }
        }
        Ok(())
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn phrase_hits(words: &[String], phrase: &[String]) -> usize {
    if phrase.is_empty() || phrase.len() > words.len() {
        return 0;
    }
    words.windows(phrase.len()).filter(|w| *w == phrase).count()
}

/// Highest keyword score wins; ties go to the lowest division code; no hit
/// at all gives [`UNCLASSIFIED`].
pub fn classify(text: &str, ruleset: &Ruleset) -> String {
    let words = tokens(text);
    let mut best: Option<(&str, f64)> = None;
    for d in &ruleset.divisions {
        let score: f64 = d
            .keywords
            .iter()
            .map(|k| k.weight * phrase_hits(&words, &tokens(&k.term)) as f64)
            .sum();
        if score <= 0.0 {
            continue;
        }
        best = match best {
            Some((code, s)) if s > score || (s == score && code < d.code.as_str()) => Some((code, s)),
            _ => Some((d.code.as_str(), score)),
        };
    }
    best.map_or_else(|| UNCLASSIFIED.to_string(), |(code, _)| code.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub division: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisionMetrics {
    /// Every division seen in labels or predictions, sorted by code.
    pub per_division: Vec<ClassMetrics>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub micro_accuracy: f64,
    pub samples: usize,
}

impl DivisionMetrics {
    pub fn division(&self, code: &str) -> Option<&ClassMetrics> {
        self.per_division.iter().find(|m| m.division == code)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest metrics per division with support-weighted averages.
pub fn evaluate<S: AsRef<str>>(predictions: &[S], labels: &[S]) -> Result<DivisionMetrics, CostError> {
    if predictions.len() != labels.len() {
        return Err(CostError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(CostError::Empty);
    }
    // (tp, fp, fn)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for (p, l) in predictions.iter().zip(labels) {
        let (p, l) = (p.as_ref(), l.as_ref());
        if p == l {
            counts.entry(p).or_default().0 += 1;
            correct += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(l).or_default().2 += 1;
        }
    }
    let mut per_division = Vec::with_capacity(counts.len());
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for (division, (tp, fp, fn_)) in counts {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let support = tp + fn_;
        wp += precision * support as f64;
        wr += recall * support as f64;
        wf += f1 * support as f64;
        per_division.push(ClassMetrics {
            division: division.to_string(),
            precision,
            recall,
            f1,
            support,
        });
    }
    let n = labels.len() as f64;
    Ok(DivisionMetrics {
        per_division,
        weighted_precision: wp / n,
        weighted_recall: wr / n,
        weighted_f1: wf / n,
        micro_accuracy: correct as f64 / n,
        samples: labels.len(),
    })
}

/// Classifies every line and scores against the labels.
pub fn evaluate_corpus(corpus: &[SpecLine], ruleset: &Ruleset) -> Result<DivisionMetrics, CostError> {
    let predictions: Vec<String> = corpus.iter().map(|l| classify(&l.text, ruleset)).collect();
    let labels: Vec<String> = corpus.iter().map(|l| l.true_division.clone()).collect();
    evaluate(&predictions, &labels)
}

pub fn read_corpus(csv_text: &str) -> Result<Vec<SpecLine>, CostError> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<SpecLine>().enumerate() {
        let line = row.map_err(|e| CostError::Corpus { row: i + 1, reason: e.to_string() })?;
        if line.text.trim().is_empty() {
            return Err(CostError::Corpus { row: i + 1, reason: "empty text".into() });
        }
        out.push(line);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseHours {
    pub phase: String,
    pub manual_hours: f64,
    pub automated_hours: f64,
}

impl PhaseHours {
    pub fn new(phase: impl Into<String>, manual_hours: f64, automated_hours: f64) -> Self {
        Self {
            phase: phase.into(),
            manual_hours,
            automated_hours,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSaving {
    pub phase: String,
    pub manual_hours: f64,
    pub automated_hours: f64,
    pub reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaborSavings {
    pub phases: Vec<PhaseSaving>,
    /// Unweighted mean of the phase reductions.
    pub average_pct: f64,
}

pub fn labor_savings(phases: &[PhaseHours]) -> Result<LaborSavings, CostError> {
    if phases.is_empty() {
        return Err(CostError::Empty);
    }
    let mut out = Vec::with_capacity(phases.len());
    for p in phases {
        if !(p.manual_hours > 0.0) {
            return Err(CostError::ZeroManual(p.phase.clone()));
        }
        out.push(PhaseSaving {
            phase: p.phase.clone(),
            manual_hours: p.manual_hours,
            automated_hours: p.automated_hours,
            reduction_pct: (p.manual_hours - p.automated_hours) / p.manual_hours * 100.0,
        });
    }
    let average_pct = out.iter().map(|p| p.reduction_pct).sum::<f64>() / out.len() as f64;
    Ok(LaborSavings { phases: out, average_pct })
}

pub fn read_labor(csv_text: &str) -> Result<Vec<PhaseHours>, CostError> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    reader
        .deserialize::<PhaseHours>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CostError::Corpus { row: i + 1, reason: e.to_string() }))
        .collect()
}
