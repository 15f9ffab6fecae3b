//! Inter-annotator agreement: confusion matrices, unweighted Cohen's kappa
//! and adjudication of two annotation sets into one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::TurnRef;
use crate::ladder::Level;
use crate::recipe::{Annotation, AnnotationSet, Label};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgreementError {
    #[error("label space needs at least two distinct labels")]
    DegenerateSpace,
    #[error("annotation sets cover different dialogues ({0:?} vs {1:?})")]
    DialogueMismatch(String, String),
    #[error("annotation sets cover different turns")]
    TurnMismatch,
    #[error("label {0:?} is not in the label space")]
    UnknownLabel(String),
    #[error("confusion matrix is empty")]
    Empty,
    #[error("confusion matrix must be square with one row per label")]
    Shape,
    #[error("no resolution for disagreeing turn {0}")]
    MissingResolution(usize),
    #[error("resolution given for turn {0}, which is not a disagreement")]
    ExtraneousResolution(usize),
}

pub const NOT_CR: &str = "NotCR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Projection {
    /// `CR-<level>`: which proposal was clarified is ignored.
    Level,
    /// `CR-<level>@<source index>`.
    SourceSensitive,
}

/// The categories turns are projected into before comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<String>,
    projection: Projection,
}

fn cr_label(level: Level) -> String {
    format!("CR-{level}")
}

impl Default for LabelSpace {
    fn default() -> Self {
        LabelSpace::by_level()
    }
}

impl LabelSpace {
    /// `CR-L1`..`CR-L4`, `CR-Other`, `NotCR`.
    pub fn by_level() -> Self {
        let mut labels: Vec<String> = Level::ALL.iter().map(|&l| cr_label(l)).collect();
        labels.push(NOT_CR.to_string());
        LabelSpace {
            labels,
            projection: Projection::Level,
        }
    }

    /// One label per (level, source) pair occurring in either set, plus `NotCR`.
    pub fn source_sensitive(a: &AnnotationSet, b: &AnnotationSet) -> Self {
        let mut seen = BTreeSet::new();
        for set in [a, b] {
            for ann in set.crs() {
                if let Label::Cr { source, level } = &ann.label {
                    seen.insert((level.slot(), source.index));
                }
            }
        }
        let mut labels: Vec<String> = seen
            .into_iter()
            .map(|(slot, src)| format!("{}@{src}", cr_label(Level::ALL[slot])))
            .collect();
        labels.push(NOT_CR.to_string());
        if labels.len() < 2 {
            labels.insert(0, cr_label(Level::L4));
        }
        LabelSpace {
            labels,
            projection: Projection::SourceSensitive,
        }
    }

    /// A custom space over arbitrary label names.
    pub fn custom(labels: Vec<String>) -> Result<Self, AgreementError> {
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if labels.len() < 2 || distinct.len() != labels.len() {
            return Err(AgreementError::DegenerateSpace);
        }
        Ok(LabelSpace {
            labels,
            projection: Projection::Level,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// The category of one turn given all of its annotations.
    pub fn project_turn<'a>(&self, annotations: impl IntoIterator<Item = &'a Annotation>) -> String {
        for a in annotations {
            if let Label::Cr { source, level } = &a.label {
                return match self.projection {
                    Projection::Level => cr_label(*level),
                    Projection::SourceSensitive => format!("{}@{}", cr_label(*level), source.index),
                };
            }
        }
        NOT_CR.to_string()
    }

    fn project_set(&self, set: &AnnotationSet) -> BTreeMap<usize, String> {
        set.turns()
            .into_iter()
            .map(|t| (t, self.project_turn(set.for_turn(t))))
            .collect()
    }
}

/// Rows are annotator A, columns annotator B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    #[serde(skip)]
    pub space: LabelSpace,
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(space: LabelSpace, counts: Vec<Vec<u64>>) -> Result<Self, AgreementError> {
        let n = space.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(AgreementError::Shape);
        }
        Ok(ConfusionMatrix {
            labels: space.labels.clone(),
            space,
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn transpose(&self) -> ConfusionMatrix {
        let n = self.counts.len();
        let counts = (0..n)
            .map(|i| (0..n).map(|j| self.counts[j][i]).collect())
            .collect();
        ConfusionMatrix {
            space: self.space.clone(),
            labels: self.labels.clone(),
            counts,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, &c)| i == j || c == 0))
    }
}

/// Compares two annotators turn by turn.
pub fn confusion_matrix(
    a: &AnnotationSet,
    b: &AnnotationSet,
    space: &LabelSpace,
) -> Result<ConfusionMatrix, AgreementError> {
    if a.dialogue_id != b.dialogue_id {
        return Err(AgreementError::DialogueMismatch(
            a.dialogue_id.clone(),
            b.dialogue_id.clone(),
        ));
    }
    let pa = space.project_set(a);
    let pb = space.project_set(b);
    if pa.keys().ne(pb.keys()) {
        return Err(AgreementError::TurnMismatch);
    }
    let n = space.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (turn, la) in &pa {
        let lb = &pb[turn];
        let i = space
            .position(la)
            .ok_or_else(|| AgreementError::UnknownLabel(la.clone()))?;
        let j = space
            .position(lb)
            .ok_or_else(|| AgreementError::UnknownLabel(lb.clone()))?;
        counts[i][j] += 1;
    }
    ConfusionMatrix::from_counts(space.clone(), counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementReport {
    /// `None` when expected agreement is 1 and kappa is undefined.
    pub kappa: Option<f64>,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub n_items: u64,
}

impl AgreementReport {
    pub fn is_undefined(&self) -> bool {
        self.kappa.is_none()
    }
}

impl fmt::Display for AgreementReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kappa {
            Some(k) => write!(f, "kappa {}", format_kappa(k))?,
            None => write!(f, "kappa undefined")?,
        }
        write!(
            f,
            " (p_o {:.3}, p_e {:.3}, n {})",
            self.observed_agreement, self.expected_agreement, self.n_items
        )
    }
}

/// Two decimals with the leading zero dropped, e.g. `.84` or `-.12`.
pub fn format_kappa(k: f64) -> String {
    let s = format!("{k:.2}");
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

/// Unweighted Cohen's kappa: `(p_o - p_e) / (1 - p_e)`.
pub fn cohen_kappa(m: &ConfusionMatrix) -> Result<AgreementReport, AgreementError> {
    let total = m.total();
    if total == 0 {
        return Err(AgreementError::Empty);
    }
    let n = m.counts.len();
    let t = total as f64;
    let p_o = m.trace() as f64 / t;
    let rows: Vec<u64> = m.counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..n).map(|j| m.counts.iter().map(|r| r[j]).sum()).collect();
    let p_e = rows
        .iter()
        .zip(&cols)
        .map(|(&r, &c)| r as f64 * c as f64)
        .sum::<f64>()
        / (t * t);
    // Exact check on integers: p_e == 1 iff one category holds all mass for both.
    let degenerate = rows.iter().zip(&cols).any(|(&r, &c)| r == total && c == total);
    let kappa = if degenerate {
        None
    } else {
        Some((p_o - p_e) / (1.0 - p_e))
    };
    Ok(AgreementReport {
        kappa,
        observed_agreement: p_o,
        expected_agreement: if degenerate { 1.0 } else { p_e },
        n_items: total,
    })
}

/// Merges two annotation sets. Turns on which the projected labels agree
/// keep annotator A's annotations; each disagreeing turn takes its resolution.
pub fn adjudicate(
    a: &AnnotationSet,
    b: &AnnotationSet,
    space: &LabelSpace,
    resolutions: &BTreeMap<usize, Label>,
) -> Result<AnnotationSet, AgreementError> {
    if a.dialogue_id != b.dialogue_id {
        return Err(AgreementError::DialogueMismatch(
            a.dialogue_id.clone(),
            b.dialogue_id.clone(),
        ));
    }
    let pa = space.project_set(a);
    let pb = space.project_set(b);
    if pa.keys().ne(pb.keys()) {
        return Err(AgreementError::TurnMismatch);
    }
    let disagreements: BTreeSet<usize> = pa
        .iter()
        .filter(|(t, l)| pb[*t] != **l)
        .map(|(t, _)| *t)
        .collect();
    if let Some(extra) = resolutions.keys().find(|t| !disagreements.contains(t)) {
        return Err(AgreementError::ExtraneousResolution(*extra));
    }
    if let Some(missing) = disagreements.iter().find(|t| !resolutions.contains_key(t)) {
        return Err(AgreementError::MissingResolution(*missing));
    }
    let mut merged = AnnotationSet::new(a.dialogue_id.clone());
    for turn in pa.keys() {
        match resolutions.get(turn) {
            Some(label) => merged.annotations.push(Annotation {
                turn: TurnRef::new(a.dialogue_id.clone(), *turn),
                label: label.clone(),
                gp_tag: None,
            }),
            None => merged.annotations.extend(a.for_turn(*turn).cloned()),
        }
    }
    Ok(merged)
}
