//! CR rates, per-level distributions and the cross-corpus comparison table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dialogue, PressureProfile};
use crate::ladder::Level;
use crate::recipe::{AnnotationSet, Label};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("annotations are for dialogue {annotations:?}, not {dialogue:?}")]
    DialogueMismatch { annotations: String, dialogue: String },
    #[error("dialogue {0:?} has no turns")]
    EmptyDialogue(String),
    #[error("no annotated dialogues to summarize")]
    NothingToSummarize,
    #[error("summary record: {0}")]
    Record(String),
}

/// Percentage of CRs per level. Serialized with level names as keys.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelPercents {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    #[serde(rename = "Other")]
    pub other: f64,
}

impl LevelPercents {
    pub fn get(&self, level: Level) -> f64 {
        match level {
            Level::L1 => self.l1,
            Level::L2 => self.l2,
            Level::L3 => self.l3,
            Level::L4 => self.l4,
            Level::Other => self.other,
        }
    }

    fn slot(&mut self, level: Level) -> &mut f64 {
        match level {
            Level::L1 => &mut self.l1,
            Level::L2 => &mut self.l2,
            Level::L3 => &mut self.l3,
            Level::L4 => &mut self.l4,
            Level::Other => &mut self.other,
        }
    }

    pub fn total(&self) -> f64 {
        Level::ALL.iter().map(|&l| self.get(l)).sum()
    }

    fn from_counts(counts: &[usize; 5]) -> Option<Self> {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return None;
        }
        let mut p = LevelPercents::default();
        for level in Level::ALL {
            *p.slot(level) = 100.0 * counts[level.slot()] as f64 / n as f64;
        }
        Some(p)
    }
}

/// Result of [`level_distribution`]: either percentages or the explicit
/// marker that there were no CRs to distribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelDistribution {
    NoCrs,
    Percents(LevelPercents),
}

impl LevelDistribution {
    pub fn percents(&self) -> Option<&LevelPercents> {
        match self {
            LevelDistribution::NoCrs => None,
            LevelDistribution::Percents(p) => Some(p),
        }
    }
}

fn level_counts<'a>(sets: impl IntoIterator<Item = &'a AnnotationSet>) -> [usize; 5] {
    let mut counts = [0usize; 5];
    for set in sets {
        for a in set.crs() {
            if let Label::Cr { level, .. } = a.label {
                counts[level.slot()] += 1;
            }
        }
    }
    counts
}

/// `100 * CRs / turns` for one annotated dialogue.
pub fn cr_rate(ann: &AnnotationSet, dialogue: &Dialogue) -> Result<f64, StatsError> {
    if ann.dialogue_id != dialogue.dialogue_id {
        return Err(StatsError::DialogueMismatch {
            annotations: ann.dialogue_id.clone(),
            dialogue: dialogue.dialogue_id.clone(),
        });
    }
    if dialogue.is_empty() {
        return Err(StatsError::EmptyDialogue(dialogue.dialogue_id.clone()));
    }
    Ok(100.0 * ann.cr_count() as f64 / dialogue.len() as f64)
}

pub fn level_distribution(ann: &AnnotationSet) -> LevelDistribution {
    match LevelPercents::from_counts(&level_counts([ann])) {
        Some(p) => LevelDistribution::Percents(p),
        None => LevelDistribution::NoCrs,
    }
}

/// One column of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSummary {
    pub name: String,
    /// Short task description shown in the `Task` row.
    pub task: String,
    pub profile: PressureProfile,
    pub total_turns: usize,
    pub avg_dialogue_length: f64,
    pub cr_rate_percent: f64,
    pub level_percents: LevelPercents,
}

impl CorpusSummary {
    /// Builds a summary from annotated dialogues. The profile is taken from
    /// the first dialogue; pressure factors are metadata, never inferred.
    pub fn from_annotations(
        name: &str,
        task: &str,
        annotated: &[(&Dialogue, &AnnotationSet)],
    ) -> Result<CorpusSummary, StatsError> {
        let (first, _) = annotated.first().ok_or(StatsError::NothingToSummarize)?;
        let mut crs = 0usize;
        let mut turns = 0usize;
        for (d, ann) in annotated {
            cr_rate(ann, d)?;
            crs += ann.cr_count();
            turns += d.len();
        }
        let counts = level_counts(annotated.iter().map(|(_, a)| *a));
        Ok(CorpusSummary {
            name: name.to_string(),
            task: task.to_string(),
            profile: first.metadata,
            total_turns: turns,
            avg_dialogue_length: turns as f64 / annotated.len() as f64,
            cr_rate_percent: 100.0 * crs as f64 / turns as f64,
            level_percents: LevelPercents::from_counts(&counts).unwrap_or_default(),
        })
    }

    pub fn from_record(line: &str) -> Result<CorpusSummary, StatsError> {
        serde_json::from_str(line).map_err(|e| StatsError::Record(e.to_string()))
    }

    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }

    /// Checks the range invariants: rate within [0, 100], level percentages
    /// non-negative and summing to 100 within one point.
    pub fn check(&self) -> Result<(), String> {
        if !(0.0..=100.0).contains(&self.cr_rate_percent) {
            return Err(format!("{}: CR rate {} outside [0, 100]", self.name, self.cr_rate_percent));
        }
        if Level::ALL.iter().any(|&l| self.level_percents.get(l) < 0.0) {
            return Err(format!("{}: negative level percentage", self.name));
        }
        let total = self.level_percents.total();
        if (total - 100.0).abs() > 1.0 && total != 0.0 {
            return Err(format!("{}: level percentages sum to {total}", self.name));
        }
        Ok(())
    }
}

pub fn parse_summaries(text: &str) -> Result<Vec<CorpusSummary>, StatsError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(CorpusSummary::from_record)
        .collect()
}

/// One decimal, as used for rates.
pub fn round1(x: f64) -> String {
    format!("{x:.1}")
}

/// Whole number, as used for level percentages.
pub fn round0(x: f64) -> String {
    format!("{x:.0}")
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn participants(n: u32) -> String {
    match n {
        1 => "One".into(),
        2 => "Two".into(),
        _ => "More than two".into(),
    }
}

fn length(x: f64) -> String {
    if x.fract() == 0.0 {
        round0(x)
    } else {
        round1(x)
    }
}

pub const ROW_LABELS: [&str; 13] = [
    "Task",
    "Shared view",
    "Participants",
    "World validation",
    "Information Flow",
    "Total # turns",
    "Avg dialogue length",
    "% of CRs/turns",
    "% CRs level 1",
    "% CRs level 2",
    "% CRs level 3",
    "% CRs level 4",
    "% CRs other",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub cells: Vec<String>,
}

/// Corpora side by side, one column each, rows as in [`ROW_LABELS`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub columns: Vec<CorpusSummary>,
    pub rows: Vec<ReportRow>,
}

pub fn comparison_table(summaries: &[CorpusSummary]) -> ComparisonReport {
    let cells = |f: &dyn Fn(&CorpusSummary) -> String| summaries.iter().map(f).collect::<Vec<_>>();
    let values: Vec<Vec<String>> = vec![
        cells(&|s| s.task.clone()),
        cells(&|s| yes_no(s.profile.shared_view).to_string()),
        cells(&|s| participants(s.profile.participants)),
        cells(&|s| s.profile.world_validation.label().to_string()),
        cells(&|s| s.profile.information_flow.label().to_string()),
        cells(&|s| s.total_turns.to_string()),
        cells(&|s| length(s.avg_dialogue_length)),
        cells(&|s| round1(s.cr_rate_percent)),
        cells(&|s| round0(s.level_percents.l1)),
        cells(&|s| round0(s.level_percents.l2)),
        cells(&|s| round0(s.level_percents.l3)),
        cells(&|s| round0(s.level_percents.l4)),
        cells(&|s| round0(s.level_percents.other)),
    ];
    let rows = ROW_LABELS
        .iter()
        .zip(values)
        .map(|(label, cells)| ReportRow {
            label: label.to_string(),
            cells,
        })
        .collect();
    ComparisonReport {
        columns: summaries.to_vec(),
        rows,
    }
}

impl ComparisonReport {
    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn cell(&self, label: &str, column: &str) -> Option<&str> {
        let col = self.columns.iter().position(|c| c.name == column)?;
        self.row(label).map(|r| r.cells[col].as_str())
    }

    /// Aligned plain-text table.
    pub fn render_text(&self) -> String {
        let mut header = vec!["Characteristics".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        let mut lines: Vec<Vec<String>> = vec![header];
        for r in &self.rows {
            let mut line = vec![r.label.clone()];
            line.extend(r.cells.iter().cloned());
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (n, line) in lines.iter().enumerate() {
            let mut text = String::new();
            for (i, cell) in line.iter().enumerate() {
                if i > 0 {
                    text.push_str("  ");
                }
                let _ = write!(text, "{cell:<w$}", w = widths[i]);
            }
            out.push_str(text.trim_end());
            out.push('\n');
            if n == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }

    /// One JSON record per column, at full precision.
    pub fn render_records(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            out.push_str(&c.to_record());
            out.push('\n');
        }
        out
    }
}
