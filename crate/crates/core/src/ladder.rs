//! The four-level grounding ladder and the stack of open proposals.
//!
//! Every proposal tracks, per level, whether positive evidence of
//! understanding has been observed. Evidence at a level implies evidence at
//! every level below it, and a proposal only completes once level 4 is
//! reached, either explicitly or through implicit uptake when a deeper
//! proposal gets clarified.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TurnRef;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LadderError {
    #[error("level `other` is outside the evidence ladder")]
    OtherLevel,
    #[error("proposal {0} is already open")]
    DuplicateSource(TurnRef),
    #[error("no proposal with source {0}")]
    UnknownSource(TurnRef),
    #[error("proposal {0} is already closed")]
    ClosedSource(TurnRef),
}

/// A rung of the ladder, each grounded in one modality, or `Other` for
/// problems outside the four modalities (e.g. with the language itself).
///
/// `L1 < L2 < L3 < L4`; `Other` does not compare with the ladder levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    /// Socioperception: attending to the speaker.
    L1,
    /// Hearing.
    L2,
    /// Vision: identifying what is referred to.
    L3,
    /// Kinesthetic: carrying out the proposal.
    L4,
    Other,
}

impl Level {
    pub const LADDER: [Level; 4] = [Level::L1, Level::L2, Level::L3, Level::L4];
    pub const ALL: [Level; 5] = [Level::L1, Level::L2, Level::L3, Level::L4, Level::Other];

    /// Zero-based rung, `None` for `Other`.
    pub fn rung(self) -> Option<usize> {
        match self {
            Level::L1 => Some(0),
            Level::L2 => Some(1),
            Level::L3 => Some(2),
            Level::L4 => Some(3),
            Level::Other => None,
        }
    }

    /// Position in [`Level::ALL`].
    pub fn slot(self) -> usize {
        self.rung().unwrap_or(4)
    }

    pub fn modality(self) -> &'static str {
        match self {
            Level::L1 => "socioperception",
            Level::L2 => "hearing",
            Level::L3 => "vision",
            Level::L4 => "kinesthetic",
            Level::Other => "other",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::L3 => "L3",
            Level::L4 => "L4",
            Level::Other => "Other",
        }
    }
}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.rung(), other.rung()) {
            (Some(a), Some(b)) => Some(a.cmp(&b)),
            (None, None) => Some(Ordering::Equal),
            _ => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "1" => Ok(Level::L1),
            "l2" | "2" => Ok(Level::L2),
            "l3" | "3" => Ok(Level::L3),
            "l4" | "4" => Ok(Level::L4),
            "other" => Ok(Level::Other),
            _ => Err(format!("unknown level {s:?}")),
        }
    }
}

/// Levels whose success is implied by evidence at `level`: every rung up to
/// and including it.
pub fn evidence_closure(level: Level) -> Result<Vec<Level>, LadderError> {
    let top = level.rung().ok_or(LadderError::OtherLevel)?;
    Ok(Level::LADDER[..=top].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Open,
    Satisfied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseCause {
    ExplicitEvidence,
    /// Closed because a proposal below it was clarified.
    ImplicitUptake,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Proposal {
    pub source: TurnRef,
    pub proposer: String,
    pub evidence: [Evidence; 4],
    pub closed: bool,
    pub close_cause: Option<CloseCause>,
}

impl Proposal {
    pub fn new(source: TurnRef, proposer: impl Into<String>) -> Self {
        Proposal {
            source,
            proposer: proposer.into(),
            evidence: [Evidence::Open; 4],
            closed: false,
            close_cause: None,
        }
    }

    pub fn is_satisfied(&self, level: Level) -> bool {
        level
            .rung()
            .is_some_and(|r| self.evidence[r] == Evidence::Satisfied)
    }

    /// Highest rung with evidence, if any.
    pub fn highest_satisfied(&self) -> Option<Level> {
        Level::LADDER
            .iter()
            .rev()
            .copied()
            .find(|&l| self.is_satisfied(l))
    }

    pub fn satisfied_levels(&self) -> Vec<Level> {
        Level::LADDER
            .iter()
            .copied()
            .filter(|&l| self.is_satisfied(l))
            .collect()
    }

    fn satisfy_up_to(&mut self, level: Level) {
        if let Some(top) = level.rung() {
            for e in &mut self.evidence[..=top] {
                *e = Evidence::Satisfied;
            }
        }
    }

    fn close(&mut self, cause: CloseCause) {
        self.satisfy_up_to(Level::L4);
        self.closed = true;
        self.close_cause = Some(cause);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClosedProposal {
    pub proposal: Proposal,
    pub closed_by: TurnRef,
}

/// Open proposals, bottom to top, plus the log of those already closed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stack {
    pub entries: Vec<Proposal>,
    pub closed_log: Vec<ClosedProposal>,
}

impl Stack {
    pub fn new() -> Self {
        Stack::default()
    }

    pub fn top(&self) -> Option<&Proposal> {
        self.entries.last()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, source: &TurnRef) -> Option<usize> {
        self.entries.iter().position(|p| &p.source == source)
    }

    pub fn open(&self, source: &TurnRef) -> Option<&Proposal> {
        self.entries.iter().find(|p| &p.source == source)
    }

    pub fn closed(&self, source: &TurnRef) -> Option<&ClosedProposal> {
        self.closed_log.iter().rev().find(|c| &c.proposal.source == source)
    }

    fn require_open(&self, source: &TurnRef) -> Result<usize, LadderError> {
        match self.position(source) {
            Some(i) => Ok(i),
            None if self.closed(source).is_some() => Err(LadderError::ClosedSource(source.clone())),
            None => Err(LadderError::UnknownSource(source.clone())),
        }
    }

    /// Opens a new proposal on top with every level open.
    pub fn push_proposal(&mut self, proposal: Proposal) -> Result<(), LadderError> {
        if self.position(&proposal.source).is_some() {
            return Err(LadderError::DuplicateSource(proposal.source));
        }
        let mut p = proposal;
        p.evidence = [Evidence::Open; 4];
        p.closed = false;
        p.close_cause = None;
        self.entries.push(p);
        Ok(())
    }

    /// Marks `level` and everything below it satisfied on `source`. Level 4
    /// evidence completes the proposal and moves it to the closed log.
    ///
    /// Returns `true` when the proposal was closed.
    pub fn record_evidence(
        &mut self,
        source: &TurnRef,
        level: Level,
        by_turn: &TurnRef,
    ) -> Result<bool, LadderError> {
        if level == Level::Other {
            return Err(LadderError::OtherLevel);
        }
        let at = self.require_open(source)?;
        if level == Level::L4 {
            let mut p = self.entries.remove(at);
            p.close(CloseCause::ExplicitEvidence);
            self.closed_log.push(ClosedProposal {
                proposal: p,
                closed_by: by_turn.clone(),
            });
            Ok(true)
        } else {
            self.entries[at].satisfy_up_to(level);
            Ok(false)
        }
    }

    /// Closes every proposal above `source` by implicit level-4 uptake and
    /// returns them top first, leaving `source` on top.
    pub fn unstack_over(
        &mut self,
        source: &TurnRef,
        by_turn: &TurnRef,
    ) -> Result<Vec<Proposal>, LadderError> {
        let at = self.require_open(source)?;
        let mut popped = Vec::new();
        while self.entries.len() > at + 1 {
            let mut p = self.entries.pop().expect("entries above source");
            p.close(CloseCause::ImplicitUptake);
            self.closed_log.push(ClosedProposal {
                proposal: p.clone(),
                closed_by: by_turn.clone(),
            });
            popped.push(p);
        }
        Ok(popped)
    }

    /// Whether a clarification of `source` grounded in `level` is still
    /// admissible: the proposal must be open and lack evidence at `level`.
    /// `Other` only needs the proposal to be open.
    pub fn can_annotate_cr(&self, source: &TurnRef, level: Level) -> Result<bool, LadderError> {
        if let Some(p) = self.open(source) {
            return Ok(level == Level::Other || !p.is_satisfied(level));
        }
        if self.closed(source).is_some() {
            return Ok(false);
        }
        Err(LadderError::UnknownSource(source.clone()))
    }
}
