//! Dialogue transcripts: turns, dialogues and their line-delimited record format.
//!
//! A corpus file is UTF-8 with one JSON record per line. Each dialogue has a
//! single header record carrying its [`PressureProfile`] and one record per
//! turn:
//!
//! ```text
//! {"dialogue":"s2","task_oriented":true,"shared_view":true,"participants":2,"world_validation":"simulated","information_flow":"asymmetrical","irreversible_actions":true}
//! {"dialogue":"s2","index":0,"speaker":"DG","kind":"utterance","text":"we have to put it in cabinet nine","action_note":"pause"}
//! ```
//!
//! [`parse_corpus`] admits only data satisfying every invariant checked by
//! [`validate_corpus`]. [`parse_corpus_lenient`] stops at syntax so that broken
//! files can still be loaded and reported on.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown kind {kind:?}")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: duplicate index {index} in dialogue {dialogue:?}")]
    DuplicateIndex {
        line: usize,
        dialogue: String,
        index: usize,
    },
    #[error("line {line}: non-dense index in dialogue {dialogue:?}: expected {expected}, found {found}")]
    NonDenseIndex {
        line: usize,
        dialogue: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: second header record for dialogue {dialogue:?}")]
    DuplicateHeader { line: usize, dialogue: String },
    #[error("dialogue {0:?} has no header record")]
    MissingHeader(String),
    #[error("line {line}: {violation}")]
    Invalid { line: usize, violation: Violation },
    #[error("unknown dialogue {0:?}")]
    UnknownDialogue(String),
    #[error("turn index {index} out of range for dialogue {dialogue:?} ({len} turns)")]
    IndexOutOfRange {
        dialogue: String,
        index: usize,
        len: usize,
    },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Utterance,
    Action,
    /// Utterance accompanied by a physical action, counted as one event.
    Mixed,
}

impl TurnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TurnKind::Utterance => "utterance",
            TurnKind::Action => "action",
            TurnKind::Mixed => "mixed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "utterance" => Some(TurnKind::Utterance),
            "action" => Some(TurnKind::Action),
            "mixed" => Some(TurnKind::Mixed),
            _ => None,
        }
    }
}

/// Address of a turn within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TurnRef {
    pub dialogue_id: String,
    pub index: usize,
}

impl TurnRef {
    pub fn new(dialogue_id: impl Into<String>, index: usize) -> Self {
        TurnRef {
            dialogue_id: dialogue_id.into(),
            index,
        }
    }
}

impl fmt::Display for TurnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.dialogue_id, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub dialogue_id: String,
    pub index: usize,
    pub speaker: String,
    pub kind: TurnKind,
    pub text: String,
    /// Bracketed non-linguistic event, e.g. a button press or a pause.
    pub action_note: Option<String>,
}

impl Turn {
    pub fn turn_ref(&self) -> TurnRef {
        TurnRef::new(self.dialogue_id.clone(), self.index)
    }

    /// Transcript-style rendering: `DG(1): text [note]`, numbered from one.
    pub fn display_line(&self) -> String {
        let mut line = format!("{}({}): {}", self.speaker, self.index + 1, self.text);
        if let Some(note) = &self.action_note {
            if !line.ends_with(' ') && !self.text.is_empty() {
                line.push(' ');
            }
            line.push('[');
            line.push_str(note);
            line.push(']');
        }
        line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldValidation {
    CommonGround,
    Informational,
    Physical,
    Simulated,
}

impl WorldValidation {
    pub fn label(self) -> &'static str {
        match self {
            WorldValidation::CommonGround => "Common ground",
            WorldValidation::Informational => "Informational",
            WorldValidation::Physical => "Physical",
            WorldValidation::Simulated => "Simulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InformationFlow {
    Symmetrical,
    Asymmetrical,
}

impl InformationFlow {
    pub fn label(self) -> &'static str {
        match self {
            InformationFlow::Symmetrical => "Symmetrical",
            InformationFlow::Asymmetrical => "Asymmetrical",
        }
    }
}

/// The task pressures a dialogue was collected under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureProfile {
    pub task_oriented: bool,
    pub shared_view: bool,
    pub participants: u32,
    pub world_validation: WorldValidation,
    pub information_flow: InformationFlow,
    pub irreversible_actions: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<Turn>,
    pub metadata: PressureProfile,
}

impl Dialogue {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn turn(&self, index: usize) -> Result<&Turn, CorpusError> {
        self.turns.get(index).ok_or_else(|| CorpusError::IndexOutOfRange {
            dialogue: self.dialogue_id.clone(),
            index,
            len: self.turns.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub corpus_id: String,
    pub dialogues: Vec<Dialogue>,
}

impl Corpus {
    pub fn empty(corpus_id: impl Into<String>) -> Self {
        Corpus {
            corpus_id: corpus_id.into(),
            dialogues: Vec::new(),
        }
    }

    pub fn dialogue(&self, dialogue_id: &str) -> Result<&Dialogue, CorpusError> {
        self.dialogues
            .iter()
            .find(|d| d.dialogue_id == dialogue_id)
            .ok_or_else(|| CorpusError::UnknownDialogue(dialogue_id.to_string()))
    }

    pub fn get_turn(&self, dialogue_id: &str, index: usize) -> Result<&Turn, CorpusError> {
        self.dialogue(dialogue_id)?.turn(index)
    }

    pub fn total_turns(&self) -> usize {
        self.dialogues.iter().map(Dialogue::len).sum()
    }

    /// Canonical record serialization; `parse_corpus` inverts it exactly.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.dialogues {
            let header = HeaderRecordOut {
                dialogue: &d.dialogue_id,
                profile: &d.metadata,
            };
            out.push_str(&serde_json::to_string(&header).expect("header serializes"));
            out.push('\n');
            for t in &d.turns {
                let rec = TurnRecordOut {
                    dialogue: &t.dialogue_id,
                    index: t.index,
                    speaker: &t.speaker,
                    kind: t.kind,
                    text: &t.text,
                    action_note: t.action_note.as_deref(),
                };
                out.push_str(&serde_json::to_string(&rec).expect("turn serializes"));
                out.push('\n');
            }
        }
        out
    }
}

/// Lookup shorthand mirroring [`Corpus::get_turn`].
pub fn get_turn<'c>(c: &'c Corpus, dialogue_id: &str, index: usize) -> Result<&'c Turn, CorpusError> {
    c.get_turn(dialogue_id, index)
}

#[derive(Serialize)]
struct HeaderRecordOut<'a> {
    dialogue: &'a str,
    #[serde(flatten)]
    profile: &'a PressureProfile,
}

#[derive(Serialize)]
struct TurnRecordOut<'a> {
    dialogue: &'a str,
    index: usize,
    speaker: &'a str,
    kind: TurnKind,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    action_note: Option<&'a str>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRecordIn {
    dialogue: String,
    index: usize,
    speaker: String,
    kind: String,
    text: String,
    #[serde(default)]
    action_note: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecordIn {
    dialogue: String,
    task_oriented: bool,
    shared_view: bool,
    participants: u32,
    world_validation: WorldValidation,
    information_flow: InformationFlow,
    irreversible_actions: bool,
}

/// What a [`Violation`] breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    EmptyDialogue,
    DuplicateDialogue,
    ForeignTurn { found: String },
    IndexGap { expected: usize, found: usize },
    IndexNotIncreasing { previous: usize, found: usize },
    UtteranceWithoutText,
    ActionWithoutNote,
    MixedIncomplete,
    NoParticipants,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::EmptyDialogue => write!(f, "dialogue has no turns"),
            Rule::DuplicateDialogue => write!(f, "dialogue id appears more than once"),
            Rule::ForeignTurn { found } => write!(f, "turn belongs to dialogue {found:?}"),
            Rule::IndexGap { expected, found } => {
                write!(f, "index gap: expected {expected}, found {found}")
            }
            Rule::IndexNotIncreasing { previous, found } => {
                write!(f, "index {found} does not follow {previous}")
            }
            Rule::UtteranceWithoutText => write!(f, "utterance turn with empty text"),
            Rule::ActionWithoutNote => write!(f, "action turn without action note"),
            Rule::MixedIncomplete => write!(f, "mixed turn needs both text and action note"),
            Rule::NoParticipants => write!(f, "participants must be positive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub dialogue_id: String,
    pub index: Option<usize>,
    #[serde(flatten)]
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{}]: {}", self.dialogue_id, i, self.rule),
            None => write!(f, "{}: {}", self.dialogue_id, self.rule),
        }
    }
}

fn turn_rule(t: &Turn) -> Option<Rule> {
    let has_note = t.action_note.as_deref().is_some_and(|n| !n.is_empty());
    match t.kind {
        TurnKind::Utterance if t.text.is_empty() => Some(Rule::UtteranceWithoutText),
        TurnKind::Action if !has_note => Some(Rule::ActionWithoutNote),
        TurnKind::Mixed if t.text.is_empty() || !has_note => Some(Rule::MixedIncomplete),
        _ => None,
    }
}

/// Checks every corpus invariant; violations are data, never failures.
pub fn validate_corpus(c: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for d in &c.dialogues {
        let v = |index, rule| Violation {
            dialogue_id: d.dialogue_id.clone(),
            index,
            rule,
        };
        if !seen.insert(d.dialogue_id.as_str()) {
            out.push(v(None, Rule::DuplicateDialogue));
        }
        if d.metadata.participants == 0 {
            out.push(v(None, Rule::NoParticipants));
        }
        if d.turns.is_empty() {
            out.push(v(None, Rule::EmptyDialogue));
        }
        let mut previous: Option<usize> = None;
        for t in &d.turns {
            if t.dialogue_id != d.dialogue_id {
                out.push(v(
                    Some(t.index),
                    Rule::ForeignTurn {
                        found: t.dialogue_id.clone(),
                    },
                ));
            }
            let expected = previous.map_or(0, |p| p + 1);
            match previous {
                Some(p) if t.index <= p => out.push(v(
                    Some(t.index),
                    Rule::IndexNotIncreasing {
                        previous: p,
                        found: t.index,
                    },
                )),
                _ if t.index != expected => out.push(v(
                    Some(t.index),
                    Rule::IndexGap {
                        expected,
                        found: t.index,
                    },
                )),
                _ => {}
            }
            if let Some(rule) = turn_rule(t) {
                out.push(v(Some(t.index), rule));
            }
            previous = Some(previous.map_or(t.index, |p| p.max(t.index)));
        }
    }
    out
}

struct Builder {
    dialogue_id: String,
    header: Option<PressureProfile>,
    turns: Vec<Turn>,
}

fn parse(corpus_id: &str, input: impl BufRead, strict: bool) -> Result<Corpus, CorpusError> {
    let mut order: Vec<Builder> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();

    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| CorpusError::Malformed {
            line: line_no,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("record is not an object".into()))?;
        let is_turn = obj.contains_key("kind") || obj.contains_key("index");
        let is_header = obj.contains_key("task_oriented");
        if !is_turn && !is_header {
            return Err(malformed("neither a turn nor a dialogue header".into()));
        }

        let dialogue_id = obj
            .get("dialogue")
            .and_then(|v| v.as_str())
            .ok_or_else(|| malformed("missing string field `dialogue`".into()))?
            .to_string();
        let at = *slot.entry(dialogue_id.clone()).or_insert_with(|| {
            order.push(Builder {
                dialogue_id: dialogue_id.clone(),
                header: None,
                turns: Vec::new(),
            });
            order.len() - 1
        });
        let b = &mut order[at];

        if is_header {
            let h: HeaderRecordIn =
                serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
            if b.header.is_some() {
                return Err(CorpusError::DuplicateHeader {
                    line: line_no,
                    dialogue: dialogue_id,
                });
            }
            let profile = PressureProfile {
                task_oriented: h.task_oriented,
                shared_view: h.shared_view,
                participants: h.participants,
                world_validation: h.world_validation,
                information_flow: h.information_flow,
                irreversible_actions: h.irreversible_actions,
            };
            if strict && profile.participants == 0 {
                return Err(CorpusError::Invalid {
                    line: line_no,
                    violation: Violation {
                        dialogue_id: h.dialogue,
                        index: None,
                        rule: Rule::NoParticipants,
                    },
                });
            }
            b.header = Some(profile);
            continue;
        }

        let r: TurnRecordIn = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let kind = TurnKind::parse(&r.kind).ok_or(CorpusError::UnknownKind {
            line: line_no,
            kind: r.kind.clone(),
        })?;
        let turn = Turn {
            dialogue_id: r.dialogue,
            index: r.index,
            speaker: r.speaker,
            kind,
            text: r.text,
            action_note: r.action_note,
        };
        if strict {
            let expected = b.turns.len();
            if turn.index < expected {
                return Err(CorpusError::DuplicateIndex {
                    line: line_no,
                    dialogue: dialogue_id,
                    index: turn.index,
                });
            }
            if turn.index != expected {
                return Err(CorpusError::NonDenseIndex {
                    line: line_no,
                    dialogue: dialogue_id,
                    expected,
                    found: turn.index,
                });
            }
            if let Some(rule) = turn_rule(&turn) {
                return Err(CorpusError::Invalid {
                    line: line_no,
                    violation: Violation {
                        dialogue_id,
                        index: Some(turn.index),
                        rule,
                    },
                });
            }
        }
        b.turns.push(turn);
    }

    let mut dialogues = Vec::with_capacity(order.len());
    for b in order {
        let metadata = b.header.ok_or_else(|| CorpusError::MissingHeader(b.dialogue_id.clone()))?;
        if strict && b.turns.is_empty() {
            return Err(CorpusError::Invalid {
                line: 0,
                violation: Violation {
                    dialogue_id: b.dialogue_id,
                    index: None,
                    rule: Rule::EmptyDialogue,
                },
            });
        }
        dialogues.push(Dialogue {
            dialogue_id: b.dialogue_id,
            turns: b.turns,
            metadata,
        });
    }
    Ok(Corpus {
        corpus_id: corpus_id.to_string(),
        dialogues,
    })
}

/// Parses a corpus, rejecting anything that would fail [`validate_corpus`].
pub fn parse_corpus(corpus_id: &str, input: impl BufRead) -> Result<Corpus, CorpusError> {
    parse(corpus_id, input, true)
}

/// Parses record syntax only; index density and turn content are left for
/// [`validate_corpus`] to report.
pub fn parse_corpus_lenient(corpus_id: &str, input: impl BufRead) -> Result<Corpus, CorpusError> {
    parse(corpus_id, input, false)
}

pub fn parse_corpus_str(corpus_id: &str, input: &str) -> Result<Corpus, CorpusError> {
    parse_corpus(corpus_id, input.as_bytes())
}
