//! Decision-graph annotation sessions.
//!
//! A session walks a dialogue turn by turn. For each turn the annotator is
//! asked, in order:
//!
//! 1. `D1`: is the turn a clarification request (CR) of the top open proposal?
//!    `D2`: otherwise, of some deeper open proposal (asked deepest-last)?
//! 2. If so, `D3`..`D6`: the level-sensitive acknowledgement test for levels
//!    1 to 4, bottom up, skipping levels already evidenced on the source. The
//!    first odd-sounding level is the CR's level; if none is odd the CR is
//!    `Other`. Every proposal above the source is closed by implicit uptake.
//! 3. `PUSH`: does the turn open a new proposal?
//! 4. `EVIDENCE`: does it give positive evidence for an open proposal (repeated
//!    until answered `none`)?
//!
//! The [`DecisionLog`] of answers is the only persisted state; everything else
//! in a [`Session`] is recomputed by [`replay`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Dialogue, Turn, TurnRef};
use crate::ladder::{Level, Proposal, Stack};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecipeError {
    #[error("unknown dialogue {0:?}")]
    UnknownDialogue(String),
    #[error("dialogue {0:?} has no turns")]
    EmptyDialogue(String),
    #[error("session is finished")]
    Finished,
    #[error("answer {answer} is not legal at {point} for turn {turn}")]
    IllegalAnswer {
        point: Point,
        turn: usize,
        answer: Answer,
    },
    #[error("log entry targets {found} but the session is at {expected}")]
    PromptMismatch { expected: String, found: String },
    #[error("stale version: expected {expected}, session is at {actual}")]
    StaleVersion { expected: usize, actual: usize },
    #[error("a G&P tag can only accompany an answer that confirms a CR")]
    TagWithoutCr,
    #[error("level `other` has no acknowledgement paraphrase")]
    NoParaphrase,
    #[error("log is for dialogue {log:?}, not {session:?}")]
    DialogueMismatch { log: String, session: String },
    #[error("entry {ordinal}: {error}")]
    Replay {
        ordinal: usize,
        error: Box<RecipeError>,
    },
    #[error("session file: {0}")]
    SessionFile(String),
}

impl From<CorpusError> for RecipeError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::UnknownDialogue(d) => RecipeError::UnknownDialogue(d),
            other => RecipeError::SessionFile(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Point {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    #[serde(rename = "EVIDENCE")]
    Evidence,
    #[serde(rename = "PUSH")]
    Push,
}

impl Point {
    fn for_level(level: Level) -> Point {
        match level {
            Level::L1 => Point::D3,
            Level::L2 => Point::D4,
            Level::L3 => Point::D5,
            _ => Point::D6,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Point::D1 => "D1",
            Point::D2 => "D2",
            Point::D3 => "D3",
            Point::D4 => "D4",
            Point::D5 => "D5",
            Point::D6 => "D6",
            Point::Evidence => "EVIDENCE",
            Point::Push => "PUSH",
        };
        f.write_str(s)
    }
}

/// An annotator's answer at a decision point. Evidence sources are turn
/// indices within the session's dialogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    #[serde(rename = "none")]
    NoEvidence,
    Evidence { source: usize, level: Level },
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Yes => f.write_str("yes"),
            Answer::No => f.write_str("no"),
            Answer::NoEvidence => f.write_str("none"),
            Answer::Evidence { source, level } => write!(f, "{source}:{level}"),
        }
    }
}

impl FromStr for Answer {
    type Err = String;

    /// Accepts `yes`/`y`, `no`/`n`, `none`, or `<source index>:<level>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "yes" | "y" => return Ok(Answer::Yes),
            "no" | "n" => return Ok(Answer::No),
            "none" => return Ok(Answer::NoEvidence),
            _ => {}
        }
        let (src, lvl) = s
            .split_once(':')
            .ok_or_else(|| format!("cannot read answer {s:?}"))?;
        let source = src
            .trim()
            .parse()
            .map_err(|_| format!("bad source index {src:?}"))?;
        let level = lvl.trim().parse()?;
        Ok(Answer::Evidence { source, level })
    }
}

/// Secondary category supplied by the annotator; never inferred or checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpTag {
    Repetition,
    Clausal,
    Intended,
    Correction,
}

impl FromStr for GpTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "repetition" => Ok(GpTag::Repetition),
            "clausal" => Ok(GpTag::Clausal),
            "intended" => Ok(GpTag::Intended),
            "correction" => Ok(GpTag::Correction),
            _ => Err(format!("unknown G&P tag {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntry {
    pub turn: usize,
    pub point: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<usize>,
    pub answer: Answer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp_tag: Option<GpTag>,
}

/// The ordered answers of one annotator on one dialogue. Serialized as the
/// session file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionLog {
    pub dialogue_id: String,
    pub annotator_id: String,
    pub entries: Vec<LogEntry>,
}

impl DecisionLog {
    pub fn new(dialogue_id: impl Into<String>, annotator_id: impl Into<String>) -> Self {
        DecisionLog {
            dialogue_id: dialogue_id.into(),
            annotator_id: annotator_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical session file text.
    pub fn to_session_file(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("log serializes");
        s.push('\n');
        s
    }

    pub fn from_session_file(text: &str) -> Result<Self, RecipeError> {
        serde_json::from_str(text).map_err(|e| RecipeError::SessionFile(e.to_string()))
    }

    pub fn truncated(&self, len: usize) -> DecisionLog {
        DecisionLog {
            dialogue_id: self.dialogue_id.clone(),
            annotator_id: self.annotator_id.clone(),
            entries: self.entries[..len.min(self.entries.len())].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum Label {
    Cr { source: TurnRef, level: Level },
    PositiveEvidence { source: TurnRef, level: Level },
    ProposalIntro,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Annotation {
    pub turn: TurnRef,
    pub label: Label,
    pub gp_tag: Option<GpTag>,
}

/// Flat, line-oriented form of an [`Annotation`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub dialogue: String,
    pub index: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp_tag: Option<GpTag>,
}

impl Annotation {
    pub fn is_cr(&self) -> bool {
        matches!(self.label, Label::Cr { .. })
    }

    pub fn to_record(&self) -> AnnotationRecord {
        let (label, source, level) = match &self.label {
            Label::Cr { source, level } => ("cr", Some(source.index), Some(*level)),
            Label::PositiveEvidence { source, level } => {
                ("positive_evidence", Some(source.index), Some(*level))
            }
            Label::ProposalIntro => ("proposal_intro", None, None),
            Label::None => ("none", None, None),
        };
        AnnotationRecord {
            dialogue: self.turn.dialogue_id.clone(),
            index: self.turn.index,
            label: label.to_string(),
            source,
            level,
            gp_tag: self.gp_tag,
        }
    }
}

/// Per-turn labels of one dialogue, in turn order. Every annotated turn has
/// at least one entry; turns without events carry [`Label::None`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationSet {
    pub dialogue_id: String,
    pub annotations: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn new(dialogue_id: impl Into<String>) -> Self {
        AnnotationSet {
            dialogue_id: dialogue_id.into(),
            annotations: Vec::new(),
        }
    }

    /// Distinct turn indices, ascending.
    pub fn turns(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.annotations.iter().map(|a| a.turn.index).collect();
        t.dedup();
        t.sort_unstable();
        t.dedup();
        t
    }

    pub fn for_turn(&self, index: usize) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(move |a| a.turn.index == index)
    }

    /// The CR carried by a turn, if any.
    pub fn cr_at(&self, index: usize) -> Option<(&TurnRef, Level)> {
        self.for_turn(index).find_map(|a| match &a.label {
            Label::Cr { source, level } => Some((source, *level)),
            _ => None,
        })
    }

    pub fn crs(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(|a| a.is_cr())
    }

    pub fn cr_count(&self) -> usize {
        self.crs().count()
    }

    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.annotations.iter().map(Annotation::to_record).collect()
    }
}

/// Derived state changes, in the order the engine performed them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Pushed { source: TurnRef },
    Evidence { source: TurnRef, level: Level, by: TurnRef, closed: bool },
    ImplicitClosure { source: TurnRef, by: TurnRef },
    Cr { source: TurnRef, level: Level, by: TurnRef },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionPrompt {
    pub point: Point,
    pub turn: TurnRef,
    pub candidate_source: Option<TurnRef>,
    pub question: String,
    pub legal_answers: Vec<Answer>,
}

impl DecisionPrompt {
    pub fn accepts(&self, answer: &Answer) -> bool {
        self.legal_answers.contains(answer)
    }
}

const PARAPHRASE_TAIL: &str = " — is this sequence odd?";

/// The acknowledgement a speaker would give after succeeding at `level`.
pub fn acknowledgement(level: Level) -> Option<&'static str> {
    match level {
        Level::L1 => Some("Ok, so you want to talk to me."),
        Level::L2 => Some("Ok, I heard you."),
        Level::L3 => Some("Ok, I saw what you are referring to."),
        Level::L4 => Some("Ok, I did it."),
        Level::Other => None,
    }
}

/// Level-sensitive acknowledgement test: the candidate turn prefixed with
/// the level's acknowledgement. If the result sounds odd, the candidate is a
/// clarification at that level.
pub fn gabsdil_prompt(candidate: &Turn, level: Level) -> Result<String, RecipeError> {
    let ack = acknowledgement(level).ok_or(RecipeError::NoParaphrase)?;
    let body = if candidate.text.is_empty() {
        format!("[{}]", candidate.action_note.as_deref().unwrap_or(""))
    } else {
        candidate.text.clone()
    };
    Ok(format!("{ack} {body}{PARAPHRASE_TAIL}"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Stage {
    D1(TurnRef),
    D2(TurnRef),
    Level(TurnRef, Level),
    Push,
    Evidence,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TurnProgress {
    stage: Stage,
    cr_source: Option<TurnRef>,
    evidenced: Vec<TurnRef>,
    annotated: bool,
}

impl TurnProgress {
    fn fresh() -> Self {
        TurnProgress {
            stage: Stage::Done,
            cr_source: None,
            evidenced: Vec::new(),
            annotated: false,
        }
    }
}

/// One annotator's pass over one dialogue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    corpus_id: String,
    dialogue: Arc<Dialogue>,
    cursor: usize,
    stack: Stack,
    annotations: AnnotationSet,
    events: Vec<Event>,
    log: DecisionLog,
    finished: bool,
    progress: TurnProgress,
}

/// Opens a session at the first turn of `dialogue_id`.
pub fn start_session(
    corpus: &Corpus,
    dialogue_id: &str,
    annotator_id: &str,
) -> Result<Session, RecipeError> {
    let dialogue = corpus.dialogue(dialogue_id)?;
    Session::start(&corpus.corpus_id, Arc::new(dialogue.clone()), annotator_id)
}

/// Rebuilds a session from its decision log. Identical logs give equal
/// sessions.
pub fn replay(corpus: &Corpus, log: &DecisionLog) -> Result<Session, RecipeError> {
    let dialogue = corpus.dialogue(&log.dialogue_id)?;
    Session::replay_on(&corpus.corpus_id, Arc::new(dialogue.clone()), log)
}

impl Session {
    pub fn start(
        corpus_id: &str,
        dialogue: Arc<Dialogue>,
        annotator_id: &str,
    ) -> Result<Session, RecipeError> {
        if dialogue.is_empty() {
            return Err(RecipeError::EmptyDialogue(dialogue.dialogue_id.clone()));
        }
        let mut s = Session {
            corpus_id: corpus_id.to_string(),
            annotations: AnnotationSet::new(dialogue.dialogue_id.clone()),
            log: DecisionLog::new(dialogue.dialogue_id.clone(), annotator_id),
            dialogue,
            cursor: 0,
            stack: Stack::new(),
            events: Vec::new(),
            finished: false,
            progress: TurnProgress::fresh(),
        };
        s.begin_turn();
        Ok(s)
    }

    pub fn replay_on(
        corpus_id: &str,
        dialogue: Arc<Dialogue>,
        log: &DecisionLog,
    ) -> Result<Session, RecipeError> {
        if log.dialogue_id != dialogue.dialogue_id {
            return Err(RecipeError::DialogueMismatch {
                log: log.dialogue_id.clone(),
                session: dialogue.dialogue_id.clone(),
            });
        }
        let mut s = Session::start(corpus_id, dialogue, &log.annotator_id)?;
        for (ordinal, entry) in log.entries.iter().enumerate() {
            s.apply_entry(entry).map_err(|error| RecipeError::Replay {
                ordinal,
                error: Box::new(error),
            })?;
        }
        Ok(s)
    }

    /// The session as it was after its first `len` answers.
    pub fn rewind(&self, len: usize) -> Session {
        Session::replay_on(&self.corpus_id, self.dialogue.clone(), &self.log.truncated(len))
            .expect("a prefix of a legal log is legal")
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn dialogue(&self) -> &Dialogue {
        &self.dialogue
    }

    pub fn dialogue_id(&self) -> &str {
        &self.dialogue.dialogue_id
    }

    pub fn annotator_id(&self) -> &str {
        &self.log.annotator_id
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn stack(&self) -> &Stack {
        &self.stack
    }

    pub fn log(&self) -> &DecisionLog {
        &self.log
    }

    /// Number of accepted answers; used as the optimistic-concurrency version.
    pub fn version(&self) -> usize {
        self.log.entries.len()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Annotations recorded so far, in turn order.
    pub fn annotations(&self) -> AnnotationSet {
        self.annotations.clone()
    }

    pub fn annotation_set(&self) -> &AnnotationSet {
        &self.annotations
    }

    fn turn_ref(&self, index: usize) -> TurnRef {
        TurnRef::new(self.dialogue.dialogue_id.clone(), index)
    }

    fn current_turn(&self) -> &Turn {
        &self.dialogue.turns[self.cursor]
    }

    fn evidence_candidates(&self) -> Vec<&Proposal> {
        let here = self.turn_ref(self.cursor);
        self.stack
            .entries
            .iter()
            .rev()
            .filter(|p| {
                p.source != here
                    && self.progress.cr_source.as_ref() != Some(&p.source)
                    && !self.progress.evidenced.contains(&p.source)
            })
            .collect()
    }

    fn begin_turn(&mut self) {
        self.progress = TurnProgress::fresh();
        self.progress.stage = match self.stack.top() {
            Some(top) => Stage::D1(top.source.clone()),
            None => Stage::Push,
        };
    }

    fn first_level_from(&self, source: &TurnRef, after: Option<Level>) -> Option<Level> {
        let p = self.stack.open(source)?;
        Level::LADDER
            .iter()
            .copied()
            .filter(|&l| after.is_none_or(|a| l > a))
            .find(|&l| !p.is_satisfied(l))
    }

    fn enter_evidence_or_finish(&mut self) {
        if self.evidence_candidates().is_empty() {
            self.finish_turn();
        } else {
            self.progress.stage = Stage::Evidence;
        }
    }

    fn finish_turn(&mut self) {
        if !self.progress.annotated {
            let turn = self.turn_ref(self.cursor);
            self.annotations.annotations.push(Annotation {
                turn,
                label: Label::None,
                gp_tag: None,
            });
        }
        self.progress.stage = Stage::Done;
        self.cursor += 1;
        if self.cursor >= self.dialogue.turns.len() {
            self.finished = true;
        } else {
            self.begin_turn();
        }
    }

    fn annotate(&mut self, label: Label, gp_tag: Option<GpTag>) {
        let turn = self.turn_ref(self.cursor);
        self.annotations.annotations.push(Annotation { turn, label, gp_tag });
        self.progress.annotated = true;
    }

    fn confirm_cr(&mut self, source: TurnRef, level: Level, gp_tag: Option<GpTag>) {
        let here = self.turn_ref(self.cursor);
        let popped = self
            .stack
            .unstack_over(&source, &here)
            .expect("CR source is open");
        for p in popped {
            self.events.push(Event::ImplicitClosure {
                source: p.source,
                by: here.clone(),
            });
        }
        self.events.push(Event::Cr {
            source: source.clone(),
            level,
            by: here,
        });
        self.annotate(
            Label::Cr {
                source: source.clone(),
                level,
            },
            gp_tag,
        );
        self.progress.cr_source = Some(source);
        self.progress.stage = Stage::Push;
    }

    fn start_levels(&mut self, source: TurnRef) {
        match self.first_level_from(&source, None) {
            Some(level) => self.progress.stage = Stage::Level(source, level),
            None => self.confirm_cr(source, Level::Other, None),
        }
    }

    /// The question the graph asks next.
    pub fn next_prompt(&self) -> Result<DecisionPrompt, RecipeError> {
        if self.finished {
            return Err(RecipeError::Finished);
        }
        let turn = self.current_turn();
        let here = turn.turn_ref();
        let line = turn.display_line();
        let yes_no = vec![Answer::Yes, Answer::No];
        let source_line = |s: &TurnRef| self.dialogue.turns[s.index].display_line();
        let prompt = match &self.progress.stage {
            Stage::D1(src) => DecisionPrompt {
                point: Point::D1,
                turn: here,
                candidate_source: Some(src.clone()),
                question: format!(
                    "D1: Is {line} a clarification request of the top open proposal {}, \
                     signalling a problem with it rather than taking it up or starting a project of its own?",
                    source_line(src)
                ),
                legal_answers: yes_no,
            },
            Stage::D2(src) => DecisionPrompt {
                point: Point::D2,
                turn: here,
                candidate_source: Some(src.clone()),
                question: format!(
                    "D2: Is {line} a clarification request of the deeper open proposal {}?",
                    source_line(src)
                ),
                legal_answers: yes_no,
            },
            Stage::Level(src, level) => {
                let point = Point::for_level(*level);
                let test = gabsdil_prompt(turn, *level)?;
                DecisionPrompt {
                    point,
                    turn: here,
                    candidate_source: Some(src.clone()),
                    question: format!(
                        "{point} (level {}, {}): source {}. {test}",
                        level.rung().map_or(0, |r| r + 1),
                        level.modality(),
                        source_line(src)
                    ),
                    legal_answers: yes_no,
                }
            }
            Stage::Push => DecisionPrompt {
                point: Point::Push,
                turn: here,
                candidate_source: None,
                question: format!("PUSH: Does {line} introduce a new proposal awaiting uptake?"),
                legal_answers: yes_no,
            },
            Stage::Evidence => {
                let mut legal = vec![Answer::NoEvidence];
                let mut open = Vec::new();
                for p in self.evidence_candidates() {
                    let from = p.highest_satisfied();
                    for level in Level::LADDER {
                        if from.is_none_or(|f| level > f) {
                            legal.push(Answer::Evidence {
                                source: p.source.index,
                                level,
                            });
                        }
                    }
                    open.push(format!("{} = {}", p.source.index, source_line(&p.source)));
                }
                DecisionPrompt {
                    point: Point::Evidence,
                    turn: here,
                    candidate_source: None,
                    question: format!(
                        "EVIDENCE: Does {line} give positive evidence of understanding of an open proposal? \
                         Answer none or <source>:<level>. Open: {}",
                        open.join("; ")
                    ),
                    legal_answers: legal,
                }
            }
            Stage::Done => unreachable!("a live session always has a pending stage"),
        };
        Ok(prompt)
    }

    /// Applies `answer` to the current prompt. On error the session is unchanged.
    pub fn apply_answer(&mut self, answer: Answer) -> Result<(), RecipeError> {
        self.apply_tagged(answer, None)
    }

    /// Like [`Session::apply_answer`], attaching a G&P tag to the CR the answer confirms.
    pub fn apply_tagged(&mut self, answer: Answer, gp_tag: Option<GpTag>) -> Result<(), RecipeError> {
        let prompt = self.next_prompt()?;
        if !prompt.accepts(&answer) {
            return Err(RecipeError::IllegalAnswer {
                point: prompt.point,
                turn: self.cursor,
                answer,
            });
        }
        if gp_tag.is_some() && !self.confirms_cr(&answer) {
            return Err(RecipeError::TagWithoutCr);
        }
        self.log.entries.push(LogEntry {
            turn: self.cursor,
            point: prompt.point,
            source: prompt.candidate_source.as_ref().map(|s| s.index),
            answer,
            gp_tag,
        });
        self.advance(answer, gp_tag);
        Ok(())
    }

    /// Compare-and-set: applies only if the session is still at `expected_version`.
    pub fn apply_at(
        &mut self,
        expected_version: usize,
        answer: Answer,
        gp_tag: Option<GpTag>,
    ) -> Result<(), RecipeError> {
        if expected_version != self.version() {
            return Err(RecipeError::StaleVersion {
                expected: expected_version,
                actual: self.version(),
            });
        }
        self.apply_tagged(answer, gp_tag)
    }

    /// Applies a logged answer after checking it was given to the prompt the
    /// session is currently showing.
    pub fn apply_entry(&mut self, entry: &LogEntry) -> Result<(), RecipeError> {
        let prompt = self.next_prompt()?;
        let expected_source = prompt.candidate_source.as_ref().map(|s| s.index);
        if entry.turn != self.cursor || entry.point != prompt.point || entry.source != expected_source {
            return Err(RecipeError::PromptMismatch {
                expected: describe(self.cursor, prompt.point, expected_source),
                found: describe(entry.turn, entry.point, entry.source),
            });
        }
        self.apply_tagged(entry.answer, entry.gp_tag)
    }

    fn confirms_cr(&self, answer: &Answer) -> bool {
        match (&self.progress.stage, answer) {
            (Stage::Level(_, _), Answer::Yes) => true,
            (Stage::Level(src, level), Answer::No) => self.first_level_from(src, Some(*level)).is_none(),
            _ => false,
        }
    }

    fn advance(&mut self, answer: Answer, gp_tag: Option<GpTag>) {
        let stage = self.progress.stage.clone();
        match (stage, answer) {
            (Stage::D1(src), Answer::Yes) | (Stage::D2(src), Answer::Yes) => self.start_levels(src),
            (Stage::D1(src), Answer::No) | (Stage::D2(src), Answer::No) => {
                let at = self.stack.position(&src).expect("candidate is open");
                self.progress.stage = match at.checked_sub(1) {
                    Some(deeper) => Stage::D2(self.stack.entries[deeper].source.clone()),
                    None => Stage::Push,
                };
            }
            (Stage::Level(src, level), Answer::Yes) => self.confirm_cr(src, level, gp_tag),
            (Stage::Level(src, level), Answer::No) => match self.first_level_from(&src, Some(level)) {
                Some(next) => self.progress.stage = Stage::Level(src, next),
                None => self.confirm_cr(src, Level::Other, gp_tag),
            },
            (Stage::Push, Answer::Yes) => {
                let turn = self.current_turn();
                let proposal = Proposal::new(turn.turn_ref(), turn.speaker.clone());
                let source = proposal.source.clone();
                self.stack
                    .push_proposal(proposal)
                    .expect("a turn is pushed at most once");
                self.events.push(Event::Pushed { source });
                self.annotate(Label::ProposalIntro, None);
                self.enter_evidence_or_finish();
            }
            (Stage::Push, Answer::No) => self.enter_evidence_or_finish(),
            (Stage::Evidence, Answer::NoEvidence) => self.finish_turn(),
            (Stage::Evidence, Answer::Evidence { source, level }) => {
                let here = self.turn_ref(self.cursor);
                let source = self.turn_ref(source);
                let closed = self
                    .stack
                    .record_evidence(&source, level, &here)
                    .expect("evidence target is open");
                self.events.push(Event::Evidence {
                    source: source.clone(),
                    level,
                    by: here,
                    closed,
                });
                self.annotate(
                    Label::PositiveEvidence {
                        source: source.clone(),
                        level,
                    },
                    None,
                );
                self.progress.evidenced.push(source);
                self.enter_evidence_or_finish();
            }
            (stage, answer) => unreachable!("legal answer {answer} with no transition from {stage:?}"),
        }
    }
}

fn describe(turn: usize, point: Point, source: Option<usize>) -> String {
    match source {
        Some(s) => format!("turn {turn} {point} (source {s})"),
        None => format!("turn {turn} {point}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn frag() -> Corpus {
        fixtures::scare_fragment()
    }

    fn answer_all(s: &mut Session, answers: &[&str]) {
        for a in answers {
            let prompt = s.next_prompt().unwrap();
            s.apply_answer(a.parse().unwrap())
                .unwrap_or_else(|e| panic!("{a} at {:?}: {e}", prompt.point));
        }
    }

    #[test]
    fn start_and_unknown_dialogue() {
        let c = frag();
        let s = start_session(&c, "s2", "a").unwrap();
        assert_eq!(s.cursor(), 0);
        assert!(s.stack().is_empty());
        assert!(s.log().is_empty());
        assert!(!s.is_finished());
        assert_eq!(
            start_session(&c, "nope", "a"),
            Err(RecipeError::UnknownDialogue("nope".into()))
        );
    }

    #[test]
    fn paraphrase_format() {
        let c = frag();
        let follower = Turn {
            dialogue_id: "g".into(),
            index: 1,
            speaker: "F".into(),
            kind: crate::corpus::TurnKind::Utterance,
            text: "So you want me to go above the carpenter?".into(),
            action_note: None,
        };
        let p = gabsdil_prompt(&follower, Level::L4).unwrap();
        assert!(p.contains("Ok, I did it. So you want me to go above the carpenter?"));
        assert_eq!(
            p,
            "Ok, I did it. So you want me to go above the carpenter? — is this sequence odd?"
        );
        let any = c.get_turn("s2", 4).unwrap();
        assert!(gabsdil_prompt(any, Level::L2).unwrap().starts_with("Ok, I heard you."));
        assert_eq!(gabsdil_prompt(any, Level::Other), Err(RecipeError::NoParaphrase));
    }

    #[test]
    fn turn_two_prompts_d1_against_first_instruction() {
        let c = frag();
        let mut s = start_session(&c, "s2", "a").unwrap();
        answer_all(&mut s, &["yes"]); // (1) PUSH
        let p = s.next_prompt().unwrap();
        assert_eq!(p.point, Point::D1);
        assert_eq!(p.turn.index, 1);
        assert_eq!(p.candidate_source, Some(TurnRef::new("s2", 0)));
        answer_all(&mut s, &["yes", "no", "no"]);
        let p = s.next_prompt().unwrap();
        assert_eq!(p.point, Point::D5);
        assert!(p.question.contains("Ok, I saw what you are referring to. yeah they're not numbered"));
        answer_all(&mut s, &["yes"]);
        assert_eq!(
            s.annotation_set().cr_at(1),
            Some((&TurnRef::new("s2", 0), Level::L3))
        );
    }

    #[test]
    fn illegal_answer_leaves_state() {
        let c = frag();
        let mut s = start_session(&c, "s2", "a").unwrap();
        answer_all(&mut s, &["yes"]);
        let before = s.clone();
        let err = s.apply_answer(Answer::NoEvidence).unwrap_err();
        assert!(matches!(err, RecipeError::IllegalAnswer { point: Point::D1, .. }));
        assert_eq!(s, before);
        assert!("maybe".parse::<Answer>().is_err());
    }

    #[test]
    fn turn_twelve_offers_push_after_d1_no() {
        let log = fixtures::golden_log();
        let c = frag();
        // Find the first entry at turn index 11 and replay up to it.
        let at = log.entries.iter().position(|e| e.turn == 11).unwrap();
        let s = replay(&c, &log.truncated(at)).unwrap();
        assert_eq!(s.cursor(), 11);
        let open: Vec<usize> = s.stack().entries.iter().map(|p| p.source.index).collect();
        assert_eq!(open, vec![0]);
        let p = s.next_prompt().unwrap();
        assert_eq!(p.point, Point::D1);
        let mut s = s;
        s.apply_answer(Answer::No).unwrap();
        assert_eq!(s.next_prompt().unwrap().point, Point::Push);
    }

    #[test]
    fn level_prompts_skip_satisfied_levels() {
        let c = frag();
        let mut s = start_session(&c, "s2", "a").unwrap();
        // (1) push; (2) no CR, evidence L3 on (1)
        answer_all(&mut s, &["yes", "no", "no", "0:L3"]);
        assert_eq!(s.cursor(), 2);
        answer_all(&mut s, &["yes"]);
        let p = s.next_prompt().unwrap();
        assert_eq!(p.point, Point::D6);
        assert!(p.question.contains("Ok, I did it."));
        // declining the only remaining level yields an Other CR
        answer_all(&mut s, &["no"]);
        assert_eq!(s.annotation_set().cr_at(2).unwrap().1, Level::Other);
    }

    #[test]
    fn cr_unstacks_proposals_above_source() {
        let c = frag();
        let mut s = start_session(&c, "s2", "a").unwrap();
        // (1) push, (2) push, (3) CR of (1) via D2 at L1
        answer_all(&mut s, &["yes", "no", "yes", "none", "no", "yes", "yes"]);
        let crs: Vec<_> = s.events().iter().collect();
        assert!(matches!(
            crs.as_slice(),
            [
                Event::Pushed { .. },
                Event::Pushed { .. },
                Event::ImplicitClosure { source, .. },
                Event::Cr { level: Level::L1, .. }
            ] if source.index == 1
        ));
        assert_eq!(s.stack().entries.len(), 1);
    }

    #[test]
    fn gp_tag_only_on_cr() {
        let c = frag();
        let mut s = start_session(&c, "s2", "a").unwrap();
        assert_eq!(
            s.apply_tagged(Answer::Yes, Some(GpTag::Clausal)),
            Err(RecipeError::TagWithoutCr)
        );
        answer_all(&mut s, &["yes", "yes", "no", "no"]);
        s.apply_tagged(Answer::Yes, Some(GpTag::Clausal)).unwrap();
        let cr = s.annotation_set().crs().next().unwrap().clone();
        assert_eq!(cr.gp_tag, Some(GpTag::Clausal));
        let again = replay(&c, s.log()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn stale_version_rejected() {
        let c = frag();
        let mut s = start_session(&c, "s2", "a").unwrap();
        s.apply_at(0, Answer::Yes, None).unwrap();
        assert_eq!(
            s.apply_at(0, Answer::Yes, None),
            Err(RecipeError::StaleVersion {
                expected: 0,
                actual: 1
            })
        );
        assert_eq!(s.version(), 1);
    }

    #[test]
    fn replay_reports_ordinal() {
        let c = frag();
        let mut log = fixtures::golden_log();
        log.entries[3].answer = Answer::NoEvidence;
        match replay(&c, &log) {
            Err(RecipeError::Replay { ordinal, .. }) => assert_eq!(ordinal, 3),
            other => panic!("expected replay error, got {other:?}"),
        }
    }

    #[test]
    fn empty_log_is_initial_session() {
        let c = frag();
        let log = DecisionLog::new("s2", "a");
        assert_eq!(replay(&c, &log).unwrap(), start_session(&c, "s2", "a").unwrap());
        assert!(replay(&c, &log).unwrap().annotations().annotations.is_empty());
    }

    #[test]
    fn finished_session_rejects_prompts() {
        let c = frag();
        let s = replay(&c, &fixtures::golden_log()).unwrap();
        assert!(s.is_finished());
        assert_eq!(s.next_prompt(), Err(RecipeError::Finished));
        let mut s = s;
        assert_eq!(s.apply_answer(Answer::Yes), Err(RecipeError::Finished));
    }

    #[test]
    fn answer_text_forms() {
        assert_eq!("y".parse::<Answer>().unwrap(), Answer::Yes);
        assert_eq!("NO".parse::<Answer>().unwrap(), Answer::No);
        assert_eq!(
            "3:L4".parse::<Answer>().unwrap(),
            Answer::Evidence {
                source: 3,
                level: Level::L4
            }
        );
        let a = Answer::Evidence {
            source: 11,
            level: Level::L2,
        };
        assert_eq!(a.to_string().parse::<Answer>().unwrap(), a);
    }

    #[test]
    fn session_file_shape() {
        let mut log = DecisionLog::new("s2", "ann");
        log.entries.push(LogEntry {
            turn: 1,
            point: Point::D1,
            source: Some(0),
            answer: Answer::Yes,
            gp_tag: None,
        });
        log.entries.push(LogEntry {
            turn: 3,
            point: Point::Evidence,
            source: None,
            answer: Answer::Evidence {
                source: 2,
                level: Level::L4,
            },
            gp_tag: None,
        });
        let text = log.to_session_file();
        assert!(text.contains(r#""point": "D1""#));
        assert!(text.contains(r#""answer": "yes""#));
        assert!(text.contains(r#""level": "L4""#));
        let back = DecisionLog::from_session_file(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_session_file(), text);
    }
}
