//! Annotation engine for clarification requests grounded in modalities.
//!
//! - [`corpus`]: transcripts and their line-delimited record format
//! - [`ladder`]: the four-level evidence ladder and the proposal stack
//! - [`recipe`]: decision-graph sessions, decision logs and replay
//! - [`agreement`]: confusion matrices, Cohen's kappa, adjudication
//! - [`stats`]: CR rates, level distributions, comparison tables
//! - [`par`]: batch helpers, parallel with the `parallel` feature

pub mod agreement;
pub mod corpus;
pub mod fixtures;
pub mod ladder;
pub mod par;
pub mod recipe;
pub mod stats;

pub use corpus::{Corpus, Dialogue, PressureProfile, Turn, TurnKind, TurnRef};
pub use ladder::{Level, Proposal, Stack};
pub use recipe::{replay, start_session, Answer, AnnotationSet, DecisionLog, DecisionPrompt, Label, Point, Session};
