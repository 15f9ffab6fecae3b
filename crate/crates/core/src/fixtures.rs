//! Bundled data: the 17-turn SCARE fragment, its golden decision log, and
//! published per-corpus summaries.

use crate::corpus::{parse_corpus_str, Corpus};
use crate::recipe::DecisionLog;
use crate::stats::{parse_summaries, CorpusSummary};

pub const SCARE_FRAGMENT_JSONL: &str = include_str!("../fixtures/scare_fragment.jsonl");
pub const GOLDEN_SESSION_JSON: &str = include_str!("../fixtures/golden_session.json");
pub const TABLE4_JSONL: &str = include_str!("../fixtures/table4.jsonl");
pub const SCARE_FRAGMENT_SUMMARY_JSON: &str = include_str!("../fixtures/scare_fragment_summary.json");

pub const SCARE_FRAGMENT_ID: &str = "scare_frag";

pub fn scare_fragment() -> Corpus {
    parse_corpus_str(SCARE_FRAGMENT_ID, SCARE_FRAGMENT_JSONL).expect("bundled fragment parses")
}

pub fn golden_log() -> DecisionLog {
    DecisionLog::from_session_file(GOLDEN_SESSION_JSON).expect("bundled golden log parses")
}

/// BNC fragment, Communicator, Bielefeld and SCARE, in that order.
pub fn table4() -> Vec<CorpusSummary> {
    parse_summaries(TABLE4_JSONL).expect("bundled summaries parse")
}

pub fn scare_fragment_summary() -> CorpusSummary {
    CorpusSummary::from_record(SCARE_FRAGMENT_SUMMARY_JSON.trim()).expect("bundled summary parses")
}
