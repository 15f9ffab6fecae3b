//! Random corpora and random legal annotation sessions.

#![allow(dead_code)]

use std::sync::Arc;

use clarify_core::corpus::{
    Corpus, Dialogue, InformationFlow, PressureProfile, Turn, TurnKind, WorldValidation,
};
use clarify_core::recipe::{Answer, GpTag, Session};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn profile() -> PressureProfile {
    PressureProfile {
        task_oriented: true,
        shared_view: true,
        participants: 2,
        world_validation: WorldValidation::Simulated,
        information_flow: InformationFlow::Asymmetrical,
        irreversible_actions: false,
    }
}

pub fn dialogue(id: &str, len: usize) -> Dialogue {
    let turns = (0..len)
        .map(|i| Turn {
            dialogue_id: id.to_string(),
            index: i,
            speaker: if i % 2 == 0 { "DG".into() } else { "DF".into() },
            kind: TurnKind::Utterance,
            text: format!("turn {i}"),
            action_note: None,
        })
        .collect();
    Dialogue {
        dialogue_id: id.to_string(),
        turns,
        metadata: profile(),
    }
}

pub fn corpus(lengths: &[usize]) -> Corpus {
    Corpus {
        corpus_id: "synthetic".into(),
        dialogues: lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| dialogue(&format!("d{i}"), n))
            .collect(),
    }
}

/// Drives `session` with uniformly chosen legal answers for at most
/// `max_answers` steps, occasionally tagging CR-confirming answers.
pub fn drive<R: Rng>(session: &mut Session, rng: &mut R, max_answers: usize) {
    for _ in 0..max_answers {
        let Ok(prompt) = session.next_prompt() else {
            break;
        };
        let answer = *prompt.legal_answers.choose(rng).unwrap();
        let tag = if rng.gen_bool(0.2) {
            Some(*[GpTag::Repetition, GpTag::Clausal, GpTag::Intended, GpTag::Correction].choose(rng).unwrap())
        } else {
            None
        };
        if session.apply_tagged(answer, tag).is_err() {
            session.apply_answer(answer).expect("legal answer applies");
        }
    }
}

pub fn random_session<R: Rng>(rng: &mut R, max_len: usize) -> Session {
    let len = rng.gen_range(1..=max_len);
    let d = Arc::new(dialogue("r", len));
    let mut s = Session::start("synthetic", d, "rand").unwrap();
    let budget = rng.gen_range(0..=len * 8);
    drive(&mut s, rng, budget);
    s
}

/// Every answer shape the engine could conceivably receive for a dialogue of
/// `len` turns.
pub fn answer_universe(len: usize) -> Vec<Answer> {
    let mut v = vec![Answer::Yes, Answer::No, Answer::NoEvidence];
    for source in 0..len.max(1) {
        for level in clarify_core::Level::ALL {
            v.push(Answer::Evidence { source, level });
        }
    }
    v
}
