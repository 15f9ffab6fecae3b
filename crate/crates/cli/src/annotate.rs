use std::io::{BufRead, Write};
use std::path::Path;

use clarify_core::corpus::Corpus;
use clarify_core::recipe::{self, Answer, DecisionLog, GpTag, Session};

use crate::{Failure, Outcome};

const HELP: &str = "answers: yes | no | none | <turn>:<level> (e.g. 4:L4), optionally followed by a tag \
                    (repetition, clausal, intended, correction) when confirming a CR; \
                    commands: undo, quit, help";

fn save(path: &Path, s: &Session) -> Outcome {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, s.log().to_session_file())
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn open(corpus: &Corpus, dialogue: &str, annotator: &str, path: &Path) -> Result<Session, Failure> {
    if !path.exists() {
        return recipe::start_session(corpus, dialogue, annotator).map_err(Failure::from);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    let log = DecisionLog::from_session_file(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    if log.dialogue_id != dialogue || log.annotator_id != annotator {
        return Err(Failure(format!(
            "{} belongs to dialogue {:?} by {:?}",
            path.display(),
            log.dialogue_id,
            log.annotator_id
        )));
    }
    recipe::replay(corpus, &log).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

/// Answer typed by the annotator: `<answer> [tag]`.
fn parse_input(line: &str) -> Result<(Answer, Option<GpTag>), String> {
    let mut words = line.split_whitespace();
    let answer = words.next().ok_or("empty answer")?.parse()?;
    let tag = words.next().map(str::parse).transpose()?;
    if words.next().is_some() {
        return Err("too many words".into());
    }
    Ok((answer, tag))
}

pub fn run(
    corpus: &Corpus,
    dialogue: &str,
    annotator: &str,
    path: &Path,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Outcome {
    let mut session = open(corpus, dialogue, annotator, path)?;
    save(path, &session)?;
    if session.version() > 0 {
        writeln!(out, "resumed after {} answers", session.version())?;
    }
    let mut shown_turn = None;
    let mut line = String::new();
    loop {
        let prompt = match session.next_prompt() {
            Ok(p) => p,
            Err(_) => {
                let ann = session.annotation_set();
                writeln!(out, "finished: {} CRs over {} turns", ann.cr_count(), session.dialogue().len())?;
                break;
            }
        };
        if shown_turn != Some(session.cursor()) {
            let turn = &session.dialogue().turns[session.cursor()];
            writeln!(out, "\n{}", turn.display_line())?;
            shown_turn = Some(session.cursor());
        }
        let legal: Vec<String> = prompt.legal_answers.iter().map(Answer::to_string).collect();
        write!(out, "{}\n[{}] > ", prompt.question, legal.join(" | "))?;
        out.flush()?;

        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        match line.trim() {
            "" => continue,
            "quit" | "q" => break,
            "help" | "?" => writeln!(out, "{HELP}")?,
            "undo" | "u" => {
                if session.version() == 0 {
                    writeln!(out, "nothing to undo")?;
                } else {
                    session = session.rewind(session.version() - 1);
                    shown_turn = None;
                    save(path, &session)?;
                }
            }
            typed => match parse_input(typed) {
                Ok((answer, tag)) => match session.apply_tagged(answer, tag) {
                    Ok(()) => save(path, &session)?,
                    Err(e) => writeln!(out, "rejected: {e}")?,
                },
                Err(e) => writeln!(out, "rejected: {e} ({HELP})")?,
            },
        }
    }
    writeln!(out, "saved {} answers to {}", session.version(), path.display())?;
    Ok(())
}
