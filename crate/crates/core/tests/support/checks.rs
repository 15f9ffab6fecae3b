//! Session invariants checked against the reference ladder.

#![allow(dead_code)]

use clarify_core::ladder::{Evidence, Level, Stack};
use clarify_core::recipe::{Event, Session};

use super::reference::{Op, RefState, Reference};

pub fn stack_matches(stack: &Stack, reference: &RefState) -> Result<(), String> {
    let open: Vec<(usize, u8)> = stack
        .entries
        .iter()
        .map(|p| {
            let satisfied = p.evidence.iter().filter(|e| **e == Evidence::Satisfied).count() as u8;
            (p.source.index, satisfied)
        })
        .collect();
    if open != reference.open {
        return Err(format!("open entries {open:?} != reference {:?}", reference.open));
    }
    for p in &stack.entries {
        let sat = p.evidence.iter().filter(|e| **e == Evidence::Satisfied).count();
        if p.evidence[..sat].iter().any(|e| *e != Evidence::Satisfied) {
            return Err(format!("evidence of {} not downward closed", p.source));
        }
        if p.closed {
            return Err(format!("closed proposal {} still stacked", p.source));
        }
    }
    let closed: Vec<_> = stack
        .closed_log
        .iter()
        .map(|c| (c.proposal.source.index, c.proposal.close_cause.unwrap(), c.closed_by.index))
        .collect();
    if closed != reference.closed {
        return Err(format!("closed log {closed:?} != reference {:?}", reference.closed));
    }
    for c in &stack.closed_log {
        if !c.proposal.closed || c.proposal.evidence != [Evidence::Satisfied; 4] {
            return Err(format!("{} closed with a gap", c.proposal.source));
        }
    }
    Ok(())
}

/// Replays the session's derived events through the reference model,
/// checking recipe blocking and implicit-closure soundness on the way.
pub fn check_events(session: &Session) -> Result<(), String> {
    let mut reference = Reference::new();
    let mut pending: Vec<usize> = Vec::new();
    for (i, ev) in session.events().iter().enumerate() {
        if !pending.is_empty() && !matches!(ev, Event::ImplicitClosure { .. } | Event::Cr { .. }) {
            return Err(format!("event {i}: implicit closures not followed by a CR"));
        }
        match ev {
            Event::Pushed { source } => {
                if !reference.apply(Op::Push(source.index)) {
                    return Err(format!("event {i}: illegal push"));
                }
            }
            Event::Evidence { source, level, by, closed } => {
                if *closed != (*level == Level::L4) {
                    return Err(format!("event {i}: closed flag wrong"));
                }
                if !reference.apply(Op::Evidence(source.index, *level, by.index)) {
                    return Err(format!("event {i}: illegal evidence"));
                }
            }
            Event::ImplicitClosure { source, .. } => pending.push(source.index),
            Event::Cr { source, level, by } => {
                if !reference.is_open(source.index) {
                    return Err(format!("event {i}: CR of non-open {source}"));
                }
                let expected = reference.above(source.index);
                if pending != expected {
                    return Err(format!(
                        "event {i}: implicit closures {pending:?}, expected {expected:?}"
                    ));
                }
                if reference.can_annotate(source.index, *level) != Some(true) {
                    return Err(format!("event {i}: CR {source} at {level} was blocked"));
                }
                reference.apply(Op::Unstack(source.index, by.index));
                pending.clear();
            }
        }
    }
    if !pending.is_empty() {
        return Err("dangling implicit closures".into());
    }
    stack_matches(session.stack(), &reference.state())
}
