//! Brute-force reference for the proposal stack. Keeps the full history of
//! accepted operations and recomputes state from scratch on every query,
//! storing evidence as a single "highest rung reached" number.

#![allow(dead_code)]

use clarify_core::ladder::{CloseCause, Level};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Push(usize),
    Evidence(usize, Level, usize),
    Unstack(usize, usize),
    Query(usize, Level),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefState {
    /// (source, highest satisfied rung 0..=4), bottom to top.
    pub open: Vec<(usize, u8)>,
    /// (source, cause, closing turn), in closing order.
    pub closed: Vec<(usize, CloseCause, usize)>,
}

fn rung(level: Level) -> Option<u8> {
    match level {
        Level::L1 => Some(1),
        Level::L2 => Some(2),
        Level::L3 => Some(3),
        Level::L4 => Some(4),
        Level::Other => None,
    }
}

#[derive(Debug, Default, Clone)]
pub struct Reference {
    history: Vec<Op>,
}

impl Reference {
    pub fn new() -> Self {
        Reference::default()
    }

    pub fn history(&self) -> &[Op] {
        &self.history
    }

    pub fn state(&self) -> RefState {
        let mut open: Vec<(usize, u8)> = Vec::new();
        let mut closed = Vec::new();
        for op in &self.history {
            match *op {
                Op::Push(s) => open.push((s, 0)),
                Op::Evidence(s, level, by) => {
                    let r = rung(level).unwrap();
                    let i = open.iter().position(|e| e.0 == s).unwrap();
                    open[i].1 = open[i].1.max(r);
                    if open[i].1 == 4 {
                        open.remove(i);
                        closed.push((s, CloseCause::ExplicitEvidence, by));
                    }
                }
                Op::Unstack(s, by) => {
                    let i = open.iter().position(|e| e.0 == s).unwrap();
                    let above: Vec<(usize, u8)> = open.split_off(i + 1);
                    for (src, _) in above.into_iter().rev() {
                        closed.push((src, CloseCause::ImplicitUptake, by));
                    }
                }
                Op::Query(..) => {}
            }
        }
        RefState { open, closed }
    }

    pub fn is_open(&self, s: usize) -> bool {
        self.state().open.iter().any(|e| e.0 == s)
    }

    pub fn was_closed(&self, s: usize) -> bool {
        self.state().closed.iter().any(|e| e.0 == s)
    }

    /// `Some(answer)` for a legal query, `None` when the source is unknown.
    pub fn can_annotate(&self, s: usize, level: Level) -> Option<bool> {
        let st = self.state();
        if let Some(&(_, top)) = st.open.iter().find(|e| e.0 == s) {
            return Some(match rung(level) {
                None => true,
                Some(r) => r > top,
            });
        }
        if st.closed.iter().any(|e| e.0 == s) {
            return Some(false);
        }
        None
    }

    /// Entries above `s`, top first.
    pub fn above(&self, s: usize) -> Vec<usize> {
        let st = self.state();
        let i = st.open.iter().position(|e| e.0 == s).unwrap();
        st.open[i + 1..].iter().rev().map(|e| e.0).collect()
    }

    /// Records `op` if it is legal; returns whether it was.
    pub fn apply(&mut self, op: Op) -> bool {
        let legal = match op {
            Op::Push(s) => !self.is_open(s),
            Op::Evidence(s, level, _) => rung(level).is_some() && self.is_open(s),
            Op::Unstack(s, _) => self.is_open(s),
            Op::Query(s, level) => self.can_annotate(s, level).is_some(),
        };
        if legal {
            self.history.push(op);
        }
        legal
    }
}
