mod support;

use std::sync::Arc;

use clarify_core::recipe::{replay, Answer, DecisionLog, Event, Label, Point, Session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::{checks, gen};

#[test]
fn random_sessions_replay_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let s = gen::random_session(&mut rng, 20);
        let again = Session::replay_on("synthetic", Arc::new(s.dialogue().clone()), s.log()).unwrap();
        assert_eq!(again, s);
        let file = s.log().to_session_file();
        let parsed = DecisionLog::from_session_file(&file).unwrap();
        assert_eq!(&parsed, s.log());
        assert_eq!(parsed.to_session_file(), file);
    }
}

#[test]
fn random_sessions_respect_blocking_and_unstacking() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut implicit, mut crs) = (0, 0);
    for _ in 0..300 {
        let s = gen::random_session(&mut rng, 25);
        checks::check_events(&s).unwrap_or_else(|e| panic!("{e}\nlog: {:?}", s.log()));
        for e in s.events() {
            match e {
                Event::ImplicitClosure { .. } => implicit += 1,
                Event::Cr { .. } => crs += 1,
                _ => {}
            }
        }
    }
    assert!(implicit > 0 && crs > 0, "generator never exercised unstacking");
}

#[test]
fn illegal_answers_leave_session_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut s = gen::random_session(&mut rng, 12);
        let universe = gen::answer_universe(s.dialogue().len());
        let Ok(prompt) = s.next_prompt() else { continue };
        for a in &universe {
            let mut probe = s.clone();
            let res = probe.apply_answer(*a);
            if prompt.accepts(a) {
                assert!(res.is_ok(), "{a} rejected at {:?}", prompt.point);
                assert_eq!(probe.version(), s.version() + 1);
            } else {
                assert!(res.is_err(), "{a} accepted at {:?}", prompt.point);
                assert_eq!(probe, s);
            }
        }
        let a = *prompt.legal_answers.first().unwrap();
        s.apply_answer(a).unwrap();
    }
}

#[test]
fn prompts_are_well_formed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut s = gen::random_session(&mut rng, 10);
        while let Ok(p) = s.next_prompt() {
            assert!(!p.question.is_empty());
            assert!(!p.legal_answers.is_empty());
            if matches!(p.point, Point::D1 | Point::D2 | Point::D3 | Point::D4 | Point::D5 | Point::D6) {
                assert_eq!(p.legal_answers, vec![Answer::Yes, Answer::No]);
                assert!(p.candidate_source.is_some());
            }
            if matches!(p.point, Point::D3 | Point::D4 | Point::D5 | Point::D6) {
                assert!(p.question.contains("is this sequence odd?"));
            }
            let pick = rng.gen_range(0..p.legal_answers.len());
            s.apply_answer(p.legal_answers[pick]).unwrap();
        }
        assert!(s.is_finished());
    }
}

#[test]
fn cr_may_target_a_distant_source() {
    let d = Arc::new(gen::dialogue("far", 40));
    let mut s = Session::start("synthetic", d, "a").unwrap();
    s.apply_answer(Answer::Yes).unwrap(); // turn 0 opens a proposal
    for _ in 1..39 {
        s.apply_answer(Answer::No).unwrap(); // D1
        s.apply_answer(Answer::No).unwrap(); // PUSH
        s.apply_answer(Answer::NoEvidence).unwrap();
    }
    assert_eq!(s.cursor(), 39);
    s.apply_answer(Answer::Yes).unwrap();
    s.apply_answer(Answer::Yes).unwrap();
    let (src, level) = s.annotation_set().cr_at(39).map(|(s, l)| (s.index, l)).unwrap();
    assert_eq!((src, level), (0, clarify_core::Level::L1));
}

#[test]
fn repeated_crs_on_one_proposal() {
    let c = clarify_core::fixtures::scare_fragment();
    let s = replay(&c, &clarify_core::fixtures::golden_log()).unwrap();
    let on_four = s
        .annotation_set()
        .crs()
        .filter(|a| matches!(&a.label, Label::Cr { source, .. } if source.index == 3))
        .count();
    assert_eq!(on_four, 3);
}

#[test]
fn rewind_is_log_prefix() {
    let c = clarify_core::fixtures::scare_fragment();
    let s = replay(&c, &clarify_core::fixtures::golden_log()).unwrap();
    for n in [0, 1, 10, 40, s.version()] {
        let back = s.rewind(n);
        assert_eq!(back.version(), n);
        assert_eq!(back, replay(&c, &s.log().truncated(n)).unwrap());
    }
}
