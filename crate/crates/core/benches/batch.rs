use std::sync::Arc;

use clarify_core::agreement::{ConfusionMatrix, LabelSpace};
use clarify_core::corpus::{Corpus, Dialogue, InformationFlow, PressureProfile, Turn, TurnKind, WorldValidation};
use clarify_core::par::{kappa_many, replay_many, Exec};
use clarify_core::recipe::{DecisionLog, Session};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(turns: usize) -> Corpus {
    let dialogue = Dialogue {
        dialogue_id: "bench".into(),
        turns: (0..turns)
            .map(|i| Turn {
                dialogue_id: "bench".into(),
                index: i,
                speaker: if i % 2 == 0 { "DG".into() } else { "DF".into() },
                kind: TurnKind::Utterance,
                text: format!("utterance number {i}"),
                action_note: None,
            })
            .collect(),
        metadata: PressureProfile {
            task_oriented: true,
            shared_view: true,
            participants: 2,
            world_validation: WorldValidation::Simulated,
            information_flow: InformationFlow::Asymmetrical,
            irreversible_actions: true,
        },
    };
    Corpus {
        corpus_id: "bench".into(),
        dialogues: vec![dialogue],
    }
}

fn random_logs(corpus: &Corpus, n: usize, seed: u64) -> Vec<DecisionLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dialogue = Arc::new(corpus.dialogues[0].clone());
    (0..n)
        .map(|_| {
            let mut s = Session::start("bench", dialogue.clone(), "b").unwrap();
            while let Ok(p) = s.next_prompt() {
                let a = p.legal_answers[rng.gen_range(0..p.legal_answers.len())];
                s.apply_answer(a).unwrap();
            }
            s.log().clone()
        })
        .collect()
}

fn random_matrices(n: usize, seed: u64) -> Vec<ConfusionMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let counts = (0..6)
                .map(|_| (0..6).map(|_| rng.gen_range(0..200)).collect())
                .collect();
            ConfusionMatrix::from_counts(LabelSpace::default(), counts).unwrap()
        })
        .collect()
}

fn bench_replay(c: &mut Criterion) {
    let corpus = corpus(400);
    let logs = random_logs(&corpus, 64, 1);
    let mut group = c.benchmark_group("replay_many");
    group.sample_size(20);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), logs.len()), &logs, |b, logs| {
            b.iter(|| replay_many(exec, &corpus, logs))
        });
    }
    group.finish();
}

fn bench_kappa(c: &mut Criterion) {
    let matrices = random_matrices(20_000, 2);
    let mut group = c.benchmark_group("kappa_many");
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), matrices.len()), &matrices, |b, m| {
            b.iter(|| kappa_many(exec, m))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_replay, bench_kappa);
criterion_main!(benches);
