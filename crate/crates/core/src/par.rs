//! Batch operations over many sessions or matrices.
//!
//! With the `parallel` feature (on by default) [`Exec::Parallel`] runs on the
//! rayon pool; without it every batch runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::agreement::{cohen_kappa, confusion_matrix, AgreementError, AgreementReport, ConfusionMatrix, LabelSpace};
use crate::corpus::Corpus;
use crate::recipe::{replay, AnnotationSet, DecisionLog, RecipeError, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map_slice<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub fn replay_many(exec: Exec, corpus: &Corpus, logs: &[DecisionLog]) -> Vec<Result<Session, RecipeError>> {
    map_slice(exec, logs, |log| replay(corpus, log))
}

pub fn kappa_many(exec: Exec, matrices: &[ConfusionMatrix]) -> Vec<Result<AgreementReport, AgreementError>> {
    map_slice(exec, matrices, cohen_kappa)
}

/// Kappa for every unordered pair of annotation sets over the same dialogue,
/// keyed by the pair's positions in `sets`.
pub fn pairwise_kappa(
    exec: Exec,
    sets: &[AnnotationSet],
    space: &LabelSpace,
) -> Vec<((usize, usize), Result<AgreementReport, AgreementError>)> {
    let pairs: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|i| (i + 1..sets.len()).map(move |j| (i, j)))
        .collect();
    map_slice(exec, &pairs, |&(i, j)| {
        let r = confusion_matrix(&sets[i], &sets[j], space).and_then(|m| cohen_kappa(&m));
        ((i, j), r)
    })
}
