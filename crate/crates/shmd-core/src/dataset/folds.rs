//! Stratified four-fold split with role rotation.
//!
//! Traces are grouped into (label, family) cells, each cell is shuffled with
//! a seed-derived stream and dealt round-robin into four folds, so class and
//! family proportions in every fold track the corpus within a trace or two
//! per cell. The four roles (two victim-training folds, attacker training,
//! testing) map onto the folds through a rotation index; over rotations
//! 0..=3 each fold serves each role exactly once.

use super::{Label, ProgramTrace};
use crate::error::{Error, Result};
use crate::seeds::rng_from;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

pub const FOLD_COUNT: usize = 4;

/// The four disjoint fold roles used by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplits {
    pub victim_training_1: Vec<ProgramTrace>,
    pub victim_training_2: Vec<ProgramTrace>,
    pub attacker_training: Vec<ProgramTrace>,
    pub testing: Vec<ProgramTrace>,
    pub seed: u64,
    pub rotation: usize,
}

impl CorpusSplits {
    /// Both victim-training folds, the detector's training material.
    pub fn victim_training(&self) -> impl Iterator<Item = &ProgramTrace> {
        self.victim_training_1.iter().chain(self.victim_training_2.iter())
    }

    pub fn victim_training_owned(&self) -> Vec<ProgramTrace> {
        self.victim_training().cloned().collect()
    }
}

/// Rotation 0 split; see [`split_folds_rotated`].
pub fn split_folds(corpus: &[ProgramTrace], seed: u64) -> Result<CorpusSplits> {
    split_folds_rotated(corpus, seed, 0)
}

/// Deal the corpus into four stratified folds and assign roles by `rotation`.
///
/// Fold membership depends only on `(corpus, seed)`; the rotation merely
/// permutes which fold plays which role, so rotations of one split partition
/// identical fold content.
pub fn split_folds_rotated(
    corpus: &[ProgramTrace],
    seed: u64,
    rotation: usize,
) -> Result<CorpusSplits> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty corpus".into()));
    }
    if rotation >= FOLD_COUNT {
        return Err(Error::Config(format!(
            "rotation {rotation} out of range 0..{FOLD_COUNT}"
        )));
    }

    // BTreeMap fixes the cell iteration order regardless of corpus order.
    let mut cells: BTreeMap<(Label, &str), Vec<usize>> = BTreeMap::new();
    for (i, t) in corpus.iter().enumerate() {
        cells.entry((t.label, t.family.as_str())).or_default().push(i);
    }

    let mut folds: [Vec<usize>; FOLD_COUNT] = Default::default();
    for (cell_idx, ((label, family), mut members)) in cells.into_iter().enumerate() {
        if members.len() < FOLD_COUNT {
            return Err(Error::FoldUnderfull {
                cell: format!("({label}, {family})"),
                have: members.len(),
                need: FOLD_COUNT,
            });
        }
        let mut rng = rng_from(seed, "fold-cell", cell_idx as u64);
        members.shuffle(&mut rng);
        // Stagger the dealing start so leftover traces do not pile onto fold 0.
        for (j, idx) in members.into_iter().enumerate() {
            folds[(j + cell_idx) % FOLD_COUNT].push(idx);
        }
    }

    let collect = |fold: &[usize]| fold.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
    let role = |r: usize| collect(&folds[(rotation + r) % FOLD_COUNT]);

    Ok(CorpusSplits {
        victim_training_1: role(0),
        victim_training_2: role(1),
        attacker_training: role(2),
        testing: role(3),
        seed,
        rotation,
    })
}
