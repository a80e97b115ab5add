use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Label;

/// Splits `0..n` into `k` folds. Each class is shuffled and dealt round-robin,
/// the second class continuing where the first stopped, so both per-class
/// counts and fold sizes differ by at most one across folds.
pub fn stratified_kfold(y: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = y.len();
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::TooFewSamples(format!("{n} samples cannot fill {k} folds")));
    }
    let mut high: Vec<usize> = (0..n).filter(|&i| y[i].is_high()).collect();
    let mut low: Vec<usize> = (0..n).filter(|&i| !y[i].is_high()).collect();
    if high.is_empty() || low.is_empty() {
        return Err(Error::TooFewSamples("stratified folds need both classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    high.shuffle(&mut rng);
    low.shuffle(&mut rng);

    let mut folds = vec![Vec::new(); k];
    for (slot, idx) in high.iter().chain(&low).enumerate() {
        folds[slot % k].push(*idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Folds over whole groups: every group lands in exactly one fold. Groups are
/// stratified by their majority label (ties count as high).
pub fn grouped_kfold(groups: &[String], y: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if groups.len() != y.len() {
        return Err(Error::LengthMismatch { left: groups.len(), right: y.len() });
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    let names: Vec<&str> = members.keys().copied().collect();
    let group_labels: Vec<Label> = names
        .iter()
        .map(|g| {
            let idx = &members[g];
            let high = idx.iter().filter(|&&i| y[i].is_high()).count();
            Label::from_bool(2 * high >= idx.len())
        })
        .collect();
    let group_folds = stratified_kfold(&group_labels, k, seed)?;
    Ok(group_folds
        .into_iter()
        .map(|gf| {
            let mut f: Vec<usize> = gf.iter().flat_map(|&g| members[names[g]].iter().copied()).collect();
            f.sort_unstable();
            f
        })
        .collect())
}

/// Unit over which folds are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    #[default]
    Epoch,
    GroupByAd,
    GroupBySubject,
}

/// Indices of every fold except `held_out`, ascending.
pub fn training_indices(folds: &[Vec<usize>], held_out: usize) -> Vec<usize> {
    let mut train: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(f, _)| *f != held_out)
        .flat_map(|(_, idx)| idx.iter().copied())
        .collect();
    train.sort_unstable();
    train
}
