//! Animal-grouped train/test partitions with matched class proportions.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Windows per class (indexed by `Behaviour::index`) for each animal.
pub type ClassProfile = BTreeMap<String, [usize; 6]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedSplit {
    pub train_animals: Vec<String>,
    pub test_animals: Vec<String>,
    /// Mean over classes of `|p_train(c) − p_test(c)|`.
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub ratio: f64,
    pub candidates: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratio: 0.7,
            candidates: 10_000,
        }
    }
}

/// Number of training animals for `n` animals at `ratio`.
pub fn train_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n - 1)
}

/// Objective for the partition where `in_train[i]` marks animal `i`.
pub fn split_objective(profiles: &[[usize; 6]], in_train: &[bool]) -> f64 {
    let mut train = [0usize; 6];
    let mut test = [0usize; 6];
    let mut present = [false; 6];
    for (p, &t) in profiles.iter().zip(in_train) {
        for c in 0..6 {
            if t {
                train[c] += p[c];
            } else {
                test[c] += p[c];
            }
            present[c] |= p[c] > 0;
        }
    }
    let (nt, ns) = (train.iter().sum::<usize>(), test.iter().sum::<usize>());
    let prop = |count: usize, total: usize| if total == 0 { 0.0 } else { count as f64 / total as f64 };
    let classes: Vec<usize> = (0..6).filter(|&c| present[c]).collect();
    if classes.is_empty() {
        return 0.0;
    }
    classes
        .iter()
        .map(|&c| (prop(train[c], nt) - prop(test[c], ns)).abs())
        .sum::<f64>()
        / classes.len() as f64
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
        if r > u64::MAX as u128 {
            return r;
        }
    }
    r
}

/// Advance a sorted `k`-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Choose the partition minimising the class-proportion objective, by
/// exhaustive lexicographic enumeration when there are at most `candidates`
/// partitions and by seeded random sampling otherwise. Ties keep the first.
pub fn grouped_stratified_split(profile: &ClassProfile, spec: &SplitSpec, seed: u64) -> Result<GroupedSplit> {
    let animals: Vec<&String> = profile.keys().collect();
    let n = animals.len();
    if n < 2 {
        return Err(Error::Validation(format!("need at least 2 animals to split, found {n}")));
    }
    if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {} outside (0, 1)", spec.ratio)));
    }
    let k = train_size(n, spec.ratio);
    let profiles: Vec<[usize; 6]> = profile.values().copied().collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |combo: &[usize]| {
        let mut mask = vec![false; n];
        combo.iter().for_each(|&i| mask[i] = true);
        let obj = split_objective(&profiles, &mask);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, combo.to_vec()));
        }
    };
    if binomial(n, k) <= spec.candidates.max(1) as u128 {
        let mut c: Vec<usize> = (0..k).collect();
        loop {
            consider(&c);
            if !next_combination(&mut c, n) {
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..spec.candidates.max(1) {
            let mut c = sample(&mut rng, n, k).into_vec();
            c.sort_unstable();
            consider(&c);
        }
    }
    let (objective, combo) = best.ok_or_else(|| Error::Internal("no split candidate evaluated".into()))?;
    let mut mask = vec![false; n];
    combo.iter().for_each(|&i| mask[i] = true);
    let test_totals = (0..n).filter(|&i| !mask[i]).fold([0usize; 6], |mut acc, i| {
        (0..6).for_each(|c| acc[c] += profiles[i][c]);
        acc
    });
    for c in 0..6 {
        if test_totals[c] == 0 && profiles.iter().any(|p| p[c] > 0) {
            log::warn!("class {} has no windows in the chosen test animals", crate::behaviour::Behaviour::ALL[c]);
        }
    }
    Ok(GroupedSplit {
        train_animals: (0..n).filter(|&i| mask[i]).map(|i| animals[i].clone()).collect(),
        test_animals: (0..n).filter(|&i| !mask[i]).map(|i| animals[i].clone()).collect(),
        objective,
    })
}
