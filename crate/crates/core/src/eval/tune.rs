//! Grid search over repeated animal-grouped inner splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::balanced_accuracy;
use super::split::train_size;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::{fit, ModelKind, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSpec {
    pub iterations: usize,
    /// Fraction of the training animals used for fitting in each inner split.
    pub inner_ratio: f64,
}

impl Default for TuneSpec {
    fn default() -> Self {
        TuneSpec {
            iterations: 10,
            inner_ratio: 14.0 / 21.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSplit {
    pub fit_animals: Vec<String>,
    pub validation_animals: Vec<String>,
}

/// `iterations` independent seeded animal partitions; iteration `i` uses
/// stream `i` of a ChaCha8 generator seeded with `seed`.
pub fn inner_splits(animals: &[String], spec: &TuneSpec, seed: u64) -> Result<Vec<InnerSplit>> {
    let mut sorted = animals.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::Validation(format!(
            "tuning needs at least 2 training animals, found {}",
            sorted.len()
        )));
    }
    if spec.iterations == 0 {
        return Err(Error::Config("tuning iterations must be at least 1".into()));
    }
    if !(spec.inner_ratio > 0.0 && spec.inner_ratio < 1.0) {
        return Err(Error::Config(format!("inner ratio {} outside (0, 1)", spec.inner_ratio)));
    }
    let k = train_size(sorted.len(), spec.inner_ratio);
    Ok((0..spec.iterations)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut order = sorted.clone();
            order.shuffle(&mut rng);
            let (mut f, mut v) = (order[..k].to_vec(), order[k..].to_vec());
            f.sort();
            v.sort();
            InnerSplit {
                fit_animals: f,
                validation_animals: v,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub spec: ModelSpec,
    pub fold_ba: Vec<f64>,
    pub mean_ba: f64,
    pub std_ba: f64,
    /// Fit or predict failures, one entry per failed fold.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_index: usize,
    pub splits: Vec<InnerSplit>,
    pub grid: Vec<GridPointResult>,
}

impl TuneResult {
    pub fn best(&self) -> &ModelSpec {
        &self.grid[self.best_index].spec
    }

    /// The grid points of one model family, with the best among them.
    pub fn restrict(&self, kind: ModelKind) -> Option<TuneResult> {
        let grid: Vec<GridPointResult> = self.grid.iter().filter(|g| g.spec.kind() == kind).cloned().collect();
        let mut best_index = 0;
        for (i, g) in grid.iter().enumerate() {
            if g.mean_ba > grid[best_index].mean_ba {
                best_index = i;
            }
        }
        (!grid.is_empty()).then(|| TuneResult {
            best_index,
            splits: self.splits.clone(),
            grid,
        })
    }

    /// Aligned mean ± std table, one row per grid point.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for (i, g) in self.grid.iter().enumerate() {
            let mark = if i == self.best_index { "*" } else { " " };
            s.push_str(&format!("{mark} {:>3}  {:.4} ± {:.4}  {}\n", i, g.mean_ba, g.std_ba, g.spec.describe()));
        }
        s
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn score_fold(spec: &ModelSpec, train: &FeatureMatrix, val: &FeatureMatrix) -> Result<f64> {
    let model = fit(train, spec)?;
    let pred = model.predict(val)?;
    balanced_accuracy(&val.labels, &pred)
}

/// Evaluate every grid point on the same inner splits and pick the highest
/// mean balanced accuracy (ties keep the earlier point).
///
/// `features(fit_animals, validation_animals)` builds the two matrices for a
/// split, so feature transforms that are themselves fitted can be refitted
/// per split.
pub fn tune<F>(animals: &[String], grid: &[ModelSpec], spec: &TuneSpec, seed: u64, features: F) -> Result<TuneResult>
where
    F: Fn(&[String], &[String]) -> Result<(FeatureMatrix, FeatureMatrix)>,
{
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    let splits = inner_splits(animals, spec, seed)?;
    let mut scores: Vec<Vec<(f64, Option<String>)>> = vec![Vec::new(); grid.len()];
    for (i, s) in splits.iter().enumerate() {
        let (train, val) = features(&s.fit_animals, &s.validation_animals)
            .map_err(|e| e.in_stage(format!("tuning split {i}")))?;
        let fold: Vec<(f64, Option<String>)> = grid
            .par_iter()
            .map(|g| match score_fold(g, &train, &val) {
                Ok(ba) => (ba, None),
                Err(e) => {
                    log::warn!("grid point failed on split {i}: {e}");
                    (0.0, Some(format!("split {i}: {e}")))
                }
            })
            .collect();
        for (acc, r) in scores.iter_mut().zip(fold) {
            acc.push(r);
        }
    }
    let results: Vec<GridPointResult> = grid
        .iter()
        .zip(scores)
        .map(|(g, sc)| {
            let fold_ba: Vec<f64> = sc.iter().map(|s| s.0).collect();
            let (mean_ba, std_ba) = mean_std(&fold_ba);
            GridPointResult {
                spec: g.clone(),
                fold_ba,
                mean_ba,
                std_ba,
                errors: sc.into_iter().filter_map(|s| s.1).collect(),
            }
        })
        .collect();
    let mut best_index = 0;
    for (i, r) in results.iter().enumerate() {
        if r.mean_ba > results[best_index].mean_ba {
            best_index = i;
        }
    }
    Ok(TuneResult {
        best_index,
        splits,
        grid: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviour::Behaviour;
    use crate::models::{ForestSpec, RidgeCvSpec};

    fn animals(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("calf{i:02}")).collect()
    }

    #[test]
    fn splits_are_14_7_and_reproducible() {
        let a = animals(21);
        let s = inner_splits(&a, &TuneSpec::default(), 4).unwrap();
        assert_eq!(s.len(), 10);
        for sp in &s {
            assert_eq!((sp.fit_animals.len(), sp.validation_animals.len()), (14, 7));
            assert!(sp.fit_animals.iter().all(|x| !sp.validation_animals.contains(x)));
        }
        assert_eq!(s, inner_splits(&a, &TuneSpec::default(), 4).unwrap());
        assert_ne!(s[0], s[1]);
    }

    /// Two animals per class pattern; feature 0 separates lying from walking.
    fn matrix(ids: &[String], noise_feature: bool) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(vec!["f0".into(), "f1".into()]);
        for (a, id) in ids.iter().enumerate() {
            for w in 0..8 {
                let lying = w % 2 == 0;
                let f0 = if lying { -1.0 } else { 1.0 } + 0.01 * ((a * 8 + w) % 5) as f64;
                let f1 = if noise_feature { ((a * 13 + w * 7) % 11) as f64 } else { 0.0 };
                let label = if lying { Behaviour::Lying } else { Behaviour::Walking };
                m.push_row(&[f0, f1], label, id, w).unwrap();
            }
        }
        m
    }

    #[test]
    fn single_point_and_failures() {
        let a = animals(6);
        let ridge = ModelSpec::RidgeCv(RidgeCvSpec::default());
        let bad = ModelSpec::RandomForest(ForestSpec { n_estimators: 0, ..Default::default() });
        let spec = TuneSpec { iterations: 3, ..Default::default() };
        let r = tune(&a, &[bad, ridge.clone()], &spec, 1, |f, v| Ok((matrix(f, true), matrix(v, true)))).unwrap();
        assert_eq!(r.best_index, 1);
        assert_eq!(r.grid[0].fold_ba, vec![0.0; 3]);
        assert_eq!(r.grid[0].errors.len(), 3);
        assert!(r.grid[1].fold_ba.iter().all(|&b| b == 1.0));
        let single = tune(&a, &[ridge.clone()], &spec, 1, |f, v| Ok((matrix(f, true), matrix(v, true)))).unwrap();
        assert_eq!(single.best(), &ridge);
    }
}
