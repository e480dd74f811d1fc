//! Random forest of weighted CART trees.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClassWeight;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn count(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => ((p as f64).sqrt() as usize).max(1),
            MaxFeatures::Log2 => ((p as f64).log2() as usize).max(1),
        }
        .min(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSpec {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub criterion: Criterion,
    pub class_weight: ClassWeight,
    pub seed: u64,
    /// Train each tree on a bootstrap resample.
    pub bootstrap: bool,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            criterion: Criterion::Gini,
            class_weight: ClassWeight::None,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Normalised class distribution.
    Leaf(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(d) => return d,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

pub fn gini(counts: &[f64]) -> f64 {
    let t: f64 = counts.iter().sum();
    if t <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / t) * (c / t)).sum::<f64>()
}

pub fn entropy(counts: &[f64]) -> f64 {
    let t: f64 = counts.iter().sum();
    if t <= 0.0 {
        return 0.0;
    }
    -counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|c| (c / t) * (c / t).log2())
        .sum::<f64>()
}

fn impurity(criterion: Criterion, counts: &[f64]) -> f64 {
    match criterion {
        Criterion::Gini => gini(counts),
        Criterion::Entropy => entropy(counts),
    }
}

/// Dense column-major view of the training data.
pub struct Dataset<'a> {
    pub columns: Vec<Vec<f64>>,
    pub classes: &'a [usize],
    pub n_classes: usize,
}

impl<'a> Dataset<'a> {
    /// `rows` is row-major `n × p`.
    pub fn new(rows: &[f64], p: usize, classes: &'a [usize], n_classes: usize) -> Self {
        let n = classes.len();
        let columns = (0..p).map(|j| (0..n).map(|i| rows[i * p + j]).collect()).collect();
        Dataset {
            columns,
            classes,
            n_classes,
        }
    }

    fn p(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted impurity decrease `W·I − W_L·I_L − W_R·I_R`.
    pub gain: f64,
}

/// Best split of `samples` over `features` (scanned in the given order);
/// ties keep the earlier feature, then the lower threshold.
pub fn best_split(
    data: &Dataset,
    samples: &[usize],
    weights: &[f64],
    features: &[usize],
    criterion: Criterion,
) -> Option<BestSplit> {
    let k = data.n_classes;
    let mut total = vec![0.0; k];
    for &i in samples {
        total[data.classes[i]] += weights[i];
    }
    let w_total: f64 = total.iter().sum();
    let parent = impurity(criterion, &total) * w_total;
    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = samples.to_vec();
    let mut left = vec![0.0; k];
    let mut right = vec![0.0; k];
    for &f in features {
        let col = &data.columns[f];
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        left.iter_mut().for_each(|v| *v = 0.0);
        let mut w_left = 0.0;
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            left[data.classes[i]] += weights[i];
            w_left += weights[i];
            let (a, b) = (col[i], col[order[pos + 1]]);
            if a == b {
                continue;
            }
            for c in 0..k {
                right[c] = total[c] - left[c];
            }
            let w_right = w_total - w_left;
            let gain = parent - impurity(criterion, &left) * w_left - impurity(criterion, &right) * w_right;
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            if best.is_none_or(|bs| gain > bs.gain) {
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

struct Builder<'a, 'b> {
    data: &'b Dataset<'a>,
    weights: Vec<f64>,
    spec: &'b ForestSpec,
    m: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_, '_> {
    fn leaf(&self, samples: &[usize]) -> Node {
        let mut d = vec![0.0; self.data.n_classes];
        for &i in samples {
            d[self.data.classes[i]] += self.weights[i];
        }
        let t: f64 = d.iter().sum();
        if t > 0.0 {
            d.iter_mut().for_each(|v| *v /= t);
        }
        Node::Leaf(d)
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let first = self.data.classes[samples[0]];
        let pure = samples.iter().all(|&i| self.data.classes[i] == first);
        let depth_hit = self.spec.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_hit || samples.len() < self.spec.min_samples_split {
            self.nodes[id] = self.leaf(&samples);
            return id;
        }
        // examine `m` random features; when all of them are constant here,
        // keep drawing one at a time
        let mut perm: Vec<usize> = (0..self.data.p()).collect();
        perm.shuffle(&mut self.rng);
        let mut batch = perm[..self.m].to_vec();
        batch.sort_unstable();
        let crit = self.spec.criterion;
        let mut split = best_split(self.data, &samples, &self.weights, &batch, crit);
        let mut next = self.m;
        while split.is_none() && next < perm.len() {
            split = best_split(self.data, &samples, &self.weights, &[perm[next]], crit);
            next += 1;
        }
        let Some(s) = split else {
            self.nodes[id] = self.leaf(&samples);
            return id;
        };
        let col = &self.data.columns[s.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| col[i] <= s.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            left,
            right,
        };
        id
    }
}

/// Train one tree. `sample_weights` already include class weighting.
pub fn fit_tree(data: &Dataset, sample_weights: &[f64], spec: &ForestSpec, tree_index: usize) -> Tree {
    let n = data.classes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(tree_index as u64);
    let mut weights = sample_weights.to_vec();
    if spec.bootstrap {
        let mut counts = vec![0u32; n];
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        for (w, c) in weights.iter_mut().zip(&counts) {
            *w *= *c as f64;
        }
    }
    let samples: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    let mut b = Builder {
        data,
        weights,
        spec,
        m: spec.max_features.count(data.p()),
        rng,
        nodes: Vec::new(),
    };
    if samples.is_empty() {
        return Tree {
            nodes: vec![Node::Leaf(vec![1.0 / data.n_classes as f64; data.n_classes])],
        };
    }
    b.build(samples, 0);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
}

impl ForestParams {
    /// Mean leaf distribution over trees.
    pub fn proba(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.leaf_distribution(x)) {
                *a += b;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }
}

pub fn fit(rows: &[f64], p: usize, classes: &[usize], n_classes: usize, weights: &[f64], spec: &ForestSpec) -> Result<ForestParams> {
    spec.validate()?;
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("feature matrix contains non-finite values".into()));
    }
    let data = Dataset::new(rows, p, classes, n_classes);
    let trees = (0..spec.n_estimators)
        .into_par_iter()
        .map(|t| fit_tree(&data, weights, spec, t))
        .collect();
    Ok(ForestParams { trees, n_classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impurity_examples() {
        assert_eq!(gini(&[5.0, 5.0]), 0.5);
        assert_eq!(gini(&[4.0, 0.0]), 0.0);
        assert_eq!(entropy(&[5.0, 5.0]), 1.0);
        assert_eq!(entropy(&[0.0, 3.0]), 0.0);
    }

    #[test]
    fn stump_on_separable_feature() {
        let rows = vec![0.0, 9.0, 1.0, 3.0, 2.0, 9.0, 3.0, 3.0];
        let classes = vec![0, 0, 1, 1];
        let data = Dataset::new(&rows, 2, &classes, 2);
        let s = best_split(&data, &[0, 1, 2, 3], &[1.0; 4], &[0, 1], Criterion::Gini).unwrap();
        assert_eq!((s.feature, s.threshold), (0, 1.5));
        assert!((s.gain - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_lower_feature_then_threshold() {
        // both features split identically; feature 0 wins
        let rows = vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let classes = vec![0, 1, 0, 1];
        let data = Dataset::new(&rows, 2, &classes, 2);
        let s = best_split(&data, &[0, 1, 2, 3], &[1.0; 4], &[0, 1], Criterion::Gini).unwrap();
        assert_eq!(s.feature, 0);
        // thresholds 0.5 and 2.5 give equal gain; the lower is kept
        assert_eq!(s.threshold, 0.5);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let n = 60;
        let rows: Vec<f64> = (0..n * 4).map(|i| ((i * 37) % 23) as f64).collect();
        let classes: Vec<usize> = (0..n).map(|i| (rows[i * 4] > 11.0) as usize).collect();
        let spec = ForestSpec { n_estimators: 10, seed: 3, ..Default::default() };
        let a = fit(&rows, 4, &classes, 2, &vec![1.0; n], &spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| fit(&rows, 4, &classes, 2, &vec![1.0; n], &spec).unwrap());
        assert_eq!(a, b);
    }
}
