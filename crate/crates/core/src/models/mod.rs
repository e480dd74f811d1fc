//! Classifiers over feature-matrix rows.

pub mod forest;
pub mod ridge;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behaviour::Behaviour;
use crate::error::{Error, Result};
use crate::features::{schema_hash, FeatureMatrix};

pub use forest::{Criterion, ForestParams, ForestSpec, MaxFeatures};
pub use ridge::{RidgeCvSpec, RidgeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    #[default]
    None,
    /// `w_c = N / (K · N_c)`.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RidgeCv,
    RandomForest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::RidgeCv, ModelKind::RandomForest];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::RidgeCv => "ridge_cv",
            ModelKind::RandomForest => "random_forest",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ridge_cv" | "ridge" => Ok(ModelKind::RidgeCv),
            "random_forest" | "forest" | "rf" => Ok(ModelKind::RandomForest),
            _ => Err(Error::Validation(format!("unknown model `{s}`"))),
        }
    }
}

/// Hyperparameters for either model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    RidgeCv(RidgeCvSpec),
    RandomForest(ForestSpec),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::RidgeCv(_) => ModelKind::RidgeCv,
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
        }
    }

    /// One-line summary of the hyperparameters.
    pub fn describe(&self) -> String {
        let cw = |c: ClassWeight| match c {
            ClassWeight::None => "none",
            ClassWeight::Balanced => "balanced",
        };
        match self {
            ModelSpec::RidgeCv(r) => {
                let lo = r.alphas.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = r.alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                format!(
                    "alphas={} in [{lo:e}, {hi:e}] fit_intercept={} class_weight={}",
                    r.alphas.len(),
                    r.fit_intercept,
                    cw(r.class_weight)
                )
            }
            ModelSpec::RandomForest(f) => format!(
                "n_estimators={} max_depth={} min_samples_split={} max_features={:?} criterion={:?} class_weight={}",
                f.n_estimators,
                f.max_depth.map_or("none".to_string(), |d| d.to_string()),
                f.min_samples_split,
                f.max_features,
                f.criterion,
                cw(f.class_weight)
            )
            .to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    Ridge(RidgeParams),
    Forest(ForestParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub classes: Vec<Behaviour>,
    pub feature_names: Vec<String>,
    pub params: ModelParams,
}

/// Sorted distinct classes and each row's index into them.
fn encode(labels: &[Behaviour]) -> Result<(Vec<Behaviour>, Vec<usize>)> {
    let mut classes: Vec<Behaviour> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 classes to train, found {}",
            classes.len()
        )));
    }
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    Ok((classes, idx))
}

pub fn sample_weights(idx: &[usize], k: usize, cw: ClassWeight) -> Vec<f64> {
    match cw {
        ClassWeight::None => vec![1.0; idx.len()],
        ClassWeight::Balanced => {
            let mut counts = vec![0usize; k];
            for &i in idx {
                counts[i] += 1;
            }
            let n = idx.len() as f64;
            idx.iter()
                .map(|&i| n / (k as f64 * counts[i] as f64))
                .collect()
        }
    }
}

pub fn ridge_cv_fit(x: &FeatureMatrix, spec: &RidgeCvSpec) -> Result<TrainedModel> {
    let (classes, idx) = encode(&x.labels)?;
    let k = classes.len();
    let xm = DMatrix::from_row_slice(x.n_rows(), x.n_cols(), &x.data);
    let y = DMatrix::from_fn(x.n_rows(), k, |i, c| if idx[i] == c { 1.0 } else { -1.0 });
    let w = sample_weights(&idx, k, spec.class_weight);
    let params = ridge::fit(&xm, &y, &w, spec)?;
    Ok(TrainedModel {
        kind: ModelKind::RidgeCv,
        classes,
        feature_names: x.feature_names.clone(),
        params: ModelParams::Ridge(params),
    })
}

pub fn forest_fit(x: &FeatureMatrix, spec: &ForestSpec) -> Result<TrainedModel> {
    let (classes, idx) = encode(&x.labels)?;
    let k = classes.len();
    let w = sample_weights(&idx, k, spec.class_weight);
    let params = forest::fit(&x.data, x.n_cols(), &idx, k, &w, spec)?;
    Ok(TrainedModel {
        kind: ModelKind::RandomForest,
        classes,
        feature_names: x.feature_names.clone(),
        params: ModelParams::Forest(params),
    })
}

pub fn fit(x: &FeatureMatrix, spec: &ModelSpec) -> Result<TrainedModel> {
    if x.feature_names.is_empty() {
        return Err(Error::Validation("feature matrix has no columns".into()));
    }
    match spec {
        ModelSpec::RidgeCv(s) => ridge_cv_fit(x, s),
        ModelSpec::RandomForest(s) => forest_fit(x, s),
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Behaviour>> {
        x.check_schema(&self.feature_names)?;
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        Ok(rows
            .par_iter()
            .map(|&i| self.classes[argmax(&self.scores(x.row(i)))])
            .collect())
    }

    /// Class scores (ridge) or averaged leaf distributions (forest).
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        match &self.params {
            ModelParams::Ridge(p) => p.scores(row),
            ModelParams::Forest(p) => p.proba(row),
        }
    }

    /// Ridge models are written as JSON, forests in a binary tree encoding.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        match &self.params {
            ModelParams::Ridge(_) => {
                let doc = ModelFile {
                    format: MODEL_FORMAT.into(),
                    version: MODEL_VERSION,
                    schema: schema_hash(&self.feature_names),
                    model: self.clone(),
                };
                serde_json::to_writer(&mut w, &doc)?;
            }
            ModelParams::Forest(p) => write_forest(&mut w, self, p).map_err(|e| Error::io(path, e))?,
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic == FOREST_MAGIC {
            return read_forest(&mut r).map_err(|e| match e {
                Error::Io { source, .. } => Error::io(path, source),
                other => other,
            });
        }
        let mut rest = magic.to_vec();
        r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
        let doc: ModelFile = serde_json::from_slice(&rest)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::Schema(format!("unsupported model file {} v{}", doc.format, doc.version)));
        }
        if doc.schema != schema_hash(&doc.model.feature_names) {
            return Err(Error::Schema("model schema hash does not match its feature names".into()));
        }
        Ok(doc.model)
    }
}

const MODEL_FORMAT: &str = "ethogram-model";
const MODEL_VERSION: u32 = 1;
const FOREST_MAGIC: &[u8; 4] = b"EFOR";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    schema: String,
    model: TrainedModel,
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = r.read_u32::<LittleEndian>().map_err(|e| Error::io("<model>", e))? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| Error::io("<model>", e))?;
    String::from_utf8(buf).map_err(|_| Error::Schema("invalid UTF-8 in model file".into()))
}

fn write_forest<W: Write>(w: &mut W, m: &TrainedModel, p: &ForestParams) -> std::io::Result<()> {
    w.write_all(FOREST_MAGIC)?;
    w.write_u32::<LittleEndian>(MODEL_VERSION)?;
    write_str(w, &schema_hash(&m.feature_names))?;
    w.write_u32::<LittleEndian>(m.classes.len() as u32)?;
    for c in &m.classes {
        w.write_u8(c.index() as u8)?;
    }
    w.write_u32::<LittleEndian>(m.feature_names.len() as u32)?;
    for n in &m.feature_names {
        write_str(w, n)?;
    }
    w.write_u32::<LittleEndian>(p.trees.len() as u32)?;
    for t in &p.trees {
        w.write_u32::<LittleEndian>(t.nodes.len() as u32)?;
        for node in &t.nodes {
            match node {
                forest::Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    w.write_u8(0)?;
                    w.write_u32::<LittleEndian>(*feature as u32)?;
                    w.write_f64::<LittleEndian>(*threshold)?;
                    w.write_u32::<LittleEndian>(*left as u32)?;
                    w.write_u32::<LittleEndian>(*right as u32)?;
                }
                forest::Node::Leaf(d) => {
                    w.write_u8(1)?;
                    for v in d {
                        w.write_f64::<LittleEndian>(*v)?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn read_forest<R: Read>(r: &mut R) -> Result<TrainedModel> {
    let io = |e| Error::io("<model>", e);
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != MODEL_VERSION {
        return Err(Error::Schema(format!("unsupported forest file version {version}")));
    }
    let hash = read_str(r)?;
    let k = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let classes = (0..k)
        .map(|_| {
            let c = r.read_u8().map_err(io)? as usize;
            Behaviour::ALL
                .get(c)
                .copied()
                .ok_or_else(|| Error::Schema("bad class code".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let p = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let feature_names = (0..p).map(|_| read_str(r)).collect::<Result<Vec<_>>>()?;
    if schema_hash(&feature_names) != hash {
        return Err(Error::Schema("model schema hash does not match its feature names".into()));
    }
    let n_trees = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let node = match r.read_u8().map_err(io)? {
                0 => forest::Node::Split {
                    feature: r.read_u32::<LittleEndian>().map_err(io)? as usize,
                    threshold: r.read_f64::<LittleEndian>().map_err(io)?,
                    left: r.read_u32::<LittleEndian>().map_err(io)? as usize,
                    right: r.read_u32::<LittleEndian>().map_err(io)? as usize,
                },
                1 => {
                    let mut d = vec![0.0; k];
                    r.read_f64_into::<LittleEndian>(&mut d).map_err(io)?;
                    forest::Node::Leaf(d)
                }
                t => return Err(Error::Schema(format!("bad node tag {t}"))),
            };
            nodes.push(node);
        }
        trees.push(forest::Tree { nodes });
    }
    Ok(TrainedModel {
        kind: ModelKind::RandomForest,
        classes,
        feature_names,
        params: ModelParams::Forest(ForestParams { trees, n_classes: k }),
    })
}
