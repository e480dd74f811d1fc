//! Experiment configuration: a TOML document with one section per stage.
//!
//! Every value can be overridden with a dotted `key=value` pair (for example
//! `split.ratio=0.8` or `grids.random_forest.criterion=["gini"]`); the value
//! is parsed as a TOML literal and falls back to a bare string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{SplitSpec, TuneSpec};
use crate::features::{Catch24Spec, FeatureSet, HcSpec, RocketSpec};
use crate::models::{ClassWeight, Criterion, ForestSpec, MaxFeatures, ModelKind, ModelSpec, RidgeCvSpec};
use crate::synthgen::{default_archetypes, ArchetypeSpec, SynthOptions};
use crate::windowing::WindowingSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// `<id>.accel.csv` / `<id>.annotations.csv` pairs in `data.dir`.
    Files,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub dir: PathBuf,
    pub sample_rate_hz: f64,
    /// Shift applied to annotation times before alignment.
    pub offset_s: f64,
    pub n_animals: usize,
    pub bouts_per_behaviour: usize,
    pub gain_sigma: f64,
    pub max_orientation_jitter_deg: f64,
    pub archetypes: Vec<ArchetypeSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        let synth = SynthOptions::default();
        DataConfig {
            source: DataSource::Synthetic,
            dir: PathBuf::from("data"),
            sample_rate_hz: 25.0,
            offset_s: 0.0,
            n_animals: 12,
            bouts_per_behaviour: synth.bouts_per_behaviour,
            gain_sigma: synth.gain_sigma,
            max_orientation_jitter_deg: synth.max_orientation_jitter_deg,
            archetypes: default_archetypes(),
        }
    }
}

impl DataConfig {
    pub fn synth_options(&self) -> SynthOptions {
        SynthOptions {
            sample_rate_hz: self.sample_rate_hz,
            bouts_per_behaviour: self.bouts_per_behaviour,
            gain_sigma: self.gain_sigma,
            max_orientation_jitter_deg: self.max_orientation_jitter_deg,
            ..SynthOptions::default()
        }
    }
}

/// Ridge grid: the lattice axes are `fit_intercept` × `class_weight`; the
/// alpha list is searched internally by leave-one-out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeGrid {
    pub log10_alpha_min: f64,
    pub log10_alpha_max: f64,
    pub n_alphas: usize,
    pub fit_intercept: Vec<bool>,
    pub class_weight: Vec<ClassWeight>,
}

impl Default for RidgeGrid {
    fn default() -> Self {
        RidgeGrid {
            log10_alpha_min: -1.0,
            log10_alpha_max: 10.0,
            n_alphas: 100,
            fit_intercept: vec![true],
            class_weight: vec![ClassWeight::Balanced],
        }
    }
}

/// Forest grid; `max_depth = 0` means unlimited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
    pub criterion: Vec<Criterion>,
    pub class_weight: Vec<ClassWeight>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            n_estimators: vec![100],
            max_depth: vec![0],
            min_samples_split: vec![2],
            max_features: vec![MaxFeatures::Sqrt],
            criterion: vec![Criterion::Gini, Criterion::Entropy],
            class_weight: vec![ClassWeight::Balanced],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub ridge_cv: RidgeGrid,
    pub random_forest: ForestGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("report") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub feature_sets: Vec<FeatureSet>,
    pub models: Vec<ModelKind>,
    pub data: DataConfig,
    pub windowing: WindowingSpec,
    pub split: SplitSpec,
    pub tune: TuneSpec,
    pub hc: HcSpec,
    pub catch24: Catch24Spec,
    pub rocket: RocketSpec,
    pub grids: Grids,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            feature_sets: FeatureSet::ALL.to_vec(),
            models: ModelKind::ALL.to_vec(),
            data: DataConfig::default(),
            windowing: WindowingSpec::default(),
            split: SplitSpec::default(),
            tune: TuneSpec::default(),
            hc: HcSpec::default(),
            catch24: Catch24Spec::default(),
            rocket: RocketSpec::default(),
            grids: Grids::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Stream offsets so each stochastic stage draws from its own seed.
pub mod seeds {
    pub const SYNTH: u64 = 0x5EED_0001;
    pub const SPLIT: u64 = 0x5EED_0002;
    pub const TUNE: u64 = 0x5EED_0003;
    pub const ROCKET: u64 = 0x5EED_0004;
    pub const FOREST: u64 = 0x5EED_0005;

    pub fn derive(seed: u64, stage: u64) -> u64 {
        seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Set `key` (dotted path) to `value` inside a TOML table.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_override_value(value.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read `path` (or start from defaults when `None`) and apply overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.windowing.validate()?;
        self.windowing.length(self.data.sample_rate_hz)?;
        if self.feature_sets.is_empty() || self.models.is_empty() {
            return Err(Error::Config("at least one feature set and one model are required".into()));
        }
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return Err(Error::Config(format!("split ratio {} outside (0, 1)", self.split.ratio)));
        }
        for m in &self.models {
            if self.grid(*m).is_empty() {
                return Err(Error::Config(format!("grid for {m} is empty")));
            }
        }
        for spec in self.models.iter().flat_map(|m| self.grid(*m)) {
            match spec {
                ModelSpec::RidgeCv(r) => r.validate()?,
                ModelSpec::RandomForest(f) => f.validate()?,
            }
        }
        Ok(())
    }

    pub fn ridge_alphas(&self) -> Vec<f64> {
        let g = &self.grids.ridge_cv;
        crate::models::ridge::logspace(g.log10_alpha_min, g.log10_alpha_max, g.n_alphas)
    }

    /// Cartesian lattice of hyperparameters for `kind`, last axis fastest.
    pub fn grid(&self, kind: ModelKind) -> Vec<ModelSpec> {
        match kind {
            ModelKind::RidgeCv => {
                let g = &self.grids.ridge_cv;
                let alphas = self.ridge_alphas();
                let mut out = Vec::new();
                for &fit_intercept in &g.fit_intercept {
                    for &class_weight in &g.class_weight {
                        out.push(ModelSpec::RidgeCv(RidgeCvSpec {
                            alphas: alphas.clone(),
                            fit_intercept,
                            class_weight,
                        }));
                    }
                }
                out
            }
            ModelKind::RandomForest => {
                let g = &self.grids.random_forest;
                let seed = seeds::derive(self.seed, seeds::FOREST);
                let mut out = Vec::new();
                for &n_estimators in &g.n_estimators {
                    for &depth in &g.max_depth {
                        for &min_samples_split in &g.min_samples_split {
                            for &max_features in &g.max_features {
                                for &criterion in &g.criterion {
                                    for &class_weight in &g.class_weight {
                                        out.push(ModelSpec::RandomForest(ForestSpec {
                                            n_estimators,
                                            max_depth: (depth > 0).then_some(depth),
                                            min_samples_split,
                                            max_features,
                                            criterion,
                                            class_weight,
                                            seed,
                                            bootstrap: true,
                                        }));
                                    }
                                }
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.ridge_alphas().len(), 100);
        assert_eq!(c.grid(ModelKind::RandomForest).len(), 2);
    }

    #[test]
    fn overrides_and_round_trip() {
        let text = "seed = 3\n[split]\nratio = 0.5\n";
        let c = ExperimentConfig::from_toml_str(
            text,
            &[
                "seed=9".into(),
                "grids.random_forest.max_depth=[0, 5, 10]".into(),
                "output.dir=out/run1".into(),
                "feature_sets=[\"hc\"]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.split.ratio, 0.5);
        assert_eq!(c.output.dir, PathBuf::from("out/run1"));
        assert_eq!(c.feature_sets, vec![FeatureSet::Hc]);
        assert_eq!(c.grid(ModelKind::RandomForest).len(), 6);
        let again = ExperimentConfig::from_toml_str(&c.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml_str("[split]\nratoi = 0.5\n", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &["split.ratio=1.5".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &["grids.ridge_cv.class_weight=[]".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &["novalue".into()]).is_err());
    }
}
