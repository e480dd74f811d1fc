//! The full pipeline: load, window, split, tune, refit and score every
//! feature-set × model combination.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, MetricsReport};
use super::split::{grouped_stratified_split, GroupedSplit};
use super::tune::{tune, TuneResult};
use crate::behaviour::Behaviour;
use crate::config::{seeds, DataSource, ExperimentConfig};
use crate::error::{Error, Result};
use crate::features::{extract_catch24, extract_hc, rocket, FeatureMatrix, FeatureSet};
use crate::ingest::{align, animal_id_from_path, parse_accel_csv, parse_annotations, AnnotationTrack, TriAxialSeries};
use crate::models::{fit, ModelKind, ModelParams, ModelSpec};
use crate::signal::derive_channels;
use crate::synthgen::generate_with;
use crate::windowing::{class_counts, segment, LabeledWindow, WindowingSpec};

/// One recording with its annotations.
pub type Recording = (TriAxialSeries, AnnotationTrack);

/// Read every `<id>.accel.csv` in `dir` with its `<id>.annotations.csv`,
/// sorted by animal id.
pub fn load_recordings_dir(dir: &Path, sample_rate_hz: f64) -> Result<Vec<Recording>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut accel: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".accel.csv"))
        .collect();
    accel.sort();
    if accel.is_empty() {
        return Err(Error::Validation(format!("no *.accel.csv files in {}", dir.display())));
    }
    accel
        .par_iter()
        .map(|p| {
            let id = animal_id_from_path(p);
            let ann = dir.join(format!("{id}.annotations.csv"));
            let series = parse_accel_csv(p, sample_rate_hz)?;
            let parsed = parse_annotations(&ann)?;
            if parsed.remapped_to_other > 0 {
                log::warn!("{id}: {} annotation rows mapped to `other`", parsed.remapped_to_other);
            }
            Ok((series, parsed.track))
        })
        .collect()
}

pub fn load_recordings(cfg: &ExperimentConfig) -> Result<Vec<Recording>> {
    match cfg.data.source {
        DataSource::Files => load_recordings_dir(&cfg.data.dir, cfg.data.sample_rate_hz),
        DataSource::Synthetic => Ok(generate_with(
            &cfg.data.archetypes,
            cfg.data.n_animals,
            seeds::derive(cfg.seed, seeds::SYNTH),
            &cfg.data.synth_options(),
        )?
        .into_iter()
        .map(|a| (a.series, a.track))
        .collect()),
    }
}

/// Align, derive channels and segment each recording; windows come back
/// grouped by animal in input order.
pub fn windows_from_recordings(recs: &[Recording], offset_s: f64, spec: &WindowingSpec) -> Result<Vec<LabeledWindow>> {
    let per_animal: Vec<Vec<LabeledWindow>> = recs
        .par_iter()
        .map(|(series, track)| {
            let labeled = align(series, track, offset_s)?;
            segment(&derive_channels(&labeled)?, spec)
        })
        .collect::<Result<_>>()?;
    Ok(per_animal.into_iter().flatten().collect())
}

/// Animals whose windows a MiniROCKET fit was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocketFitRecord {
    pub context: String,
    pub animals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationResult {
    pub feature_set: FeatureSet,
    pub model: ModelKind,
    pub n_features: usize,
    pub tuning: TuneResult,
    pub selected: ModelSpec,
    /// Alpha chosen by leave-one-out on the full training set (ridge only).
    pub selected_alpha: Option<f64>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub classes: Vec<Behaviour>,
    pub n_animals: usize,
    pub n_windows: usize,
    pub n_train_windows: usize,
    pub n_test_windows: usize,
    pub split: GroupedSplit,
    pub results: Vec<CombinationResult>,
}

impl ExperimentReport {
    pub fn result(&self, fs: FeatureSet, model: ModelKind) -> Option<&CombinationResult> {
        self.results.iter().find(|r| r.feature_set == fs && r.model == model)
    }
}

/// Wall-clock seconds per stage. Extraction and tuning are shared by all
/// models of a feature set and repeated on each of its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub feature_set: FeatureSet,
    pub model: ModelKind,
    pub extraction_s: f64,
    pub tuning_s: f64,
    pub training_s: f64,
    pub testing_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub timing: Vec<TimingRow>,
    pub rocket_fits: Vec<RocketFitRecord>,
}

fn contains(sorted: &[String], id: &str) -> bool {
    sorted.binary_search_by(|a| a.as_str().cmp(id)).is_ok()
}

fn windows_of<'a>(windows: &'a [LabeledWindow], animals: &[String]) -> Vec<&'a LabeledWindow> {
    windows.iter().filter(|w| contains(animals, &w.animal_id)).collect()
}

struct Extractor<'a> {
    cfg: &'a ExperimentConfig,
    set: FeatureSet,
    fits: std::sync::Mutex<Vec<RocketFitRecord>>,
}

impl Extractor<'_> {
    fn fixed(&self, windows: &[LabeledWindow]) -> Result<FeatureMatrix> {
        match self.set {
            FeatureSet::Hc => extract_hc(windows, self.cfg.data.sample_rate_hz, &self.cfg.hc),
            FeatureSet::Catch24 => extract_catch24(windows, &self.cfg.catch24),
            FeatureSet::Rocket => Err(Error::Internal("MiniROCKET features need a fitted transform".into())),
        }
    }

    /// Fit MiniROCKET on `train` only and transform both sets.
    fn rocket(&self, context: &str, train: &[&LabeledWindow], test: &[&LabeledWindow]) -> Result<(FeatureMatrix, FeatureMatrix)> {
        let mut animals: Vec<String> = train.iter().map(|w| w.animal_id.clone()).collect();
        animals.sort();
        animals.dedup();
        self.fits.lock().unwrap().push(RocketFitRecord {
            context: context.into(),
            animals,
        });
        let model = rocket::rocket_fit(train, &self.cfg.rocket, seeds::derive(self.cfg.seed, seeds::ROCKET))?;
        Ok((model.transform_matrix(train)?, model.transform_matrix(test)?))
    }
}

/// Run every configured feature set × model combination.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let recs = load_recordings(cfg).map_err(|e| e.in_stage("load"))?;
    let windows = windows_from_recordings(&recs, cfg.data.offset_s, &cfg.windowing).map_err(|e| e.in_stage("segment"))?;
    run_on_windows(cfg, &windows)
}

pub fn run_on_windows(cfg: &ExperimentConfig, windows: &[LabeledWindow]) -> Result<ExperimentOutcome> {
    let profile = class_counts(windows);
    let split = grouped_stratified_split(&profile, &cfg.split, seeds::derive(cfg.seed, seeds::SPLIT))
        .map_err(|e| e.in_stage("split"))?;
    let train: Vec<LabeledWindow> = windows_of(windows, &split.train_animals).into_iter().cloned().collect();
    let test: Vec<LabeledWindow> = windows_of(windows, &split.test_animals).into_iter().cloned().collect();
    let mut classes: Vec<Behaviour> = windows.iter().map(|w| w.label).collect();
    classes.sort();
    classes.dedup();

    let mut results = Vec::new();
    let mut timing = Vec::new();
    let mut rocket_fits = Vec::new();
    for &set in &cfg.feature_sets {
        let stage = |what: &str| format!("{set}: {what}");
        let ex = Extractor {
            cfg,
            set,
            fits: Default::default(),
        };
        let grid: Vec<ModelSpec> = cfg.models.iter().flat_map(|&m| cfg.grid(m)).collect();

        let t = Instant::now();
        let (train_x, test_x) = match set {
            FeatureSet::Rocket => {
                let tr: Vec<&LabeledWindow> = train.iter().collect();
                let te: Vec<&LabeledWindow> = test.iter().collect();
                ex.rocket("final", &tr, &te)
            }
            _ => Ok((ex.fixed(&train)?, ex.fixed(&test)?)),
        }
        .map_err(|e| e.in_stage(stage("extract")))?;
        let extraction_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let tuned = tune(
            &split.train_animals,
            &grid,
            &cfg.tune,
            seeds::derive(cfg.seed, seeds::TUNE),
            |fit_animals, val_animals| match set {
                FeatureSet::Rocket => {
                    let ctx = format!("tuning fit on {} animals", fit_animals.len());
                    ex.rocket(&ctx, &windows_of(&train, fit_animals), &windows_of(&train, val_animals))
                }
                _ => Ok((
                    train_x.filter_animals(|a| contains(fit_animals, a)),
                    train_x.filter_animals(|a| contains(val_animals, a)),
                )),
            },
        )
        .map_err(|e| e.in_stage(stage("tune")))?;
        let tuning_s = t.elapsed().as_secs_f64();

        for &kind in &cfg.models {
            let tuning = tuned
                .restrict(kind)
                .ok_or_else(|| Error::Internal(format!("no grid points for {kind}")))?;
            let selected = tuning.best().clone();
            let t = Instant::now();
            let model = fit(&train_x, &selected).map_err(|e| e.in_stage(stage("train")))?;
            let training_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let predicted = model.predict(&test_x).map_err(|e| e.in_stage(stage("test")))?;
            let metrics = compute_metrics(&test_x.labels, &predicted, &classes).map_err(|e| e.in_stage(stage("test")))?;
            let testing_s = t.elapsed().as_secs_f64();
            let selected_alpha = match &model.params {
                ModelParams::Ridge(p) => Some(p.alpha),
                ModelParams::Forest(_) => None,
            };
            results.push(CombinationResult {
                feature_set: set,
                model: kind,
                n_features: train_x.n_cols(),
                tuning,
                selected,
                selected_alpha,
                metrics,
            });
            timing.push(TimingRow {
                feature_set: set,
                model: kind,
                extraction_s,
                tuning_s,
                training_s,
                testing_s,
            });
            log::info!("{set} + {kind}: BA {:.4}", results.last().unwrap().metrics.balanced_accuracy);
        }
        rocket_fits.extend(ex.fits.into_inner().unwrap());
    }
    Ok(ExperimentOutcome {
        report: ExperimentReport {
            seed: cfg.seed,
            classes,
            n_animals: profile.len(),
            n_windows: windows.len(),
            n_train_windows: train.len(),
            n_test_windows: test.len(),
            split,
            results,
        },
        timing,
        rocket_fits,
    })
}
