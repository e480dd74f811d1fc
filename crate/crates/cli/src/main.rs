//! `ethogram`: command-line driver for every pipeline stage.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ethogram::config::{seeds, ExperimentConfig};
use ethogram::eval::experiment::run_experiment;
use ethogram::eval::metrics::compute_metrics;
use ethogram::eval::report::{self, to_json};
use ethogram::eval::{grouped_stratified_split, tune, GroupedSplit, TuneResult};
use ethogram::features::rocket::{rocket_fit, RocketModel};
use ethogram::features::{extract_catch24, extract_hc, FeatureMatrix, FeatureSet};
use ethogram::ingest::{align, parse_accel_csv, parse_annotations, save_accel_csv, save_annotations};
use ethogram::models::{fit, ModelKind, ModelSpec, TrainedModel};
use ethogram::signal::{derive_channels, ChannelSet};
use ethogram::synthgen::generate_with;
use ethogram::windowing::{class_counts, segment, WindowSet, WindowingSpec};
use ethogram::{Behaviour, Error, Result};

#[derive(Parser)]
#[command(name = "ethogram", version, about = "Accelerometer-to-behaviour classification pipeline")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log level: error, warn, info, debug.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config file (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config value, e.g. `--override split.ratio=0.7`.
    #[arg(long = "override", short = 'O', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every stochastic step (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic `<id>.accel.csv` and `<id>.annotations.csv` files.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Number of animals (overrides `data.n_animals`).
        #[arg(long)]
        animals: Option<usize>,
    },
    /// Align one recording with its annotations and compute derived channels.
    Derive {
        #[arg(long)]
        accel: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = 25.0)]
        sample_rate: f64,
        /// Seconds added to annotation times.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset: f64,
        /// Channel set (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV dump of the channels.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Cut channel sets into labelled windows.
    Segment {
        /// Channel set files from `derive`.
        #[arg(long, required = true, num_args = 1..)]
        channels: Vec<PathBuf>,
        #[arg(long, default_value_t = 3.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        #[arg(long, default_value_t = 1.0)]
        purity: f64,
        /// Window set (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV manifest of the windows.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Compute a feature matrix; `.bin` outputs use the binary format.
    Extract {
        #[arg(long)]
        windows: PathBuf,
        /// hc, catch24 or rocket.
        #[arg(long = "set")]
        set: FeatureSet,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Fitted MiniROCKET transform to apply; fitted on the input when absent.
        #[arg(long)]
        rocket_model: Option<PathBuf>,
        /// Where to save a MiniROCKET transform fitted here.
        #[arg(long)]
        save_rocket: Option<PathBuf>,
    },
    /// Choose animal-grouped train and test sets.
    Split {
        /// Window set or feature matrix.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search a model family on the training animals of a feature matrix.
    Tune {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: ModelKind,
        /// Restrict to the training animals of this split.
        #[arg(long)]
        split: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on a feature matrix.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Model family with default hyperparameters (ignored with --tuned or --spec).
        #[arg(long)]
        model: Option<ModelKind>,
        /// Use the best grid point from a `tune` result.
        #[arg(long)]
        tuned: Option<PathBuf>,
        /// Hyperparameters as a JSON model spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Restrict to the training animals of this split.
        #[arg(long)]
        split: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Restrict to the test animals of this split.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Metrics (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Row-normalised confusion matrix (CSV).
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Run the full pipeline from a config file.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rebuild text tables and confusion CSVs from a report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        timing: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn check_exists(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(Error::Validation(format!("{} does not exist", p.display())));
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rows of `m` whose animal is in `animals`.
fn restrict(m: &FeatureMatrix, animals: &[String]) -> FeatureMatrix {
    m.filter_animals(|a| animals.iter().any(|x| x == a))
}

/// Prints the config and returns `true` when `--print-config` was given.
fn maybe_print(cfg: &ExperimentConfig, args: &ConfigArgs) -> Result<bool> {
    if args.print_config {
        print!("{}", cfg.to_toml()?);
    }
    Ok(args.print_config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { cfg, out, animals } => {
            let c = cfg.load()?;
            if maybe_print(&c, &cfg)? {
                return Ok(());
            }
            let n = animals.unwrap_or(c.data.n_animals);
            let data = generate_with(&c.data.archetypes, n, seeds::derive(c.seed, seeds::SYNTH), &c.data.synth_options())?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for a in &data {
                let id = &a.series.animal_id;
                save_accel_csv(&a.series, &out.join(format!("{id}.accel.csv")))?;
                save_annotations(&a.track, &out.join(format!("{id}.annotations.csv")))?;
            }
            eprintln!("wrote {} animals to {} (seed {})", data.len(), out.display(), c.seed);
        }
        Command::Derive {
            accel,
            annotations,
            sample_rate,
            offset,
            out,
            csv,
        } => {
            check_exists(&[&accel, &annotations])?;
            let series = parse_accel_csv(&accel, sample_rate).map_err(|e| e.in_stage("read accelerometer"))?;
            let parsed = parse_annotations(&annotations).map_err(|e| e.in_stage("read annotations"))?;
            if parsed.remapped_to_other > 0 {
                log::warn!("{} annotation rows mapped to `other`", parsed.remapped_to_other);
            }
            let mut track = parsed.track;
            track.animal_id = series.animal_id.clone();
            let cs = derive_channels(&align(&series, &track, offset)?)?;
            cs.save(&out)?;
            if let Some(p) = csv {
                let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
                cs.write_csv(f)?;
            }
        }
        Command::Segment {
            channels,
            duration,
            overlap,
            purity,
            out,
            manifest,
        } => {
            let paths: Vec<&Path> = channels.iter().map(PathBuf::as_path).collect();
            check_exists(&paths)?;
            let spec = WindowingSpec {
                duration_s: duration,
                overlap_fraction: overlap,
                purity_threshold: purity,
            };
            let mut sets: Vec<ChannelSet> = channels.iter().map(|p| ChannelSet::load(p)).collect::<Result<_>>()?;
            sets.sort_by(|a, b| a.animal_id.cmp(&b.animal_id));
            let fs = sets[0].sample_rate_hz;
            if sets.iter().any(|s| s.sample_rate_hz != fs) {
                return Err(Error::Validation("channel sets have different sample rates".into()));
            }
            let mut windows = Vec::new();
            for s in &sets {
                windows.extend(segment(s, &spec)?);
            }
            if let Some(p) = manifest {
                let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
                ethogram::windowing::write_manifest(&windows, f)?;
            }
            log::info!("{} windows", windows.len());
            WindowSet {
                sample_rate_hz: fs,
                windows,
            }
            .save(&out)?;
        }
        Command::Extract {
            windows,
            set,
            out,
            cfg,
            rocket_model,
            save_rocket,
        } => {
            let c = cfg.load()?;
            if maybe_print(&c, &cfg)? {
                return Ok(());
            }
            check_exists(&[&windows])?;
            let ws = WindowSet::load(&windows)?;
            let m = match set {
                FeatureSet::Hc => extract_hc(&ws.windows, ws.sample_rate_hz, &c.hc)?,
                FeatureSet::Catch24 => extract_catch24(&ws.windows, &c.catch24)?,
                FeatureSet::Rocket => {
                    let model = match rocket_model {
                        Some(p) => RocketModel::load(&p)?,
                        None => {
                            let refs: Vec<_> = ws.windows.iter().collect();
                            rocket_fit(&refs, &c.rocket, seeds::derive(c.seed, seeds::ROCKET))?
                        }
                    };
                    if let Some(p) = save_rocket {
                        model.save(&p)?;
                    }
                    model.transform_matrix(&ws.windows)?
                }
            };
            log::info!("{} × {} feature matrix", m.n_rows(), m.n_cols());
            m.save(&out)?;
        }
        Command::Split { input, cfg, out } => {
            let c = cfg.load()?;
            if maybe_print(&c, &cfg)? {
                return Ok(());
            }
            check_exists(&[&input])?;
            let is_windows = input.extension().is_some_and(|e| e == "json");
            let profile = match is_windows {
                true => class_counts(&WindowSet::load(&input)?.windows),
                false => {
                    let m = FeatureMatrix::load(&input)?;
                    let mut p = ethogram::eval::ClassProfile::new();
                    for (a, l) in m.animal_ids.iter().zip(&m.labels) {
                        p.entry(a.clone()).or_default()[l.index()] += 1;
                    }
                    p
                }
            };
            let s = grouped_stratified_split(&profile, &c.split, seeds::derive(c.seed, seeds::SPLIT))?;
            write_text(&out, &to_json(&s)?)?;
        }
        Command::Tune {
            features,
            model,
            split,
            cfg,
            out,
        } => {
            let c = cfg.load()?;
            if maybe_print(&c, &cfg)? {
                return Ok(());
            }
            check_exists(&[&features])?;
            let mut m = FeatureMatrix::load(&features)?;
            if let Some(p) = split {
                let s: GroupedSplit = read_json(&p)?;
                m = restrict(&m, &s.train_animals);
            }
            let mut animals = m.animal_ids.clone();
            animals.sort();
            animals.dedup();
            let r: TuneResult = tune(&animals, &c.grid(model), &c.tune, seeds::derive(c.seed, seeds::TUNE), |f, v| {
                Ok((restrict(&m, f), restrict(&m, v)))
            })?;
            eprint!("{}", r.table());
            write_text(&out, &to_json(&r)?)?;
        }
        Command::Train {
            features,
            model,
            tuned,
            spec,
            split,
            cfg,
            out,
        } => {
            let c = cfg.load()?;
            if maybe_print(&c, &cfg)? {
                return Ok(());
            }
            check_exists(&[&features])?;
            let ms: ModelSpec = match (tuned, spec, model) {
                (Some(p), _, _) => read_json::<TuneResult>(&p)?.best().clone(),
                (None, Some(p), _) => read_json(&p)?,
                (None, None, Some(kind)) => c.grid(kind).remove(0),
                (None, None, None) => {
                    return Err(Error::Validation("one of --model, --tuned or --spec is required".into()))
                }
            };
            let mut m = FeatureMatrix::load(&features)?;
            if let Some(p) = split {
                let s: GroupedSplit = read_json(&p)?;
                m = restrict(&m, &s.train_animals);
            }
            fit(&m, &ms)?.save(&out)?;
        }
        Command::Evaluate {
            model,
            features,
            split,
            out,
            confusion,
        } => {
            check_exists(&[&model, &features])?;
            let tm = TrainedModel::load(&model)?;
            let mut m = FeatureMatrix::load(&features)?;
            if let Some(p) = split {
                let s: GroupedSplit = read_json(&p)?;
                m = restrict(&m, &s.test_animals);
            }
            let pred = tm.predict(&m)?;
            let mut classes: Vec<Behaviour> = tm.classes.iter().chain(&m.labels).copied().collect();
            classes.sort();
            classes.dedup();
            let r = compute_metrics(&m.labels, &pred, &classes)?;
            eprintln!("balanced accuracy {:.4} on {} windows", r.balanced_accuracy, r.n_test_windows);
            write_text(&out, &to_json(&r)?)?;
            if let Some(p) = confusion {
                write_text(&p, &report::confusion_csv(&r))?;
            }
        }
        Command::Experiment { cfg, output } => {
            let mut c = cfg.load()?;
            if let Some(o) = output {
                c.output.dir = o;
            }
            if maybe_print(&c, &cfg)? {
                return Ok(());
            }
            if c.data.source == ethogram::config::DataSource::Files {
                check_exists(&[&c.data.dir])?;
            }
            eprintln!("experiment seed {}", c.seed);
            let outcome = run_experiment(&c)?;
            let written = report::write_bundle(&outcome, &c.output.dir)?;
            for p in written {
                log::info!("wrote {}", p.display());
            }
            print!("{}", report::render_text(&outcome.report));
        }
        Command::Report { input, timing, out } => {
            check_exists(&[&input])?;
            let r = report::load_report(&input)?;
            let t = timing.map(|p| report::load_timing(&p)).transpose()?;
            report::write_tables(&r, t.as_deref(), &out)?;
            print!("{}", report::render_text(&r));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 3 } else { 2 })
        }
    }
}
