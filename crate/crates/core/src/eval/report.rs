//! Report bundle: machine-readable JSON, aligned text tables and
//! row-normalised confusion matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{ExperimentOutcome, ExperimentReport, TimingRow};
use super::metrics::MetricsReport;
use crate::error::{Error, Result};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Confusion matrix as CSV of row percentages.
pub fn confusion_csv(m: &MetricsReport) -> String {
    let mut s = String::from("actual");
    for c in &m.classes {
        write!(s, ",{c}").unwrap();
    }
    s.push('\n');
    for (c, row) in m.classes.iter().zip(m.confusion_percent()) {
        s.push_str(c.as_str());
        for v in row {
            write!(s, ",{v:.2}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn per_class_table(m: &MetricsReport) -> String {
    let mut s = format!(
        "{:<14} {:>11} {:>11} {:>11} {:>8}\n",
        "behaviour", "sensitivity", "specificity", "precision", "support"
    );
    for c in &m.per_class {
        let prec = if c.precision_undefined {
            format!("{:.3}*", c.precision)
        } else {
            format!("{:.3}", c.precision)
        };
        writeln!(
            s,
            "{:<14} {:>11.3} {:>11.3} {:>11} {:>8}",
            c.behaviour.as_str(),
            c.sensitivity,
            c.specificity,
            prec,
            c.support
        )
        .unwrap();
    }
    if m.per_class.iter().any(|c| c.precision_undefined) {
        s.push_str("* class never predicted; precision reported as 0\n");
    }
    s
}

fn confusion_table(m: &MetricsReport) -> String {
    let width = m.classes.iter().map(|c| c.as_str().len()).max().unwrap_or(6).max(7);
    let mut s = format!("{:<width$}", "actual\\pred");
    for c in &m.classes {
        write!(s, " {:>width$}", c.as_str()).unwrap();
    }
    s.push('\n');
    for (c, row) in m.classes.iter().zip(m.confusion_percent()) {
        write!(s, "{:<width$}", c.as_str()).unwrap();
        for v in row {
            write!(s, " {:>width$.1}", v).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Human-readable summary of a report.
pub fn render_text(r: &ExperimentReport) -> String {
    let mut s = String::new();
    writeln!(s, "seed {}  animals {}  windows {} (train {}, test {})", r.seed, r.n_animals, r.n_windows, r.n_train_windows, r.n_test_windows).unwrap();
    writeln!(s, "train animals: {}", r.split.train_animals.join(" ")).unwrap();
    writeln!(s, "test animals:  {}", r.split.test_animals.join(" ")).unwrap();
    writeln!(s, "split objective: {:.6}\n", r.split.objective).unwrap();
    writeln!(
        s,
        "{:<9} {:<14} {:>9} {:>17} {:>8}",
        "features", "model", "n_feat", "tuning BA", "test BA"
    )
    .unwrap();
    for c in &r.results {
        let g = &c.tuning.grid[c.tuning.best_index];
        writeln!(
            s,
            "{:<9} {:<14} {:>9} {:>8.4} ± {:<6.4} {:>8.4}",
            c.feature_set.as_str(),
            c.model.as_str(),
            c.n_features,
            g.mean_ba,
            g.std_ba,
            c.metrics.balanced_accuracy
        )
        .unwrap();
    }
    for c in &r.results {
        writeln!(s, "\n== {} + {} ==", c.feature_set, c.model).unwrap();
        if let Some(a) = c.selected_alpha {
            writeln!(s, "selected alpha: {a:.6e}").unwrap();
        }
        s.push_str("tuning (mean ± std balanced accuracy over inner splits):\n");
        s.push_str(&c.tuning.table());
        s.push('\n');
        s.push_str(&per_class_table(&c.metrics));
        s.push_str("\nconfusion (% of actual):\n");
        s.push_str(&confusion_table(&c.metrics));
    }
    s
}

pub fn render_timing(rows: &[TimingRow]) -> String {
    let mut s = format!(
        "{:<9} {:<14} {:>12} {:>10} {:>10} {:>10}\n",
        "features", "model", "extraction_s", "tuning_s", "training_s", "testing_s"
    );
    for t in rows {
        writeln!(
            s,
            "{:<9} {:<14} {:>12.3} {:>10.3} {:>10.3} {:>10.3}",
            t.feature_set.as_str(),
            t.model.as_str(),
            t.extraction_s,
            t.tuning_s,
            t.training_s,
            t.testing_s
        )
        .unwrap();
    }
    s
}

/// Text tables and confusion CSVs derived from a report; returns the paths
/// written.
pub fn write_tables(r: &ExperimentReport, timing: Option<&[TimingRow]>, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let summary = dir.join("summary.txt");
    write_file(&summary, &render_text(r))?;
    written.push(summary);
    if let Some(t) = timing {
        let p = dir.join("timing.txt");
        write_file(&p, &render_timing(t))?;
        written.push(p);
    }
    for c in &r.results {
        let p = dir.join(format!("confusion_{}_{}.csv", c.feature_set, c.model));
        write_file(&p, &confusion_csv(&c.metrics))?;
        written.push(p);
    }
    Ok(written)
}

/// `report.json` (deterministic), `timing.json` and the derived tables.
pub fn write_bundle(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = dir.join("report.json");
    write_file(&report, &to_json(&outcome.report)?)?;
    let timing = dir.join("timing.json");
    write_file(&timing, &to_json(&outcome.timing)?)?;
    let mut written = vec![report, timing];
    written.extend(write_tables(&outcome.report, Some(&outcome.timing), dir)?);
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_timing(path: &Path) -> Result<Vec<TimingRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
