//! Fixed-length, overlapping windows with one behaviour label each.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behaviour::Behaviour;
use crate::error::{Error, Result};
use crate::ingest::Timestamp;
use crate::signal::ChannelSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowingSpec {
    pub duration_s: f64,
    pub overlap_fraction: f64,
    pub purity_threshold: f64,
}

impl Default for WindowingSpec {
    fn default() -> Self {
        WindowingSpec {
            duration_s: 3.0,
            overlap_fraction: 0.5,
            purity_threshold: 1.0,
        }
    }
}

impl WindowingSpec {
    /// Window length in samples.
    pub fn length(&self, sample_rate_hz: f64) -> Result<usize> {
        let l = self.duration_s * sample_rate_hz;
        if !(l >= 1.0) || (l - l.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "window of {} s at {sample_rate_hz} Hz is not a whole number of samples",
                self.duration_s
            )));
        }
        Ok(l.round() as usize)
    }

    /// `floor(L · (1 − overlap))`.
    pub fn hop(&self, length: usize) -> Result<usize> {
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Config(format!(
                "overlap fraction {} outside [0, 1)",
                self.overlap_fraction
            )));
        }
        let hop = (length as f64 * (1.0 - self.overlap_fraction) + 1e-9).floor() as usize;
        if hop == 0 {
            return Err(Error::Config("window hop rounds to zero samples".into()));
        }
        Ok(hop)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.purity_threshold > 0.5 && self.purity_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "purity threshold {} outside (0.5, 1]",
                self.purity_threshold
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Config(format!(
                "overlap fraction {} outside [0, 1)",
                self.overlap_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledWindow {
    pub animal_id: String,
    /// Position of the window among all candidate starts of its recording.
    pub window_index: usize,
    pub start_time: Timestamp,
    /// Eight channels of `L` samples each.
    pub channels: Vec<Vec<f64>>,
    pub label: Behaviour,
}

impl LabeledWindow {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cut `cs` into windows. A window is kept only when no sample is unlabeled
/// and at least `purity_threshold` of its samples share one label.
pub fn segment(cs: &ChannelSet, spec: &WindowingSpec) -> Result<Vec<LabeledWindow>> {
    spec.validate()?;
    let l = spec.length(cs.sample_rate_hz)?;
    let hop = spec.hop(l)?;
    let n = cs.len();
    if n < l {
        return Err(Error::TooShort { needed: l, got: n });
    }
    let mut out = Vec::new();
    for (idx, start) in (0..=n - l).step_by(hop).enumerate() {
        let Some(label) = window_label(&cs.labels[start..start + l], spec.purity_threshold) else {
            continue;
        };
        out.push(LabeledWindow {
            animal_id: cs.animal_id.clone(),
            window_index: idx,
            start_time: cs.sample_time(start),
            channels: cs.channels.iter().map(|c| c[start..start + l].to_vec()).collect(),
            label,
        });
    }
    Ok(out)
}

fn window_label(labels: &[Option<Behaviour>], purity: f64) -> Option<Behaviour> {
    let mut counts = [0usize; 6];
    for l in labels {
        counts[(*l)?.index()] += 1;
    }
    let (best, &count) = counts.iter().enumerate().max_by_key(|(i, c)| (**c, usize::MAX - i))?;
    (count as f64 >= purity * labels.len() as f64 - 1e-9).then(|| Behaviour::ALL[best])
}

/// Windows of one or more recordings at a common sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub sample_rate_hz: f64,
    pub windows: Vec<LabeledWindow>,
}

impl WindowSet {
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<WindowSet> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

/// `animal_id,window_index,start_time,label`.
pub fn write_manifest<W: Write>(windows: &[LabeledWindow], writer: W) -> Result<()> {
    let io = |e| Error::io("<manifest writer>", e);
    let mut w = BufWriter::new(writer);
    writeln!(w, "animal_id,window_index,start_time,label").map_err(io)?;
    for win in windows {
        writeln!(w, "{},{},{},{}", win.animal_id, win.window_index, win.start_time, win.label)
            .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Window counts per animal and class.
pub fn class_counts(windows: &[LabeledWindow]) -> BTreeMap<String, [usize; 6]> {
    let mut out: BTreeMap<String, [usize; 6]> = BTreeMap::new();
    for w in windows {
        out.entry(w.animal_id.clone()).or_default()[w.label.index()] += 1;
    }
    out
}
