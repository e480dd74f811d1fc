//! Derived channels: raw axes, magnitude, ODBA, VeDBA, pitch and roll.

pub mod butterworth;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use butterworth::{butterworth_filter, ButterworthSpec, FilterKind, Sos};

use crate::behaviour::Behaviour;
use crate::error::{Error, Result};
use crate::ingest::{LabeledSeries, Timestamp, TriAxialSeries};

pub const FILTER_ORDER: usize = 6;
pub const CUTOFF_HZ: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    X,
    Y,
    Z,
    Magnitude,
    Odba,
    Vedba,
    Pitch,
    Roll,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::X,
        Channel::Y,
        Channel::Z,
        Channel::Magnitude,
        Channel::Odba,
        Channel::Vedba,
        Channel::Pitch,
        Channel::Roll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Z => "z",
            Channel::Magnitude => "magnitude",
            Channel::Odba => "odba",
            Channel::Vedba => "vedba",
            Channel::Pitch => "pitch",
            Channel::Roll => "roll",
        }
    }
}

/// The eight derived channels on a shared time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub animal_id: String,
    pub start_time: Timestamp,
    pub sample_rate_hz: f64,
    /// Indexed in [`Channel::ALL`] order.
    pub channels: Vec<Vec<f64>>,
    pub labels: Vec<Option<Behaviour>>,
}

impl ChannelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.channels[c as usize]
    }

    pub fn sample_time(&self, i: usize) -> Timestamp {
        Timestamp(self.start_time.0 + (i as f64 * 1e6 / self.sample_rate_hz).round() as i64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ChannelSet> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }

    /// Debug dump: one column per channel plus `label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e| Error::io("<channel writer>", e);
        let mut w = BufWriter::new(writer);
        let header: Vec<&str> = Channel::ALL.iter().map(|c| c.name()).collect();
        writeln!(w, "timestamp,{},label", header.join(",")).map_err(io)?;
        for i in 0..self.len() {
            write!(w, "{}", self.sample_time(i)).map_err(io)?;
            for ch in &self.channels {
                write!(w, ",{}", ch[i]).map_err(io)?;
            }
            let label = self.labels[i].map_or("", |b| b.as_str());
            writeln!(w, ",{label}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// `sqrt(ax² + ay² + az²) − 1`, gravity removed in g.
pub fn magnitude(series: &TriAxialSeries) -> Vec<f64> {
    series
        .samples
        .iter()
        .map(|s| (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() - 1.0)
        .collect()
}

pub type Axes = [Vec<f64>; 3];

/// High-pass (dynamic) and low-pass (static) components of each axis.
pub fn dynamic_static_split(series: &TriAxialSeries) -> Result<(Axes, Axes)> {
    let fs = series.sample_rate_hz;
    let hp = Sos::design(&ButterworthSpec::high_pass(FILTER_ORDER, CUTOFF_HZ, fs))?;
    let lp = Sos::design(&ButterworthSpec::low_pass(FILTER_ORDER, CUTOFF_HZ, fs))?;
    let axes: Axes = [series.axis(0), series.axis(1), series.axis(2)];
    let dynamic = axes.clone().map(|a| hp.filtfilt(&a));
    let stat = axes.map(|a| lp.filtfilt(&a));
    Ok((dynamic, stat))
}

pub fn odba(dynamic: &Axes) -> Vec<f64> {
    (0..dynamic[0].len())
        .map(|i| dynamic[0][i].abs() + dynamic[1][i].abs() + dynamic[2][i].abs())
        .collect()
}

pub fn vedba(dynamic: &Axes) -> Vec<f64> {
    (0..dynamic[0].len())
        .map(|i| (dynamic[0][i].powi(2) + dynamic[1][i].powi(2) + dynamic[2][i].powi(2)).sqrt())
        .collect()
}

/// Tilt angles in radians; an all-zero static vector gives `(0, 0)`.
pub fn pitch_roll_point(sx: f64, sy: f64, sz: f64) -> (f64, f64) {
    if sx == 0.0 && sy == 0.0 && sz == 0.0 {
        return (0.0, 0.0);
    }
    let pitch = sz.atan2((sy * sy + sx * sx).sqrt());
    let roll = sy.atan2((sz * sz + sx * sx).sqrt());
    (pitch, roll)
}

pub fn pitch_roll(stat: &Axes) -> (Vec<f64>, Vec<f64>) {
    (0..stat[0].len())
        .map(|i| pitch_roll_point(stat[0][i], stat[1][i], stat[2][i]))
        .unzip()
}

/// All eight channels with the label channel carried through.
pub fn derive_channels(ls: &LabeledSeries) -> Result<ChannelSet> {
    let series = &ls.series;
    if ls.labels.len() != series.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} samples",
            ls.labels.len(),
            series.len()
        )));
    }
    let mag = magnitude(series);
    let (dynamic, stat) = dynamic_static_split(series)?;
    let od = odba(&dynamic);
    let ve = vedba(&dynamic);
    let (pitch, roll) = pitch_roll(&stat);
    let [x, y, z] = [series.axis(0), series.axis(1), series.axis(2)];
    Ok(ChannelSet {
        animal_id: series.animal_id.clone(),
        start_time: series.start_time,
        sample_rate_hz: series.sample_rate_hz,
        channels: vec![x, y, z, mag, od, ve, pitch, roll],
        labels: ls.labels.clone(),
    })
}

/// [`derive_channels`] on a series with no labels.
pub fn derive_unlabeled(series: &TriAxialSeries) -> Result<ChannelSet> {
    derive_channels(&LabeledSeries {
        series: series.clone(),
        labels: vec![None; series.len()],
    })
}
