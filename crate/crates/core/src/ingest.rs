//! Raw accelerometer and annotation files: parsing, normalisation and
//! alignment onto a per-sample label channel.
//!
//! Accelerometer CSV: `timestamp,x,y,z` (acceleration in g).
//! Annotation CSV: `behaviour,start,stop`.
//!
//! Timestamps are either epoch seconds (`1642723200.040000`) or ISO-8601
//! (`2022-01-21T00:00:00.04Z`); the form is detected per value. Internally
//! every time is an integer count of microseconds since the Unix epoch so
//! that sample/interval comparisons are exact.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::behaviour::Behaviour;
use crate::error::{Error, Result};

/// Microseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_secs_f64(s: f64) -> Self {
        Timestamp((s * 1e6).round() as i64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn offset_by_secs(self, secs: f64) -> Self {
        Timestamp(self.0 + (secs * 1e6).round() as i64)
    }

    /// Parse epoch seconds or an ISO-8601 date-time (UTC assumed when no
    /// offset is given).
    pub fn parse(field: &str) -> Option<Self> {
        let s = field.trim();
        if s.is_empty() {
            return None;
        }
        if let Some(ts) = parse_decimal_seconds(s) {
            return Some(ts);
        }
        if let Ok(v) = s.parse::<f64>() {
            return v.is_finite().then(|| Timestamp::from_secs_f64(v));
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(Timestamp(dt.timestamp_micros()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Some(Timestamp(dt.and_utc().timestamp_micros()));
            }
        }
        None
    }
}

/// Exact parse of `[-]digits[.digits]` into microseconds.
fn parse_decimal_seconds(s: &str) -> Option<Timestamp> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac_part.bytes().all(|b| b.is_ascii_digit()) || frac_part.len() > 6 {
        return None;
    }
    let whole: i64 = int_part.parse().ok()?;
    let mut frac: i64 = 0;
    for (i, b) in frac_part.bytes().enumerate() {
        frac += (b - b'0') as i64 * 10i64.pow(5 - i as u32);
    }
    let us = whole.checked_mul(1_000_000)?.checked_add(frac)?;
    Some(Timestamp(if neg { -us } else { us }))
}

impl fmt::Display for Timestamp {
    /// Canonical epoch-seconds form with six decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
    }
}

/// Uniformly sampled tri-axial acceleration for one animal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriAxialSeries {
    pub animal_id: String,
    pub start_time: Timestamp,
    pub sample_rate_hz: f64,
    /// `(ax, ay, az)` in g.
    pub samples: Vec<[f64; 3]>,
}

impl TriAxialSeries {
    pub fn new(
        animal_id: impl Into<String>,
        start_time: Timestamp,
        sample_rate_hz: f64,
        samples: Vec<[f64; 3]>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::Validation(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::Validation("series has no samples".into()));
        }
        Ok(TriAxialSeries {
            animal_id: animal_id.into(),
            start_time,
            sample_rate_hz,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `i`.
    pub fn sample_time(&self, i: usize) -> Timestamp {
        Timestamp(self.start_time.0 + (i as f64 * 1e6 / self.sample_rate_hz).round() as i64)
    }

    /// Span from the first to the last sample, in seconds.
    pub fn duration_s(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 / self.sample_rate_hz
    }

    pub fn axis(&self, a: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[a]).collect()
    }
}

/// A series with one label (or none) per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub series: TriAxialSeries,
    pub labels: Vec<Option<Behaviour>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub behaviour: Behaviour,
    pub start: Timestamp,
    pub stop: Timestamp,
}

impl Interval {
    pub fn duration_s(&self) -> f64 {
        (self.stop.0 - self.start.0) as f64 / 1e6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTrack {
    pub animal_id: String,
    /// Sorted by start, non-overlapping.
    pub intervals: Vec<Interval>,
}

/// Result of reading an annotation file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAnnotations {
    pub track: AnnotationTrack,
    /// Rows whose behaviour string was not one of the six classes and was
    /// therefore mapped to `other`.
    pub remapped_to_other: usize,
}

/// Animal id from a file name: the stem with any `.accel` / `.annotations`
/// suffix removed.
pub fn animal_id_from_path(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    for suffix in [".accel", ".annotations"] {
        if let Some(s) = stem.strip_suffix(suffix) {
            return s.to_string();
        }
    }
    stem
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
}

fn parse_f64(field: Option<&str>, line: usize, what: &str) -> Result<f64> {
    let raw = field.unwrap_or("").trim();
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid {what} value '{raw}'"),
        })
}

fn parse_time(field: Option<&str>, line: usize) -> Result<Timestamp> {
    let raw = field.unwrap_or("");
    Timestamp::parse(raw).ok_or_else(|| Error::Parse {
        line,
        message: format!("invalid timestamp '{}'", raw.trim()),
    })
}

pub fn parse_accel_csv(path: &Path, sample_rate_hz: f64) -> Result<TriAxialSeries> {
    read_accel_csv(open(path)?, &animal_id_from_path(path), sample_rate_hz)
}

/// Read an accelerometer CSV.
///
/// Timestamps must increase. A step of about two sample periods (one dropped
/// sample) is repaired by linear interpolation; anything longer than two
/// periods is reported as a gap.
pub fn read_accel_csv<R: Read>(
    reader: R,
    animal_id: &str,
    sample_rate_hz: f64,
) -> Result<TriAxialSeries> {
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(Error::Validation(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (ct, cx, cy, cz) = (
        column_index(&headers, "timestamp")?,
        column_index(&headers, "x")?,
        column_index(&headers, "y")?,
        column_index(&headers, "z")?,
    );
    let period_us = 1e6 / sample_rate_hz;

    let mut start = None;
    let mut prev_t: Option<Timestamp> = None;
    let mut samples: Vec<[f64; 3]> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let t = parse_time(rec.get(ct), line)?;
        let s = [
            parse_f64(rec.get(cx), line, "x")?,
            parse_f64(rec.get(cy), line, "y")?,
            parse_f64(rec.get(cz), line, "z")?,
        ];
        if let Some(p) = prev_t {
            let delta = (t.0 - p.0) as f64;
            if delta <= 0.0 {
                return Err(Error::NonMonotoneTime { line });
            }
            let ratio = delta / period_us;
            if ratio > 2.0 + 1e-6 {
                return Err(Error::Gap {
                    line,
                    gap_s: delta / 1e6,
                });
            }
            if ratio >= 1.5 {
                let last = *samples.last().unwrap();
                samples.push([
                    0.5 * (last[0] + s[0]),
                    0.5 * (last[1] + s[1]),
                    0.5 * (last[2] + s[2]),
                ]);
            }
        } else {
            start = Some(t);
        }
        prev_t = Some(t);
        samples.push(s);
    }
    let start = start.ok_or_else(|| Error::Parse {
        line: 2,
        message: "file has no data rows".into(),
    })?;
    TriAxialSeries::new(animal_id, start, sample_rate_hz, samples)
}

/// Write the canonical accelerometer CSV form.
pub fn write_accel_csv<W: Write>(series: &TriAxialSeries, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let io = |e| Error::io("<accel writer>", e);
    writeln!(w, "timestamp,x,y,z").map_err(io)?;
    for (i, s) in series.samples.iter().enumerate() {
        writeln!(w, "{},{},{},{}", series.sample_time(i), s[0], s[1], s[2]).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_accel_csv(series: &TriAxialSeries, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_accel_csv(series, f)
}

pub fn parse_annotations(path: &Path) -> Result<ParsedAnnotations> {
    read_annotations(open(path)?, &animal_id_from_path(path))
}

/// Read an annotation CSV and normalise it (see [`normalize_intervals`]).
pub fn read_annotations<R: Read>(reader: R, animal_id: &str) -> Result<ParsedAnnotations> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (cb, cs, ce) = (
        column_index(&headers, "behaviour")?,
        column_index(&headers, "start")?,
        column_index(&headers, "stop")?,
    );
    let mut intervals = Vec::new();
    let mut remapped = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let (behaviour, known) = Behaviour::from_label(rec.get(cb).unwrap_or(""));
        if !known {
            remapped += 1;
        }
        let start = parse_time(rec.get(cs), line)?;
        let stop = parse_time(rec.get(ce), line)?;
        if stop <= start {
            return Err(Error::Validation(format!(
                "line {line}: annotation stop {stop} is not after start {start}"
            )));
        }
        intervals.push(Interval {
            behaviour,
            start,
            stop,
        });
    }
    if remapped > 0 {
        log::warn!("{animal_id}: {remapped} annotation rows mapped to 'other'");
    }
    Ok(ParsedAnnotations {
        track: AnnotationTrack {
            animal_id: animal_id.to_string(),
            intervals: normalize_intervals(intervals),
        },
        remapped_to_other: remapped,
    })
}

pub fn write_annotations<W: Write>(track: &AnnotationTrack, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let io = |e| Error::io("<annotation writer>", e);
    writeln!(w, "behaviour,start,stop").map_err(io)?;
    for iv in &track.intervals {
        writeln!(w, "{},{},{}", iv.behaviour, iv.start, iv.stop).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_annotations(track: &AnnotationTrack, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_annotations(track, f)
}

/// Sort intervals by start and resolve overlaps: an interval that starts
/// later wins, and the earlier one is cut at the later one's start. For
/// equal starts the row appearing later in the input wins. Intervals cut to
/// zero length are dropped.
pub fn normalize_intervals(mut intervals: Vec<Interval>) -> Vec<Interval> {
    // stable sort keeps input order among equal starts
    intervals.sort_by_key(|iv| iv.start);
    let mut out = Vec::with_capacity(intervals.len());
    for i in 0..intervals.len() {
        let mut iv = intervals[i];
        if let Some(next) = intervals.get(i + 1) {
            if next.start < iv.stop {
                iv.stop = next.start;
            }
        }
        if iv.stop > iv.start {
            out.push(iv);
        }
    }
    out
}

/// Label every sample of `series` from `track`, shifting the annotation clock
/// by `offset_s` seconds onto the accelerometer clock. A sample at time `t`
/// gets the label of the interval with `start <= t < stop`.
pub fn align(series: &TriAxialSeries, track: &AnnotationTrack, offset_s: f64) -> Result<LabeledSeries> {
    if series.animal_id != track.animal_id {
        return Err(Error::Validation(format!(
            "animal id mismatch: series '{}' vs annotations '{}'",
            series.animal_id, track.animal_id
        )));
    }
    let n = series.len();
    let mut labels = vec![None; n];
    let mut any = false;
    for iv in &track.intervals {
        let s = iv.start.offset_by_secs(offset_s);
        let e = iv.stop.offset_by_secs(offset_s);
        let lo = first_sample_at_or_after(series, s);
        let hi = first_sample_at_or_after(series, e);
        for label in labels.iter_mut().take(hi).skip(lo) {
            *label = Some(iv.behaviour);
            any = true;
        }
    }
    if !any {
        return Err(Error::EmptyAlignment(series.animal_id.clone()));
    }
    Ok(LabeledSeries {
        series: series.clone(),
        labels,
    })
}

/// Smallest sample index whose time is `>= t` (may be `len`).
fn first_sample_at_or_after(series: &TriAxialSeries, t: Timestamp) -> usize {
    let n = series.len();
    let approx = (t.0 - series.start_time.0) as f64 * series.sample_rate_hz / 1e6;
    if approx <= 0.0 {
        return 0;
    }
    let mut i = (approx.ceil() as usize).min(n);
    while i > 0 && series.sample_time(i - 1) >= t {
        i -= 1;
    }
    while i < n && series.sample_time(i) < t {
        i += 1;
    }
    i
}
