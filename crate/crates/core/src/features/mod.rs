//! Feature families and the feature matrix they produce.

pub mod catch22;
pub mod hc;
pub mod rocket;
pub mod spectral;

use std::borrow::Borrow;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::behaviour::Behaviour;
use crate::error::{Error, Result};
use crate::signal::Channel;
use crate::windowing::LabeledWindow;

pub use catch22::Catch24Spec;
pub use hc::HcSpec;
pub use rocket::{RocketModel, RocketSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Hc,
    Catch24,
    Rocket,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Hc, FeatureSet::Catch24, FeatureSet::Rocket];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Hc => "hc",
            FeatureSet::Catch24 => "catch24",
            FeatureSet::Rocket => "rocket",
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown feature set `{s}`")))
    }
}

/// Windows × named features, row-major, with each row's label and source.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub data: Vec<f64>,
    pub labels: Vec<Behaviour>,
    pub animal_ids: Vec<String>,
    pub window_indices: Vec<usize>,
}

/// Hex SHA-256 of the newline-joined feature names.
pub fn schema_hash(names: &[String]) -> String {
    let mut h = Sha256::new();
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(n.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

const BIN_MAGIC: &[u8; 4] = b"EFMX";
const BIN_VERSION: u32 = 1;

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>) -> Self {
        FeatureMatrix {
            feature_names,
            data: Vec::new(),
            labels: Vec::new(),
            animal_ids: Vec::new(),
            window_indices: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn push_row(&mut self, values: &[f64], label: Behaviour, animal_id: &str, window_index: usize) -> Result<()> {
        if values.len() != self.n_cols() {
            return Err(Error::Shape(format!(
                "row has {} values, matrix has {} columns",
                values.len(),
                self.n_cols()
            )));
        }
        self.data.extend_from_slice(values);
        self.labels.push(label);
        self.animal_ids.push(animal_id.to_string());
        self.window_indices.push(window_index);
        Ok(())
    }

    pub fn schema_hash(&self) -> String {
        schema_hash(&self.feature_names)
    }

    /// Rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(self.feature_names.clone());
        m.data.reserve(idx.len() * self.n_cols());
        for &i in idx {
            m.data.extend_from_slice(self.row(i));
            m.labels.push(self.labels[i]);
            m.animal_ids.push(self.animal_ids[i].clone());
            m.window_indices.push(self.window_indices[i]);
        }
        m
    }

    /// Rows whose animal satisfies `keep`.
    pub fn filter_animals(&self, keep: impl Fn(&str) -> bool) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(&self.animal_ids[i])).collect();
        self.select_rows(&idx)
    }

    /// Error unless `names` equals this matrix's columns, in order.
    pub fn check_schema(&self, names: &[String]) -> Result<()> {
        if self.feature_names != names {
            return Err(Error::Schema(format!(
                "feature columns differ (expected schema {}, found {})",
                schema_hash(names),
                self.schema_hash()
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e| Error::io("<feature csv>", e);
        let mut w = BufWriter::new(writer);
        writeln!(w, "#schema:{}", self.schema_hash()).map_err(io)?;
        write!(w, "animal_id,window_index,label").map_err(io)?;
        for n in &self.feature_names {
            write!(w, ",{n}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for i in 0..self.n_rows() {
            write!(w, "{},{},{}", self.animal_ids[i], self.window_indices[i], self.labels[i]).map_err(io)?;
            for v in self.row(i) {
                write!(w, ",{v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<FeatureMatrix> {
        let mut lines = BufReader::new(reader).lines();
        let mut next = |line: usize| -> Result<String> {
            lines
                .next()
                .ok_or(Error::Parse {
                    line,
                    message: "unexpected end of file".into(),
                })?
                .map_err(|e| Error::io("<feature csv>", e))
        };
        let first = next(1)?;
        let hash = first
            .strip_prefix("#schema:")
            .ok_or(Error::Parse {
                line: 1,
                message: "missing #schema line".into(),
            })?
            .trim()
            .to_string();
        let header = next(2)?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.len() < 3 || cols[..3] != ["animal_id", "window_index", "label"] {
            return Err(Error::Parse {
                line: 2,
                message: "header must start with animal_id,window_index,label".into(),
            });
        }
        let mut m = FeatureMatrix::new(cols[3..].iter().map(|s| s.to_string()).collect());
        if m.schema_hash() != hash {
            return Err(Error::Schema("schema hash does not match the header".into()));
        }
        let mut values = Vec::with_capacity(m.n_cols());
        let mut line_no = 2;
        loop {
            line_no += 1;
            let line = match next(line_no) {
                Ok(l) => l,
                Err(Error::Parse { .. }) => break,
                Err(e) => return Err(e),
            };
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: line_no, message };
            let mut it = line.trim_end().split(',');
            let animal = it.next().unwrap_or_default().to_string();
            let idx: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad window_index".into()))?;
            let label: Behaviour = it.next().unwrap_or_default().parse().map_err(|e: Error| bad(e.to_string()))?;
            values.clear();
            for s in it {
                values.push(s.parse::<f64>().map_err(|_| bad(format!("bad value `{s}`")))?);
            }
            m.push_row(&values, label, &animal, idx)
                .map_err(|e| bad(e.to_string()))?;
        }
        Ok(m)
    }

    pub fn write_binary<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e| Error::io("<feature binary>", e);
        let mut w = BufWriter::new(writer);
        w.write_all(BIN_MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(BIN_VERSION).map_err(io)?;
        write_str(&mut w, &self.schema_hash()).map_err(io)?;
        w.write_u64::<LittleEndian>(self.n_cols() as u64).map_err(io)?;
        for n in &self.feature_names {
            write_str(&mut w, n).map_err(io)?;
        }
        w.write_u64::<LittleEndian>(self.n_rows() as u64).map_err(io)?;
        for i in 0..self.n_rows() {
            write_str(&mut w, &self.animal_ids[i]).map_err(io)?;
            w.write_u64::<LittleEndian>(self.window_indices[i] as u64).map_err(io)?;
            w.write_u8(self.labels[i].index() as u8).map_err(io)?;
            for &v in self.row(i) {
                w.write_f64::<LittleEndian>(v).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read_binary<R: Read>(reader: R) -> Result<FeatureMatrix> {
        let io = |e| Error::io("<feature binary>", e);
        let mut r = BufReader::new(reader);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != BIN_MAGIC {
            return Err(Error::Schema("not a feature-matrix file".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != BIN_VERSION {
            return Err(Error::Schema(format!("unsupported feature-matrix version {version}")));
        }
        let hash = read_str(&mut r)?;
        let ncols = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let names = (0..ncols).map(|_| read_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let mut m = FeatureMatrix::new(names);
        if m.schema_hash() != hash {
            return Err(Error::Schema("schema hash does not match the stored names".into()));
        }
        let nrows = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let mut values = vec![0.0; ncols];
        for _ in 0..nrows {
            let animal = read_str(&mut r)?;
            let idx = r.read_u64::<LittleEndian>().map_err(io)? as usize;
            let label = *Behaviour::ALL
                .get(r.read_u8().map_err(io)? as usize)
                .ok_or_else(|| Error::Schema("bad label code".into()))?;
            r.read_f64_into::<LittleEndian>(&mut values).map_err(io)?;
            m.push_row(&values, label, &animal, idx)?;
        }
        Ok(m)
    }

    /// Writes CSV, or the binary form when the extension is `.bin`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        if is_binary_path(path) {
            self.write_binary(f)
        } else {
            self.write_csv(f)
        }
    }

    pub fn load(path: &Path) -> Result<FeatureMatrix> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        if is_binary_path(path) {
            FeatureMatrix::read_binary(f)
        } else {
            FeatureMatrix::read_csv(f)
        }
    }
}

fn is_binary_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let io = |e| Error::io("<binary>", e);
    let n = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(io)?;
    String::from_utf8(buf).map_err(|_| Error::Schema("invalid UTF-8 string".into()))
}

/// Build a matrix by applying `f` to every window in parallel; rows keep
/// window order.
pub fn extract_with<W, F>(windows: &[W], names: Vec<String>, f: F) -> Result<FeatureMatrix>
where
    W: Borrow<LabeledWindow> + Sync,
    F: Fn(&LabeledWindow) -> Result<Vec<f64>> + Sync,
{
    let rows: Vec<Vec<f64>> = windows.par_iter().map(|w| f(w.borrow())).collect::<Result<_>>()?;
    let mut m = FeatureMatrix::new(names);
    m.data.reserve(rows.len() * m.n_cols());
    for (w, r) in windows.iter().zip(rows) {
        let w = w.borrow();
        m.push_row(&r, w.label, &w.animal_id, w.window_index)?;
    }
    Ok(m)
}

pub fn extract_hc(windows: &[LabeledWindow], sample_rate_hz: f64, spec: &HcSpec) -> Result<FeatureMatrix> {
    extract_with(windows, hc::hc_names(), |w| {
        Ok(hc::hc_features(w, sample_rate_hz, spec).values)
    })
}

pub fn catch24_names(spec: &Catch24Spec) -> Vec<String> {
    Channel::ALL
        .iter()
        .flat_map(|c| spec.names().into_iter().map(move |f| format!("{}__{f}", c.name())))
        .collect()
}

/// Catch24 of all channels of one window, channel-major.
pub fn catch24_window(window: &LabeledWindow, spec: &Catch24Spec) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(window.channels.len() * 24);
    for c in &window.channels {
        values.extend(catch22::catch24_vector(c, spec)?);
    }
    Ok(FeatureVector {
        names: catch24_names(spec),
        values,
    })
}

pub fn extract_catch24(windows: &[LabeledWindow], spec: &Catch24Spec) -> Result<FeatureMatrix> {
    extract_with(windows, catch24_names(spec), |w| Ok(catch24_window(w, spec)?.values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureMatrix {
        let mut m = FeatureMatrix::new(vec!["a".into(), "b".into(), "c".into()]);
        m.push_row(&[0.1, -2.5e-300, 1.0 / 3.0], Behaviour::Lying, "cow1", 0).unwrap();
        m.push_row(&[f64::MAX, 0.0, -7.0], Behaviour::DrinkingMilk, "cow2", 5).unwrap();
        m
    }

    #[test]
    fn csv_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("#schema:{}\n", m.schema_hash())));
        assert_eq!(FeatureMatrix::read_csv(&buf[..]).unwrap(), m);
    }

    #[test]
    fn binary_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(FeatureMatrix::read_binary(&buf[..]).unwrap(), m);
    }

    #[test]
    fn tampered_schema_rejected() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(",c\n", ",d\n", 1);
        assert!(matches!(FeatureMatrix::read_csv(text.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn schema_check_is_order_sensitive() {
        let m = sample();
        let swapped = vec!["b".to_string(), "a".into(), "c".into()];
        assert!(m.check_schema(&m.feature_names.clone()).is_ok());
        assert!(matches!(m.check_schema(&swapped), Err(Error::Schema(_))));
    }

    #[test]
    fn catch24_has_192_columns() {
        assert_eq!(catch24_names(&Catch24Spec::default()).len(), 192);
    }
}
