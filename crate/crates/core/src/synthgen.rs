//! Labelled synthetic accelerometer recordings built from behaviour
//! archetypes, with per-animal gain and mounting perturbations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behaviour::Behaviour;
use crate::error::{Error, Result};
use crate::ingest::{AnnotationTrack, Interval, Timestamp, TriAxialSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub behaviour: Behaviour,
    /// Gravity direction in sensor axes (g).
    pub base_orientation: [f64; 3],
    /// Standard deviation of the dynamic component per axis (g).
    pub dynamic_amplitude: f64,
    /// Quasi-periodic motion at this frequency; broadband noise when absent.
    pub dominant_freq_hz: Option<f64>,
    /// AR(1) coefficient shaping broadband motion, in `[0, 1)`.
    #[serde(default)]
    pub smoothing: f64,
    pub noise_std: f64,
    /// Length of one bout.
    pub duration_s: f64,
}

impl ArchetypeSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.dynamic_amplitude >= 0.0) {
            return Err(Error::Config(format!("{}: negative amplitude or noise", self.behaviour)));
        }
        if let Some(f) = self.dominant_freq_hz {
            if !(f > 0.0 && f < sample_rate_hz / 2.0) {
                return Err(Error::Config(format!(
                    "{}: dominant frequency {f} Hz outside (0, {})",
                    self.behaviour,
                    sample_rate_hz / 2.0
                )));
            }
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::Config(format!("{}: smoothing outside [0, 1)", self.behaviour)));
        }
        if !(self.duration_s * sample_rate_hz >= 1.0) {
            return Err(Error::Config(format!("{}: bout shorter than one sample", self.behaviour)));
        }
        Ok(())
    }
}

/// One archetype per behaviour: lying is flat and quiet, running strong and
/// broadband, grooming and drinking quasi-periodic, walking moderate and
/// aperiodic.
pub fn default_archetypes() -> Vec<ArchetypeSpec> {
    let a = |behaviour, base_orientation, dynamic_amplitude, dominant_freq_hz, smoothing, noise_std| ArchetypeSpec {
        behaviour,
        base_orientation,
        dynamic_amplitude,
        dominant_freq_hz,
        smoothing,
        noise_std,
        duration_s: 15.0,
    };
    vec![
        a(Behaviour::DrinkingMilk, [0.5, 0.0, 0.866], 0.2, Some(3.0), 0.0, 0.02),
        a(Behaviour::Grooming, [0.0, 0.5, 0.866], 0.25, Some(1.2), 0.0, 0.03),
        a(Behaviour::Lying, [0.2, 0.7, 0.686], 0.0, None, 0.0, 0.01),
        a(Behaviour::Running, [0.0, 0.0, 1.0], 0.8, None, 0.3, 0.05),
        a(Behaviour::Walking, [0.1, 0.0, 0.995], 0.3, None, 0.85, 0.03),
        a(Behaviour::Other, [-0.3, -0.3, 0.906], 0.1, Some(0.6), 0.0, 0.02),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub sample_rate_hz: f64,
    pub bouts_per_behaviour: usize,
    /// Log-scale standard deviation of the per-animal dynamic gain.
    pub gain_sigma: f64,
    pub max_orientation_jitter_deg: f64,
    pub start_time_s: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            sample_rate_hz: 25.0,
            bouts_per_behaviour: 2,
            gain_sigma: 0.15,
            max_orientation_jitter_deg: 10.0,
            start_time_s: 1_600_000_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthAnimal {
    pub series: TriAxialSeries,
    pub track: AnnotationTrack,
}

/// Rotation by `angle` radians about unit `axis` (Rodrigues).
fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

fn apply(r: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}

/// Per-axis scale of the dynamic component.
const AXIS_WEIGHTS: [f64; 3] = [1.0, 0.6, 0.8];

fn bout(spec: &ArchetypeSpec, n: usize, fs: f64, gain: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let amp = spec.dynamic_amplitude * gain;
    let mut dynamic = vec![[0.0; 3]; n];
    for (axis, &w) in AXIS_WEIGHTS.iter().enumerate() {
        match spec.dominant_freq_hz {
            Some(f) => {
                let f = f * rng.random_range(0.9..1.1);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let fm = rng.random_range(0.05..0.2);
                for (i, d) in dynamic.iter_mut().enumerate() {
                    let t = i as f64 / fs;
                    let envelope = 1.0 + 0.2 * (std::f64::consts::TAU * fm * t).sin();
                    d[axis] = amp * w * std::f64::consts::SQRT_2 * envelope * (std::f64::consts::TAU * f * t + phase).sin();
                }
            }
            None if amp > 0.0 => {
                let phi = spec.smoothing;
                let innov = (1.0 - phi * phi).sqrt();
                let mut state = std_normal.sample(rng);
                for d in dynamic.iter_mut() {
                    d[axis] = amp * w * state;
                    state = phi * state + innov * std_normal.sample(rng);
                }
            }
            None => {}
        }
    }
    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).unwrap();
    dynamic
        .into_iter()
        .map(|d| [0, 1, 2].map(|a| spec.base_orientation[a] + d[a] + noise.sample(rng)))
        .collect()
}

fn animal(specs: &[ArchetypeSpec], index: usize, seed: u64, opts: &SynthOptions) -> Result<SynthAnimal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let fs = opts.sample_rate_hz;
    let gain = LogNormal::new(0.0, opts.gain_sigma)
        .map_err(|e| Error::Config(format!("gain sigma: {e}")))?
        .sample(&mut rng);
    let axis = {
        let n = Normal::new(0.0, 1.0).unwrap();
        let v: [f64; 3] = [n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-12);
        v.map(|c| c / norm)
    };
    let angle = rng.random_range(0.0..=opts.max_orientation_jitter_deg).to_radians();
    let rot = rotation(axis, angle);

    let mut order: Vec<usize> = (0..specs.len()).flat_map(|s| std::iter::repeat_n(s, opts.bouts_per_behaviour)).collect();
    order.shuffle(&mut rng);

    let id = format!("synth{index:03}");
    let start = Timestamp::from_secs_f64(opts.start_time_s);
    let period_us = 1e6 / fs;
    let mut samples = Vec::new();
    let mut intervals = Vec::new();
    for s in order {
        let spec = &specs[s];
        let n = (spec.duration_s * fs).round() as usize;
        let first = samples.len();
        samples.extend(bout(spec, n, fs, gain, &mut rng).into_iter().map(|v| apply(&rot, v)));
        let at = |k: usize| Timestamp(start.0 + (k as f64 * period_us).round() as i64);
        intervals.push(Interval {
            behaviour: spec.behaviour,
            start: at(first),
            stop: at(samples.len()),
        });
    }
    Ok(SynthAnimal {
        series: TriAxialSeries::new(id.clone(), start, fs, samples)?,
        track: AnnotationTrack {
            animal_id: id,
            intervals,
        },
    })
}

/// Generate `n_animals` recordings, each a shuffled sequence of
/// `bouts_per_behaviour` bouts of every archetype.
pub fn generate_with(specs: &[ArchetypeSpec], n_animals: usize, seed: u64, opts: &SynthOptions) -> Result<Vec<SynthAnimal>> {
    if n_animals < 2 {
        return Err(Error::Config(format!("need at least 2 animals, got {n_animals}")));
    }
    if specs.is_empty() || opts.bouts_per_behaviour == 0 {
        return Err(Error::Config("no bouts to generate".into()));
    }
    if !(opts.gain_sigma >= 0.0 && opts.max_orientation_jitter_deg >= 0.0) {
        return Err(Error::Config("negative gain sigma or orientation jitter".into()));
    }
    for s in specs {
        s.validate(opts.sample_rate_hz)?;
    }
    (0..n_animals)
        .into_par_iter()
        .map(|i| animal(specs, i, seed, opts))
        .collect()
}

pub fn generate(specs: &[ArchetypeSpec], n_animals: usize, seed: u64) -> Result<Vec<SynthAnimal>> {
    generate_with(specs, n_animals, seed, &SynthOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::align;
    use crate::signal::{derive_channels, Channel};

    fn only(b: Behaviour) -> Vec<ArchetypeSpec> {
        default_archetypes().into_iter().filter(|a| a.behaviour == b).collect()
    }

    fn mean_odba(specs: &[ArchetypeSpec]) -> f64 {
        let animals = generate(specs, 2, 1).unwrap();
        let a = &animals[0];
        let cs = derive_channels(&align(&a.series, &a.track, 0.0).unwrap()).unwrap();
        let odba = cs.channel(Channel::Odba);
        odba.iter().sum::<f64>() / odba.len() as f64
    }

    #[test]
    fn lying_is_quiet_and_running_is_not() {
        let lying = mean_odba(&only(Behaviour::Lying));
        let running = mean_odba(&only(Behaviour::Running));
        assert!(lying < 0.05, "lying ODBA {lying}");
        assert!(running > 5.0 * lying, "running ODBA {running} vs lying {lying}");
    }

    #[test]
    fn annotations_cover_series_exactly() {
        for a in generate(&default_archetypes(), 3, 9).unwrap() {
            let total: f64 = a.track.intervals.iter().map(|i| i.duration_s()).sum();
            // every sample owns one sample period of annotation
            let span = a.series.len() as f64 / a.series.sample_rate_hz;
            assert!((total - span).abs() < 1e-9);
            for w in a.track.intervals.windows(2) {
                assert_eq!(w[0].stop, w[1].start);
            }
            let labels = align(&a.series, &a.track, 0.0).unwrap().labels;
            assert!(labels.iter().all(Option::is_some));
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate(&default_archetypes(), 3, 42).unwrap();
        assert_eq!(a, generate(&default_archetypes(), 3, 42).unwrap());
        assert_ne!(a, generate(&default_archetypes(), 3, 43).unwrap());
    }

    #[test]
    fn rotation_preserves_length() {
        let r = rotation([0.0, 0.6, 0.8], 0.3);
        let v = apply(&r, [0.2, 0.7, 0.686]);
        let n = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!((n(v) - n([0.2, 0.7, 0.686])).abs() < 1e-12);
    }
}
