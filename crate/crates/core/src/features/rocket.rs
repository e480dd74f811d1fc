//! MiniROCKET: 84 fixed length-9 kernels at exponentially spaced dilations,
//! biases taken from quantiles of training convolutions, and
//! proportion-of-positive-values pooling.

use std::borrow::Borrow;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extract_with, FeatureMatrix, FeatureVector};
use crate::error::{Error, Result};
use crate::windowing::LabeledWindow;

pub const NUM_KERNELS: usize = 84;
pub const KERNEL_LENGTH: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocketMode {
    /// One transform over all channels with per-kernel channel subsets.
    Multivariate,
    /// An independent univariate transform per channel.
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RocketSpec {
    pub target_features: usize,
    pub max_dilations_per_kernel: usize,
    pub mode: RocketMode,
}

impl Default for RocketSpec {
    fn default() -> Self {
        RocketSpec {
            target_features: 10_000,
            max_dilations_per_kernel: 32,
            mode: RocketMode::Multivariate,
        }
    }
}

/// All 3-subsets of `0..9` in lexicographic order: the `+2` taps.
pub fn kernel_position_sets() -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(NUM_KERNELS);
    for a in 0..KERNEL_LENGTH {
        for b in a + 1..KERNEL_LENGTH {
            for c in b + 1..KERNEL_LENGTH {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Kernel-dilation groups that share one fitted configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocketBlock {
    pub dilations: Vec<usize>,
    pub features_per_dilation: Vec<usize>,
    /// Per (dilation, kernel), dilation-major.
    pub channel_assignments: Vec<Vec<usize>>,
    /// Per (dilation, kernel), dilation-major.
    pub paddings: Vec<bool>,
    pub biases: Vec<f64>,
}

impl RocketBlock {
    pub fn num_features(&self) -> usize {
        self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocketModel {
    pub input_length: usize,
    pub num_channels: usize,
    pub mode: RocketMode,
    pub seed: u64,
    pub kernel_position_sets: Vec<[usize; 3]>,
    pub blocks: Vec<RocketBlock>,
    pub num_features: usize,
}

/// Dilations `floor(2^e)` for `e` evenly spaced in `[0, log2((L−1)/8)]` and
/// the feature count allotted to each.
pub fn fit_dilations(input_length: usize, num_features: usize, max_dilations_per_kernel: usize) -> (Vec<usize>, Vec<usize>) {
    let per_kernel = num_features / NUM_KERNELS;
    let true_max = per_kernel.min(max_dilations_per_kernel).max(1);
    let multiplier = per_kernel as f64 / true_max as f64;
    let max_exponent = ((input_length - 1) as f64 / (KERNEL_LENGTH - 1) as f64).log2();
    let step = if true_max > 1 {
        max_exponent / (true_max - 1) as f64
    } else {
        0.0
    };
    let mut dilations: Vec<usize> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..true_max {
        let e = if i + 1 == true_max && true_max > 1 { max_exponent } else { i as f64 * step };
        let d = 2f64.powf(e) as usize;
        match dilations.last() {
            Some(&last) if last == d => *counts.last_mut().unwrap() += 1,
            _ => {
                dilations.push(d);
                counts.push(1);
            }
        }
    }
    let mut per_dilation: Vec<usize> = counts.iter().map(|&c| (c as f64 * multiplier) as usize).collect();
    let mut remainder = per_kernel - per_dilation.iter().sum::<usize>();
    let mut i = 0;
    while remainder > 0 {
        per_dilation[i] += 1;
        remainder -= 1;
        i = (i + 1) % per_dilation.len();
    }
    (dilations, per_dilation)
}

/// `frac(k·φ)` for `k = 1..=n`.
pub fn quantile_sequence(n: usize) -> Vec<f64> {
    let phi = (5f64.sqrt() + 1.0) / 2.0;
    (1..=n).map(|k| (k as f64 * phi) % 1.0).collect()
}

/// Linear-interpolation quantile of unsorted data.
fn quantiles_of(values: &mut [f64], qs: &[f64]) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    qs.iter()
        .map(|q| {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
        })
        .collect()
}

/// Output range of a convolution: everything when padded, else the
/// positions where the kernel lies fully inside the signal.
fn output_range(len: usize, dilation: usize, padded: bool) -> std::ops::Range<usize> {
    let half = (KERNEL_LENGTH / 2) * dilation;
    if padded {
        0..len
    } else if 2 * half < len {
        half..len - half
    } else {
        0..0
    }
}

/// Zero-padded dilated convolution of the channel sum. Every tap carries
/// weight −1 and the three selected taps a further +3.
fn convolve(channels: &[Vec<f64>], subset: &[usize], dilation: usize, taps: &[usize; 3], out: &mut Vec<f64>) {
    let len = channels[0].len();
    let mut summed = vec![0.0; len];
    for &c in subset {
        for (s, v) in summed.iter_mut().zip(&channels[c]) {
            *s += v;
        }
    }
    out.clear();
    out.resize(len, 0.0);
    let half = (KERNEL_LENGTH / 2) as isize;
    for (t, o) in out.iter_mut().enumerate() {
        let mut alpha = 0.0;
        let mut gamma = 0.0;
        for j in 0..KERNEL_LENGTH {
            let idx = t as isize + (j as isize - half) * dilation as isize;
            if idx < 0 || idx >= len as isize {
                continue;
            }
            let v = summed[idx as usize];
            alpha += v;
            if taps.contains(&j) {
                gamma += v;
            }
        }
        *o = 3.0 * gamma - alpha;
    }
}

fn fit_block(
    windows: &[&LabeledWindow],
    allowed: &[usize],
    num_features: usize,
    spec: &RocketSpec,
    rng: &mut ChaCha8Rng,
) -> RocketBlock {
    let len = windows[0].len();
    let kernels = kernel_position_sets();
    let (dilations, features_per_dilation) = fit_dilations(len, num_features, spec.max_dilations_per_kernel);
    let n_combos = dilations.len() * NUM_KERNELS;
    let max_exp = ((allowed.len().min(KERNEL_LENGTH) + 1) as f64).log2();
    let channel_assignments: Vec<Vec<usize>> = (0..n_combos)
        .map(|_| {
            let k = (2f64.powf(rng.random_range(0.0..max_exp)) as usize).clamp(1, allowed.len());
            let mut pick: Vec<usize> = sample(rng, allowed.len(), k).into_iter().map(|i| allowed[i]).collect();
            pick.sort_unstable();
            pick
        })
        .collect();
    let per_kernel: usize = features_per_dilation.iter().sum();
    let quantiles = quantile_sequence(NUM_KERNELS * per_kernel);
    let mut biases = Vec::with_capacity(NUM_KERNELS * per_kernel);
    let mut paddings = Vec::with_capacity(n_combos);
    let mut conv = Vec::new();
    let mut q_start = 0;
    for (di, (&d, &nf)) in dilations.iter().zip(&features_per_dilation).enumerate() {
        for (ki, taps) in kernels.iter().enumerate() {
            let padded = (di + ki) % 2 == 0;
            paddings.push(padded);
            let w = windows[rng.random_range(0..windows.len())];
            convolve(&w.channels, &channel_assignments[di * NUM_KERNELS + ki], d, taps, &mut conv);
            let mut region = conv[output_range(len, d, padded)].to_vec();
            if region.is_empty() {
                region = conv.clone();
            }
            biases.extend(quantiles_of(&mut region, &quantiles[q_start..q_start + nf]));
            q_start += nf;
        }
    }
    RocketBlock {
        dilations,
        features_per_dilation,
        channel_assignments,
        paddings,
        biases,
    }
}

/// Fit on training windows. The realised feature count is the largest
/// multiple of 84 not above the target (per channel in per-channel mode).
pub fn rocket_fit(training: &[&LabeledWindow], spec: &RocketSpec, seed: u64) -> Result<RocketModel> {
    let first = training
        .first()
        .ok_or_else(|| Error::Validation("MiniROCKET needs at least one training window".into()))?;
    let len = first.len();
    let nch = first.channels.len();
    if len < KERNEL_LENGTH {
        return Err(Error::TooShort {
            needed: KERNEL_LENGTH,
            got: len,
        });
    }
    if training.iter().any(|w| w.len() != len || w.channels.len() != nch) {
        return Err(Error::Shape("training windows differ in shape".into()));
    }
    let blocks = match spec.mode {
        RocketMode::Multivariate => {
            if spec.target_features < NUM_KERNELS {
                return Err(Error::Config(format!("target features must be at least {NUM_KERNELS}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let all: Vec<usize> = (0..nch).collect();
            vec![fit_block(training, &all, spec.target_features, spec, &mut rng)]
        }
        RocketMode::PerChannel => {
            let per = spec.target_features / nch;
            if per < NUM_KERNELS {
                return Err(Error::Config(format!(
                    "per-channel mode needs at least {} target features",
                    NUM_KERNELS * nch
                )));
            }
            (0..nch)
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
                    fit_block(training, &[c], per, spec, &mut rng)
                })
                .collect()
        }
    };
    let num_features = blocks.iter().map(RocketBlock::num_features).sum();
    Ok(RocketModel {
        input_length: len,
        num_channels: nch,
        mode: spec.mode,
        seed,
        kernel_position_sets: kernel_position_sets(),
        blocks,
        num_features,
    })
}

impl RocketModel {
    pub fn feature_names(&self) -> Vec<String> {
        let width = self.num_features.to_string().len();
        (0..self.num_features).map(|i| format!("rocket__{i:0width$}")).collect()
    }

    pub fn transform_values(&self, window: &LabeledWindow) -> Result<Vec<f64>> {
        if window.len() != self.input_length || window.channels.len() != self.num_channels {
            return Err(Error::Shape(format!(
                "window is {}×{}, model expects {}×{}",
                window.channels.len(),
                window.len(),
                self.num_channels,
                self.input_length
            )));
        }
        let len = self.input_length;
        let mut out = Vec::with_capacity(self.num_features);
        let mut conv = Vec::new();
        for block in &self.blocks {
            let mut b = 0;
            for (di, (&d, &nf)) in block.dilations.iter().zip(&block.features_per_dilation).enumerate() {
                for (ki, taps) in self.kernel_position_sets.iter().enumerate() {
                    let combo = di * NUM_KERNELS + ki;
                    convolve(&window.channels, &block.channel_assignments[combo], d, taps, &mut conv);
                    let mut range = output_range(len, d, block.paddings[combo]);
                    if range.is_empty() {
                        range = 0..len;
                    }
                    let region = &conv[range];
                    for &bias in &block.biases[b..b + nf] {
                        let pos = region.iter().filter(|&&v| v > bias).count();
                        out.push(pos as f64 / region.len() as f64);
                    }
                    b += nf;
                }
            }
        }
        Ok(out)
    }

    pub fn transform(&self, window: &LabeledWindow) -> Result<FeatureVector> {
        Ok(FeatureVector {
            names: self.feature_names(),
            values: self.transform_values(window)?,
        })
    }

    pub fn transform_matrix<W: Borrow<LabeledWindow> + Sync>(&self, windows: &[W]) -> Result<FeatureMatrix> {
        extract_with(windows, self.feature_names(), |w| self.transform_values(w))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RocketModel> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::behaviour::Behaviour;
    use crate::ingest::Timestamp;
    use proptest::prelude::*;

    fn window(seed: u64, len: usize, shift: f64) -> LabeledWindow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LabeledWindow {
            animal_id: "a".into(),
            window_index: seed as usize,
            start_time: Timestamp(0),
            channels: (0..8)
                .map(|_| (0..len).map(|_| rng.random_range(-64i32..64) as f64 / 64.0 + shift).collect())
                .collect(),
            label: Behaviour::Lying,
        }
    }

    #[test]
    fn kernel_set_has_84_members() {
        let k = kernel_position_sets();
        assert_eq!(k.len(), 84);
        let uniq: std::collections::HashSet<_> = k.iter().collect();
        assert_eq!(uniq.len(), 84);
    }

    #[test]
    fn dilations_for_window_of_75() {
        let (d, f) = fit_dilations(75, 10_000, 32);
        assert_eq!(d, (1..=9).collect::<Vec<_>>());
        assert_eq!(f.iter().sum::<usize>(), 119);
        assert!(f.iter().all(|&c| c >= 1));
    }

    #[test]
    fn realised_feature_count() {
        let ws: Vec<LabeledWindow> = (0..3).map(|s| window(s, 75, 0.0)).collect();
        let refs: Vec<&LabeledWindow> = ws.iter().collect();
        let m = rocket_fit(&refs, &RocketSpec::default(), 1).unwrap();
        assert_eq!(m.num_features, 9996);
        assert_eq!(m.transform_values(&ws[0]).unwrap().len(), 9996);
        assert!(m.blocks[0].dilations.iter().all(|&d| (1..=9).contains(&d)));
        let pc = rocket_fit(&refs, &RocketSpec { mode: RocketMode::PerChannel, ..Default::default() }, 1).unwrap();
        assert_eq!(pc.num_features, 8 * 1176);
    }

    #[test]
    fn zero_window_with_zero_bias_gives_zero() {
        let ws = vec![window(0, 75, 0.0)];
        let refs: Vec<&LabeledWindow> = ws.iter().collect();
        let mut m = rocket_fit(&refs, &RocketSpec { target_features: 84, ..Default::default() }, 0).unwrap();
        m.blocks[0].biases.iter_mut().for_each(|b| *b = 0.0);
        let mut z = ws[0].clone();
        z.channels.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v = 0.0));
        assert!(m.transform_values(&z).unwrap().iter().all(|&v| v == 0.0));
        m.blocks[0].biases.iter_mut().for_each(|b| *b = -1e9);
        assert!(m.transform_values(&z).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn too_short_and_shape_errors() {
        let ws = vec![window(0, 8, 0.0)];
        let refs: Vec<&LabeledWindow> = ws.iter().collect();
        assert!(matches!(rocket_fit(&refs, &RocketSpec::default(), 0), Err(Error::TooShort { .. })));
        let ws = vec![window(0, 75, 0.0)];
        let refs: Vec<&LabeledWindow> = ws.iter().collect();
        let m = rocket_fit(&refs, &RocketSpec { target_features: 840, ..Default::default() }, 0).unwrap();
        assert!(matches!(m.transform_values(&window(1, 74, 0.0)), Err(Error::Shape(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn constant_shift_invariance_on_unpadded_features(seed in 0u64..1000, c in -4i32..4) {
            let base: Vec<LabeledWindow> = (0..4).map(|s| window(seed + s, 40, 0.0)).collect();
            let moved: Vec<LabeledWindow> = (0..4).map(|s| window(seed + s, 40, c as f64)).collect();
            let spec = RocketSpec { target_features: 840, ..Default::default() };
            let m1 = rocket_fit(&base.iter().collect::<Vec<_>>(), &spec, seed).unwrap();
            let m2 = rocket_fit(&moved.iter().collect::<Vec<_>>(), &spec, seed).unwrap();
            let probe = window(seed + 99, 40, 0.0);
            let probe2 = window(seed + 99, 40, c as f64);
            let (a, b) = (m1.transform_values(&probe).unwrap(), m2.transform_values(&probe2).unwrap());
            let blk = &m1.blocks[0];
            let mut f = 0;
            for (di, &nf) in blk.features_per_dilation.iter().enumerate() {
                for ki in 0..NUM_KERNELS {
                    if !blk.paddings[di * NUM_KERNELS + ki] {
                        prop_assert_eq!(&a[f..f + nf], &b[f..f + nf]);
                    }
                    f += nf;
                }
            }
            prop_assert!(a.iter().chain(&b).all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
