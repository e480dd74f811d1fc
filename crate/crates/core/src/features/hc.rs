//! Hand-crafted statistics: 11 per channel, 88 per window.

use serde::{Deserialize, Serialize};

use super::spectral::{spectral_entropy, WelchSpec};
use super::FeatureVector;
use crate::signal::Channel;
use crate::windowing::LabeledWindow;

pub const HC_FEATURES: [&str; 11] = [
    "mean",
    "median",
    "min",
    "max",
    "std",
    "q1",
    "q3",
    "spectral_entropy",
    "motion_variation",
    "skewness",
    "kurtosis",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HcSpec {
    pub welch: WelchSpec,
}

pub fn hc_names() -> Vec<String> {
    Channel::ALL
        .iter()
        .flat_map(|c| HC_FEATURES.iter().map(move |f| format!("{}__{f}", c.name())))
        .collect()
}

/// All 88 features of one window, channel-major.
pub fn hc_features(window: &LabeledWindow, sample_rate_hz: f64, spec: &HcSpec) -> FeatureVector {
    let values = window
        .channels
        .iter()
        .flat_map(|c| channel_features(c, sample_rate_hz, spec))
        .collect();
    FeatureVector {
        names: hc_names(),
        values,
    }
}

/// The 11 statistics of one channel in [`HC_FEATURES`] order.
pub fn channel_features(x: &[f64], sample_rate_hz: f64, spec: &HcSpec) -> [f64; 11] {
    let n = x.len();
    if n == 0 {
        return [0.0; 11];
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let constant = s[0] == s[n - 1];
    [
        if constant { s[0] } else { mean(x) },
        rank_value(&s, (n as f64 + 1.0) / 2.0),
        s[0],
        s[n - 1],
        if constant { 0.0 } else { std_pop(x) },
        rank_value(&s, (n as f64 + 1.0) / 4.0),
        rank_value(&s, 3.0 * (n as f64 + 1.0) / 4.0),
        spectral_entropy(x, sample_rate_hz, &spec.welch),
        motion_variation(x),
        skewness(x),
        kurtosis(x),
    ]
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_pop(x: &[f64]) -> f64 {
    central_moment(x, 2).sqrt()
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

/// Order statistic at 1-based fractional `rank`, linearly interpolated and
/// clamped to `[1, N]`.
fn rank_value(sorted: &[f64], rank: f64) -> f64 {
    let n = sorted.len();
    let r = rank.clamp(1.0, n as f64);
    let lo = r.floor() as usize;
    let frac = r - lo as f64;
    if lo >= n || frac == 0.0 {
        return sorted[lo - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

/// Mean absolute successive difference, `(1/M) Σ |x[i+1] − x[i]|`.
pub fn motion_variation(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / x.len() as f64
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

pub fn skewness(x: &[f64]) -> f64 {
    if x.is_empty() || is_constant(x) {
        return 0.0;
    }
    let v = central_moment(x, 2);
    if !(v > 0.0) {
        return 0.0;
    }
    central_moment(x, 3) / v.powf(1.5)
}

/// Non-excess kurtosis `m4 / m2²`.
pub fn kurtosis(x: &[f64]) -> f64 {
    if x.is_empty() || is_constant(x) {
        return 0.0;
    }
    let v = central_moment(x, 2);
    if !(v > 0.0) {
        return 0.0;
    }
    central_moment(x, 4) / (v * v)
}
