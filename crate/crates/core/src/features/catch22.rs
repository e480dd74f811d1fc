//! The 22 canonical time-series characteristics, plus mean and standard
//! deviation ("catch24").
//!
//! Each feature follows the published C reference implementation step for
//! step, including its integer arithmetic, tie rules and default values, so
//! that outputs agree with the reference to floating-point rounding.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature names in output order.
pub const CATCH22_NAMES: [&str; 22] = [
    "DN_HistogramMode_5",
    "DN_HistogramMode_10",
    "SB_BinaryStats_mean_longstretch1",
    "DN_OutlierInclude_p_001_mdrmd",
    "DN_OutlierInclude_n_001_mdrmd",
    "CO_f1ecac",
    "CO_FirstMin_ac",
    "SP_Summaries_welch_rect_area_5_1",
    "SP_Summaries_welch_rect_centroid",
    "FC_LocalSimple_mean3_stderr",
    "CO_trev_1_num",
    "CO_HistogramAMI_even_2_5",
    "IN_AutoMutualInfoStats_40_gaussian_fmmi",
    "MD_hrv_classic_pnn40",
    "SB_BinaryStats_diff_longstretch0",
    "SB_MotifThree_quantile_hh",
    "FC_LocalSimple_mean1_tauresrat",
    "CO_Embed2_Dist_tau_d_expfit_meandiff",
    "SC_FluctAnal_2_dfa_50_1_2_logi_prop_r1",
    "SC_FluctAnal_2_rsrangefit_50_1_logi_prop_r1",
    "SB_TransitionMatrix_3ac_sumdiagcov",
    "PD_PeriodicityWang_th0_01",
];

pub const MEAN_NAME: &str = "DN_Mean";
pub const STD_NAME: &str = "DN_Spread_Std";

/// Shortest series accepted.
pub const MIN_LENGTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Catch24Spec {
    pub include_mean_std: bool,
    pub zscore_input: bool,
}

impl Default for Catch24Spec {
    fn default() -> Self {
        Catch24Spec {
            include_mean_std: true,
            zscore_input: true,
        }
    }
}

impl Catch24Spec {
    pub fn names(&self) -> Vec<&'static str> {
        let mut v = CATCH22_NAMES.to_vec();
        if self.include_mean_std {
            v.push(MEAN_NAME);
            v.push(STD_NAME);
        }
        v
    }
}

/// Catch22 (+ mean and std when enabled) of one channel.
///
/// A constant channel yields 0 for each of the 22 features; any other
/// non-finite value is also reported as 0.
pub fn catch24_vector(x: &[f64], spec: &Catch24Spec) -> Result<Vec<f64>> {
    let n = x.len();
    if n < MIN_LENGTH {
        return Err(Error::TooShort {
            needed: MIN_LENGTH,
            got: n,
        });
    }
    let constant = x.iter().all(|&v| v == x[0]);
    let mut out = if constant {
        vec![0.0; 22]
    } else if spec.zscore_input {
        catch22_raw(&zscore(x)).to_vec()
    } else {
        catch22_raw(x).to_vec()
    };
    for v in &mut out {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    if spec.include_mean_std {
        out.push(mean(x));
        out.push(if constant { 0.0 } else { stddev(x) });
    }
    Ok(out)
}

/// The 22 features on `y` as given, without any fallback handling.
pub fn catch22_raw(y: &[f64]) -> [f64; 22] {
    let ac = autocorrs(y);
    [
        histogram_mode(y, 5),
        histogram_mode(y, 10),
        binary_stats_mean_longstretch1(y),
        outlier_include(y, 1.0),
        outlier_include(y, -1.0),
        f1ecac(&ac, y.len()),
        first_min_ac(&ac, y.len()) as f64,
        welch_rect(y, WelchSummary::Area5_1),
        welch_rect(y, WelchSummary::Centroid),
        local_simple_mean3_stderr(y),
        trev_1_num(y),
        histogram_ami_even_2_5(y),
        auto_mutual_info_40_gaussian_fmmi(y),
        hrv_classic_pnn40(y),
        binary_stats_diff_longstretch0(y),
        motif_three_quantile_hh(y),
        local_simple_mean1_tauresrat(y),
        embed2_dist_tau_d_expfit_meandiff(y),
        fluct_anal_2_50_1_logi_prop_r1(y, 2, Fluct::Dfa),
        fluct_anal_2_50_1_logi_prop_r1(y, 1, Fluct::RsRangeFit),
        transition_matrix_3ac_sumdiagcov(y),
        periodicity_wang_th0_01(y) as f64,
    ]
}

// ---------------------------------------------------------------------------
// shared statistics

pub(crate) fn mean(a: &[f64]) -> f64 {
    let mut m = 0.0;
    for v in a {
        m += v;
    }
    m / a.len() as f64
}

/// Sample standard deviation (divisor `n − 1`).
pub(crate) fn stddev(a: &[f64]) -> f64 {
    let m = mean(a);
    let mut sd = 0.0;
    for v in a {
        sd += (v - m).powi(2);
    }
    (sd / (a.len() as f64 - 1.0)).sqrt()
}

pub fn zscore(a: &[f64]) -> Vec<f64> {
    let m = mean(a);
    let sd = stddev(a);
    a.iter().map(|v| (v - m) / sd).collect()
}

fn sorted(a: &[f64]) -> Vec<f64> {
    let mut b = a.to_vec();
    b.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    b
}

fn median(a: &[f64]) -> f64 {
    let n = a.len();
    if n == 0 {
        return f64::NAN;
    }
    let b = sorted(a);
    if n % 2 == 1 {
        b[n / 2]
    } else {
        (b[n / 2] + b[n / 2 - 1]) / 2.0
    }
}

fn min_(a: &[f64]) -> f64 {
    a.iter().copied().fold(a[0], |m, v| if v < m { v } else { m })
}

fn max_(a: &[f64]) -> f64 {
    a.iter().copied().fold(a[0], |m, v| if v > m { v } else { m })
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut nom, mut dx, mut dy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        nom += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    nom / (dx * dy).sqrt()
}

fn cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut c = 0.0;
    for (a, b) in x.iter().zip(y) {
        c += (a - mx) * (b - my);
    }
    c / (x.len() as f64 - 1.0)
}

fn autocov_lag(x: &[f64], lag: usize) -> f64 {
    let n = x.len() - lag;
    let mut c = 0.0;
    for i in 0..n {
        c += x[i] * x[i + lag];
    }
    c / n as f64
}

/// Least-squares line `y = m·x + b`; `(0, 0)` when `x` is degenerate.
fn linreg(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mut sx, mut sx2, mut sxy, mut sy) = (0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sx += a;
        sx2 += a * a;
        sxy += a * b;
        sy += b;
    }
    let denom = n * sx2 - sx * sx;
    if denom == 0.0 {
        return (0.0, 0.0);
    }
    ((n * sxy - sx * sy) / denom, (sy * sx2 - sx * sxy) / denom)
}

fn nextpow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Quantile with the reference's `(n·q − 0.5)` positioning.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let lim = 0.5 / n as f64;
    if q < lim {
        return sorted[0];
    }
    if q > 1.0 - lim {
        return sorted[n - 1];
    }
    let idx = n as f64 * q - 0.5;
    let (l, r) = (idx.floor() as usize, idx.ceil() as usize);
    if l == r {
        // the reference divides 0 by 0 here and yields NaN
        return f64::NAN;
    }
    sorted[l] + (idx - l as f64) * (sorted[r] - sorted[l]) / (r - l) as f64
}

/// Labels `1..=groups` by equiprobable quantile bins.
fn coarse_grain_quantile(y: &[f64], groups: usize) -> Vec<usize> {
    let s = sorted(y);
    let step = 1.0 / groups as f64;
    let mut q = 0.0;
    let mut th = Vec::with_capacity(groups + 1);
    for _ in 0..=groups {
        th.push(quantile(&s, q));
        q += step;
    }
    th[0] -= 1.0;
    let mut labels = vec![0usize; y.len()];
    for i in 0..groups {
        for (j, &v) in y.iter().enumerate() {
            if v > th[i] && v <= th[i + 1] {
                labels[j] = i + 1;
            }
        }
    }
    labels
}

/// Normalised autocorrelation at lags `0..=n` (lag `n` is always 0),
/// computed with a zero-padded FFT of length `2·nextpow2(n)`.
pub fn autocorrs(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let m = mean(y);
    let nfft = nextpow2(n) << 1;
    let mut buf: Vec<Complex<f64>> = (0..nfft)
        .map(|i| Complex::new(if i < n { y[i] - m } else { 0.0 }, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(nfft).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(nfft).process(&mut buf);
    let d = buf[0].re;
    let mut out: Vec<f64> = buf[..n].iter().map(|c| c.re / d).collect();
    out.push(0.0);
    out
}

/// Biased autocorrelation at `lag`: `Σ(xᵢ−μ)(xᵢ₊ₗ−μ) / (N·σ²)`.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let ac = autocorrs(x);
    ac.get(lag).copied().unwrap_or(0.0)
}

/// First lag at which the autocorrelation is no longer positive.
fn first_zero(ac: &[f64], maxtau: usize) -> usize {
    let mut k = 0;
    while k < ac.len() && ac[k] > 0.0 && k < maxtau {
        k += 1;
    }
    k
}

fn co_firstzero(y: &[f64], maxtau: usize) -> usize {
    first_zero(&autocorrs(y), maxtau)
}

// ---------------------------------------------------------------------------
// distribution

/// Returns bin counts and edges.
fn histcounts(y: &[f64], nbins: usize) -> (Vec<usize>, Vec<f64>) {
    let (mn, mx) = (min_(y), max_(y));
    let step = (mx - mn) / nbins as f64;
    let mut counts = vec![0usize; nbins];
    for &v in y {
        let idx = ((v - mn) / step) as i64;
        counts[idx.clamp(0, nbins as i64 - 1) as usize] += 1;
    }
    let edges = (0..=nbins).map(|i| i as f64 * step + mn).collect();
    (counts, edges)
}

fn histogram_mode(y: &[f64], nbins: usize) -> f64 {
    let (counts, edges) = histcounts(y, nbins);
    let mut max_count = 0usize;
    let mut num_maxs = 1usize;
    let mut out = 0.0;
    for i in 0..nbins {
        let centre = (edges[i] + edges[i + 1]) * 0.5;
        if counts[i] > max_count {
            max_count = counts[i];
            num_maxs = 1;
            out = centre;
        } else if counts[i] == max_count {
            num_maxs += 1;
            out += centre;
        }
    }
    out / num_maxs as f64
}

fn outlier_include(y: &[f64], sign: f64) -> f64 {
    let n = y.len();
    let inc = 0.01;
    if y.iter().all(|&v| v == y[0]) {
        return 0.0;
    }
    let work: Vec<f64> = y.iter().map(|v| sign * v).collect();
    let tot = work.iter().filter(|&&v| v >= 0.0).count();
    let max_val = max_(&work);
    if max_val < inc {
        return 0.0;
    }
    let n_thresh = (max_val / inc) as usize + 1;
    let mut ms1 = vec![0.0; n_thresh];
    let mut ms3 = vec![0.0; n_thresh];
    let mut ms4 = vec![0.0; n_thresh];
    let mut r: Vec<f64> = Vec::with_capacity(n);
    for j in 0..n_thresh {
        r.clear();
        let th = j as f64 * inc;
        r.extend((0..n).filter(|&i| work[i] >= th).map(|i| (i + 1) as f64));
        let high = r.len();
        ms1[j] = match high {
            0 => -0.0,
            1 => f64::NAN,
            _ => {
                let dt: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
                mean(&dt)
            }
        };
        ms3[j] = (high as f64 - 1.0) * 100.0 / tot as f64;
        ms4[j] = median(&r) / (n as f64 / 2.0) - 1.0;
    }
    let mut mj = 0;
    let mut fbi = n_thresh - 1;
    for i in 0..n_thresh {
        if ms3[i] > 2.0 {
            mj = i;
        }
        if ms1[n_thresh - 1 - i].is_nan() {
            fbi = n_thresh - 1 - i;
        }
    }
    let trim = mj.min(fbi);
    median(&ms4[..=trim])
}

// ---------------------------------------------------------------------------
// autocorrelation and forecasting

fn f1ecac(ac: &[f64], n: usize) -> f64 {
    let thresh = 1.0 / E;
    for i in 0..n.saturating_sub(2) {
        if ac[i + 1] < thresh {
            let m = ac[i + 1] - ac[i];
            let dy = thresh - ac[i];
            return i as f64 + dy / m;
        }
    }
    n as f64
}

fn first_min_ac(ac: &[f64], n: usize) -> usize {
    for i in 1..n.saturating_sub(1) {
        if ac[i] < ac[i - 1] && ac[i] < ac[i + 1] {
            return i;
        }
    }
    n
}

fn trev_1_num(y: &[f64]) -> f64 {
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).powi(3)).collect();
    mean(&d)
}

fn local_simple_residuals(y: &[f64], train: usize) -> Vec<f64> {
    (0..y.len() - train)
        .map(|i| {
            let mut est = 0.0;
            for v in &y[i..i + train] {
                est += v;
            }
            y[i + train] - est / train as f64
        })
        .collect()
}

fn local_simple_mean3_stderr(y: &[f64]) -> f64 {
    stddev(&local_simple_residuals(y, 3))
}

fn local_simple_mean1_tauresrat(y: &[f64]) -> f64 {
    let res = local_simple_residuals(y, 1);
    let r = co_firstzero(&res, res.len()) as f64;
    let t = co_firstzero(y, y.len()) as f64;
    r / t
}

fn auto_mutual_info_40_gaussian_fmmi(y: &[f64]) -> f64 {
    let n = y.len();
    let tau = 40.min((n as f64 / 2.0).ceil() as usize);
    let ami: Vec<f64> = (0..tau)
        .map(|i| {
            let lag = i + 1;
            let ac = corr(&y[..n - lag], &y[lag..]);
            -0.5 * (1.0 - ac * ac).ln()
        })
        .collect();
    for i in 1..tau.saturating_sub(1) {
        if ami[i] < ami[i - 1] && ami[i] < ami[i + 1] {
            return i as f64;
        }
    }
    tau as f64
}

fn histogram_ami_even_2_5(y: &[f64]) -> f64 {
    const TAU: usize = 2;
    const NB: usize = 5;
    let n = y.len();
    let (mx, mn) = (max_(y), min_(y));
    let step = (mx - mn + 0.2) / NB as f64;
    let edges: Vec<f64> = (0..=NB).map(|i| mn + step * i as f64 - 0.1).collect();
    let assign = |v: f64| edges.iter().position(|&e| v < e).unwrap_or(0);
    let mut joint = [[0.0f64; NB]; NB];
    let mut total = 0.0;
    for i in 0..n - TAU {
        let (b1, b2) = (assign(y[i]), assign(y[i + TAU]));
        if (1..=NB).contains(&b1) && (1..=NB).contains(&b2) {
            joint[b1 - 1][b2 - 1] += 1.0;
            total += 1.0;
        }
    }
    let mut p1 = [0.0; NB];
    let mut p2 = [0.0; NB];
    for a in 0..NB {
        for b in 0..NB {
            joint[a][b] /= total;
            p1[a] += joint[a][b];
            p2[b] += joint[a][b];
        }
    }
    let mut ami = 0.0;
    for b in 0..NB {
        for a in 0..NB {
            let p = joint[a][b];
            if p > 0.0 {
                ami += p * (p / (p1[a] * p2[b])).ln();
            }
        }
    }
    ami
}

// ---------------------------------------------------------------------------
// successive differences and symbolic dynamics

fn hrv_classic_pnn40(y: &[f64]) -> f64 {
    let c = y.windows(2).filter(|w| (w[1] - w[0]).abs() * 1000.0 > 40.0).count();
    c as f64 / (y.len() - 1) as f64
}

/// Fraction of successive differences whose magnitude exceeds `0.04·σ`
/// (σ with divisor `n − 1`). Constant input gives 0.
pub fn pnn40(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let sd = stddev(x);
    let c = x.windows(2).filter(|w| (w[1] - w[0]).abs() > 0.04 * sd).count();
    c as f64 / (x.len() - 1) as f64
}

fn binary_stats_mean_longstretch1(y: &[f64]) -> f64 {
    let n = y.len();
    let m = mean(y);
    let bin: Vec<u8> = y[..n - 1].iter().map(|v| u8::from(v - m > 0.0)).collect();
    let mut max_stretch = 0usize;
    let mut last = 0usize;
    for i in 0..n - 1 {
        if bin[i] == 0 || i == n - 2 {
            max_stretch = max_stretch.max(i - last);
            last = i;
        }
    }
    max_stretch as f64
}

fn binary_stats_diff_longstretch0(y: &[f64]) -> f64 {
    let n = y.len();
    let bin: Vec<u8> = y.windows(2).map(|w| u8::from(w[1] - w[0] >= 0.0)).collect();
    let mut max_stretch = 0usize;
    let mut last = 0usize;
    for i in 0..n - 1 {
        if bin[i] == 1 || i == n - 2 {
            max_stretch = max_stretch.max(i - last);
            last = i;
        }
    }
    max_stretch as f64
}

fn f_entropy(a: &[f64]) -> f64 {
    -a.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

fn motif_three_quantile_hh(y: &[f64]) -> f64 {
    let n = y.len();
    let yt = coarse_grain_quantile(y, 3);
    let mut hh = 0.0;
    for i in 1..=3 {
        let mut r1: Vec<usize> = (0..n).filter(|&j| yt[j] == i).collect();
        if r1.last() == Some(&(n - 1)) {
            r1.pop();
        }
        let out2: Vec<f64> = (1..=3)
            .map(|j| r1.iter().filter(|&&k| yt[k + 1] == j).count() as f64 / (n as f64 - 1.0))
            .collect();
        hh += f_entropy(&out2);
    }
    hh
}

fn transition_matrix_3ac_sumdiagcov(y: &[f64]) -> f64 {
    let n = y.len();
    if y.iter().all(|&v| v == y[0]) {
        return f64::NAN;
    }
    let tau = co_firstzero(y, n).max(1);
    let n_down = (n - 1) / tau + 1;
    let down: Vec<f64> = (0..n_down).map(|i| y[i * tau]).collect();
    let cg = coarse_grain_quantile(&down, 3);
    let mut t = [[0.0f64; 3]; 3];
    for j in 0..n_down - 1 {
        if cg[j] == 0 || cg[j + 1] == 0 {
            continue;
        }
        t[cg[j] - 1][cg[j + 1] - 1] += 1.0;
    }
    for row in t.iter_mut() {
        for v in row.iter_mut() {
            *v /= (n_down - 1) as f64;
        }
    }
    (0..3)
        .map(|c| {
            let col = [t[0][c], t[1][c], t[2][c]];
            cov(&col, &col)
        })
        .sum()
}

// ---------------------------------------------------------------------------
// embedding, spectrum, scaling, periodicity

fn num_bins_auto(y: &[f64]) -> usize {
    let sd = stddev(y);
    if sd < 0.001 {
        return 0;
    }
    ((max_(y) - min_(y)) / (3.5 * sd / (y.len() as f64).powf(1.0 / 3.0))).ceil() as usize
}

fn embed2_dist_tau_d_expfit_meandiff(y: &[f64]) -> f64 {
    let n = y.len();
    let mut tau = co_firstzero(y, n);
    if tau as f64 > n as f64 / 10.0 {
        tau = n / 10;
    }
    let d: Vec<f64> = (0..n - tau - 1)
        .map(|i| ((y[i + 1] - y[i]).powi(2) + (y[i + tau] - y[i + tau + 1]).powi(2)).sqrt())
        .collect();
    if d.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    let l = mean(&d);
    let nbins = num_bins_auto(&d);
    if nbins == 0 {
        return 0.0;
    }
    let (counts, edges) = histcounts(&d, nbins);
    let diffs: Vec<f64> = (0..nbins)
        .map(|i| {
            let norm = counts[i] as f64 / d.len() as f64;
            let expf = ((-(edges[i] + edges[i + 1]) * 0.5 / l).exp() / l).max(0.0);
            (norm - expf).abs()
        })
        .collect();
    mean(&diffs)
}

#[derive(Clone, Copy)]
enum WelchSummary {
    Area5_1,
    Centroid,
}

fn welch_rect(y: &[f64], what: WelchSummary) -> f64 {
    // truncated as in the reference implementation
    #[allow(clippy::approx_constant)]
    const PI: f64 = 3.14159265359;
    let n = y.len();
    let nfft = nextpow2(n);
    let m = mean(y);
    let mut buf: Vec<Complex<f64>> = (0..nfft)
        .map(|i| Complex::new(if i < n { y[i] - m } else { 0.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let nout = nfft / 2 + 1;
    let df = 1.0 / nfft as f64;
    let kmu = n as f64;
    let mut w = Vec::with_capacity(nout);
    let mut sw = Vec::with_capacity(nout);
    for i in 0..nout {
        let mut p = buf[i].norm_sqr() / kmu;
        if i > 0 && i < nout - 1 {
            p *= 2.0;
        }
        w.push(2.0 * PI * i as f64 * df);
        let s = p / (2.0 * PI);
        if s.is_infinite() {
            return 0.0;
        }
        sw.push(s);
    }
    let dw = w[1] - w[0];
    match what {
        WelchSummary::Centroid => {
            let mut cs = Vec::with_capacity(nout);
            let mut acc = 0.0;
            for s in &sw {
                acc += s;
                cs.push(acc);
            }
            let half = cs[nout - 1] * 0.5;
            cs.iter().position(|&c| c > half).map_or(0.0, |i| w[i])
        }
        WelchSummary::Area5_1 => {
            let mut a = 0.0;
            for s in &sw[..nout / 5] {
                a += s;
            }
            a * dw
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Fluct {
    Dfa,
    RsRangeFit,
}

fn fluct_anal_2_50_1_logi_prop_r1(y: &[f64], lag: usize, how: Fluct) -> f64 {
    let size = y.len();
    let lin_low = 5f64.ln();
    let lin_high = ((size / 2) as f64).ln();
    const STEPS: usize = 50;
    let step = (lin_high - lin_low) / (STEPS - 1) as f64;
    let mut tau = [0usize; STEPS];
    for (i, t) in tau.iter_mut().enumerate() {
        *t = (lin_low + i as f64 * step).exp().round() as usize;
    }
    let mut n_tau = STEPS;
    for i in 0..STEPS - 1 {
        while tau[i] == tau[i + 1] && i < n_tau - 1 {
            for j in i + 1..STEPS - 1 {
                tau[j] = tau[j + 1];
            }
            n_tau -= 1;
        }
    }
    if n_tau < 12 {
        return 0.0;
    }
    let size_cs = size / lag;
    let mut ycs = vec![0.0; size_cs];
    ycs[0] = y[0];
    for i in 0..size_cs - 1 {
        ycs[i + 1] = ycs[i] + y[(i + 1) * lag];
    }
    let xreg: Vec<f64> = (1..=tau[n_tau - 1]).map(|i| i as f64).collect();
    let mut f = vec![0.0; n_tau];
    for i in 0..n_tau {
        let t = tau[i];
        let n_buf = size_cs / t;
        let mut buffer = vec![0.0; t];
        for j in 0..n_buf {
            let seg = &ycs[j * t..j * t + t];
            let (m, b) = linreg(&xreg[..t], seg);
            for k in 0..t {
                buffer[k] = seg[k] - (m * (k + 1) as f64 + b);
            }
            match how {
                Fluct::RsRangeFit => f[i] += (max_(&buffer) - min_(&buffer)).powi(2),
                Fluct::Dfa => {
                    for v in &buffer {
                        f[i] += v * v;
                    }
                }
            }
        }
        f[i] = match how {
            Fluct::RsRangeFit => (f[i] / n_buf as f64).sqrt(),
            Fluct::Dfa => (f[i] / (n_buf * t) as f64).sqrt(),
        };
    }
    let logtt: Vec<f64> = tau[..n_tau].iter().map(|&t| (t as f64).ln()).collect();
    let logff: Vec<f64> = f.iter().map(|v| v.ln()).collect();
    let ntt = n_tau;
    const MIN_POINTS: usize = 6;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sserr: Vec<f64> = (MIN_POINTS..ntt - MIN_POINTS + 1)
        .map(|i| {
            let (m1, b1) = linreg(&logtt[..i], &logff[..i]);
            let (m2, b2) = linreg(&logtt[i - 1..], &logff[i - 1..]);
            let r1: Vec<f64> = (0..i).map(|j| logtt[j] * m1 + b1 - logff[j]).collect();
            let r2: Vec<f64> = (i - 1..ntt).map(|j| logtt[j] * m2 + b2 - logff[j]).collect();
            norm(&r1) + norm(&r2)
        })
        .collect();
    let minimum = min_(&sserr);
    let first = sserr
        .iter()
        .position(|&v| v == minimum)
        .map_or(0.0, |i| (i + MIN_POINTS - 1) as f64);
    (first + 1.0) / ntt as f64
}

/// Least-squares cubic spline with one interior knot at `floor(n/2) − 1`.
fn spline_fit(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let scale = (n - 1) as f64;
    let knot = ((n / 2) as f64 - 1.0) / scale;
    let basis = |i: usize| {
        let t = i as f64 / scale;
        let k = (t - knot).max(0.0);
        [1.0, t, t * t, t * t * t, k * k * k]
    };
    let a = DMatrix::from_fn(n, 5, |i, j| basis(i)[j]);
    let b = DVector::from_column_slice(y);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(5));
    let fit = a * coef;
    fit.iter().copied().collect()
}

fn periodicity_wang_th0_01(y: &[f64]) -> usize {
    let n = y.len();
    let th = 0.01;
    let spline = spline_fit(y);
    let sub: Vec<f64> = y.iter().zip(&spline).map(|(a, b)| a - b).collect();
    let acmax = (n as f64 / 3.0).ceil() as usize;
    let acf: Vec<f64> = (1..=acmax).map(|t| autocov_lag(&sub, t)).collect();
    let mut troughs = Vec::new();
    let mut peaks = Vec::new();
    for i in 1..acmax.saturating_sub(1) {
        let s_in = acf[i] - acf[i - 1];
        let s_out = acf[i + 1] - acf[i];
        if s_in < 0.0 && s_out > 0.0 {
            troughs.push(i);
        } else if s_in > 0.0 && s_out < 0.0 {
            peaks.push(i);
        }
    }
    for &ip in &peaks {
        let the_peak = acf[ip];
        let Some(&it) = troughs.iter().take_while(|&&t| t < ip).last() else {
            continue;
        };
        if the_peak - acf[it] < th || the_peak < 0.0 {
            continue;
        }
        return ip;
    }
    0
}
