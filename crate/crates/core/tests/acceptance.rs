//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! runtime; the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ethogram::behaviour::Behaviour;
use ethogram::config::ExperimentConfig;
use ethogram::eval::experiment::{run_experiment, windows_from_recordings, ExperimentOutcome};
use ethogram::eval::report::to_json;
use ethogram::eval::{cohens_kappa, compute_metrics, grouped_stratified_split, ClassProfile, SplitSpec};
use ethogram::features::catch22::{catch24_vector, Catch24Spec};
use ethogram::features::rocket::{rocket_fit, RocketModel, RocketSpec, KERNEL_LENGTH};
use ethogram::features::{extract_catch24, extract_hc, FeatureSet, HcSpec};
use ethogram::ingest::{Timestamp, TriAxialSeries};
use ethogram::models::forest::{self, Node};
use ethogram::models::ridge::RidgeSolver;
use ethogram::models::{ClassWeight, Criterion, ForestSpec, MaxFeatures, ModelKind};
use ethogram::signal::{dynamic_static_split, ButterworthSpec, Sos};
use ethogram::synthgen::{default_archetypes, generate};
use ethogram::windowing::{LabeledWindow, WindowingSpec};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Case {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

// ---------------------------------------------------------------- 1

fn synthetic_windows(n_animals: usize, seed: u64) -> Vec<LabeledWindow> {
    let recs: Vec<_> = generate(&default_archetypes(), n_animals, seed)
        .unwrap()
        .into_iter()
        .map(|a| (a.series, a.track))
        .collect();
    windows_from_recordings(&recs, 0.0, &WindowingSpec::default()).unwrap()
}

fn feature_counts() -> Check {
    let mut windows = synthetic_windows(2, 3);
    ensure(windows.len() >= 100, || format!("only {} windows", windows.len()))?;
    windows.truncate(100);
    let hc = extract_hc(&windows, 25.0, &HcSpec::default()).map_err(|e| e.to_string())?;
    let c24 = extract_catch24(&windows, &Catch24Spec::default()).map_err(|e| e.to_string())?;
    let refs: Vec<&LabeledWindow> = windows.iter().collect();
    let model = rocket_fit(&refs, &RocketSpec::default(), 1).map_err(|e| e.to_string())?;
    let rk = model.transform_matrix(&windows).map_err(|e| e.to_string())?;
    for (name, m, want) in [("hc", &hc, 88), ("catch24", &c24, 192), ("rocket", &rk, 9996)] {
        ensure(m.n_rows() == 100 && m.n_cols() == want, || {
            format!("{name}: {}×{}, want 100×{want}", m.n_rows(), m.n_cols())
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------- 2

const CATCH22_INPUTS: &str = include_str!("fixtures/catch22_inputs.csv");
const CATCH22_GOLDEN: &str = include_str!("fixtures/catch22_golden.csv");

fn catch22_fixtures() -> Check {
    let mut golden: BTreeMap<(String, String), f64> = BTreeMap::new();
    for l in CATCH22_GOLDEN.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        let v: f64 = f[2].parse().unwrap();
        golden.insert((f[1].to_string(), f[0].to_string()), if v.is_nan() { 0.0 } else { v });
    }
    let spec = Catch24Spec::default();
    let names = spec.names();
    let mut n_series = 0;
    for l in CATCH22_INPUTS.lines().skip(1) {
        let (id, vals) = l.split_once(',').unwrap();
        let x: Vec<f64> = vals.split(' ').map(|v| v.parse().unwrap()).collect();
        let got = catch24_vector(&x, &spec).map_err(|e| e.to_string())?;
        let mut matched = 0;
        for (name, v) in names.iter().zip(&got) {
            let Some(&want) = golden.get(&(id.to_string(), name.to_string())) else {
                continue;
            };
            matched += 1;
            ensure((v - want).abs() <= 1e-6 || (v - want).abs() <= 1e-4 * want.abs(), || {
                format!("{id} {name}: got {v}, want {want}")
            })?;
        }
        ensure(matched >= 22, || format!("{id}: only {matched} features in fixtures"))?;
        n_series += 1;
    }
    ensure(n_series >= 5, || format!("only {n_series} fixture series"))
}

// ---------------------------------------------------------------- 3

fn filter_conformance() -> Check {
    let fs = 25.0;
    let lp = Sos::design(&ButterworthSpec::low_pass(6, 0.3, fs)).map_err(|e| e.to_string())?;
    let hp = Sos::design(&ButterworthSpec::high_pass(6, 0.3, fs)).map_err(|e| e.to_string())?;
    let db = |g: f64| 20.0 * g.log10();
    for (name, sos, pass, stop) in [("low-pass", &lp, 0.3, 3.0), ("high-pass", &hp, 0.3, 0.03)] {
        let at_cut = db(sos.magnitude_at(pass, fs));
        ensure((at_cut + 3.0103).abs() <= 0.1, || format!("{name}: {at_cut:.3} dB at cutoff"))?;
        let at_stop = db(sos.magnitude_at(stop, fs));
        ensure(at_stop <= -70.0, || format!("{name}: {at_stop:.1} dB a decade into the stopband"))?;
    }

    // measured steady-state gain of a cutoff-frequency sine
    let n = 20_000;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * 0.3 * i as f64 / fs).sin()).collect();
    let y = lp.filter(&x);
    let tail = &y[n / 2..];
    let rms = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
    let measured = db(rms * 2f64.sqrt());
    ensure((measured + 3.0103).abs() <= 0.1, || format!("measured {measured:.3} dB at cutoff"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<[f64; 3]> = (0..3000)
        .map(|_| {
            let mut s = [0.0; 3];
            for (a, v) in s.iter_mut().enumerate() {
                *v = if a == 2 { 1.0 } else { 0.0 } + rng.random_range(-0.5..0.5);
            }
            s
        })
        .collect();
    let series = TriAxialSeries::new("noise", Timestamp(0), fs, samples.clone()).map_err(|e| e.to_string())?;
    let (dynamic, stat) = dynamic_static_split(&series).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for a in 0..3 {
        for (i, s) in samples.iter().enumerate() {
            worst = worst.max((dynamic[a][i] + stat[a][i] - s[a]).abs());
        }
    }
    ensure(worst < 0.02, || format!("complementarity error {worst:.4} g"))
}

// ---------------------------------------------------------------- 4

fn integer_window(rng: &mut ChaCha8Rng, len: usize) -> LabeledWindow {
    LabeledWindow {
        animal_id: "w".into(),
        window_index: 0,
        start_time: Timestamp(0),
        channels: (0..8)
            .map(|_| (0..len).map(|_| rng.random_range(-50i32..=50) as f64).collect())
            .collect(),
        label: Behaviour::Other,
    }
}

/// Direct dilated convolution with explicit weights followed by PPV counting.
fn naive_rocket(model: &RocketModel, w: &LabeledWindow) -> Vec<f64> {
    let len = w.len();
    let half = (KERNEL_LENGTH / 2) as isize;
    let mut out = Vec::new();
    for block in &model.blocks {
        let mut b = 0;
        for (di, &d) in block.dilations.iter().enumerate() {
            for (ki, taps) in model.kernel_position_sets.iter().enumerate() {
                let combo = di * model.kernel_position_sets.len() + ki;
                let mut weights = [-1.0; KERNEL_LENGTH];
                for &t in taps {
                    weights[t] = 2.0;
                }
                let conv: Vec<f64> = (0..len as isize)
                    .map(|t| {
                        let mut s = 0.0;
                        for &c in &block.channel_assignments[combo] {
                            for (j, wt) in weights.iter().enumerate() {
                                let idx = t + (j as isize - half) * d as isize;
                                if idx >= 0 && idx < len as isize {
                                    s += wt * w.channels[c][idx as usize];
                                }
                            }
                        }
                        s
                    })
                    .collect();
                let edge = half as usize * d;
                let region: &[f64] = if block.paddings[combo] || 2 * edge >= len {
                    &conv
                } else {
                    &conv[edge..len - edge]
                };
                for &bias in &block.biases[b..b + block.features_per_dilation[di]] {
                    out.push(region.iter().filter(|&&v| v > bias).count() as f64 / region.len() as f64);
                }
                b += block.features_per_dilation[di];
            }
        }
    }
    out
}

fn rocket_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let train: Vec<LabeledWindow> = (0..20).map(|_| integer_window(&mut rng, 75)).collect();
    let test: Vec<LabeledWindow> = (0..20).map(|_| integer_window(&mut rng, 75)).collect();
    let refs: Vec<&LabeledWindow> = train.iter().collect();
    let spec = RocketSpec::default();
    let model = rocket_fit(&refs, &spec, 42).map_err(|e| e.to_string())?;
    let again = rocket_fit(&refs, &spec, 42).map_err(|e| e.to_string())?;
    ensure(model == again, || "two fits with the same seed differ".into())?;
    for w in train.iter().chain(&test) {
        let fast = model.transform_values(w).map_err(|e| e.to_string())?;
        let repeat = again.transform_values(w).map_err(|e| e.to_string())?;
        ensure(
            fast.iter().zip(&repeat).all(|(a, b)| a.to_bits() == b.to_bits()),
            || "transform not bit-identical across fits".into(),
        )?;
        let slow = naive_rocket(&model, w);
        ensure(fast.len() == slow.len(), || format!("{} vs {} features", fast.len(), slow.len()))?;
        for (i, (a, b)) in fast.iter().zip(&slow).enumerate() {
            ensure((a - b).abs() <= 1e-10, || format!("feature {i}: {a} vs naive {b}"))?;
            ensure((0.0..=1.0).contains(a), || format!("feature {i} = {a} outside [0, 1]"))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- 5

/// Weighted ridge with unpenalised intercept, fitted directly.
fn ridge_direct(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], alpha: f64) -> (DMatrix<f64>, DVector<f64>) {
    let (n, p) = x.shape();
    let ws: f64 = w.iter().sum();
    let xm = DVector::from_fn(p, |j, _| (0..n).map(|i| w[i] * x[(i, j)]).sum::<f64>() / ws);
    let ym = DVector::from_fn(y.ncols(), |k, _| (0..n).map(|i| w[i] * y[(i, k)]).sum::<f64>() / ws);
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - xm[j]);
    let yc = DMatrix::from_fn(n, y.ncols(), |i, k| y[(i, k)] - ym[k]);
    let wm = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let b = if p <= n {
        let a = xc.transpose() * &wm * &xc + DMatrix::identity(p, p) * alpha;
        a.lu().solve(&(xc.transpose() * &wm * &yc)).unwrap()
    } else {
        // dual form: an n × n solve stays well conditioned when p > n
        let a = &wm * &xc * xc.transpose() + DMatrix::identity(n, n) * alpha;
        xc.transpose() * a.lu().solve(&(&wm * &yc)).unwrap()
    };
    let b0 = ym - b.transpose() * xm;
    (b, b0)
}

fn ridge_loo_problem(n: usize, p: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
    let y = DMatrix::from_fn(n, 3, |_, _| if rng.random_bool(0.4) { 1.0 } else { -1.0 });
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let solver = RidgeSolver::new(&x, &y, &w, true);
    let alphas: Vec<f64> = (0..10).map(|i| 10f64.powf(-3.0 + 0.7 * i as f64)).collect();
    for &alpha in &alphas {
        let fast = solver.loo_residuals(alpha);
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let xs = x.select_rows(&keep);
            let ys = y.select_rows(&keep);
            let ws: Vec<f64> = keep.iter().map(|&r| w[r]).collect();
            let (b, b0) = ridge_direct(&xs, &ys, &ws, alpha);
            let pred = b.transpose() * x.row(i).transpose() + b0;
            for k in 0..y.ncols() {
                let brute = y[(i, k)] - pred[k];
                let d = (fast[(i, k)] - brute).abs();
                ensure(d <= 1e-8, || {
                    format!("{n}×{p} alpha {alpha:e} row {i} target {k}: {} vs {brute} (|Δ| {d:e})", fast[(i, k)])
                })?;
            }
        }
    }
    Ok(())
}

fn ridge_loo() -> Check {
    ridge_loo_problem(20, 5, 1)?;
    // more features than samples exercises the other decomposition
    ridge_loo_problem(8, 12, 2)
}

// ---------------------------------------------------------------- 6

fn impurity(criterion: Criterion, counts: &[f64]) -> f64 {
    let t: f64 = counts.iter().sum();
    if t == 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|c| (c / t).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts.iter().filter(|&&c| c > 0.0).map(|c| (c / t) * (c / t).log2()).sum::<f64>(),
    }
}

/// `(feature, threshold, gain)` maximising the weighted impurity decrease;
/// ties keep the earlier feature, then the lower threshold.
fn exhaustive_stump(rows: &[f64], p: usize, y: &[usize], w: &[f64], k: usize, criterion: Criterion) -> (usize, f64, f64) {
    let n = y.len();
    let counts = |pick: &dyn Fn(usize) -> bool| {
        let mut c = vec![0.0; k];
        (0..n).filter(|&i| pick(i)).for_each(|i| c[y[i]] += w[i]);
        c
    };
    let all = counts(&|_| true);
    let parent = impurity(criterion, &all) * all.iter().sum::<f64>();
    let mut best = (usize::MAX, f64::NAN, f64::NEG_INFINITY);
    for f in 0..p {
        let mut vals: Vec<f64> = (0..n).map(|i| rows[i * p + f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let thr = (pair[0] + pair[1]) / 2.0;
            let l = counts(&|i| rows[i * p + f] <= thr);
            let r = counts(&|i| rows[i * p + f] > thr);
            let gain = parent
                - impurity(criterion, &l) * l.iter().sum::<f64>()
                - impurity(criterion, &r) * r.iter().sum::<f64>();
            if gain > best.2 + 1e-12 {
                best = (f, thr, gain);
            }
        }
    }
    best
}

fn forest_stump() -> Check {
    let (n, p, k) = (30, 3, 3);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let y: Vec<usize> = (0..n).map(|i| i % k).collect();
        let rows: Vec<f64> = (0..n * p)
            .map(|i| y[i / p] as f64 * 0.3 * (i % p) as f64 + rng.random_range(0.0..1.0))
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        for criterion in [Criterion::Gini, Criterion::Entropy] {
            let spec = ForestSpec {
                n_estimators: 1,
                max_depth: Some(1),
                max_features: MaxFeatures::All,
                criterion,
                class_weight: ClassWeight::None,
                bootstrap: false,
                seed,
                ..Default::default()
            };
            let fitted = forest::fit(&rows, p, &y, k, &w, &spec).map_err(|e| e.to_string())?;
            let tree = &fitted.trees[0];
            ensure(tree.depth() == 1, || format!("seed {seed}: depth {}", tree.depth()))?;
            let (bf, bt, _) = exhaustive_stump(&rows, p, &y, &w, k, criterion);
            match &tree.nodes[0] {
                Node::Split { feature, threshold, .. } => ensure(*feature == bf && (threshold - bt).abs() < 1e-12, || {
                    format!("seed {seed} {criterion:?}: split ({feature}, {threshold}), exhaustive ({bf}, {bt})")
                })?,
                Node::Leaf(_) => return Err(format!("seed {seed}: root is a leaf")),
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- 7

fn brute_objective(profiles: &[[usize; 6]], mask: u32) -> f64 {
    let mut tr = [0.0; 6];
    let mut te = [0.0; 6];
    for (i, p) in profiles.iter().enumerate() {
        let side = if mask & (1 << i) != 0 { &mut tr } else { &mut te };
        for c in 0..6 {
            side[c] += p[c] as f64;
        }
    }
    let (st, ss): (f64, f64) = (tr.iter().sum(), te.iter().sum());
    let present: Vec<usize> = (0..6).filter(|&c| tr[c] + te[c] > 0.0).collect();
    let frac = |v: f64, t: f64| if t > 0.0 { v / t } else { 0.0 };
    present.iter().map(|&c| (frac(tr[c], st) - frac(te[c], ss)).abs()).sum::<f64>() / present.len() as f64
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> ClassProfile {
    (0..n)
        .map(|i| {
            let mut p = [0usize; 6];
            for v in p.iter_mut() {
                *v = rng.random_range(0..60);
            }
            (format!("animal{i:02}"), p)
        })
        .collect()
}

fn split_protocol() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let spec = SplitSpec::default();
    for n in 4..=8 {
        for rep in 0..5 {
            let profile = random_profile(&mut rng, n);
            let names: Vec<&String> = profile.keys().collect();
            let profiles: Vec<[usize; 6]> = profile.values().copied().collect();
            let k = ((0.7 * n as f64).round() as u32).clamp(1, n as u32 - 1);
            let mut scored: Vec<(f64, u32)> = (0u32..1 << n)
                .filter(|m| m.count_ones() == k)
                .map(|m| (brute_objective(&profiles, m), m))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            let got = grouped_stratified_split(&profile, &spec, rep).map_err(|e| e.to_string())?;
            ensure((got.objective - scored[0].0).abs() <= 1e-12, || {
                format!("{n} animals: objective {} vs brute force {}", got.objective, scored[0].0)
            })?;
            if scored.len() < 2 || scored[1].0 - scored[0].0 > 1e-12 {
                let want: Vec<String> = (0..n).filter(|i| scored[0].1 & (1 << i) != 0).map(|i| names[i].clone()).collect();
                ensure(got.train_animals == want, || format!("{n} animals: {:?} vs {want:?}", got.train_animals))?;
            }
        }
    }
    let profile = random_profile(&mut rng, 30);
    let s = grouped_stratified_split(&profile, &spec, 1).map_err(|e| e.to_string())?;
    ensure(s.train_animals.len() == 21 && s.test_animals.len() == 9, || {
        format!("{}/{}", s.train_animals.len(), s.test_animals.len())
    })?;
    ensure(s.train_animals.iter().all(|a| !s.test_animals.contains(a)), || "animal overlap".into())?;
    let mut all: Vec<&String> = s.train_animals.iter().chain(&s.test_animals).collect();
    all.sort();
    ensure(all == profile.keys().collect::<Vec<_>>(), || "split does not cover every animal".into())
}

// ---------------------------------------------------------------- 8

fn metrics_fixtures() -> Check {
    let classes = Behaviour::ALL.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for fixture in 0..10 {
        let n = rng.random_range(50..400);
        let actual: Vec<Behaviour> = (0..n).map(|_| classes[rng.random_range(0..6)]).collect();
        let predicted: Vec<Behaviour> = actual
            .iter()
            .map(|&a| if rng.random_bool(0.6) { a } else { classes[rng.random_range(0..6)] })
            .collect();
        let m = compute_metrics(&actual, &predicted, &classes).map_err(|e| e.to_string())?;
        let mut sens_sum = 0.0;
        let mut supported = 0;
        for (ci, &c) in classes.iter().enumerate() {
            let (mut tp, mut tn, mut fp, mut fn_) = (0.0, 0.0, 0.0, 0.0);
            for (&a, &p) in actual.iter().zip(&predicted) {
                match (a == c, p == c) {
                    (true, true) => tp += 1.0,
                    (false, false) => tn += 1.0,
                    (false, true) => fp += 1.0,
                    (true, false) => fn_ += 1.0,
                }
            }
            let got = &m.per_class[ci];
            let sens = tp / (tp + fn_);
            let spec = tn / (tn + fp);
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            for (what, g, h) in [("sensitivity", got.sensitivity, sens), ("specificity", got.specificity, spec), ("precision", got.precision, prec)] {
                ensure((g - h).abs() <= 1e-12, || format!("fixture {fixture} {c} {what}: {g} vs {h}"))?;
            }
            if tp + fn_ > 0.0 {
                sens_sum += sens;
                supported += 1;
            }
        }
        let ba = sens_sum / supported as f64;
        ensure((m.balanced_accuracy - ba).abs() <= 1e-12, || {
            format!("fixture {fixture} BA: {} vs {ba}", m.balanced_accuracy)
        })?;
    }
    let actual: Vec<Behaviour> = (0..600).map(|i| classes[i % 6]).collect();
    let majority = vec![Behaviour::Lying; 600];
    let m = compute_metrics(&actual, &majority, &classes).map_err(|e| e.to_string())?;
    ensure((m.balanced_accuracy - 1.0 / 6.0).abs() <= 1e-12, || format!("majority BA {}", m.balanced_accuracy))
}

// ---------------------------------------------------------------- 9

fn default_experiment() -> Result<ExperimentOutcome, String> {
    run_experiment(&ExperimentConfig::default()).map_err(|e| e.to_string())
}

fn synthetic_experiment() -> Check {
    let out = default_experiment()?;
    let r = &out.report;
    ensure(r.n_animals == 12, || format!("{} animals", r.n_animals))?;
    ensure(r.classes.len() == 6, || format!("{} classes", r.classes.len()))?;
    ensure(r.split.train_animals.iter().all(|a| !r.split.test_animals.contains(a)), || "animal overlap".into())?;
    ensure(r.n_train_windows + r.n_test_windows == r.n_windows, || "windows lost in split".into())?;
    for fit in &out.rocket_fits {
        ensure(fit.animals.iter().all(|a| r.split.train_animals.contains(a)), || {
            format!("MiniROCKET fit `{}` saw a test animal", fit.context)
        })?;
    }
    ensure(r.results.len() == 6, || format!("{} combinations", r.results.len()))?;
    let mut summary = Vec::new();
    for c in &r.results {
        let ba = c.metrics.balanced_accuracy;
        summary.push(format!("{}+{} {ba:.3}", c.feature_set, c.model));
        ensure(ba >= 0.55, || format!("{} + {}: BA {ba:.3}", c.feature_set, c.model))?;
        for b in [Behaviour::Lying, Behaviour::Running] {
            let s = c.metrics.per_class.iter().find(|m| m.behaviour == b).map_or(0.0, |m| m.sensitivity);
            ensure(s >= 0.9, || format!("{} + {}: {b} sensitivity {s:.3}", c.feature_set, c.model))?;
        }
    }
    for (fs, model) in [(FeatureSet::Rocket, ModelKind::RidgeCv), (FeatureSet::Catch24, ModelKind::RandomForest)] {
        let ba = r.result(fs, model).map(|c| c.metrics.balanced_accuracy).ok_or(format!("{fs} + {model} missing"))?;
        ensure(ba >= 0.85, || format!("{fs} + {model}: BA {ba:.3}"))?;
    }
    println!("    {}", summary.join(", "));
    Ok(())
}

// ---------------------------------------------------------------- 10

fn determinism() -> Check {
    let in_pool = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        let out = pool.install(default_experiment)?;
        to_json(&out.report).map_err(|e| e.to_string())
    };
    let a = in_pool(8)?;
    let b = in_pool(8)?;
    let c = in_pool(1)?;
    ensure(a == b, || "two runs with 8 threads differ".into())?;
    ensure(a == c, || "1-thread and 8-thread reports differ".into())
}

// ---------------------------------------------------------------- 11

fn kappa() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a: Vec<Behaviour> = (0..100_000).map(|_| Behaviour::ALL[rng.random_range(0..6)]).collect();
    let b: Vec<Behaviour> = (0..100_000).map(|_| Behaviour::ALL[rng.random_range(0..6)]).collect();
    let same = cohens_kappa(&a, &a).map_err(|e| e.to_string())?;
    ensure(same == 1.0, || format!("identical sequences give {same}"))?;
    let indep = cohens_kappa(&a, &b).map_err(|e| e.to_string())?;
    ensure(indep.abs() < 0.05, || format!("independent raters give {indep}"))
}

fn main() {
    let criteria = [
        Case { id: 1, name: "feature counts", limit: Duration::from_secs(1), run: feature_counts },
        Case { id: 2, name: "catch22 fixtures", limit: Duration::from_secs(5), run: catch22_fixtures },
        Case { id: 3, name: "filter conformance", limit: Duration::from_secs(2), run: filter_conformance },
        Case { id: 4, name: "minirocket oracle", limit: Duration::from_secs(10), run: rocket_oracle },
        Case { id: 5, name: "ridge leave-one-out", limit: Duration::from_secs(2), run: ridge_loo },
        Case { id: 6, name: "forest stump", limit: Duration::from_secs(1), run: forest_stump },
        Case { id: 7, name: "split protocol", limit: Duration::from_secs(5), run: split_protocol },
        Case { id: 8, name: "metrics", limit: Duration::from_secs(1), run: metrics_fixtures },
        Case { id: 9, name: "synthetic experiment", limit: Duration::from_secs(600), run: synthetic_experiment },
        Case { id: 10, name: "determinism", limit: Duration::from_secs(3 * 600), run: determinism },
        Case { id: 11, name: "kappa", limit: Duration::from_secs(1), run: kappa },
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let t = Instant::now();
        let outcome = (c.run)();
        let elapsed = t.elapsed();
        let outcome = outcome.and_then(|_| {
            ensure(elapsed <= c.limit, || format!("took {:.2} s, limit {:.0} s", elapsed.as_secs_f64(), c.limit.as_secs_f64()))
        });
        match outcome {
            Ok(()) => println!("criterion {:>2} {:<22} PASS  ({:.2} s)", c.id, c.name, elapsed.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} {:<22} FAIL  ({:.2} s): {e}", c.id, c.name, elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
