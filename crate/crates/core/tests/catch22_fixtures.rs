use std::collections::BTreeMap;

use ethogram::features::catch22::{catch24_vector, Catch24Spec, CATCH22_NAMES, MEAN_NAME, STD_NAME};

const INPUTS: &str = include_str!("fixtures/catch22_inputs.csv");
const GOLDEN: &str = include_str!("fixtures/catch22_golden.csv");

fn inputs() -> BTreeMap<String, Vec<f64>> {
    INPUTS
        .lines()
        .skip(1)
        .map(|l| {
            let (id, vals) = l.split_once(',').unwrap();
            (id.to_string(), vals.split(' ').map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

/// `(fixture, feature) -> value`; the reference's NaN becomes 0.
fn golden() -> BTreeMap<(String, String), f64> {
    GOLDEN
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let v: f64 = f[2].parse().unwrap();
            ((f[1].to_string(), f[0].to_string()), if v.is_nan() { 0.0 } else { v })
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6_f64.max(1e-4 * b.abs())
}

#[test]
fn matches_reference_fixtures() {
    let golden = golden();
    let spec = Catch24Spec::default();
    let names = spec.names();
    let mut failures = Vec::new();
    let series = inputs();
    assert!(series.len() >= 5);
    for (id, x) in &series {
        let got = catch24_vector(x, &spec).unwrap();
        for (name, v) in names.iter().zip(&got) {
            let want = golden[&(id.clone(), name.to_string())];
            if !close(*v, want) {
                failures.push(format!("{id} {name}: got {v}, want {want}"));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn every_reference_feature_is_emitted() {
    let golden = golden();
    let fixture_names: std::collections::BTreeSet<&str> = golden.keys().map(|(_, n)| n.as_str()).collect();
    let ours: std::collections::BTreeSet<&str> =
        CATCH22_NAMES.iter().copied().chain([MEAN_NAME, STD_NAME]).collect();
    assert_eq!(fixture_names, ours);
}

#[test]
fn constant_series_matches_frozen_fallbacks() {
    let golden = golden();
    let got = catch24_vector(&[3.5; 75], &Catch24Spec::default()).unwrap();
    for (name, v) in Catch24Spec::default().names().iter().zip(&got) {
        assert_eq!(*v, golden[&("const75".to_string(), name.to_string())], "{name}");
    }
}
