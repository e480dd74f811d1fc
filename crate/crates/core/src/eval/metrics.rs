//! Per-class and global classification metrics.

use serde::{Deserialize, Serialize};

use crate::behaviour::Behaviour;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub behaviour: Behaviour,
    pub sensitivity: f64,
    pub specificity: f64,
    /// 0 when the class was never predicted; see `precision_undefined`.
    pub precision: f64,
    pub precision_undefined: bool,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<Behaviour>,
    pub balanced_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are actual classes, columns predicted, both in `classes` order.
    pub confusion: Vec<Vec<usize>>,
    pub n_test_windows: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion_matrix(actual: &[Behaviour], predicted: &[Behaviour], classes: &[Behaviour]) -> Result<Vec<Vec<usize>>> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let pos = |b: &Behaviour| {
        classes
            .iter()
            .position(|c| c == b)
            .ok_or_else(|| Error::Validation(format!("label {b} not among the report classes")))
    };
    let mut m = vec![vec![0usize; classes.len()]; classes.len()];
    for (a, p) in actual.iter().zip(predicted) {
        m[pos(a)?][pos(p)?] += 1;
    }
    Ok(m)
}

/// One-vs-rest sensitivity, specificity and precision per class; balanced
/// accuracy is the mean sensitivity over classes that occur in `actual`.
pub fn compute_metrics(actual: &[Behaviour], predicted: &[Behaviour], classes: &[Behaviour]) -> Result<MetricsReport> {
    let confusion = confusion_matrix(actual, predicted, classes)?;
    let n = actual.len();
    let k = classes.len();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted_c: usize = (0..k).map(|r| confusion[r][c]).sum();
            let fn_ = support - tp;
            let fp = predicted_c - tp;
            let tn = n - tp - fn_ - fp;
            ClassMetrics {
                behaviour: classes[c],
                sensitivity: ratio(tp, tp + fn_),
                specificity: ratio(tn, tn + fp),
                precision: ratio(tp, tp + fp),
                precision_undefined: tp + fp == 0,
                support,
            }
        })
        .collect();
    // summed in canonical class order so reordering `classes` is exact
    let mut supported: Vec<(Behaviour, f64)> =
        per_class.iter().filter(|m| m.support > 0).map(|m| (m.behaviour, m.sensitivity)).collect();
    supported.sort_by_key(|s| s.0);
    let balanced_accuracy = if supported.is_empty() {
        0.0
    } else {
        supported.iter().map(|s| s.1).sum::<f64>() / supported.len() as f64
    };
    Ok(MetricsReport {
        classes: classes.to_vec(),
        balanced_accuracy,
        per_class,
        confusion,
        n_test_windows: n,
    })
}

/// Balanced accuracy alone.
pub fn balanced_accuracy(actual: &[Behaviour], predicted: &[Behaviour]) -> Result<f64> {
    let mut classes: Vec<Behaviour> = actual.iter().chain(predicted).copied().collect();
    classes.sort();
    classes.dedup();
    Ok(compute_metrics(actual, predicted, &classes)?.balanced_accuracy)
}

impl MetricsReport {
    /// Confusion matrix as row percentages.
    pub fn confusion_percent(&self) -> Vec<Vec<f64>> {
        self.confusion
            .iter()
            .map(|row| {
                let s: usize = row.iter().sum();
                row.iter().map(|&v| 100.0 * ratio(v, s)).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Behaviour::*;

    fn labels(spec: &[(Behaviour, usize)]) -> Vec<Behaviour> {
        spec.iter().flat_map(|&(b, n)| std::iter::repeat_n(b, n)).collect()
    }

    #[test]
    fn binary_hand_example() {
        // lying positive: TP=3, FN=1, TN=4, FP=2
        let actual = labels(&[(Lying, 3), (Lying, 1), (Walking, 4), (Walking, 2)]);
        let predicted = labels(&[(Lying, 3), (Walking, 1), (Walking, 4), (Lying, 2)]);
        let r = compute_metrics(&actual, &predicted, &[Lying, Walking]).unwrap();
        let l = &r.per_class[0];
        assert!((l.sensitivity - 0.75).abs() < 1e-15);
        assert!((l.specificity - 2.0 / 3.0).abs() < 1e-15);
        assert!((l.precision - 0.6).abs() < 1e-15);
        assert!((r.balanced_accuracy - (0.75 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(r.confusion, vec![vec![3, 1], vec![2, 4]]);
    }

    #[test]
    fn perfect_and_majority() {
        let actual: Vec<Behaviour> = Behaviour::ALL.iter().flat_map(|&b| std::iter::repeat_n(b, 7)).collect();
        let r = compute_metrics(&actual, &actual, &Behaviour::ALL).unwrap();
        assert_eq!(r.balanced_accuracy, 1.0);
        assert!(r.per_class.iter().all(|m| m.sensitivity == 1.0 && m.specificity == 1.0 && m.precision == 1.0));
        let majority = vec![Lying; actual.len()];
        let r = compute_metrics(&actual, &majority, &Behaviour::ALL).unwrap();
        assert!((r.balanced_accuracy - 1.0 / 6.0).abs() < 1e-12);
        assert!(r.per_class.iter().filter(|m| m.behaviour != Lying).all(|m| m.precision_undefined && m.precision == 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_metrics(&[Lying], &[], &[Lying]).is_err());
    }

    fn label_vec() -> impl Strategy<Value = (Vec<Behaviour>, Vec<Behaviour>)> {
        (1usize..200).prop_flat_map(|n| {
            let b = (0usize..6).prop_map(|i| Behaviour::ALL[i]);
            (proptest::collection::vec(b.clone(), n), proptest::collection::vec(b, n))
        })
    }

    proptest! {
        #[test]
        fn ba_is_mean_supported_recall((a, p) in label_vec()) {
            let r = compute_metrics(&a, &p, &Behaviour::ALL).unwrap();
            let mut recalls = Vec::new();
            for b in Behaviour::ALL {
                let support = a.iter().filter(|&&x| x == b).count();
                if support > 0 {
                    let hits = a.iter().zip(&p).filter(|(x, y)| **x == b && **y == b).count();
                    recalls.push(hits as f64 / support as f64);
                }
            }
            let ba = recalls.iter().sum::<f64>() / recalls.len() as f64;
            prop_assert!((r.balanced_accuracy - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.balanced_accuracy));
            for (c, row) in r.confusion.iter().enumerate() {
                prop_assert_eq!(row.iter().sum::<usize>(), r.per_class[c].support);
            }
        }

        #[test]
        fn class_order_only_permutes_rows((a, p) in label_vec(), shift in 0usize..6) {
            let mut order = Behaviour::ALL.to_vec();
            order.rotate_left(shift);
            let r0 = compute_metrics(&a, &p, &Behaviour::ALL).unwrap();
            let r1 = compute_metrics(&a, &p, &order).unwrap();
            prop_assert_eq!(r0.balanced_accuracy, r1.balanced_accuracy);
            for m in &r1.per_class {
                let m0 = r0.per_class.iter().find(|x| x.behaviour == m.behaviour).unwrap();
                prop_assert_eq!(m0, m);
            }
        }
    }
}
