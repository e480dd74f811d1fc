//! Chance-corrected agreement between two raters.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Cohen's kappa `(p_o − p_e) / (1 − p_e)`; defined as 1 when `p_e = 1`.
pub fn cohens_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("rater sequences of length {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Validation("cannot compute kappa of empty sequences".into()));
    }
    let n = a.len() as f64;
    let mut margins: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        margins.entry(x).or_default().0 += 1;
        margins.entry(y).or_default().1 += 1;
        agree += (x == y) as usize;
    }
    let po = agree as f64 / n;
    let pe: f64 = margins.values().map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n)).sum();
    if pe >= 1.0 {
        return Ok(1.0);
    }
    Ok((po - pe) / (1.0 - pe))
}
