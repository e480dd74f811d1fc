//! One-vs-rest ridge classifier with leave-one-out selection of the
//! regularisation strength.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ClassWeight;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeCvSpec {
    pub alphas: Vec<f64>,
    pub fit_intercept: bool,
    pub class_weight: ClassWeight,
}

impl Default for RidgeCvSpec {
    fn default() -> Self {
        RidgeCvSpec {
            alphas: logspace(-1.0, 10.0, 100),
            fit_intercept: true,
            class_weight: ClassWeight::None,
        }
    }
}

impl RidgeCvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::Config("ridge alphas must be non-empty and positive".into()));
        }
        Ok(())
    }
}

/// `n` values spaced evenly in log10 between `10^lo` and `10^hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeParams {
    pub alpha: f64,
    /// `p × K`, row-major, in standardised feature space.
    pub coef: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub feature_mean: Vec<f64>,
    /// Zero marks a constant column, which is ignored.
    pub feature_scale: Vec<f64>,
    /// Mean weighted LOO squared error per alpha, in grid order.
    pub loo_errors: Vec<f64>,
}

impl RidgeParams {
    /// Class scores for one raw feature row.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let k = self.intercepts.len();
        let mut s = self.intercepts.clone();
        for (j, &v) in x.iter().enumerate() {
            let scale = self.feature_scale[j];
            if scale == 0.0 {
                continue;
            }
            let z = (v - self.feature_mean[j]) / scale;
            for (c, sc) in s.iter_mut().enumerate() {
                *sc += z * self.coef[j * k + c];
            }
        }
        s
    }
}

/// Column means and population standard deviations, with near-constant
/// columns given scale 0.
pub fn standardisation(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut mean = Vec::with_capacity(x.ncols());
    let mut scale = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let sd = var.sqrt();
        mean.push(m);
        scale.push(if sd > 1e-12 * m.abs().max(1.0) { sd } else { 0.0 });
    }
    (mean, scale)
}

pub fn standardise(x: &DMatrix<f64>, mean: &[f64], scale: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        if scale[j] == 0.0 {
            0.0
        } else {
            (x[(i, j)] - mean[j]) / scale[j]
        }
    })
}

enum Decomposition {
    /// `Xw Xwᵀ = U Λ Uᵀ`, within the complement of the intercept direction
    /// when one is fitted; holds `U` and `Uᵀ Yw`.
    Gram { u: DMatrix<f64>, uty: DMatrix<f64> },
    /// `XwᵀXw = V Λ Vᵀ`; holds `V`, `Xw V` and `(Xw V)ᵀ Yw`.
    Covariance { v: DMatrix<f64>, xv: DMatrix<f64>, xty: DMatrix<f64> },
}

/// Weighted ridge regression with an unpenalised intercept, decomposed
/// once so that every alpha costs `O(n²)` or `O(n·p)`.
pub struct RidgeSolver {
    xw: DMatrix<f64>,
    yw: DMatrix<f64>,
    sqrt_w: DVector<f64>,
    w_sum: f64,
    x_mean: DVector<f64>,
    y_mean: DVector<f64>,
    fit_intercept: bool,
    eig: DVector<f64>,
    dec: Decomposition,
}

impl RidgeSolver {
    /// `x`: `n × p` (already standardised), `y`: `n × K` targets,
    /// `w`: positive sample weights.
    pub fn new(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], fit_intercept: bool) -> RidgeSolver {
        let (n, p) = x.shape();
        let w_sum: f64 = w.iter().sum();
        let sqrt_w = DVector::from_iterator(n, w.iter().map(|v| v.sqrt()));
        let weighted_mean = |m: &DMatrix<f64>| {
            DVector::from_iterator(
                m.ncols(),
                m.column_iter().map(|c| c.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w_sum),
            )
        };
        let (x_mean, y_mean) = if fit_intercept {
            (weighted_mean(x), weighted_mean(y))
        } else {
            (DVector::zeros(p), DVector::zeros(y.ncols()))
        };
        let mut xw = x.clone();
        for (j, mut col) in xw.column_iter_mut().enumerate() {
            for (i, v) in col.iter_mut().enumerate() {
                *v = (*v - x_mean[j]) * sqrt_w[i];
            }
        }
        let mut yw = y.clone();
        for (j, mut col) in yw.column_iter_mut().enumerate() {
            for (i, v) in col.iter_mut().enumerate() {
                *v = (*v - y_mean[j]) * sqrt_w[i];
            }
        }
        let (eig, dec) = if n <= p {
            let gram = &xw * xw.transpose();
            let (eig, u) = if fit_intercept {
                eigen_orthogonal_to(&gram, &(&sqrt_w / w_sum.sqrt()))
            } else {
                let se = SymmetricEigen::new(gram);
                (se.eigenvalues, se.eigenvectors)
            };
            let uty = u.transpose() * &yw;
            (eig, Decomposition::Gram { u, uty })
        } else {
            let cov = xw.transpose() * &xw;
            let se = SymmetricEigen::new(cov);
            let xv = &xw * &se.eigenvectors;
            let xty = xv.transpose() * &yw;
            (se.eigenvalues, Decomposition::Covariance { v: se.eigenvectors, xv, xty })
        };
        let eig = eig.map(|l| l.max(0.0));
        RidgeSolver {
            xw,
            yw,
            sqrt_w,
            w_sum,
            x_mean,
            y_mean,
            fit_intercept,
            eig,
            dec,
        }
    }

    /// Leave-one-out residuals `yᵢ − ŷ₋ᵢ` in the original target scale.
    pub fn loo_residuals(&self, alpha: f64) -> DMatrix<f64> {
        let n = self.yw.nrows();
        let (mut r, one_minus_h) = match &self.dec {
            Decomposition::Gram { u, uty } => {
                // `u` spans the whole space the residuals live in, so both
                // terms are sums of non-negative shrinkage factors
                let g = self.eig.map(|l| alpha / (l + alpha));
                let omh: DVector<f64> = DVector::from_fn(n, |i, _| (0..g.len()).map(|k| u[(i, k)] * u[(i, k)] * g[k]).sum());
                let mut scaled = uty.clone();
                for (k, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= g[k];
                }
                (u * scaled, omh)
            }
            Decomposition::Covariance { xv, xty, .. } => {
                let f = self.eig.map(|l| 1.0 / (l + alpha));
                let omh: DVector<f64> = DVector::from_fn(n, |i, _| {
                    let mut h: f64 = (0..f.len()).map(|k| xv[(i, k)] * xv[(i, k)] * f[k]).sum();
                    if self.fit_intercept {
                        h += self.sqrt_w[i] * self.sqrt_w[i] / self.w_sum;
                    }
                    1.0 - h
                });
                let mut scaled = xty.clone();
                for (k, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= f[k];
                }
                (&self.yw - xv * scaled, omh)
            }
        };
        for i in 0..n {
            let denom = one_minus_h[i] * self.sqrt_w[i];
            for v in r.row_mut(i).iter_mut() {
                *v = if denom > 0.0 { *v / denom } else { f64::INFINITY };
            }
        }
        r
    }

    /// Mean over samples and targets of `wᵢ · rᵢ²`.
    pub fn loo_error(&self, alpha: f64) -> f64 {
        let r = self.loo_residuals(alpha);
        let mut s = 0.0;
        for (i, row) in r.row_iter().enumerate() {
            let w = self.sqrt_w[i] * self.sqrt_w[i];
            s += w * row.iter().map(|v| v * v).sum::<f64>();
        }
        s / r.len() as f64
    }

    /// `(coef p × K, intercept K)` at `alpha`.
    pub fn coefficients(&self, alpha: f64) -> (DMatrix<f64>, DVector<f64>) {
        let b = match &self.dec {
            Decomposition::Gram { u, uty } => {
                let mut scaled = uty.clone();
                for (k, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= 1.0 / (self.eig[k] + alpha);
                }
                self.xw.transpose() * (u * scaled)
            }
            Decomposition::Covariance { v, xty, .. } => {
                let mut scaled = xty.clone();
                for (k, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= 1.0 / (self.eig[k] + alpha);
                }
                v * scaled
            }
        };
        let intercept = &self.y_mean - b.transpose() * &self.x_mean;
        (b, intercept)
    }
}

/// Eigen-decomposition of the symmetric `g` (with `g q = 0` for the unit
/// vector `q`) restricted to the complement of `q`: eigenvalues and the
/// matching `n × (n−1)` orthonormal eigenvectors.
fn eigen_orthogonal_to(g: &DMatrix<f64>, q: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = q.len();
    if n < 2 {
        return (DVector::zeros(0), DMatrix::zeros(n, 0));
    }
    // Householder reflector R with R q = ∓e₁; its other columns span q⊥
    let mut v = q.clone();
    v[0] += if q[0] >= 0.0 { 1.0 } else { -1.0 };
    let beta = 2.0 / v.dot(&v);
    let reflect = |a: &DMatrix<f64>| -> DMatrix<f64> { a - (&v * (v.transpose() * a)) * beta };
    let rgr = reflect(&reflect(g).transpose());
    let se = SymmetricEigen::new(rgr.view((1, 1), (n - 1, n - 1)).into_owned());
    let mut embedded = DMatrix::zeros(n, n - 1);
    embedded.view_mut((1, 0), (n - 1, n - 1)).copy_from(&se.eigenvectors);
    (se.eigenvalues, reflect(&embedded))
}

/// Index of the smallest error; ties go to the smallest alpha.
pub fn select_alpha(alphas: &[f64], errors: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..alphas.len() {
        let better = errors[i] < errors[best] || (errors[i] == errors[best] && alphas[i] < alphas[best]);
        if better {
            best = i;
        }
    }
    best
}

/// Fit on raw features `x` (`n × p`) with ±1 targets `y` (`n × K`).
pub fn fit(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], spec: &RidgeCvSpec) -> Result<RidgeParams> {
    spec.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("feature matrix contains non-finite values".into()));
    }
    let (mean, scale) = standardisation(x);
    let z = standardise(x, &mean, &scale);
    let solver = RidgeSolver::new(&z, y, w, spec.fit_intercept);
    let errors: Vec<f64> = spec.alphas.iter().map(|&a| solver.loo_error(a)).collect();
    let best = select_alpha(&spec.alphas, &errors);
    let alpha = spec.alphas[best];
    let (b, intercept) = solver.coefficients(alpha);
    let (p, k) = b.shape();
    let mut coef = Vec::with_capacity(p * k);
    for j in 0..p {
        for c in 0..k {
            coef.push(b[(j, c)]);
        }
    }
    Ok(RidgeParams {
        alpha,
        coef,
        intercepts: intercept.iter().copied().collect(),
        feature_mean: mean,
        feature_scale: scale,
        loo_errors: errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(n, 2, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
        let w = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        (x, y, w)
    }

    /// Weighted ridge with an unpenalised intercept by normal equations.
    fn direct_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], alpha: f64) -> DMatrix<f64> {
        let (n, p) = x.shape();
        let a = DMatrix::from_fn(n, p + 1, |i, j| if j == p { 1.0 } else { x[(i, j)] });
        let wm = DMatrix::from_diagonal(&DVector::from_column_slice(w));
        let mut lhs = a.transpose() * &wm * &a;
        for j in 0..p {
            lhs[(j, j)] += alpha;
        }
        let rhs = a.transpose() * &wm * y;
        lhs.lu().solve(&rhs).unwrap()
    }

    #[test]
    fn loo_matches_refits_both_decompositions() {
        for (n, p) in [(20, 5), (8, 12)] {
            let (x, y, w) = random(n, p, n as u64);
            let solver = RidgeSolver::new(&x, &y, &w, true);
            for alpha in logspace(-3.0, 3.0, 10) {
                let r = solver.loo_residuals(alpha);
                for i in 0..n {
                    let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                    let xs = x.select_rows(&keep);
                    let ys = y.select_rows(&keep);
                    let ws: Vec<f64> = keep.iter().map(|&j| w[j]).collect();
                    let beta = direct_fit(&xs, &ys, &ws, alpha);
                    for c in 0..2 {
                        let mut pred = beta[(p, c)];
                        for j in 0..p {
                            pred += x[(i, j)] * beta[(j, c)];
                        }
                        assert!((r[(i, c)] - (y[(i, c)] - pred)).abs() < 1e-8, "n={n} alpha={alpha}");
                    }
                }
            }
        }
    }

    #[test]
    fn coefficients_match_normal_equations() {
        let (x, y, w) = random(15, 4, 3);
        let solver = RidgeSolver::new(&x, &y, &w, true);
        let (b, b0) = solver.coefficients(0.7);
        let beta = direct_fit(&x, &y, &w, 0.7);
        for c in 0..2 {
            assert!((b0[c] - beta[(4, c)]).abs() < 1e-10);
            for j in 0..4 {
                assert!((b[(j, c)] - beta[(j, c)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn alpha_ties_go_to_smallest() {
        assert_eq!(select_alpha(&[10.0, 1.0, 5.0], &[2.0, 1.0, 1.0]), 1);
        assert_eq!(select_alpha(&[1.0, 2.0], &[3.0, 3.0]), 0);
    }
}
