//! Small regression and distribution helpers shared by the CI tests, the
//! hybrid score and effect estimation.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("design matrix is singular; collinear columns {columns:?}")]
    Collinear { columns: Vec<usize> },
    #[error("not enough rows ({rows}) for {params} parameters")]
    TooFewRows { rows: usize, params: usize },
    #[error("logistic regression did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Relative pivot tolerance used to call a column linearly dependent on the
/// columns before it.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
    pub rows: usize,
}

impl OlsFit {
    /// Maximised Gaussian log-likelihood with the MLE variance `rss / n`.
    pub fn log_likelihood(&self) -> f64 {
        gaussian_log_likelihood(self.rss, self.rows)
    }
}

pub fn gaussian_log_likelihood(rss: f64, rows: usize) -> f64 {
    let n = rows as f64;
    let var = (rss / n).max(f64::MIN_POSITIVE);
    -0.5 * n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0)
}

/// Indices of the columns of `x` that are linearly dependent on earlier
/// columns, found by a pivot check during a Cholesky pass over `XᵀX`.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let gram = x.transpose() * x;
    let p = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut dropped = Vec::new();
    for k in 0..p {
        let diag = gram[(k, k)];
        let mut pivot = diag;
        for j in 0..k {
            pivot -= l[(k, j)] * l[(k, j)];
        }
        if diag <= 0.0 || pivot <= PIVOT_TOL * diag {
            dropped.push(k);
            continue;
        }
        let root = pivot.sqrt();
        l[(k, k)] = root;
        for i in (k + 1)..p {
            let mut s = gram[(i, k)];
            for j in 0..k {
                s -= l[(i, j)] * l[(k, j)];
            }
            l[(i, k)] = s / root;
        }
    }
    dropped
}

/// Ordinary least squares. Fails with [`StatsError::Collinear`] naming the
/// dependent columns instead of returning an arbitrary solution.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, StatsError> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(StatsError::TooFewRows { rows: n, params: p });
    }
    let dropped = dependent_columns(x);
    if !dropped.is_empty() {
        return Err(StatsError::Collinear { columns: dropped });
    }
    let gram = x.transpose() * x;
    let chol = gram
        .cholesky()
        .ok_or_else(|| StatsError::Collinear { columns: (0..p).collect() })?;
    let beta = chol.solve(&(x.transpose() * y));
    let resid = y - x * &beta;
    let rss = resid.norm_squared();
    let inv = chol.inverse();
    let sigma2 = rss / (n - p) as f64;
    let std_errors = (0..p).map(|k| (sigma2 * inv[(k, k)]).max(0.0).sqrt()).collect();
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        rss,
        rows: n,
    })
}

/// OLS after silently discarding dependent columns. Returns the fit and the
/// indices of the columns that were kept.
pub fn ols_reduced(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(OlsFit, Vec<usize>), StatsError> {
    let dropped = dependent_columns(x);
    let kept: Vec<usize> = (0..x.ncols()).filter(|c| !dropped.contains(c)).collect();
    let reduced = x.select_columns(kept.iter());
    let fit = ols(&reduced, y)?;
    Ok((fit, kept))
}

pub fn drop_dependent(x: &DMatrix<f64>) -> DMatrix<f64> {
    let dropped = dependent_columns(x);
    if dropped.is_empty() {
        return x.clone();
    }
    let kept: Vec<usize> = (0..x.ncols()).filter(|c| !dropped.contains(c)).collect();
    x.select_columns(kept.iter())
}

#[derive(Debug, Clone)]
pub struct LogitFit {
    pub log_likelihood: f64,
    /// Number of free parameters, `(classes - 1) * columns`.
    pub params: usize,
    pub iterations: usize,
}

/// Multinomial logistic regression by damped Newton iterations, class 0 as
/// reference. `x` should already contain an intercept column.
pub fn multinomial_logit(x: &DMatrix<f64>, y: &[usize], classes: usize) -> Result<LogitFit, StatsError> {
    const MAX_ITER: usize = 100;
    let (n, p) = x.shape();
    if classes < 2 {
        return Ok(LogitFit { log_likelihood: 0.0, params: 0, iterations: 0 });
    }
    let k = classes - 1;
    let dim = k * p;
    // Row-major copy; the inner loops walk rows.
    let rows: Vec<f64> = (0..n).flat_map(|i| (0..p).map(move |c| (i, c))).map(|(i, c)| x[(i, c)]).collect();
    let mut beta = vec![0.0; dim];
    let mut ll = logit_ll(&rows, p, y, &beta, k);
    let mut probs = vec![0.0; k];
    for iter in 1..=MAX_ITER {
        let mut grad = DVector::<f64>::zeros(dim);
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            let row = &rows[i * p..(i + 1) * p];
            softmax_ref(row, &beta, k, &mut probs);
            for a in 0..k {
                let ya = if y[i] == a + 1 { 1.0 } else { 0.0 };
                let ra = ya - probs[a];
                for c in 0..p {
                    grad[a * p + c] += ra * row[c];
                }
                for b in a..k {
                    let w = if a == b { probs[a] * (1.0 - probs[a]) } else { -probs[a] * probs[b] };
                    if w == 0.0 {
                        continue;
                    }
                    for c in 0..p {
                        let wc = w * row[c];
                        for e in 0..p {
                            hess[(a * p + c, b * p + e)] += wc * row[e];
                        }
                    }
                }
            }
        }
        for a in 0..k {
            for b in (a + 1)..k {
                for c in 0..p {
                    for e in 0..p {
                        hess[(b * p + e, a * p + c)] = hess[(a * p + c, b * p + e)];
                    }
                }
            }
        }
        for d in 0..dim {
            hess[(d, d)] += 1e-9;
        }
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => return Err(StatsError::NoConvergence { iterations: iter }),
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + s * scale).collect();
            let cand_ll = logit_ll(&rows, p, y, &cand, k);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                let gain = cand_ll - ll;
                beta = cand;
                ll = cand_ll;
                accepted = true;
                if gain.abs() <= 1e-10 * ll.abs().max(1.0) || step.amax() * scale < 1e-9 {
                    return Ok(LogitFit { log_likelihood: ll, params: dim, iterations: iter });
                }
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // No ascent direction left: at a (numerical) optimum.
            return Ok(LogitFit { log_likelihood: ll, params: dim, iterations: iter });
        }
    }
    Err(StatsError::NoConvergence { iterations: MAX_ITER })
}

fn softmax_ref(row: &[f64], beta: &[f64], k: usize, out: &mut [f64]) {
    let p = row.len();
    let mut max = 0.0f64;
    for a in 0..k {
        let eta: f64 = beta[a * p..(a + 1) * p].iter().zip(row).map(|(b, x)| b * x).sum();
        out[a] = eta;
        max = max.max(eta);
    }
    let mut denom = (-max).exp();
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        denom += *v;
    }
    for v in out.iter_mut() {
        *v /= denom;
    }
}

fn logit_ll(rows: &[f64], p: usize, y: &[usize], beta: &[f64], k: usize) -> f64 {
    let mut ll = 0.0;
    let mut etas = vec![0.0; k + 1];
    for (i, row) in rows.chunks_exact(p).enumerate() {
        let mut max = 0.0f64;
        for a in 0..k {
            let eta: f64 = beta[a * p..(a + 1) * p].iter().zip(row).map(|(b, x)| b * x).sum();
            etas[a + 1] = eta;
            max = max.max(eta);
        }
        let lse = max + etas.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
        ll += etas[y[i]] - lse;
    }
    ll
}

/// Log-likelihood of the intercept-only multinomial model.
pub fn multinomial_null_ll(y: &[usize], classes: usize) -> f64 {
    let mut counts = vec![0usize; classes];
    for &v in y {
        counts[v] += 1;
    }
    let n = y.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64 / n).ln())
        .sum()
}

/// Upper tail probability of a χ² statistic.
pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    if !(dof > 0.0) {
        return 1.0;
    }
    if !(stat > 0.0) {
        return 1.0;
    }
    match ChiSquared::new(dof) {
        Ok(d) => d.sf(stat).clamp(0.0, 1.0),
        Err(_) => 1.0,
    }
}

/// Two-sided normal p-value for a z statistic.
pub fn normal_two_sided(z: f64) -> f64 {
    let std = Normal::standard();
    (2.0 * std.sf(z.abs())).clamp(0.0, 1.0)
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn ols_names_collinear_column() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 2.0, 1.0, 2.0, 4.0, 1.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![0.0, 1.0, 2.0, 2.5]);
        assert_eq!(ols(&x, &y).unwrap_err(), StatsError::Collinear { columns: vec![2] });
        let (fit, kept) = ols_reduced(&x, &y).unwrap();
        assert_eq!(kept, vec![0, 1]);
        assert_eq!(fit.coefficients.len(), 2);
    }

    #[test]
    fn logit_matches_closed_form_for_binary_indicator() {
        // With a single binary regressor the MLE reproduces the cell frequencies.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (g, ones, total) in [(0.0, 3usize, 10usize), (1.0, 8, 10)] {
            for i in 0..total {
                rows.extend_from_slice(&[1.0, g]);
                y.push(usize::from(i < ones));
            }
        }
        let x = DMatrix::from_row_slice(20, 2, &rows);
        let fit = multinomial_logit(&x, &y, 2).unwrap();
        let cell = |p: f64, k: f64, n: f64| k * p.ln() + (n - k) * (1.0 - p).ln();
        let expected = cell(0.3, 3.0, 10.0) + cell(0.8, 8.0, 10.0);
        assert!((fit.log_likelihood - expected).abs() < 1e-8, "{} vs {}", fit.log_likelihood, expected);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn chi2_tail_known_value() {
        // P(χ²₁ > 3.841459) = 0.05
        assert!((chi2_sf(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-9);
    }
}
