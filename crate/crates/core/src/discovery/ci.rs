//! Conditional independence tests for mixed data.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::DiscoveryError;
use crate::dataset::{design_matrix, encode_column, MixedDataset, VariableKind};
use crate::stats::{self, chi2_sf, normal_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    FisherZ,
    GSquared,
    MixedLr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub p_value: f64,
    pub statistic: f64,
    pub dof: f64,
    pub method: CiMethod,
    /// Set when the data cannot support the test; `p_value` is then 1.
    pub degenerate: bool,
}

impl CiResult {
    fn degenerate(method: CiMethod) -> Self {
        Self { p_value: 1.0, statistic: 0.0, dof: 0.0, method, degenerate: true }
    }
}

/// Tests `X_i ⫫ X_j | X_S` by column index. The result does not depend on
/// the order of `i` and `j` or of `s`.
pub fn ci_test(ds: &MixedDataset, i: usize, j: usize, s: &[usize]) -> Result<CiResult, DiscoveryError> {
    let d = ds.variables().len();
    if i == j || i >= d || j >= d || s.iter().any(|&k| k == i || k == j || k >= d) {
        return Err(DiscoveryError::BadCiQuery);
    }
    let mut s = s.to_vec();
    s.sort_by(|&a, &b| ds.variable(a).name.cmp(&ds.variable(b).name));
    s.dedup();
    let (i, j) = if ds.variable(i).name <= ds.variable(j).name { (i, j) } else { (j, i) };
    let cont = |k: usize| ds.variable(k).kind == VariableKind::Continuous;
    let res = if cont(i) && cont(j) && s.iter().all(|&k| cont(k)) {
        fisher_z(ds, i, j, &s)
    } else if !cont(i) && !cont(j) && s.iter().all(|&k| !cont(k)) {
        g_squared(ds, i, j, &s)
    } else {
        mixed_lr(ds, i, j, &s)
    };
    Ok(res)
}

fn fisher_z(ds: &MixedDataset, i: usize, j: usize, s: &[usize]) -> CiResult {
    let n = ds.row_count();
    if n < s.len() + 4 {
        return CiResult::degenerate(CiMethod::FisherZ);
    }
    let cols: Vec<&[f64]> = s.iter().map(|&k| ds.column(k)).collect();
    let x = design_matrix(n, &cols);
    let resid = |k: usize| -> Option<Vec<f64>> {
        let y = DVector::from_column_slice(ds.column(k));
        let (fit, kept) = stats::ols_reduced(&x, &y).ok()?;
        let xr = x.select_columns(kept.iter());
        let beta = DVector::from_vec(fit.coefficients);
        Some((y - xr * beta).iter().copied().collect())
    };
    let (Some(ri), Some(rj)) = (resid(i), resid(j)) else {
        return CiResult::degenerate(CiMethod::FisherZ);
    };
    let Some(r) = stats::pearson(&ri, &rj) else {
        return CiResult::degenerate(CiMethod::FisherZ);
    };
    let r = r.clamp(-1.0, 1.0);
    let z = r.atanh() * ((n - s.len() - 3) as f64).sqrt();
    let p = if z.is_finite() { normal_two_sided(z) } else { 0.0 };
    CiResult { p_value: p, statistic: z, dof: 1.0, method: CiMethod::FisherZ, degenerate: false }
}

fn g_squared(ds: &MixedDataset, i: usize, j: usize, s: &[usize]) -> CiResult {
    let ci = ds.variable(i).cardinality();
    let cj = ds.variable(j).cardinality();
    let xi = ds.codes(i);
    let xj = ds.codes(j);
    let strata_codes: Vec<Vec<usize>> = s.iter().map(|&k| ds.codes(k)).collect();
    let mut tables: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    for r in 0..ds.row_count() {
        let key: Vec<usize> = strata_codes.iter().map(|c| c[r]).collect();
        let t = tables.entry(key).or_insert_with(|| vec![0.0; ci * cj]);
        t[xi[r] * cj + xj[r]] += 1.0;
    }
    let mut g2 = 0.0;
    let mut informative = false;
    for t in tables.values() {
        let total: f64 = t.iter().sum();
        let rows: Vec<f64> = (0..ci).map(|a| (0..cj).map(|b| t[a * cj + b]).sum()).collect();
        let colsum: Vec<f64> = (0..cj).map(|b| (0..ci).map(|a| t[a * cj + b]).sum()).collect();
        if rows.iter().filter(|&&v| v > 0.0).count() >= 2 && colsum.iter().filter(|&&v| v > 0.0).count() >= 2 {
            informative = true;
        }
        for a in 0..ci {
            for b in 0..cj {
                let o = t[a * cj + b];
                if o > 0.0 {
                    let e = rows[a] * colsum[b] / total;
                    g2 += o * (o / e).ln();
                }
            }
        }
    }
    if !informative {
        return CiResult::degenerate(CiMethod::GSquared);
    }
    let g2 = (2.0 * g2).max(0.0);
    let strata: usize = s.iter().map(|&k| ds.variable(k).cardinality()).product();
    let dof = ((ci - 1) * (cj - 1) * strata) as f64;
    CiResult { p_value: chi2_sf(g2, dof), statistic: g2, dof, method: CiMethod::GSquared, degenerate: false }
}

/// Likelihood-ratio test of the nested regressions `target ~ S` against
/// `target ~ S + other`. The target is the continuous member of the pair when
/// the kinds differ, otherwise the first by name.
fn mixed_lr(ds: &MixedDataset, i: usize, j: usize, s: &[usize]) -> CiResult {
    let deg = CiResult::degenerate(CiMethod::MixedLr);
    let (target, other) = match (ds.variable(i).kind, ds.variable(j).kind) {
        (VariableKind::Categorical, VariableKind::Continuous) => (j, i),
        _ => (i, j),
    };
    let n = ds.row_count();
    let s_cols: Vec<Vec<f64>> = s.iter().flat_map(|&k| encode_column(ds, k)).map(|(_, c)| c).collect();
    let o_cols: Vec<Vec<f64>> = encode_column(ds, other).into_iter().map(|(_, c)| c).collect();
    let reduced_refs: Vec<&[f64]> = s_cols.iter().map(Vec::as_slice).collect();
    let full_refs: Vec<&[f64]> = reduced_refs.iter().copied().chain(o_cols.iter().map(Vec::as_slice)).collect();
    let x0 = stats::drop_dependent(&design_matrix(n, &reduced_refs));
    let x1 = stats::drop_dependent(&design_matrix(n, &full_refs));
    let added = x1.ncols().saturating_sub(x0.ncols());
    if added == 0 || n <= x1.ncols() {
        return deg;
    }
    match ds.variable(target).kind {
        VariableKind::Continuous => {
            let y = DVector::from_column_slice(ds.column(target));
            let (Ok(f0), Ok(f1)) = (stats::ols(&x0, &y), stats::ols(&x1, &y)) else {
                return deg;
            };
            if !(f0.rss > 0.0) || !(f1.rss > 0.0) {
                return if f0.rss > 0.0 {
                    CiResult { p_value: 0.0, statistic: f64::INFINITY, dof: added as f64, method: CiMethod::MixedLr, degenerate: false }
                } else {
                    deg
                };
            }
            let stat = (n as f64 * (f0.rss / f1.rss).ln()).max(0.0);
            CiResult { p_value: chi2_sf(stat, added as f64), statistic: stat, dof: added as f64, method: CiMethod::MixedLr, degenerate: false }
        }
        VariableKind::Categorical => {
            let classes = ds.variable(target).cardinality();
            let y = ds.codes(target);
            let observed = {
                let mut seen = vec![false; classes];
                y.iter().for_each(|&c| seen[c] = true);
                seen.iter().filter(|&&b| b).count()
            };
            if observed < 2 {
                return deg;
            }
            let (Ok(f0), Ok(f1)) = (stats::multinomial_logit(&x0, &y, classes), stats::multinomial_logit(&x1, &y, classes)) else {
                return deg;
            };
            let stat = (2.0 * (f1.log_likelihood - f0.log_likelihood)).max(0.0);
            let dof = ((classes - 1) * added) as f64;
            CiResult { p_value: chi2_sf(stat, dof), statistic: stat, dof, method: CiMethod::MixedLr, degenerate: false }
        }
    }
}
