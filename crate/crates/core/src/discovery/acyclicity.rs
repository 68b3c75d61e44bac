use nalgebra::DMatrix;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn matrix_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let norm = m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m / 2f64.powi(squarings);
    let mut result = DMatrix::<f64>::identity(d, d);
    let mut term = DMatrix::<f64>::identity(d, d);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.amax() <= f64::EPSILON * result.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `h(A) = tr(exp(A ∘ A)) − d` and its gradient `exp(A ∘ A)ᵀ ∘ 2A`.
pub fn acyclicity_h(a: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let d = a.nrows();
    let sq = a.component_mul(a);
    let e = matrix_exp(&sq);
    let h = (e.trace() - d as f64).max(0.0);
    let grad = e.transpose().component_mul(a) * 2.0;
    (h, grad)
}
