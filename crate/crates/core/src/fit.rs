//! Small least-squares helpers.

use nalgebra::{DMatrix, DVector};

/// Ordinary least-squares line through (x, y); returns (slope, intercept).
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Least-squares coefficients of `y ≈ Σ_j c_j·columns[j]`, solved by SVD
/// after scaling each column to unit norm. Returns `None` when rank deficient.
pub fn lstsq(columns: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let m = y.len();
    let n = columns.len();
    if m < n {
        return None;
    }
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if norms.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return None;
    }
    let a = DMatrix::from_fn(m, n, |i, j| columns[j][i] / norms[j]);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-13 * smax {
        return None;
    }
    let x = svd.solve(&b, 0.0).ok()?;
    Some((0..n).map(|j| x[j] / norms[j]).collect())
}

/// Residual sum of squares of a linear model.
pub fn rss(columns: &[Vec<f64>], coef: &[f64], y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, yi)| {
            let model: f64 = columns.iter().zip(coef).map(|(c, k)| c[i] * k).sum();
            (yi - model).powi(2)
        })
        .sum()
}
