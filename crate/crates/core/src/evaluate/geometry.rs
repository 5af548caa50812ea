use ndarray::Array2;

use crate::error::{Error, Result};
use crate::postprocess::covariance_spectrum;

/// How uniformly the point cloud spreads its variance over all `d`
/// dimensions: 1 for isotropic data, 0 when a single direction carries it all.
pub fn iso_score(x: &Array2<f64>) -> Result<f64> {
    let (n, d) = x.dim();
    if d < 2 {
        return Err(Error::Undefined("isotropy score needs at least two dimensions".into()));
    }
    if n < 2 {
        return Err(Error::invalid("isotropy score needs at least two points"));
    }
    if n <= d {
        log::warn!("isotropy score on {n} points in {d} dimensions is biased low");
    }
    // variances along principal axes are the covariance eigenvalues
    let variances: Vec<f64> = covariance_spectrum(x).into_iter().map(|v| v.max(0.0)).collect();
    let norm = variances.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Undefined("isotropy score of a single repeated point".into()));
    }
    let df = d as f64;
    let sqrt_d = df.sqrt();
    let defect = variances
        .iter()
        .map(|v| (sqrt_d * v / norm - 1.0).powi(2))
        .sum::<f64>()
        .sqrt()
        / (2.0 * (df - sqrt_d)).sqrt();
    let utilized = (df - defect * defect * (df - sqrt_d)).powi(2) / df;
    Ok(((utilized - 1.0) / (df - 1.0)).clamp(0.0, 1.0))
}

fn unit_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// Mean squared distance between the two sides of each positive pair
/// (rows `a[i]` and `b[i]`).
pub fn alignment(a: &Array2<f64>, b: &Array2<f64>, normalize: bool) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid("pair sides must have the same shape"));
    }
    if a.nrows() == 0 {
        return Err(Error::invalid("alignment needs at least one positive pair"));
    }
    let (a, b) = if normalize { (unit_rows(a), unit_rows(b)) } else { (a.clone(), b.clone()) };
    let total: f64 = a
        .rows()
        .into_iter()
        .zip(b.rows())
        .map(|(u, v)| {
            let diff = &u - &v;
            diff.dot(&diff)
        })
        .sum();
    Ok(total / a.nrows() as f64)
}

/// Log of the mean Gaussian potential `exp(−2‖x−y‖²)` over unordered pairs
/// of distinct rows.
pub fn uniformity(x: &Array2<f64>, normalize: bool) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("uniformity needs at least two vectors"));
    }
    let x = if normalize { unit_rows(x) } else { x.clone() };
    let norms: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();
    let gram = x.dot(&x.t());
    let mut exponents = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let sq = (norms[i] + norms[j] - 2.0 * gram[(i, j)]).max(0.0);
            exponents.push(-2.0 * sq);
        }
    }
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|e| (e - max).exp()).sum();
    Ok(max + (sum / exponents.len() as f64).ln())
}
