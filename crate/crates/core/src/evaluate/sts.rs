use ndarray::{Array2, ArrayView1};

use super::{EvalReport, MetricKind};
use crate::error::{Error, Result};
use crate::store::SentencePairSet;

/// Cosine similarity; 0 (with a warning) when either vector is zero.
pub fn cosine(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> f64 {
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        log::warn!("cosine with a zero vector defined as 0");
        return 0.0;
    }
    u.dot(&v) / (nu * nv)
}

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid(format!(
            "correlation needs two equal-length series of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN in rank correlation input"));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Cosine similarity of every pair; `vectors` row `2i` and `2i + 1` hold the
/// two sides of pair `i`.
pub fn pair_cosines(vectors: &Array2<f64>) -> Result<Vec<f64>> {
    if vectors.nrows() % 2 != 0 {
        return Err(Error::invalid("pair vectors must come in twos"));
    }
    Ok((0..vectors.nrows() / 2)
        .map(|i| cosine(vectors.row(2 * i), vectors.row(2 * i + 1)))
        .collect())
}

/// Spearman correlation between gold scores and pair cosines over all pairs
/// at once (subsets are pooled, not averaged).
pub fn eval_sts(task: &str, pairs: &SentencePairSet, vectors: &Array2<f64>) -> Result<EvalReport> {
    if vectors.nrows() != 2 * pairs.len() {
        return Err(Error::DimensionMismatch {
            expected: 2 * pairs.len(),
            actual: vectors.nrows(),
        });
    }
    let sims = pair_cosines(vectors)?;
    let rho = spearman(&pairs.scores(), &sims)?;
    Ok(EvalReport::single(task, MetricKind::Spearman, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cosine_cases() {
        let a = array![1.0, 0.0];
        assert_eq!(cosine(a.view(), a.view()), 1.0);
        assert_eq!(cosine(a.view(), array![0.0, 1.0].view()), 0.0);
        assert_eq!(cosine(a.view(), array![-1.0, 0.0].view()), -1.0);
        assert_eq!(cosine(a.view(), array![0.0, 0.0].view()), 0.0);
    }

    #[test]
    fn spearman_cases() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Undefined(_))
        ));
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_get_mean_rank() {
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
