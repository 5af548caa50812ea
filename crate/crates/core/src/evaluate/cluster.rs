use ndarray::{Array1, Array2};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{mean_std, EvalReport, MetricKind};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
pub const SHIFT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_RUNS: usize = 10;

/// Squared distances of every row to every centroid (`n × k`).
fn squared_distances(x: &Array2<f64>, row_norms: &Array1<f64>, c: &Array2<f64>) -> Array2<f64> {
    let c_norms: Array1<f64> = c.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut d = x.dot(&c.t());
    for (mut row, &xn) in d.rows_mut().into_iter().zip(row_norms) {
        for (v, &cn) in row.iter_mut().zip(&c_norms) {
            *v = (xn - 2.0 * *v + cn).max(0.0);
        }
    }
    d
}

fn argmin(row: ndarray::ArrayView1<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, &v) in row.iter().enumerate() {
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans(x: &Array2<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = x.nrows();
    if k == 0 || n < k {
        return Err(Error::invalid(format!("cannot form {k} clusters from {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row_norms: Array1<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();

    let mut centroids = Array2::zeros((k, x.ncols()));
    centroids.row_mut(0).assign(&x.row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| {
            let diff = &r - &centroids.row(0);
            diff.dot(&diff)
        })
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for (i, slot) in nearest.iter_mut().enumerate() {
            let diff = &x.row(i) - &centroids.row(c);
            *slot = slot.min(diff.dot(&diff));
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..MAX_ITERATIONS {
        let d = squared_distances(x, &row_norms, &centroids);
        let mut dist = vec![0.0; n];
        for (i, row) in d.rows().into_iter().enumerate() {
            let (j, v) = argmin(row);
            labels[i] = j;
            dist[i] = v;
        }
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut sizes = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            sums.row_mut(l).scaled_add(1.0, &x.row(i));
            sizes[l] += 1;
        }
        let mut next = centroids.clone();
        for j in 0..k {
            if sizes[j] > 0 {
                next.row_mut(j).assign(&(&sums.row(j) / sizes[j] as f64));
            } else {
                // reseed to the point farthest from its own centroid
                let far = (0..n)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("n >= 1");
                next.row_mut(j).assign(&x.row(far));
                dist[far] = 0.0;
                sizes[labels[far]] -= 1;
                labels[far] = j;
                sizes[j] = 1;
            }
        }
        let shift = (&next - &centroids)
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0f64, f64::max);
        centroids = next;
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    let d = squared_distances(x, &row_norms, &centroids);
    for (i, row) in d.rows().into_iter().enumerate() {
        labels[i] = argmin(row).0;
    }
    Ok(labels)
}

/// Best matched fraction over one-to-one cluster-to-class assignments.
pub fn hungarian_accuracy(pred: &[usize], gold: &[usize]) -> Result<f64> {
    if pred.len() != gold.len() || pred.is_empty() {
        return Err(Error::invalid("label lists must be non-empty and equal length"));
    }
    let k = pred.iter().chain(gold).max().expect("non-empty") + 1;
    let mut table = Matrix::new(k, k, 0i64);
    for (&p, &g) in pred.iter().zip(gold) {
        table[(p, g)] += 1;
    }
    Ok(max_matching(&table) as f64 / pred.len() as f64)
}

/// Maximum total weight of a perfect matching in a square count table.
pub fn max_matching(table: &Matrix<i64>) -> i64 {
    kuhn_munkres(table).0
}

/// Mean and standard deviation of Hungarian accuracy over seeded k-means
/// runs with `k` equal to the number of gold classes.
pub fn eval_clustering(
    task: &str,
    labels: &[usize],
    vectors: &Array2<f64>,
    seeds: &[u64],
) -> Result<EvalReport> {
    if labels.len() != vectors.nrows() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: vectors.nrows(),
        });
    }
    if seeds.is_empty() {
        return Err(Error::config("clustering needs at least one seed"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let scores = seeds
        .par_iter()
        .map(|&seed| hungarian_accuracy(&kmeans(vectors, k, seed)?, labels))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = mean_std(&scores);
    Ok(EvalReport {
        stddev: std,
        runs: scores.len(),
        seeds: seeds.to_vec(),
        ..EvalReport::single(task, MetricKind::ClusterAccuracy, mean)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn relabeling_is_free() {
        assert_eq!(hungarian_accuracy(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(hungarian_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.75);
    }

    #[test]
    fn separated_blobs() {
        let x = array![[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [10.0, 10.0], [10.1, 10.0], [10.0, 10.1]];
        let gold = [0, 0, 0, 1, 1, 1];
        for seed in 0..5 {
            let labels = kmeans(&x, 2, seed).unwrap();
            assert_eq!(hungarian_accuracy(&labels, &gold).unwrap(), 1.0);
        }
    }

    #[test]
    fn too_few_points() {
        assert!(kmeans(&array![[0.0], [1.0]], 3, 0).is_err());
    }

    #[test]
    fn duplicate_points_fill_every_cluster() {
        let x = array![[1.0], [1.0], [1.0], [5.0]];
        let labels = kmeans(&x, 3, 2).unwrap();
        assert_eq!(labels.len(), 4);
    }
}
