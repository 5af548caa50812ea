use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{mean_std, EvalReport, MetricKind};
use crate::error::{Error, Result};
use crate::store::Split;

pub const DEFAULT_FOLDS: usize = 10;
/// Classes of the soft-binned similarity scale (0 through 5).
pub const SCORE_CLASSES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxConfig {
    /// Penalty on the weight matrix (biases are not penalized).
    pub l2: f64,
    pub max_iterations: u64,
    pub gradient_tolerance: f64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            l2: 1e-3,
            max_iterations: 1000,
            gradient_tolerance: 1e-5,
        }
    }
}

/// Splits a score in `[0, 5]` between its two neighbouring integer classes.
pub fn soft_bin(score: f64) -> Result<Vec<(usize, f64)>> {
    if !(0.0..=5.0).contains(&score) {
        return Err(Error::invalid(format!("score {score} outside [0, 5]")));
    }
    let floor = score.floor();
    let frac = score - floor;
    let class = floor as usize;
    Ok(if frac == 0.0 {
        vec![(class, 1.0)]
    } else {
        vec![(class, 1.0 - frac), (class + 1, frac)]
    })
}

/// Per-example class distributions (`n × C`, rows summing to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTargets {
    weights: Array2<f64>,
}

impl ClassTargets {
    pub fn hard(labels: &[usize]) -> Result<Self> {
        let c = labels.iter().max().map_or(0, |m| m + 1);
        if c < 2 {
            return Err(Error::invalid("classification needs at least two classes"));
        }
        let mut weights = Array2::zeros((labels.len(), c));
        for (i, &l) in labels.iter().enumerate() {
            weights[(i, l)] = 1.0;
        }
        Ok(ClassTargets { weights })
    }

    pub fn soft_scores(scores: &[f64]) -> Result<Self> {
        let mut weights = Array2::zeros((scores.len(), SCORE_CLASSES));
        for (i, &s) in scores.iter().enumerate() {
            for (c, w) in soft_bin(s)? {
                weights[(i, c)] += w;
            }
        }
        Ok(ClassTargets { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.nrows() == 0
    }

    pub fn class_count(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// Highest-weight class per example; ties go to the lower class.
    pub fn gold(&self) -> Vec<usize> {
        self.weights.rows().into_iter().map(|r| argmax(r.iter())).collect()
    }

    fn select(&self, rows: &[usize]) -> Array2<f64> {
        self.weights.select(Axis(0), rows)
    }
}

fn argmax<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Multinomial logistic regression weights (`d × C`) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub iterations: u64,
    pub converged: bool,
}

impl SoftmaxModel {
    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        let logits = x.dot(&self.weights) + &self.bias;
        logits.rows().into_iter().map(|r| argmax(r.iter())).collect()
    }
}

struct Objective<'a> {
    x: ArrayView2<'a, f64>,
    t: ArrayView2<'a, f64>,
    l2: f64,
}

impl Objective<'_> {
    fn unpack(&self, p: &[f64]) -> (Array2<f64>, Array1<f64>) {
        let (d, c) = (self.x.ncols(), self.t.ncols());
        let w = Array2::from_shape_vec((d, c), p[..d * c].to_vec()).expect("d × c");
        let b = Array1::from(p[d * c..].to_vec());
        (w, b)
    }

    /// Row-wise log-softmax of the logits.
    fn log_probs(&self, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
        let mut z = self.x.dot(w) + b;
        for mut row in z.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            row -= lse;
        }
        z
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let (w, b) = self.unpack(p);
        let lp = self.log_probs(&w, &b);
        let n = self.x.nrows() as f64;
        let ce = -(&lp * &self.t).sum() / n;
        Ok(ce + 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>())
    }
}

impl Gradient for Objective<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, p: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let (w, b) = self.unpack(p);
        let n = self.x.nrows() as f64;
        let residual = (self.log_probs(&w, &b).mapv(f64::exp) - self.t) / n;
        let gw = self.x.t().dot(&residual) + &(&w * self.l2);
        let gb = residual.sum_axis(Axis(0));
        Ok(gw.iter().chain(gb.iter()).copied().collect())
    }
}

/// Full-batch L-BFGS on the L2-penalized cross-entropy against (possibly
/// soft) targets.
pub fn train_softmax(
    x: &Array2<f64>,
    targets: &Array2<f64>,
    config: &SoftmaxConfig,
) -> Result<SoftmaxModel> {
    if x.nrows() != targets.nrows() || x.nrows() == 0 {
        return Err(Error::invalid("features and targets must have the same, non-zero row count"));
    }
    let (d, c) = (x.ncols(), targets.ncols());
    let objective = Objective {
        x: x.view(),
        t: targets.view(),
        l2: config.l2,
    };
    let fit_err = |e: argmin::core::Error| Error::Fit(format!("logistic regression: {e}"));
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
        .with_tolerance_grad(config.gradient_tolerance)
        .map_err(fit_err)?
        .with_tolerance_cost(0.0)
        .map_err(fit_err)?;
    let result = Executor::new(objective, solver)
        .configure(|s| s.param(vec![0.0; d * c + c]).max_iters(config.max_iterations))
        .run()
        .map_err(fit_err)?;
    let state = result.state();
    let best = state
        .get_best_param()
        .or_else(|| state.get_param())
        .ok_or_else(|| Error::Fit("optimizer returned no parameters".into()))?;
    let converged = matches!(
        state.get_termination_status(),
        argmin::core::TerminationStatus::Terminated(
            argmin::core::TerminationReason::SolverConverged
        )
    );
    let w = Array2::from_shape_vec((d, c), best[..d * c].to_vec()).expect("d × c");
    let b = Array1::from(best[d * c..].to_vec());
    Ok(SoftmaxModel {
        weights: w,
        bias: b,
        iterations: state.get_iter(),
        converged,
    })
}

/// Fold index per example; each class is shuffled and dealt round-robin,
/// continuing the deal across classes so folds stay balanced in size.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > labels.len() {
        return Err(Error::invalid(format!(
            "cannot split {} examples into {folds} folds",
            labels.len()
        )));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

fn accuracy(pred: &[usize], gold: &[usize]) -> f64 {
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    hits as f64 / gold.len() as f64
}

fn fit_and_score(
    x: &Array2<f64>,
    targets: &ClassTargets,
    gold: &[usize],
    train: &[usize],
    test: &[usize],
    config: &SoftmaxConfig,
) -> Result<f64> {
    let mut present: Vec<usize> = train.iter().map(|&i| gold[i]).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Fit("training fold holds a single class".into()));
    }
    let model = train_softmax(&x.select(Axis(0), train), &targets.select(train), config)?;
    if !model.converged {
        log::warn!("logistic regression stopped after {} iterations", model.iterations);
    }
    let pred = model.predict(&x.select(Axis(0), test));
    let test_gold: Vec<usize> = test.iter().map(|&i| gold[i]).collect();
    Ok(accuracy(&pred, &test_gold))
}

/// Test accuracy of a softmax probe. Uses the official train/test split
/// when `splits` marks one, otherwise stratified k-fold cross-validation.
pub fn eval_classification(
    task: &str,
    targets: &ClassTargets,
    splits: Option<&[Option<Split>]>,
    vectors: &Array2<f64>,
    config: &SoftmaxConfig,
    seed: u64,
) -> Result<EvalReport> {
    if targets.len() != vectors.nrows() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            actual: vectors.nrows(),
        });
    }
    let gold = targets.gold();
    let official = splits.filter(|s| s.iter().any(Option::is_some));
    if let Some(splits) = official {
        let pick = |want: Split| -> Vec<usize> {
            (0..splits.len()).filter(|&i| splits[i] == Some(want)).collect()
        };
        let (train, test) = (pick(Split::Train), pick(Split::Test));
        if train.is_empty() || test.is_empty() {
            return Err(Error::invalid("official split needs train and test rows"));
        }
        let acc = fit_and_score(vectors, targets, &gold, &train, &test, config)?;
        return Ok(EvalReport {
            seeds: vec![seed],
            ..EvalReport::single(task, MetricKind::ClassifyAccuracy, acc)
        });
    }
    let folds = stratified_folds(&gold, DEFAULT_FOLDS.min(gold.len()), seed)?;
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let scores = (0..k)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..gold.len()).partition(|&i| folds[i] == f);
            fit_and_score(vectors, targets, &gold, &train, &test, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = mean_std(&scores);
    Ok(EvalReport {
        stddev: std,
        runs: scores.len(),
        seeds: vec![seed],
        ..EvalReport::single(task, MetricKind::ClassifyAccuracy, mean)
    })
}
