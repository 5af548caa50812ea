//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any evaluated criterion fails.
//!
//! The dataset-backed criteria read from `$EMBSHAPE_DATA`:
//! `stsb_test.tsv`, `sickr_test.tsv` (score, sentence, sentence),
//! `tweet.tsv` (label, text) and `wikitext2.txt` (one sentence per line).
//! Without it they print FAIL with the reason and are not counted toward the
//! exit status, unless `EMBSHAPE_ACCEPTANCE_STRICT=1`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, StandardNormal};

use embshape_core::aggregate::{aggregate, compute_stats, AggregationSpec, StatsSource};
use embshape_core::evaluate::{
    alignment, hungarian_accuracy, iso_score, spearman, to_csv, uniformity, EvalReport,
};
use embshape_core::experiment::{
    run, CellKey, CorpusConfig, ExperimentConfig, ModelConfig, ModelKind, TaskConfig, TaskKind,
};
use embshape_core::models::combine;
use embshape_core::postprocess::{Transform, TransformKind};
use embshape_core::store::{EmbeddingTensor, SentenceEmbedding};
use embshape_core::tokenize::{classify_tokens, Vocabulary};

enum Outcome {
    Pass(String),
    Fail(String),
    /// Could not be evaluated here; the string says why.
    Blocked(String),
}

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
}

impl Check {
    fn new(name: &'static str, ok: bool, detail: impl Into<String>) -> Self {
        Check {
            name,
            ok,
            detail: detail.into(),
        }
    }
}

fn summarize(checks: Vec<Check>) -> Outcome {
    let text: Vec<String> = checks
        .iter()
        .map(|c| format!("{}{} {}", if c.ok { "" } else { "!" }, c.name, c.detail))
        .collect();
    if checks.iter().all(|c| c.ok) {
        Outcome::Pass(text.join("; "))
    } else {
        Outcome::Fail(text.join("; "))
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| r.sample(StandardNormal))
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn population_cov(x: &Array2<f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).unwrap();
    let c = x - &mean;
    c.t().dot(&c) / x.nrows() as f64
}

// ---------------------------------------------------------------------------
// dataset-backed criteria

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("EMBSHAPE_DATA").map(PathBuf::from)
}

fn re_config(dir: &Path, tasks: Vec<TaskConfig>, aggs: &[&str], post: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        vocab: None,
        corpus: Some(CorpusConfig {
            texts: dir.join("wikitext2.txt"),
            tag: "W".into(),
            min_chars: 10,
        }),
        models: vec![ModelConfig {
            name: "RE".into(),
            kind: ModelKind::Random {
                seeds: (0..5).collect(),
                dim: 768,
            },
        }],
        tasks,
        aggregations: aggs.iter().map(|s| s.to_string()).collect(),
        post: post.iter().map(|s| s.to_string()).collect(),
        weights: Vec::new(),
        layer_sets: Vec::new(),
        seeds: (0..10).collect(),
        frequent_k: 33,
        stoplist: None,
        l2: None,
        normalize_diagnostics: true,
        output: None,
        threads: None,
    }
}

fn task(name: &str, kind: TaskKind, path: PathBuf) -> TaskConfig {
    TaskConfig {
        name: name.into(),
        kind,
        path,
        format: None,
        metric: None,
    }
}

fn find<'a>(reports: &'a [EvalReport], task: &str, agg: &str, post: &str) -> Option<&'a EvalReport> {
    reports.iter().find(|r| {
        let key: CellKey = r.provenance.parse().expect("provenance parses");
        key.task == task && key.agg.to_string() == agg && key.post.to_string() == post
    })
}

fn anchor(
    reports: &[EvalReport],
    name: &'static str,
    task: &str,
    agg: &str,
    post: &str,
    target: f64,
    tol: f64,
) -> Check {
    match find(reports, task, agg, post) {
        Some(r) if !r.is_error() => {
            let v = 100.0 * r.value;
            Check::new(
                name,
                (v - target).abs() <= tol,
                format!("{v:.1} (±{:.1} over runs) vs {target}±{tol}", 100.0 * r.stddev),
            )
        }
        Some(r) => Check::new(name, false, format!("error: {}", r.error.as_deref().unwrap_or(""))),
        None => Check::new(name, false, "no such cell"),
    }
}

fn missing_files(dir: &Path, files: &[&str]) -> Vec<String> {
    files
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| dir.join(f).display().to_string())
        .collect()
}

/// Random word sentences drawn from the bundled vocabulary.
fn synthetic_sentences(r: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let vocab = Vocabulary::bert_base_uncased();
    let words: Vec<&str> = vocab.tokens()[1996..]
        .iter()
        .filter(|t| t.chars().all(|c| c.is_ascii_lowercase()))
        .map(String::as_str)
        .take(8000)
        .collect();
    (0..n)
        .map(|_| {
            let len = r.random_range(5..20);
            (0..len)
                .map(|_| words[r.random_range(0..words.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Times the RE STS grid on a synthetic set of STS-B test size.
fn synthetic_sts_runtime() -> f64 {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(99);
    let texts = synthetic_sentences(&mut r, 2 * 1379);
    let pairs: String = texts
        .chunks(2)
        .map(|p| format!("{:.2}\t{}\t{}\n", r.random_range(0.0..5.0), p[0], p[1]))
        .collect();
    std::fs::write(dir.path().join("stsb_test.tsv"), &pairs).unwrap();
    std::fs::write(dir.path().join("sickr_test.tsv"), &pairs).unwrap();
    let corpus = synthetic_sentences(&mut r, 36_000).join("\n");
    std::fs::write(dir.path().join("wikitext2.txt"), corpus).unwrap();
    let config = sts_config(dir.path());
    let start = Instant::now();
    run(config).unwrap();
    start.elapsed().as_secs_f64()
}

fn sts_config(dir: &Path) -> ExperimentConfig {
    re_config(
        dir,
        vec![
            task("stsb", TaskKind::Sts, dir.join("stsb_test.tsv")),
            task("sickr", TaskKind::Sts, dir.join("sickr_test.tsv")),
        ],
        &["avg@-1", "idf:W@-1"],
        &["none"],
    )
}

fn criterion_re_sts() -> Outcome {
    let Some(dir) = data_dir() else {
        return Outcome::Blocked(format!(
            "EMBSHAPE_DATA unset, STS-B/SICK-R/Wikitext-2 not available offline; \
             synthetic run of the same grid at STS-B test size took {:.1}s",
            synthetic_sts_runtime()
        ));
    };
    let missing = missing_files(&dir, &["stsb_test.tsv", "sickr_test.tsv", "wikitext2.txt"]);
    if !missing.is_empty() {
        return Outcome::Blocked(format!("missing {}", missing.join(", ")));
    }
    let start = Instant::now();
    let reports = match run(sts_config(&dir)) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("run failed: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    summarize(vec![
        anchor(&reports, "stsb avg", "stsb", "avg@-1", "none", 46.5, 2.0),
        anchor(&reports, "sickr avg", "sickr", "avg@-1", "none", 53.1, 2.0),
        anchor(&reports, "stsb idf:W", "stsb", "idf:W@-1", "none", 69.8, 2.5),
        Check::new("runtime", secs < 300.0, format!("{secs:.1}s < 300s")),
    ])
}

fn criterion_re_cluster() -> Outcome {
    let Some(dir) = data_dir() else {
        return Outcome::Blocked("EMBSHAPE_DATA unset, tweet set not available offline".into());
    };
    let missing = missing_files(&dir, &["tweet.tsv"]);
    if !missing.is_empty() {
        return Outcome::Blocked(format!("missing {}", missing.join(", ")));
    }
    let mut config = re_config(
        &dir,
        vec![task("tweet", TaskKind::Cluster, dir.join("tweet.tsv"))],
        &["avg@-1", "idf:T@-1"],
        &["none", "normalize"],
    );
    config.corpus = None;
    let reports = match run(config) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("run failed: {e}")),
    };
    summarize(vec![
        anchor(&reports, "idf:T+normalize", "tweet", "idf:T@-1", "normalize", 58.5, 3.0),
        anchor(&reports, "avg", "tweet", "avg@-1", "none", 46.5, 3.0),
    ])
}

// ---------------------------------------------------------------------------
// oracle equivalences

fn brute_force_matching(table: &[Vec<i64>]) -> i64 {
    fn go(table: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
        if row == table.len() {
            return 0;
        }
        let mut best = i64::MIN;
        for col in 0..table.len() {
            if !used[col] {
                used[col] = true;
                best = best.max(table[row][col] + go(table, row + 1, used));
                used[col] = false;
            }
        }
        best
    }
    go(table, 0, &mut vec![false; table.len()])
}

fn hungarian_oracle() -> Check {
    let mut r = rng(1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let k = r.random_range(1..=6);
        let mut table = vec![vec![0i64; k]; k];
        for row in table.iter_mut() {
            for v in row.iter_mut() {
                *v = r.random_range(0..20);
            }
        }
        table[0][0] += 1;
        let (mut pred, mut gold) = (Vec::new(), Vec::new());
        for (p, row) in table.iter().enumerate() {
            for (g, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    pred.push(p);
                    gold.push(g);
                }
            }
        }
        let n = pred.len() as f64;
        let fast = hungarian_accuracy(&pred, &gold).unwrap();
        if fast != brute_force_matching(&table) as f64 / n {
            mismatches += 1;
        }
    }
    Check::new("hungarian", mismatches == 0, format!("{mismatches}/1000 mismatches"))
}

fn definitional_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}

fn spearman_oracle() -> Check {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let n = r.random_range(3..400);
        // coarse rounding on half the trials forces ties
        let grid = if trial % 2 == 0 { 4.0 } else { 1e9 };
        let x: Vec<f64> = (0..n).map(|_| (r.random::<f64>() * grid).round()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| ((v + r.sample::<f64, _>(StandardNormal) * grid) * 0.5).round())
            .collect();
        let (Ok(fast), oracle) = (spearman(&x, &y), definitional_spearman(&x, &y)) else {
            continue;
        };
        worst = worst.max((fast - oracle).abs());
    }
    Check::new("spearman", worst <= 1e-12, format!("max diff {worst:.1e} <= 1e-12"))
}

/// Tokens: 0 [PAD], 1 [UNK], 2 [CLS], 3 [SEP], 4 [MASK], 5 ",", 6 ".",
/// 7 "##s", 8 "##ing", then plain words.
fn oracle_vocab() -> Vocabulary {
    let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", ",", ".", "##s", "##ing"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.extend((0..40).map(|i| format!("w{i}")));
    Vocabulary::from_tokens(tokens).unwrap()
}

fn random_tensor(r: &mut ChaCha8Rng, vocab_len: u32, layers: &[i32], dim: usize) -> EmbeddingTensor {
    let sentences = (0..120)
        .map(|s| {
            let len = r.random_range(1..12);
            let mut ids: Vec<u32> = (0..len)
                .map(|_| {
                    if r.random_bool(0.15) {
                        r.random_range(4..9)
                    } else {
                        // skewed so a few words dominate the df ranking
                        9 + (r.random::<f64>().powi(3) * (vocab_len - 9) as f64) as u32
                    }
                })
                .collect();
            if s % 7 != 0 {
                ids.insert(0, 2);
                ids.push(3);
            }
            if s % 11 == 0 {
                ids = vec![2, 3];
            }
            let layers = layers
                .iter()
                .map(|_| Array2::from_shape_fn((ids.len(), dim), |_| r.sample::<f32, _>(StandardNormal)))
                .collect();
            SentenceEmbedding {
                text: format!("s{s}"),
                token_ids: ids,
                layers,
            }
        })
        .collect();
    EmbeddingTensor::new(dim, layers.to_vec(), sentences).unwrap()
}

struct NaiveFlags {
    special: Vec<bool>,
    bias: Vec<bool>,
    mask: u32,
}

fn naive_flags(tokens: &[String], docs: &[Vec<u32>], k: usize) -> NaiveFlags {
    let special: Vec<bool> = tokens
        .iter()
        .map(|t| t == "[CLS]" || t == "[SEP]" || t == "[PAD]")
        .collect();
    let df: Vec<usize> = (0..tokens.len() as u32)
        .map(|id| docs.iter().filter(|d| d.contains(&id)).count())
        .collect();
    let mut ranked: Vec<usize> = (0..tokens.len()).filter(|&i| !special[i] && df[i] > 0).collect();
    ranked.sort_by(|&a, &b| df[b].cmp(&df[a]).then(a.cmp(&b)));
    let frequent: Vec<usize> = ranked.into_iter().take(k).collect();
    let bias = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            !special[i]
                && (frequent.contains(&i)
                    || !t.chars().any(char::is_alphanumeric)
                    || t.starts_with("##"))
        })
        .collect();
    NaiveFlags {
        special,
        bias,
        mask: 4,
    }
}

fn naive_aggregate(
    tensor: &EmbeddingTensor,
    spec: &AggregationSpec,
    idf: &dyn Fn(u32) -> f64,
    flags: &NaiveFlags,
) -> Array2<f64> {
    use embshape_core::aggregate::{MaskMode, Weighting};
    let dim = tensor.dim();
    let mut out = Array2::zeros((tensor.sentence_count(), dim));
    for (s, sentence) in tensor.sentences().iter().enumerate() {
        let ids = &sentence.token_ids;
        let kept: Vec<bool> = ids
            .iter()
            .map(|&id| {
                let special = flags.special[id as usize];
                let mask = id == flags.mask;
                let bias = flags.bias[id as usize] && !mask;
                match spec.mask {
                    MaskMode::Only => !special && mask,
                    MaskMode::Exclude => !special && !mask && !(spec.remove_biases && bias),
                    MaskMode::Include => !special && !(spec.remove_biases && bias),
                }
            })
            .collect();
        let uniform = |sel: &dyn Fn(usize) -> bool| -> Vec<f64> {
            let n = (0..ids.len()).filter(|&i| sel(i)).count() as f64;
            (0..ids.len()).map(|i| if sel(i) { 1.0 / n } else { 0.0 }).collect()
        };
        let weights: Vec<f64> = if !kept.contains(&true) {
            if ids.iter().any(|&id| !flags.special[id as usize]) {
                uniform(&|i| !flags.special[ids[i] as usize])
            } else {
                uniform(&|_| true)
            }
        } else {
            let raw: Vec<f64> = (0..ids.len())
                .map(|i| match (kept[i], spec.weighting) {
                    (false, _) => 0.0,
                    (true, Weighting::Uniform) => 1.0,
                    (true, Weighting::Idf(_)) => idf(ids[i]),
                })
                .collect();
            let total: f64 = raw.iter().sum();
            if total > 0.0 {
                raw.iter().map(|w| w / total).collect()
            } else {
                uniform(&|i| kept[i])
            }
        };
        for &layer in &spec.layers {
            let pos = tensor.layers().iter().position(|&l| l == layer).unwrap();
            let m = &sentence.layers[pos];
            for (t, &w) in weights.iter().enumerate() {
                for j in 0..dim {
                    out[(s, j)] += w * f64::from(m[(t, j)]) / spec.layers.len() as f64;
                }
            }
        }
    }
    out
}

fn aggregate_oracle() -> Check {
    let mut r = rng(3);
    let vocab = oracle_vocab();
    let tensor = random_tensor(&mut r, vocab.len() as u32, &[-1, 0, 3], 6);
    let docs: Vec<Vec<u32>> = tensor.token_ids().map(<[u32]>::to_vec).collect();
    let stats = compute_stats(&docs, StatsSource::Target).unwrap();
    let flags = classify_tokens(&vocab, &stats, 5).unwrap();
    let naive = naive_flags(vocab.tokens(), &docs, 5);
    let n_docs = docs.len() as f64;
    let idf = |id: u32| {
        let df = docs.iter().filter(|d| d.contains(&id)).count().max(1) as f64;
        (n_docs / df).ln()
    };
    let mut worst: f64 = 0.0;
    for spec in [
        "avg@-1",
        "avg@0,3",
        "idf:T@3",
        "idf:T+biases@-1,0,3",
        "avg+biases@0",
        "avg+mask@3",
        "idf:T+nomask@0",
        "idf:T+biases+nomask@-1,3",
        "avg+biases+mask@-1",
    ] {
        let spec: AggregationSpec = spec.parse().unwrap();
        let fast = aggregate(&tensor, &spec, Some(&stats), &flags).unwrap().vectors;
        worst = worst.max(max_abs_diff(&fast, &naive_aggregate(&tensor, &spec, &idf, &naive)));
    }
    Check::new("aggregate", worst <= 1e-10, format!("max diff {worst:.1e} <= 1e-10"))
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn geometry_oracle() -> Check {
    let mut r = rng(4);
    let (n, d) = (150, 12);
    let a = gaussian(&mut r, n, d);
    let b = &a + &(gaussian(&mut r, n, d) * 0.3);
    let rows = |m: &Array2<f64>| -> Vec<Vec<f64>> { m.rows().into_iter().map(|r| unit(r.to_vec())).collect() };
    let (ua, ub) = (rows(&a), rows(&b));

    let align_oracle = ua
        .iter()
        .zip(&ub)
        .map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let mut potentials = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let sq: f64 = ua[i].iter().zip(&ua[j]).map(|(x, y)| (x - y).powi(2)).sum();
            potentials.push((-2.0 * sq).exp());
        }
    }
    let unif_oracle = (potentials.iter().sum::<f64>() / potentials.len() as f64).ln();

    let da = (alignment(&a, &b, true).unwrap() - align_oracle).abs();
    let du = (uniformity(&a, true).unwrap() - unif_oracle).abs();
    Check::new(
        "align/uniform",
        da <= 1e-12 && du <= 1e-12,
        format!("diffs {da:.1e}, {du:.1e} <= 1e-12"),
    )
}

fn criterion_oracles() -> Outcome {
    summarize(vec![hungarian_oracle(), spearman_oracle(), aggregate_oracle(), geometry_oracle()])
}

// ---------------------------------------------------------------------------
// transforms

fn correlated(r: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    let mix = gaussian(r, d, d);
    let scales = Array2::from_shape_fn((1, d), |(_, j)| 1.0 + 3.0 * j as f64);
    gaussian(r, n, d).dot(&mix) * &scales + 5.0
}

fn ks_uniform(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let v = v.clamp(0.0, 1.0);
            (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs())
        })
        .fold(0.0, f64::max)
}

fn criterion_transforms() -> Outcome {
    let mut r = rng(5);
    let mut checks = Vec::new();

    let x = correlated(&mut r, 4000, 8);
    let w = Transform::fit(TransformKind::Whiten, &x).unwrap().apply(&x).unwrap();
    let dev = max_abs_diff(&population_cov(&w), &Array2::eye(8));
    checks.push(Check::new("whiten", dev <= 1e-4, format!("|cov-I| {dev:.1e} <= 1e-4")));

    let lognormal = LogNormal::new(0.0, 1.0).unwrap();
    let skewed = Array2::from_shape_fn((3000, 6), |(_, j)| r.sample(lognormal) * (j + 1) as f64);
    let z = Transform::fit(TransformKind::ZScore, &skewed).unwrap().apply(&skewed).unwrap();
    let mean_dev = z.mean_axis(Axis(0)).unwrap().iter().map(|m| m.abs()).fold(0.0, f64::max);
    let std_dev = z.std_axis(Axis(0), 0.0).iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::new(
        "zscore",
        mean_dev <= 1e-8 && std_dev <= 1e-8,
        format!("|mean| {mean_dev:.1e}, |std-1| {std_dev:.1e} <= 1e-8"),
    ));

    // fitted on n points, checked on a fresh draw from the same law
    let n = 1000;
    let fit = Array2::from_shape_fn((n, 4), |_| r.sample(lognormal));
    let fresh = Array2::from_shape_fn((20_000, 4), |_| r.sample(lognormal));
    let q = Transform::fit(TransformKind::QuantileUniform, &fit).unwrap().apply(&fresh).unwrap();
    let ks = q
        .columns()
        .into_iter()
        .map(|c| ks_uniform(&mut c.to_vec()))
        .fold(0.0, f64::max);
    let bound = 2.0 / (n as f64).sqrt();
    checks.push(Check::new("quantile_u", ks < bound, format!("KS {ks:.4} < {bound:.4}")));

    let x = correlated(&mut r, 2000, 10);
    let t = Transform::fit(TransformKind::Abtt(3), &x).unwrap();
    let out = t.apply(&x).unwrap();
    let removed = t
        .components()
        .unwrap()
        .rows()
        .into_iter()
        .map(|u| out.dot(&u).var(0.0))
        .fold(0.0, f64::max);
    checks.push(Check::new("abtt", removed < 1e-10, format!("removed var {removed:.1e} < 1e-10")));

    let a0 = Transform::fit(TransformKind::Abtt(0), &x).unwrap().apply(&x).unwrap();
    let centered = Transform::fit(TransformKind::Center, &x).unwrap().apply(&x).unwrap();
    let same = a0.iter().zip(&centered).all(|(p, q)| p.to_bits() == q.to_bits());
    checks.push(Check::new("abtt(0)=center", same, if same { "bitwise" } else { "differs" }));

    let y = gaussian(&mut r, 1000, 16) * 7.0;
    let ny = Transform::fit(TransformKind::Normalize, &y).unwrap().apply(&y).unwrap();
    let cos = |m: &Array2<f64>, i: usize, j: usize| {
        let (u, v) = (m.row(i), m.row(j));
        u.dot(&v) / (u.dot(&u).sqrt() * v.dot(&v).sqrt())
    };
    let drift = (0..500).map(|i| (cos(&y, 2 * i, 2 * i + 1) - cos(&ny, 2 * i, 2 * i + 1)).abs()).fold(0.0, f64::max);
    checks.push(Check::new(
        "normalize",
        drift <= 4.0 * f64::EPSILON,
        format!("cosine drift {drift:.1e} <= 4 ulp"),
    ));
    summarize(checks)
}

// ---------------------------------------------------------------------------
// isotropy score

fn criterion_isoscore() -> Outcome {
    let mut r = rng(6);
    let iso = iso_score(&gaussian(&mut r, 100_000, 10)).unwrap();
    let direction = gaussian(&mut r, 1, 10);
    let rank1 = gaussian(&mut r, 2000, 1).dot(&direction);
    let flat = iso_score(&rank1).unwrap();

    let x = correlated(&mut r, 5000, 10);
    let base = iso_score(&x).unwrap();
    let q = DMatrix::from_fn(10, 10, |_, _| r.sample::<f64, _>(StandardNormal)).qr().q();
    let rotation = Array2::from_shape_fn((10, 10), |(i, j)| q[(i, j)]);
    let rotated = (iso_score(&x.dot(&rotation)).unwrap() - base).abs();
    let scaled = [0.01, 37.0]
        .iter()
        .map(|c| (iso_score(&(&x * *c)).unwrap() - base).abs())
        .fold(0.0, f64::max);
    summarize(vec![
        Check::new("isotropic", iso > 0.95, format!("{iso:.4} > 0.95")),
        Check::new("rank-1", flat < 0.05, format!("{flat:.4} < 0.05")),
        Check::new("rotation", rotated <= 1e-6, format!("{rotated:.1e} <= 1e-6")),
        Check::new("scale", scaled <= 1e-6, format!("{scaled:.1e} <= 1e-6")),
    ])
}

// ---------------------------------------------------------------------------
// layer-mixing contract

fn criterion_combine() -> Outcome {
    let mut r = rng(7);
    let mut a = gaussian(&mut r, 64, 16);
    let b = gaussian(&mut r, 64, 16);
    a[(0, 0)] = -0.0;
    let bits = |m: &Array2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let w0 = bits(&combine(&a, &b, 0.0).unwrap()) == bits(&a);
    let w1 = bits(&combine(&a, &b, 1.0).unwrap()) == bits(&b);

    // exact in binary floating point when values and weights are dyadic
    let dyadic = |r: &mut ChaCha8Rng| Array2::from_shape_fn((64, 16), |_| r.random_range(-1024i32..1024) as f64 / 1024.0);
    let (da, db) = (dyadic(&mut r), dyadic(&mut r));
    let mut linear = true;
    for k in 0..=16 {
        let w = k as f64 / 16.0;
        let lhs = combine(&da, &db, w).unwrap() - &da;
        let rhs = (&db - &da) * w;
        // value equality: (b - a) * 0 may be -0.0 where the left side is +0.0
        linear &= lhs == rhs;
    }
    let real = (combine(&a, &b, 0.3).unwrap() - &a) - (&b - &a) * 0.3;
    let drift = real.iter().map(|v| v.abs()).fold(0.0, f64::max);
    summarize(vec![
        Check::new("w=0", w0, "bitwise"),
        Check::new("w=1", w1, "bitwise"),
        Check::new(
            "linear",
            linear,
            format!("exact on dyadic grid; {drift:.1e} rounding on reals at w=0.3"),
        ),
    ])
}

// ---------------------------------------------------------------------------
// determinism

fn determinism_config(dir: &Path, threads: usize) -> ExperimentConfig {
    let mut config = re_config(
        dir,
        vec![
            task("pairs", TaskKind::Sts, dir.join("pairs.tsv")),
            task("topics", TaskKind::Cluster, dir.join("topics.tsv")),
            task("probe", TaskKind::Classify, dir.join("topics.tsv")),
            TaskConfig {
                metric: Some("uniformity".into()),
                ..task("spread", TaskKind::Diag, dir.join("pairs.tsv"))
            },
        ],
        &["avg@-1", "idf:W+biases@-1", "idf:T@-1"],
        &["none", "whiten", "quantile_u>normalize", "abtt2^W"],
    );
    config.models[0].kind = ModelKind::Random {
        seeds: vec![0, 1],
        dim: 32,
    };
    config.seeds = vec![0, 1, 2];
    config.threads = Some(threads);
    config
}

fn criterion_determinism() -> Outcome {
    if std::env::var_os(embshape_core::experiment::THREADS_ENV).is_some() {
        return Outcome::Blocked("thread-count override in the environment".into());
    }
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(8);
    let texts = synthetic_sentences(&mut r, 400);
    let pairs: String = texts
        .chunks(2)
        .map(|p| format!("{:.1}\t{}\t{}\n", r.random_range(0.0..5.0), p[0], p[1]))
        .collect();
    std::fs::write(dir.path().join("pairs.tsv"), pairs).unwrap();
    let topics: String = texts.iter().enumerate().map(|(i, t)| format!("{}\t{t}\n", i % 4)).collect();
    std::fs::write(dir.path().join("topics.tsv"), topics).unwrap();
    std::fs::write(dir.path().join("wikitext2.txt"), synthetic_sentences(&mut r, 1500).join("\n")).unwrap();

    let csv = |threads| to_csv(&run(determinism_config(dir.path(), threads)).unwrap()).unwrap();
    let (one, eight) = (csv(1), csv(8));
    let rows = one.lines().count() - 1;
    let errors = one.lines().filter(|l| l.contains(";error=")).count();
    summarize(vec![
        Check::new("bit-identical", one == eight, format!("{rows} rows, 1 vs 8 workers")),
        Check::new("no error rows", errors == 0, format!("{errors} errors")),
    ])
}

fn main() -> ExitCode {
    let strict = std::env::var("EMBSHAPE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("C1 RE STS reproduction", criterion_re_sts),
        ("C2 RE tweet clustering", criterion_re_cluster),
        ("C3 oracle equivalences", criterion_oracles),
        ("C4 transform invariants", criterion_transforms),
        ("C5 isotropy score properties", criterion_isoscore),
        ("C6 layer-mixing contract", criterion_combine),
        ("C7 worker-count determinism", criterion_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("PASS {name} [{secs:.1}s]: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s]: {d}");
            }
            Outcome::Blocked(d) => {
                failed += usize::from(strict);
                println!("FAIL {name} [{secs:.1}s]: not evaluated, {d}");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
