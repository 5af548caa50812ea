//! Fitted post-processing of sentence vectors.
//!
//! A [`Transform`] is fitted once (on the target vectors or on an external
//! corpus) and then applied to any matrix of the same width. Kinds:
//! centering, z-score, per-dimension quantile mapping onto `[0, 1]`,
//! whitening, all-but-the-top (centering plus removal of the top `k`
//! principal directions) and unit-norm scaling.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const EIGEN_FLOOR: f64 = 1e-10;
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Center,
    ZScore,
    QuantileUniform,
    Whiten,
    /// Centering plus removal of the top `k` principal components.
    Abtt(usize),
    Normalize,
}

impl TransformKind {
    fn code(self) -> u8 {
        match self {
            TransformKind::Center => 0,
            TransformKind::ZScore => 1,
            TransformKind::QuantileUniform => 2,
            TransformKind::Whiten => 3,
            TransformKind::Abtt(_) => 4,
            TransformKind::Normalize => 5,
        }
    }

    fn min_rows(self) -> usize {
        match self {
            TransformKind::Normalize => 0,
            TransformKind::Abtt(k) => (k + 1).max(2),
            _ => 2,
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformKind::Center => f.write_str("center"),
            TransformKind::ZScore => f.write_str("zscore"),
            TransformKind::QuantileUniform => f.write_str("quantile_u"),
            TransformKind::Whiten => f.write_str("whiten"),
            TransformKind::Abtt(k) => write!(f, "abtt{k}"),
            TransformKind::Normalize => f.write_str("normalize"),
        }
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "center" => TransformKind::Center,
            "zscore" => TransformKind::ZScore,
            "quantile_u" | "quantile-u" => TransformKind::QuantileUniform,
            "whiten" => TransformKind::Whiten,
            "normalize" => TransformKind::Normalize,
            other => match other.strip_prefix("abtt") {
                Some(k) => TransformKind::Abtt(
                    k.trim_start_matches(':')
                        .parse()
                        .map_err(|_| Error::config(format!("bad ABTT rank in `{other}`")))?,
                ),
                None => return Err(Error::config(format!("unknown transform `{other}`"))),
            },
        })
    }
}

/// Which data a transform was fitted on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitSource {
    Target,
    /// An external corpus, identified by a tag recorded in provenance.
    Corpus(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    kind: TransformKind,
    source: FitSource,
    dim: usize,
    mean: Option<Array1<f64>>,
    std: Option<Array1<f64>>,
    /// Sorted fit values, one vector per dimension.
    quantiles: Option<Vec<Vec<f64>>>,
    whitening: Option<Array2<f64>>,
    /// Principal directions as rows (`k × d`).
    components: Option<Array2<f64>>,
    warnings: Vec<String>,
}

fn column_means(x: &Array2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).expect("non-empty matrix")
}

/// Population covariance of `x` around `mean`.
fn covariance(x: &Array2<f64>, mean: &Array1<f64>) -> Array2<f64> {
    let centered = x - mean;
    centered.t().dot(&centered) / x.nrows() as f64
}

/// Eigenpairs sorted by descending eigenvalue; eigenvectors as columns, each
/// with its largest-magnitude entry made positive.
fn sorted_eigen(cov: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let d = cov.nrows();
    let m = DMatrix::from_fn(d, d, |i, j| cov[(i, j)]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Array2::zeros((d, d));
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for row in 0..d {
            vectors[(row, col)] = sign * v[row];
        }
    }
    (values, vectors)
}

/// Eigenvalues of the population covariance, descending.
pub fn covariance_spectrum(x: &Array2<f64>) -> Vec<f64> {
    let mean = column_means(x);
    sorted_eigen(&covariance(x, &mean)).0
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn source(&self) -> &FitSource {
        &self.source
    }

    /// Width of the fit data; 0 for `normalize`, which accepts any width.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> Option<&Array1<f64>> {
        self.mean.as_ref()
    }

    pub fn std(&self) -> Option<&Array1<f64>> {
        self.std.as_ref()
    }

    pub fn whitening(&self) -> Option<&Array2<f64>> {
        self.whitening.as_ref()
    }

    pub fn components(&self) -> Option<&Array2<f64>> {
        self.components.as_ref()
    }

    pub fn reference_count(&self) -> usize {
        self.quantiles
            .as_ref()
            .and_then(|q| q.first())
            .map_or(0, Vec::len)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn fit(kind: TransformKind, x: &Array2<f64>) -> Result<Self> {
        Self::fit_from(kind, x, FitSource::Target)
    }

    pub fn fit_from(kind: TransformKind, x: &Array2<f64>, source: FitSource) -> Result<Self> {
        let (n, d) = x.dim();
        if n < kind.min_rows() {
            return Err(Error::Fit(format!(
                "{kind} needs at least {} rows, got {n}",
                kind.min_rows()
            )));
        }
        let mut t = Transform {
            kind,
            source,
            dim: if kind == TransformKind::Normalize { 0 } else { d },
            mean: None,
            std: None,
            quantiles: None,
            whitening: None,
            components: None,
            warnings: Vec::new(),
        };
        match kind {
            TransformKind::Normalize => {}
            TransformKind::Center => t.mean = Some(column_means(x)),
            TransformKind::ZScore => {
                let mean = column_means(x);
                let var = (x - &mean).mapv(|v| v * v).mean_axis(Axis(0)).expect("n >= 2");
                let mut floored = 0;
                let std = var.mapv(|v| {
                    let s = v.sqrt();
                    if s < STD_FLOOR {
                        floored += 1;
                        STD_FLOOR
                    } else {
                        s
                    }
                });
                if floored > 0 {
                    t.warnings
                        .push(format!("{floored} constant dimensions floored to std {STD_FLOOR}"));
                }
                t.mean = Some(mean);
                t.std = Some(std);
            }
            TransformKind::QuantileUniform => {
                let columns = (0..d)
                    .into_par_iter()
                    .map(|j| {
                        let mut col = x.column(j).to_vec();
                        col.sort_by(f64::total_cmp);
                        col
                    })
                    .collect();
                t.quantiles = Some(columns);
            }
            TransformKind::Whiten => {
                let mean = column_means(x);
                let (values, vectors) = sorted_eigen(&covariance(x, &mean));
                let floored = values.iter().filter(|&&v| v < EIGEN_FLOOR).count();
                if floored > 0 {
                    t.warnings.push(format!(
                        "rank-deficient covariance: {floored} eigenvalues floored to {EIGEN_FLOOR}"
                    ));
                }
                let mut w = vectors;
                for (mut col, &v) in w.columns_mut().into_iter().zip(&values) {
                    col /= v.max(EIGEN_FLOOR).sqrt();
                }
                t.mean = Some(mean);
                t.whitening = Some(w);
            }
            TransformKind::Abtt(k) => {
                if k > d {
                    return Err(Error::Fit(format!(
                        "cannot remove {k} components from {d} dimensions"
                    )));
                }
                let mean = column_means(x);
                let components = if k == 0 {
                    Array2::zeros((0, d))
                } else {
                    let (_, vectors) = sorted_eigen(&covariance(x, &mean));
                    vectors.slice(ndarray::s![.., ..k]).t().to_owned()
                };
                t.mean = Some(mean);
                t.components = Some(components);
            }
        }
        for w in &t.warnings {
            log::warn!("{kind}: {w}");
        }
        Ok(t)
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if self.kind != TransformKind::Normalize && x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.ncols(),
            });
        }
        let mean = || self.mean.as_ref().expect("fitted mean");
        Ok(match self.kind {
            TransformKind::Center => x - mean(),
            TransformKind::ZScore => (x - mean()) / self.std.as_ref().expect("fitted std"),
            TransformKind::Whiten => (x - mean()).dot(self.whitening.as_ref().expect("fitted W")),
            TransformKind::Abtt(_) => {
                let centered = x - mean();
                let u = self.components.as_ref().expect("fitted components");
                if u.nrows() == 0 {
                    centered
                } else {
                    let projection = centered.dot(&u.t()).dot(u);
                    centered - projection
                }
            }
            TransformKind::QuantileUniform => {
                let refs = self.quantiles.as_ref().expect("fitted quantiles");
                let mut out = x.as_standard_layout().into_owned();
                let d = out.ncols().max(1);
                out.as_slice_mut()
                    .expect("standard layout")
                    .par_chunks_mut(d)
                    .for_each(|row| {
                        for (v, r) in row.iter_mut().zip(refs) {
                            *v = empirical_cdf(r, *v);
                        }
                    });
                out
            }
            TransformKind::Normalize => {
                let mut out = x.clone();
                let mut zero_rows = 0;
                for mut row in out.rows_mut() {
                    let norm = row.dot(&row).sqrt();
                    if norm > 0.0 {
                        row /= norm;
                    } else {
                        zero_rows += 1;
                    }
                }
                if zero_rows > 0 {
                    log::warn!("normalize: {zero_rows} zero rows left unchanged");
                }
                out
            }
        })
    }

    /// Serializes the fitted parameters (little-endian, `TRF1` tag).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"TRF1");
        buf.push(self.kind.code());
        let k = match self.kind {
            TransformKind::Abtt(k) => k as u32,
            _ => 0,
        };
        buf.extend_from_slice(&k.to_le_bytes());
        match &self.source {
            FitSource::Target => {
                buf.push(0);
                buf.extend_from_slice(&0u32.to_le_bytes());
            }
            FitSource::Corpus(tag) => {
                buf.push(1);
                buf.extend_from_slice(&(tag.len() as u32).to_le_bytes());
                buf.extend_from_slice(tag.as_bytes());
            }
        }
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        let put = |buf: &mut Vec<u8>, values: &mut dyn Iterator<Item = f64>| {
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        };
        let present = u8::from(self.mean.is_some())
            | u8::from(self.std.is_some()) << 1
            | u8::from(self.quantiles.is_some()) << 2
            | u8::from(self.whitening.is_some()) << 3
            | u8::from(self.components.is_some()) << 4;
        buf.push(present);
        if let Some(m) = &self.mean {
            put(&mut buf, &mut m.iter().copied());
        }
        if let Some(s) = &self.std {
            put(&mut buf, &mut s.iter().copied());
        }
        if let Some(q) = &self.quantiles {
            buf.extend_from_slice(&(self.reference_count() as u32).to_le_bytes());
            put(&mut buf, &mut q.iter().flatten().copied());
        }
        if let Some(wm) = &self.whitening {
            put(&mut buf, &mut wm.iter().copied());
        }
        if let Some(u) = &self.components {
            buf.extend_from_slice(&(u.nrows() as u32).to_le_bytes());
            put(&mut buf, &mut u.iter().copied());
        }
        w.write_all(&buf).map_err(|source| Error::Io { offset: 0, source })
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        fn bytes<R: Read>(r: &mut R, n: usize, field: &'static str) -> Result<Vec<u8>> {
            let mut b = vec![0u8; n];
            r.read_exact(&mut b)
                .map_err(|_| Error::Truncated { record: 0, field })?;
            Ok(b)
        }
        fn u32_<R: Read>(r: &mut R, field: &'static str) -> Result<usize> {
            let b = bytes(r, 4, field)?;
            Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        }
        fn f64s<R: Read>(r: &mut R, n: usize, field: &'static str) -> Result<Vec<f64>> {
            Ok(bytes(r, n * 8, field)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        }

        if bytes(&mut r, 4, "magic")? != b"TRF1" {
            return Err(Error::Format {
                field: "magic",
                reason: "expected TRF1".into(),
            });
        }
        let code = bytes(&mut r, 1, "kind")?[0];
        let k = u32_(&mut r, "rank")?;
        let kind = match code {
            0 => TransformKind::Center,
            1 => TransformKind::ZScore,
            2 => TransformKind::QuantileUniform,
            3 => TransformKind::Whiten,
            4 => TransformKind::Abtt(k),
            5 => TransformKind::Normalize,
            other => {
                return Err(Error::Format {
                    field: "kind",
                    reason: format!("unknown transform code {other}"),
                })
            }
        };
        let source_code = bytes(&mut r, 1, "source")?[0];
        let tag_len = u32_(&mut r, "source_tag")?;
        let tag = String::from_utf8(bytes(&mut r, tag_len, "source_tag")?).map_err(|e| {
            Error::Format {
                field: "source_tag",
                reason: e.to_string(),
            }
        })?;
        let source = if source_code == 0 {
            FitSource::Target
        } else {
            FitSource::Corpus(tag)
        };
        let dim = u32_(&mut r, "dim")?;
        let present = bytes(&mut r, 1, "present")?[0];
        let mut t = Transform {
            kind,
            source,
            dim,
            mean: None,
            std: None,
            quantiles: None,
            whitening: None,
            components: None,
            warnings: Vec::new(),
        };
        if present & 1 != 0 {
            t.mean = Some(Array1::from(f64s(&mut r, dim, "mean")?));
        }
        if present & 2 != 0 {
            t.std = Some(Array1::from(f64s(&mut r, dim, "std")?));
        }
        if present & 4 != 0 {
            let n_ref = u32_(&mut r, "reference_count")?;
            let flat = f64s(&mut r, n_ref * dim, "quantiles")?;
            t.quantiles = Some(flat.chunks(n_ref.max(1)).map(<[f64]>::to_vec).collect());
        }
        if present & 8 != 0 {
            let flat = f64s(&mut r, dim * dim, "whitening")?;
            t.whitening = Some(Array2::from_shape_vec((dim, dim), flat).expect("square"));
        }
        if present & 16 != 0 {
            let rows = u32_(&mut r, "component_count")?;
            let flat = f64s(&mut r, rows * dim, "components")?;
            t.components = Some(Array2::from_shape_vec((rows, dim), flat).expect("k × d"));
        }
        Ok(t)
    }
}

/// Position of `x` in the sorted reference values, linearly interpolated
/// and scaled to `[0, 1]`. Values tied with references take the midpoint
/// of the tied rank range.
pub fn empirical_cdf(sorted: &[f64], x: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return if x < sorted[0] {
            0.0
        } else if x > sorted[0] {
            1.0
        } else {
            0.5
        };
    }
    let last = (n - 1) as f64;
    if x <= sorted[0] && x < sorted[n - 1] {
        let hi = sorted.partition_point(|&v| v <= x);
        return if hi == 0 { 0.0 } else { (hi - 1) as f64 / 2.0 / last };
    }
    if x >= sorted[n - 1] {
        if x > sorted[n - 1] {
            return 1.0;
        }
        let lo = sorted.partition_point(|&v| v < x);
        return (lo as f64 + last) / 2.0 / last;
    }
    let lo = sorted.partition_point(|&v| v < x);
    let hi = sorted.partition_point(|&v| v <= x);
    if hi > lo {
        // exact hit on one or more references
        return (lo + hi - 1) as f64 / 2.0 / last;
    }
    let (a, b) = (sorted[lo - 1], sorted[lo]);
    ((lo - 1) as f64 + (x - a) / (b - a)) / last
}

pub fn fit_apply(kind: TransformKind, x: &Array2<f64>) -> Result<Array2<f64>> {
    Transform::fit(kind, x)?.apply(x)
}

/// Fits on `corpus` (tagged as an external source) and applies to `target`.
pub fn fit_on_corpus(
    kind: TransformKind,
    corpus: &Array2<f64>,
    corpus_tag: &str,
    target: &Array2<f64>,
) -> Result<(Transform, Array2<f64>)> {
    let t = Transform::fit_from(kind, corpus, FitSource::Corpus(corpus_tag.to_string()))?;
    let out = t.apply(target)?;
    Ok((t, out))
}

/// One step of a post-processing chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PostStep {
    pub kind: TransformKind,
    /// Fit on the external corpus (`^W`) instead of the target vectors.
    pub on_corpus: bool,
}

impl fmt::Display for PostStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind, if self.on_corpus { "^W" } else { "" })
    }
}

impl FromStr for PostStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, on_corpus) = match s.strip_suffix("^W").or_else(|| s.strip_suffix("@W")) {
            Some(name) => (name, true),
            None => (s, false),
        };
        Ok(PostStep {
            kind: name.parse()?,
            on_corpus,
        })
    }
}

/// Ordered post-processing steps; `none` when empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PostChain(pub Vec<PostStep>);

impl PostChain {
    pub fn needs_corpus(&self) -> bool {
        self.0.iter().any(|s| s.on_corpus)
    }

    /// Runs the chain on `target`. Corpus-fitted steps are fitted on the
    /// corpus vectors as transformed by the preceding steps.
    pub fn run(
        &self,
        target: &Array2<f64>,
        corpus: Option<(&Array2<f64>, &str)>,
    ) -> Result<Array2<f64>> {
        let mut target = target.clone();
        let mut corpus = corpus.map(|(c, tag)| (c.clone(), tag.to_string()));
        for step in &self.0 {
            let t = if step.on_corpus {
                let (c, tag) = corpus.as_ref().ok_or_else(|| {
                    Error::config(format!("{step} needs corpus vectors"))
                })?;
                Transform::fit_from(step.kind, c, FitSource::Corpus(tag.clone()))?
            } else {
                Transform::fit(step.kind, &target)?
            };
            target = t.apply(&target)?;
            if let Some((c, _)) = corpus.as_mut() {
                *c = t.apply(c)?;
            }
        }
        Ok(target)
    }
}

impl fmt::Display for PostChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self.0.iter().map(PostStep::to_string).collect();
        f.write_str(&parts.join(">"))
    }
}

impl FromStr for PostChain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(PostChain::default());
        }
        s.split(['>', ','])
            .map(|p| p.trim().parse())
            .collect::<Result<Vec<_>>>()
            .map(PostChain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zscore_two_points() {
        let x = array![[1.0, 3.0], [3.0, 5.0]];
        let t = Transform::fit(TransformKind::ZScore, &x).unwrap();
        assert_eq!(t.mean().unwrap(), &array![2.0, 4.0]);
        assert_eq!(t.std().unwrap(), &array![1.0, 1.0]);
    }

    #[test]
    fn abtt_zero_is_centering() {
        let x = array![[1.0, 2.0], [3.0, 7.0], [0.0, -1.0]];
        let a = fit_apply(TransformKind::Abtt(0), &x).unwrap();
        let c = fit_apply(TransformKind::Center, &x).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn quantile_middle_reference() {
        let x = array![[1.0], [2.0], [3.0]];
        let t = Transform::fit(TransformKind::QuantileUniform, &x).unwrap();
        assert_eq!(t.apply(&array![[2.0]]).unwrap(), array![[0.5]]);
        assert_eq!(t.apply(&array![[0.0], [1.0], [2.5], [3.0], [9.0]]).unwrap(),
            array![[0.0], [0.0], [0.75], [1.0], [1.0]]);
    }

    #[test]
    fn quantile_ties_take_midpoint() {
        let r = [1.0, 2.0, 2.0, 3.0];
        assert!((empirical_cdf(&r, 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(empirical_cdf(&[4.0, 4.0], 4.0), 0.5);
        assert_eq!(empirical_cdf(&[4.0], 3.0), 0.0);
    }

    #[test]
    fn normalize_rows() {
        let out = fit_apply(TransformKind::Normalize, &array![[3.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(out, array![[0.6, 0.8], [0.0, 0.0]]);
    }

    #[test]
    fn too_few_rows() {
        assert!(Transform::fit(TransformKind::ZScore, &array![[1.0, 2.0]]).is_err());
        assert!(Transform::fit(TransformKind::Abtt(2), &array![[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(Transform::fit(TransformKind::Normalize, &Array2::zeros((0, 3))).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let t = Transform::fit(TransformKind::Center, &array![[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            t.apply(&array![[1.0, 2.0, 3.0]]),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn rank_deficient_whitening_warns() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let t = Transform::fit(TransformKind::Whiten, &x).unwrap();
        assert_eq!(t.warnings().len(), 1);
    }

    #[test]
    fn serialization_round_trip() {
        let x = array![[1.0, 2.0, 0.5], [3.0, 7.0, 1.0], [0.0, -1.0, 4.0], [2.0, 2.0, 2.0]];
        for kind in ["center", "zscore", "quantile_u", "whiten", "abtt2", "normalize"] {
            let kind: TransformKind = kind.parse().unwrap();
            let t = Transform::fit_from(kind, &x, FitSource::Corpus("wiki".into())).unwrap();
            let mut bytes = Vec::new();
            t.write_to(&mut bytes).unwrap();
            let back = Transform::read_from(bytes.as_slice()).unwrap();
            assert_eq!(back.apply(&x).unwrap(), t.apply(&x).unwrap(), "{kind}");
            assert_eq!(back.source(), t.source());
        }
    }

    #[test]
    fn chain_strings() {
        let c: PostChain = "quantile_u^W>normalize".parse().unwrap();
        assert_eq!(c.0.len(), 2);
        assert!(c.needs_corpus());
        assert_eq!(c.to_string(), "quantile_u^W>normalize");
        assert_eq!("none".parse::<PostChain>().unwrap(), PostChain::default());
        assert_eq!("abtt:3".parse::<TransformKind>().unwrap(), TransformKind::Abtt(3));
        assert!("flow".parse::<PostChain>().is_err());
    }

    #[test]
    fn corpus_fit_equals_plain_fit_on_same_data() {
        let x = array![[1.0, 2.0], [3.0, 7.0], [0.0, -1.0]];
        let (_, a) = fit_on_corpus(TransformKind::ZScore, &x, "self", &x).unwrap();
        assert_eq!(a, fit_apply(TransformKind::ZScore, &x).unwrap());
    }
}
