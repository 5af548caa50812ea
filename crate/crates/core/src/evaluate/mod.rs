//! Task metrics and their report rows.

mod classify;
mod cluster;
mod geometry;
mod sts;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use classify::{
    eval_classification, soft_bin, stratified_folds, train_softmax, ClassTargets, SoftmaxConfig,
    SoftmaxModel, DEFAULT_FOLDS, SCORE_CLASSES,
};
pub use cluster::{
    eval_clustering, hungarian_accuracy, kmeans, max_matching, DEFAULT_RUNS, MAX_ITERATIONS,
    SHIFT_TOLERANCE,
};
pub use geometry::{alignment, iso_score, uniformity};
pub use sts::{average_ranks, cosine, eval_sts, pair_cosines, pearson, spearman};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Spearman,
    ClusterAccuracy,
    ClassifyAccuracy,
    IsoScore,
    Alignment,
    Uniformity,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Spearman => "spearman",
            MetricKind::ClusterAccuracy => "cluster_accuracy",
            MetricKind::ClassifyAccuracy => "classify_accuracy",
            MetricKind::IsoScore => "isoscore",
            MetricKind::Alignment => "alignment",
            MetricKind::Uniformity => "uniformity",
        }
    }

    /// Valid value range, if the metric is bounded.
    pub fn range(self) -> Option<(f64, f64)> {
        match self {
            MetricKind::Spearman => Some((-1.0, 1.0)),
            MetricKind::ClusterAccuracy | MetricKind::ClassifyAccuracy | MetricKind::IsoScore => {
                Some((0.0, 1.0))
            }
            MetricKind::Alignment | MetricKind::Uniformity => None,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "spearman" => MetricKind::Spearman,
            "cluster_accuracy" => MetricKind::ClusterAccuracy,
            "classify_accuracy" => MetricKind::ClassifyAccuracy,
            "isoscore" => MetricKind::IsoScore,
            "alignment" | "align" => MetricKind::Alignment,
            "uniformity" | "uniform" => MetricKind::Uniformity,
            other => return Err(Error::config(format!("unknown metric `{other}`"))),
        })
    }
}

/// One scored cell. Failed cells carry `error` and no meaningful value.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: String,
    pub metric: MetricKind,
    pub value: f64,
    pub stddev: f64,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub provenance: String,
    /// Column label in pivoted reports.
    pub model: String,
    /// Row label in pivoted reports.
    pub method: String,
    pub error: Option<String>,
}

impl EvalReport {
    pub fn single(task: &str, metric: MetricKind, value: f64) -> Self {
        EvalReport {
            task: task.to_string(),
            metric,
            value,
            stddev: 0.0,
            runs: 1,
            seeds: Vec::new(),
            provenance: String::new(),
            model: String::new(),
            method: String::new(),
            error: None,
        }
    }

    pub fn failed(task: &str, metric: MetricKind, error: impl fmt::Display) -> Self {
        EvalReport {
            value: f64::NAN,
            error: Some(error.to_string()),
            ..Self::single(task, metric, f64::NAN)
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    /// Checks the value against the metric's range.
    pub fn validate(&self) -> Result<()> {
        if self.is_error() {
            return Ok(());
        }
        if self.runs == 0 {
            return Err(Error::invalid("report with zero runs"));
        }
        if let Some((lo, hi)) = self.metric.range() {
            if !(lo..=hi).contains(&self.value) {
                return Err(Error::invalid(format!(
                    "{} value {} outside [{lo}, {hi}]",
                    self.metric, self.value
                )));
            }
        }
        Ok(())
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const CSV_HEADER: [&str; 6] = ["task", "metric", "value", "stddev", "runs", "provenance"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::config(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn render(reports: &[EvalReport], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => to_csv(reports),
        ReportFormat::Markdown => to_markdown(reports),
    }
}

/// CSV with one row per report. Error rows leave `value` and `stddev`
/// empty and append the message to the provenance field.
pub fn to_csv(reports: &[EvalReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to render"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(format!("CSV encoding failed: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        let (value, stddev, provenance) = match &r.error {
            None => (r.value.to_string(), r.stddev.to_string(), r.provenance.clone()),
            Some(e) => (String::new(), String::new(), format!("{};error={e}", r.provenance)),
        };
        w.write_record([
            r.task.as_str(),
            r.metric.name(),
            &value,
            &stddev,
            &r.runs.to_string(),
            &provenance,
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("CSV encoding failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

/// One grid per task and metric: methods as rows, models as columns.
/// Bounded metrics are shown ×100.
pub fn to_markdown(reports: &[EvalReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to render"));
    }
    let mut groups: BTreeMap<(String, MetricKind), Vec<&EvalReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.task.clone(), r.metric)).or_default().push(r);
    }
    let mut out = String::new();
    for ((task, metric), rows) in groups {
        let mut models: Vec<&str> = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        for r in &rows {
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        let scale = if metric.range().is_some() { 100.0 } else { 1.0 };
        out.push_str(&format!("### {task} ({metric})\n\n| method |"));
        for m in &models {
            out.push_str(&format!(" {m} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(models.len()));
        out.push('\n');
        for method in &methods {
            out.push_str(&format!("| {method} |"));
            for model in &models {
                let cell = rows
                    .iter()
                    .find(|r| r.model == *model && r.method == *method)
                    .map_or(String::new(), |r| {
                        if r.is_error() {
                            "error".to_string()
                        } else {
                            format!("{:.1}", r.value * scale)
                        }
                    });
                out.push_str(&format!(" {cell} |"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(model: &str, method: &str, value: f64) -> EvalReport {
        EvalReport {
            model: model.into(),
            method: method.into(),
            ..EvalReport::single("stsb", MetricKind::Spearman, value)
        }
    }

    #[test]
    fn single_report_csv() {
        let csv = to_csv(&[cell("RE", "avg", 0.5)]).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("task,metric,value,stddev,runs,provenance\n"));
        assert!(to_csv(&[]).is_err());
        assert!(to_markdown(&[]).is_err());
    }

    #[test]
    fn markdown_grid() {
        let md = to_markdown(&[
            cell("RE", "avg", 0.5),
            cell("BERT", "avg", 0.6),
            cell("RE", "idf", 0.7),
            cell("BERT", "idf", 0.8),
        ])
        .unwrap();
        let table: Vec<&str> = md.lines().filter(|l| l.starts_with('|')).collect();
        assert_eq!(table.len(), 4);
        assert_eq!(table[0], "| method | RE | BERT |");
        assert_eq!(table[3], "| idf | 70.0 | 80.0 |");
    }

    #[test]
    fn ranges() {
        assert!(cell("a", "b", 1.5).validate().is_err());
        assert!(EvalReport::failed("t", MetricKind::Spearman, "boom").validate().is_ok());
    }
}
