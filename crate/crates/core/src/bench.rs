//! Robustness benchmarks over a labeled dataset.
//!
//! A dataset is a JSON-lines file with one `{"input": [...], "label": k}`
//! object per line. Each image yields one local robustness property; the
//! report has a row per property and an aggregate.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::property::{robustness_property, Norm};
use crate::solver::{verify, VerifyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub input: Vec<f64>,
    pub label: usize,
}

/// Parse a JSON-lines dataset. Blank lines are skipped.
pub fn load_dataset(text: &str) -> Result<Vec<DatasetRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("dataset line {}: {e}", i + 1))))
        .collect()
}

/// What to do with images the model gets wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MisclassifiedMode {
    /// Verify them like any other image; the center itself is then a
    /// counterexample.
    #[default]
    Verify,
    /// Report them as skipped and leave them out of the aggregates.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub epsilon: f64,
    pub norm: Norm,
    /// Only the first `count` images; all of them when `None`.
    pub count: Option<usize>,
    pub misclassified: MisclassifiedMode,
    /// Record wall-clock times. Without them the report is deterministic.
    pub timings: bool,
    pub verify: VerifyConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            norm: Norm::LInf,
            count: None,
            misclassified: MisclassifiedMode::Verify,
            timings: true,
            verify: VerifyConfig::default(),
        }
    }
}

pub const SKIPPED: &str = "SKIPPED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub index: usize,
    pub label: usize,
    pub predicted: usize,
    /// A verdict label, or `SKIPPED`.
    pub verdict: String,
    pub time_s: Option<f64>,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mode: MisclassifiedMode,
    pub epsilon: f64,
    pub norm: Norm,
    pub properties: usize,
    pub holds: usize,
    pub counterexamples: usize,
    pub timeouts: usize,
    pub unknown: usize,
    pub skipped: usize,
    /// Fractions are over the properties that were not skipped.
    pub timeout_fraction: Option<f64>,
    pub verified_fraction: Option<f64>,
    /// Over properties that neither timed out nor were skipped.
    pub mean_time_s: Option<f64>,
    pub max_time_s: Option<f64>,
    /// Top-1 accuracy over the whole dataset, not just the benchmarked prefix.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchRow>,
    pub aggregate: Aggregate,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Row(BenchRow),
    Aggregate(Aggregate),
}

/// Index of the first largest logit.
pub fn argmax(y: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in y.iter().enumerate() {
        if *v > y[best] {
            best = i;
        }
    }
    best
}

fn fraction(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

impl Aggregate {
    fn of(rows: &[BenchRow], cfg: &BenchConfig, accuracy: Option<f64>) -> Self {
        let count = |v: &str| rows.iter().filter(|r| r.verdict == v).count();
        let skipped = count(SKIPPED);
        let timeouts = count("TIMEOUT");
        let holds = count("HOLDS");
        let evaluated = rows.len() - skipped;
        let times: Vec<f64> = rows
            .iter()
            .filter(|r| r.verdict != SKIPPED && r.verdict != "TIMEOUT")
            .filter_map(|r| r.time_s)
            .collect();
        Aggregate {
            mode: cfg.misclassified,
            epsilon: cfg.epsilon,
            norm: cfg.norm,
            properties: rows.len(),
            holds,
            counterexamples: count("COUNTEREXAMPLE"),
            timeouts,
            unknown: count("UNKNOWN"),
            skipped,
            timeout_fraction: fraction(timeouts, evaluated),
            verified_fraction: fraction(holds, evaluated),
            mean_time_s: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
            max_time_s: times.iter().copied().reduce(f64::max),
            accuracy,
        }
    }
}

/// Verify local robustness for each image of `data`.
pub fn run_bench(m: &Model, data: &[DatasetRow], cfg: &BenchConfig) -> Result<BenchmarkReport> {
    let mut predicted = Vec::with_capacity(data.len());
    for row in data {
        predicted.push(argmax(&m.forward(&row.input)?));
    }
    let correct = data.iter().zip(&predicted).filter(|(r, p)| r.label == **p).count();
    let accuracy = fraction(correct, data.len());

    let n = cfg.count.unwrap_or(data.len()).min(data.len());
    let mut rows = Vec::with_capacity(n);
    for (index, row) in data[..n].iter().enumerate() {
        let mut out = BenchRow {
            index,
            label: row.label,
            predicted: predicted[index],
            verdict: SKIPPED.to_string(),
            time_s: None,
            nodes: 0,
        };
        if cfg.misclassified == MisclassifiedMode::Skip && row.label != predicted[index] {
            rows.push(out);
            continue;
        }
        let prop = robustness_property(&row.input, row.label, m.output_dim(), cfg.epsilon, cfg.norm)?;
        let start = Instant::now();
        let report = verify(m, &prop, &cfg.verify)?;
        let elapsed = start.elapsed().as_secs_f64();
        tracing::info!(index, verdict = report.verdict.label(), elapsed, "benchmark property");
        out.verdict = report.verdict.label().to_string();
        out.time_s = cfg.timings.then_some(elapsed);
        out.nodes = report.stats.nodes;
        rows.push(out);
    }
    let aggregate = Aggregate::of(&rows, cfg, accuracy);
    Ok(BenchmarkReport { rows, aggregate })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(v) => format!("{v:.digits$}"),
        None => "n/a".to_string(),
    }
}

impl BenchmarkReport {
    /// One JSON object per row, then the aggregate.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        let lines = self
            .rows
            .iter()
            .cloned()
            .map(Line::Row)
            .chain(std::iter::once(Line::Aggregate(self.aggregate.clone())));
        for line in lines {
            s.push_str(&serde_json::to_string(&line).expect("reports serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut aggregate = None;
        for (i, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            if aggregate.is_some() {
                return Err(Error::Parse(format!("report line {}: data after the aggregate", i + 1)));
            }
            match serde_json::from_str(l).map_err(|e| Error::Parse(format!("report line {}: {e}", i + 1)))? {
                Line::Row(r) => rows.push(r),
                Line::Aggregate(a) => aggregate = Some(a),
            }
        }
        let aggregate = aggregate.ok_or_else(|| Error::Parse("report has no aggregate line".into()))?;
        Ok(Self { rows, aggregate })
    }

    pub fn to_text(&self) -> String {
        let a = &self.aggregate;
        let mut s = String::new();
        let _ = writeln!(s, "{:>5} {:>5} {:>5} {:<14} {:>10} {:>8}", "index", "label", "pred", "verdict", "time_s", "nodes");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>5} {:>5} {:>5} {:<14} {:>10} {:>8}",
                r.index,
                r.label,
                r.predicted,
                r.verdict,
                opt(r.time_s, 3),
                r.nodes
            );
        }
        let norm = match a.norm {
            Norm::L1 => "1",
            Norm::LInf => "inf",
        };
        let mode = match a.mode {
            MisclassifiedMode::Verify => "all images",
            MisclassifiedMode::Skip => "misclassified images skipped",
        };
        let _ = writeln!(s, "epsilon {} norm {norm} ({mode})", a.epsilon);
        let _ = writeln!(
            s,
            "properties {} holds {} counterexamples {} timeouts {} unknown {} skipped {}",
            a.properties, a.holds, a.counterexamples, a.timeouts, a.unknown, a.skipped
        );
        let _ = writeln!(
            s,
            "verified {} timeout {} mean_time_s {} max_time_s {} accuracy {}",
            opt(a.verified_fraction, 3),
            opt(a.timeout_fraction, 3),
            opt(a.mean_time_s, 3),
            opt(a.max_time_s, 3),
            opt(a.accuracy, 4)
        );
        s
    }
}

fn be_u32(b: &[u8], at: usize) -> Result<u32> {
    b.get(at..at + 4)
        .map(|w| u32::from_be_bytes([w[0], w[1], w[2], w[3]]))
        .ok_or_else(|| Error::Parse("truncated IDX header".into()))
}

/// Convert MNIST IDX image and label files to a JSON-lines dataset.
///
/// Pixels are scaled to [0, 1]. With `threshold`, each pixel is instead
/// mapped to 1 if its scaled value is at least `threshold` and to -1
/// otherwise.
pub fn idx_to_jsonl(images: &[u8], labels: &[u8], threshold: Option<f64>, limit: Option<usize>) -> Result<String> {
    if be_u32(images, 0)? != 0x0803 {
        return Err(Error::Parse("image file is not an IDX3 ubyte file".into()));
    }
    if be_u32(labels, 0)? != 0x0801 {
        return Err(Error::Parse("label file is not an IDX1 ubyte file".into()));
    }
    let n = be_u32(images, 4)? as usize;
    let pixels = be_u32(images, 8)? as usize * be_u32(images, 12)? as usize;
    if be_u32(labels, 4)? as usize != n {
        return Err(Error::Parse("image and label counts differ".into()));
    }
    if images.len() < 16 + n * pixels || labels.len() < 8 + n {
        return Err(Error::Parse("truncated IDX data".into()));
    }
    let mut out = String::new();
    for i in 0..limit.unwrap_or(n).min(n) {
        let input = images[16 + i * pixels..16 + (i + 1) * pixels]
            .iter()
            .map(|&p| {
                let v = f64::from(p) / 255.0;
                match threshold {
                    Some(t) if v >= t => 1.0,
                    Some(_) => -1.0,
                    None => v,
                }
            })
            .collect();
        let row = DatasetRow {
            input,
            label: usize::from(labels[8 + i]),
        };
        out.push_str(&serde_json::to_string(&row)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(verdict: &str, time_s: Option<f64>) -> BenchRow {
        BenchRow {
            index: 0,
            label: 1,
            predicted: 1,
            verdict: verdict.into(),
            time_s,
            nodes: 3,
        }
    }

    #[test]
    fn aggregates_exclude_timeouts_and_skips() {
        let rows = vec![
            row("HOLDS", Some(1.0)),
            row("COUNTEREXAMPLE", Some(3.0)),
            row("TIMEOUT", Some(120.0)),
            row(SKIPPED, None),
        ];
        let a = Aggregate::of(&rows, &BenchConfig::default(), Some(0.5));
        assert_eq!((a.properties, a.skipped, a.timeouts), (4, 1, 1));
        assert_eq!(a.mean_time_s, Some(2.0));
        assert_eq!(a.max_time_s, Some(3.0));
        assert_eq!(a.timeout_fraction, Some(1.0 / 3.0));
        assert_eq!(a.verified_fraction, Some(1.0 / 3.0));
    }

    #[test]
    fn empty_report_prints_not_available() {
        let r = BenchmarkReport {
            rows: vec![],
            aggregate: Aggregate::of(&[], &BenchConfig::default(), None),
        };
        let text = r.to_text();
        assert!(text.contains("mean_time_s n/a"));
        assert!(text.contains("accuracy n/a"));
        assert_eq!(BenchmarkReport::from_jsonl(&r.to_jsonl()).unwrap(), r);
    }

    #[test]
    fn jsonl_round_trips() {
        let rows = vec![row("HOLDS", Some(0.25)), row("UNKNOWN", None)];
        let r = BenchmarkReport {
            aggregate: Aggregate::of(&rows, &BenchConfig::default(), Some(0.9)),
            rows,
        };
        let text = r.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(BenchmarkReport::from_jsonl(&text).unwrap(), r);
        assert!(BenchmarkReport::from_jsonl("").is_err());
    }

    #[test]
    fn idx_conversion() {
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2];
        images.extend([0, 255, 128, 127]);
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 2, 7, 3];
        let rows = load_dataset(&idx_to_jsonl(&images, &labels, None, None).unwrap()).unwrap();
        assert_eq!(rows[0], DatasetRow { input: vec![0.0, 1.0], label: 7 });
        assert_eq!(rows[1].input, vec![128.0 / 255.0, 127.0 / 255.0]);
        let bin = load_dataset(&idx_to_jsonl(&images, &labels, Some(0.5), Some(1)).unwrap()).unwrap();
        assert_eq!(bin, vec![DatasetRow { input: vec![-1.0, 1.0], label: 7 }]);
        assert!(idx_to_jsonl(&labels, &images, None, None).is_err());
        assert!(idx_to_jsonl(&images[..18], &labels, None, None).is_err());
    }

    #[test]
    fn argmax_takes_first_maximum() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[]), 0);
    }
}
