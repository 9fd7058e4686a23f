//! Classification metrics (weighted F1, accuracy, confusion matrix) and the
//! forward/backward latency microbenchmark. Latencies are per batch at the
//! configured batch size, measured on a monotonic clock after warmup.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::embeddings::Embedder;
use crate::error::{Error, Result};
use crate::heads::Head;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// C x C counts: rows are true classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        self.counts[true_class * self.classes + predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> usize {
        self.counts[true_class * self.classes + predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Records with this true class.
    pub fn support(&self, class: usize) -> usize {
        (0..self.classes).map(|p| self.count(class, p)).sum()
    }

    /// Records predicted as this class.
    pub fn predicted(&self, class: usize) -> usize {
        (0..self.classes).map(|t| self.count(t, class)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: usize = (0..self.classes).map(|c| self.count(c, c)).sum();
        trace as f64 / total as f64
    }

    pub fn from_counts(classes: usize, counts: Vec<usize>) -> Result<ConfusionMatrix> {
        if counts.len() != classes * classes {
            return Err(Error::Shape(format!(
                "confusion matrix needs {} counts, got {}",
                classes * classes,
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { classes, counts })
    }
}

/// Support-weighted mean of per-class F1. Classes with zero support carry
/// zero weight; a class with P + R = 0 contributes F1 = 0.
pub fn weighted_f1(cm: &ConfusionMatrix) -> f64 {
    let total: usize = (0..cm.classes()).map(|c| cm.support(c)).sum();
    if total == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for c in 0..cm.classes() {
        let support = cm.support(c);
        if support == 0 {
            continue;
        }
        let tp = cm.count(c, c) as f64;
        let predicted = cm.predicted(c);
        let precision = if predicted == 0 {
            0.0
        } else {
            tp / predicted as f64
        };
        let recall = tp / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        acc += support as f64 / total as f64 * f1;
    }
    acc
}

/// Argmax with ties broken toward the lower class index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Run the head over the dataset in eval mode and tally the confusion
/// matrix. Returns (confusion, weighted F1, accuracy). Pure: the head is
/// untouched and repeated calls give identical results.
pub fn evaluate(
    head: &Head,
    embedder: &Embedder,
    ds: &LabeledDataset,
) -> Result<(ConfusionMatrix, f64, f64)> {
    let mut cm = ConfusionMatrix::new(ds.num_classes());
    let mut scratch = head.clone();
    let records: Vec<&crate::dataset::Record> = ds.records.iter().collect();
    for chunk in records.chunks(256) {
        let features = embedder.embed_batch(chunk)?;
        let logits = scratch.forward(&features)?;
        for (b, rec) in chunk.iter().enumerate() {
            cm.record(rec.label, argmax_row(logits.row(b)));
        }
    }
    let f1 = weighted_f1(&cm);
    let accuracy = cm.accuracy();
    Ok((cm, f1, accuracy))
}

/// Mean forward/backward wall-clock per call in milliseconds, over `iters`
/// timed iterations after `warmup` untimed ones.
pub fn bench_latency(
    head: &mut Head,
    batch: usize,
    warmup: usize,
    iters: usize,
    rng: &mut Rng,
) -> Result<(f64, f64)> {
    if iters == 0 {
        return Err(Error::InvalidArgument(
            "bench_latency needs at least one timed iteration".into(),
        ));
    }
    let mut input = Matrix::zeros(batch.max(1), head.in_dim());
    for v in input.data_mut() {
        *v = rng.uniform(-1.0, 1.0);
    }
    let mut grad_out = Matrix::zeros(batch.max(1), head.out_dim());
    for v in grad_out.data_mut() {
        *v = rng.uniform(-1.0, 1.0);
    }

    for _ in 0..warmup {
        head.forward(&input)?;
        head.backward(&grad_out)?;
    }
    let mut fwd_ms = 0.0;
    let mut bwd_ms = 0.0;
    for _ in 0..iters {
        let t0 = Instant::now();
        head.forward(&input)?;
        fwd_ms += t0.elapsed().as_secs_f64() * 1e3;
        let t1 = Instant::now();
        head.backward(&grad_out)?;
        bwd_ms += t1.elapsed().as_secs_f64() * 1e3;
    }
    head.zero_grads();
    Ok((fwd_ms / iters as f64, bwd_ms / iters as f64))
}

/// One row of the efficiency/performance report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub model: String,
    pub total_params: usize,
    pub trainable_params: usize,
    pub train_seconds: f64,
    pub fwd_ms_mean: f64,
    pub bwd_ms_mean: f64,
    pub f1_weighted: f64,
    pub accuracy: f64,
}

/// Aligned plain-text table with the report columns in order:
/// model, params, train_s, fwd_ms, bwd_ms, f1, accuracy.
pub fn render_table(rows: &[BenchReport]) -> String {
    let headers = [
        "model", "params", "train_s", "fwd_ms", "bwd_ms", "f1", "accuracy",
    ];
    let mut cells: Vec<[String; 7]> = Vec::with_capacity(rows.len());
    for r in rows {
        cells.push([
            r.model.clone(),
            r.total_params.to_string(),
            format!("{:.2}", r.train_seconds),
            format!("{:.3}", r.fwd_ms_mean),
            format!("{:.3}", r.bwd_ms_mean),
            format!("{:.4}", r.f1_weighted),
            format!("{:.4}", r.accuracy),
        ]);
    }
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let render_row = |fields: &[String]| -> String {
        fields
            .iter()
            .zip(&widths)
            .map(|(f, &w)| format!("{f:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    out.push_str(&render_row(
        &headers.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
    ));
    out.push('\n');
    for row in &cells {
        out.push_str(&render_row(row.as_slice()));
        out.push('\n');
    }
    out
}
