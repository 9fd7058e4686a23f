//! Loss, optimizer, schedule, and the training loop: AdamW with decoupled
//! weight decay, cosine annealing over the total step count, global-norm
//! gradient clipping, seeded shuffling, per-epoch validation with weighted
//! F1, and early stopping that keeps the best snapshot.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::embeddings::Embedder;
use crate::error::{Error, Result};
use crate::evalbench::evaluate;
use crate::heads::{DropoutLayer, DropoutMode, Head, Param};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// The full training recipe. Two defaults exist: static-embedding runs use
/// 15 epochs at batch 32, precomputed-contextual runs 5 epochs at batch 8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub head_lr: f64,
    pub backbone_lr: f64,
    pub weight_decay: f64,
    pub clip_max_norm: f64,
    pub dropout: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub l1_strength: f64,
}

impl TrainConfig {
    pub fn static_defaults() -> TrainConfig {
        TrainConfig {
            epochs: 15,
            batch_size: 32,
            head_lr: 2e-4,
            backbone_lr: 2e-5,
            weight_decay: 0.01,
            clip_max_norm: 1.0,
            dropout: 0.3,
            early_stop_patience: 3,
            seed: 42,
            l1_strength: 0.0,
        }
    }

    pub fn precomputed_defaults() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            batch_size: 8,
            ..TrainConfig::static_defaults()
        }
    }
}

/// Mean batch cross-entropy from raw logits (fused log-softmax + NLL), plus
/// the gradient (softmax - onehot) / batch.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let batch = logits.rows();
    let classes = logits.cols();
    if labels.len() != batch {
        return Err(Error::Shape(format!(
            "cross entropy: {batch} logit rows vs {} labels",
            labels.len()
        )));
    }
    for &l in labels {
        if l >= classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
    }
    let mut grad = logits.softmax_rows();
    let mut loss = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        let row = logits.row(b);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        let g = grad.row_mut(b);
        g[label] -= 1.0;
    }
    grad.scale_assign(1.0 / batch as f64);
    Ok((loss / batch as f64, grad))
}

/// Cosine annealing: lr_min + 0.5 (lr_max - lr_min)(1 + cos(pi step/total));
/// steps past the horizon clamp to lr_min.
pub fn cosine_lr(step: usize, total_steps: usize, lr_max: f64, lr_min: f64) -> f64 {
    if step >= total_steps {
        return lr_min;
    }
    let progress = step as f64 / total_steps.max(1) as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Scale every gradient by max_norm/norm when the global L2 norm exceeds
/// max_norm. Returns the factor applied (1.0 when untouched).
pub fn clip_global_norm<'a, I>(grads: I, max_norm: f64) -> f64
where
    I: IntoIterator<Item = &'a mut Matrix>,
{
    let grads: Vec<&mut Matrix> = grads.into_iter().collect();
    let norm = grads.iter().map(|g| g.squared_norm()).sum::<f64>().sqrt();
    if norm <= max_norm || norm == 0.0 {
        return 1.0;
    }
    let factor = max_norm / norm;
    for g in grads {
        g.scale_assign(factor);
    }
    factor
}

/// AdamW with bias correction and decoupled weight decay:
/// p <- p - lr m_hat/(sqrt(v_hat)+eps) - lr wd p.
/// Moment buffers are keyed positionally on the stable parameter order.
#[derive(Debug, Clone)]
pub struct AdamW {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    moments: Vec<MomentPair>,
}

#[derive(Debug, Clone)]
struct MomentPair {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW::new()
    }
}

impl AdamW {
    pub fn new() -> AdamW {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all parameters; `lrs[i]` is the learning rate for
    /// `params[i]`. Non-trainable parameters are skipped but keep their slot.
    pub fn step(&mut self, params: &mut [Param<'_>], lrs: &[f64], weight_decay: f64) -> Result<()> {
        if lrs.len() != params.len() {
            return Err(Error::Shape(format!(
                "adamw: {} learning rates for {} parameters",
                lrs.len(),
                params.len()
            )));
        }
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| MomentPair {
                    m: vec![0.0; p.value.len()],
                    v: vec![0.0; p.value.len()],
                })
                .collect();
        }
        if self.moments.len() != params.len() {
            return Err(Error::Shape(format!(
                "adamw: optimizer holds {} moment slots, got {} parameters",
                self.moments.len(),
                params.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, moments), &lr) in params.iter_mut().zip(&mut self.moments).zip(lrs) {
            if param.value.len() != moments.m.len() {
                return Err(Error::Shape(format!(
                    "adamw: parameter '{}' changed size ({} vs {})",
                    param.name,
                    param.value.len(),
                    moments.m.len()
                )));
            }
            if !param.trainable {
                continue;
            }
            let values = param.value.data_mut();
            let grads = param.grad.data();
            for i in 0..values.len() {
                let g = grads[i];
                moments.m[i] = self.beta1 * moments.m[i] + (1.0 - self.beta1) * g;
                moments.v[i] = self.beta2 * moments.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = moments.m[i] / bc1;
                let v_hat = moments.v[i] / bc2;
                values[i] -=
                    lr * m_hat / (v_hat.sqrt() + self.epsilon) + lr * weight_decay * values[i];
            }
        }
        Ok(())
    }
}

/// Everything a run reports: config echo, loss/F1 curves, the winning epoch,
/// and wall-clock timings. Metric fields are deterministic under a seed;
/// timing fields are not.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub epoch_losses: Vec<f64>,
    pub val_f1_curve: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    /// True when validation reuses the held-out test split, so the F1 is not
    /// doubly held out.
    pub validation_is_test_split: bool,
    pub epochs_run: usize,
    pub train_seconds: f64,
    pub fwd_ms_mean: f64,
    pub bwd_ms_mean: f64,
}

/// Train the head (and the embedder, when trainable) in place. The head is
/// left at its best-validation-F1 snapshot.
pub fn train(
    head: &mut Head,
    embedder: &mut Embedder,
    train_ds: &LabeledDataset,
    valid_ds: &LabeledDataset,
    config: &TrainConfig,
) -> Result<RunRecord> {
    if train_ds.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    if config.epochs == 0 {
        return Err(Error::InvalidArgument(
            "training needs at least one epoch".into(),
        ));
    }
    // Surface dimension problems before any update.
    if embedder.dim() != head.in_dim() {
        return Err(Error::Shape(format!(
            "embedder produces {}-dim vectors but head expects {}",
            embedder.dim(),
            head.in_dim()
        )));
    }
    let num_classes = train_ds.num_classes();
    if head.out_dim() != num_classes {
        return Err(Error::Shape(format!(
            "head emits {} logits but dataset has {num_classes} classes",
            head.out_dim()
        )));
    }
    embedder.bind(train_ds)?;
    embedder.bind(valid_ds)?;

    let root = Rng::new(config.seed);
    let mut shuffle_rng = root.stream("shuffle");
    let mut dropout = DropoutLayer::new(config.dropout, root.stream("dropout"))?;

    let batches_per_epoch = train_ds.len().div_ceil(config.batch_size.max(1));
    let total_steps = (batches_per_epoch * config.epochs).max(1);
    let mut optimizer = AdamW::new();

    let mut epoch_losses = Vec::new();
    let mut val_f1_curve = Vec::new();
    let mut best: Option<(Head, Option<Matrix>)> = None;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut bad_validations = 0;
    let mut global_step = 0;
    let mut fwd_ms_total = 0.0;
    let mut bwd_ms_total = 0.0;
    let mut timed_batches = 0usize;

    let started = Instant::now();
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    'epochs: for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        dropout.set_mode(DropoutMode::Train);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<&crate::dataset::Record> =
                chunk.iter().map(|&i| &train_ds.records[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|r| r.label).collect();

            head.zero_grads();
            embedder.zero_grads();

            let features = embedder.embed_batch_train(&batch)?;
            let dropped = dropout.forward(&features);

            let fwd_started = Instant::now();
            let logits = head.forward(&dropped)?;
            fwd_ms_total += fwd_started.elapsed().as_secs_f64() * 1e3;

            let (data_loss, grad_logits) = cross_entropy_loss(&logits, &labels)?;

            let bwd_started = Instant::now();
            let grad_features = head.backward(&grad_logits)?;
            bwd_ms_total += bwd_started.elapsed().as_secs_f64() * 1e3;
            timed_batches += 1;

            let penalty = head.accumulate_regularization();
            loss_sum += data_loss + penalty;

            let grad_input = dropout.backward(&grad_features)?;
            if embedder.is_trainable() {
                embedder.backward(&grad_input)?;
            }

            let head_lr = cosine_lr(global_step, total_steps, config.head_lr, 0.0);
            let backbone_lr = cosine_lr(global_step, total_steps, config.backbone_lr, 0.0);
            let mut params = head.params();
            let mut lrs = vec![head_lr; params.len()];
            if let Embedder::Table(table) = embedder {
                let (value, grad, trainable) = table.table_param();
                params.push(Param {
                    name: "embedding.table".into(),
                    value,
                    grad,
                    trainable,
                });
                lrs.push(backbone_lr);
            }
            clip_global_norm(
                params
                    .iter_mut()
                    .filter(|p| p.trainable)
                    .map(|p| &mut *p.grad),
                config.clip_max_norm,
            );
            optimizer.step(&mut params, &lrs, config.weight_decay)?;
            global_step += 1;
        }
        epoch_losses.push(loss_sum / batches_per_epoch as f64);

        dropout.set_mode(DropoutMode::Eval);
        let (_, f1, _) = evaluate(head, embedder, valid_ds)?;
        val_f1_curve.push(f1);
        if f1 > best_f1 {
            best_f1 = f1;
            best_epoch = epoch;
            let table_snapshot = match embedder {
                Embedder::Table(t) if t.is_trainable() => Some(t.table().clone()),
                _ => None,
            };
            best = Some((head.clone(), table_snapshot));
            bad_validations = 0;
        } else {
            bad_validations += 1;
            if bad_validations >= config.early_stop_patience {
                break 'epochs;
            }
        }
    }
    let train_seconds = started.elapsed().as_secs_f64();

    if let Some((best_head, table_snapshot)) = best {
        *head = best_head;
        if let (Some(snapshot), Embedder::Table(t)) = (table_snapshot, &mut *embedder) {
            let (value, _, _) = t.table_param();
            *value = snapshot;
        }
    }

    Ok(RunRecord {
        config: config.clone(),
        epochs_run: epoch_losses.len(),
        epoch_losses,
        best_epoch,
        best_val_f1: best_f1,
        val_f1_curve,
        validation_is_test_split: true,
        train_seconds,
        fwd_ms_mean: fwd_ms_total / timed_batches.max(1) as f64,
        bwd_ms_mean: bwd_ms_total / timed_batches.max(1) as f64,
    })
}
