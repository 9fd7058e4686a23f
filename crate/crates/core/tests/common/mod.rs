//! Shared test support: an independent finite-difference gradient checker,
//! a textbook recursive Cox-de Boor oracle, and deterministic synthetic
//! corpora (separable blobs and concentric rings over token patterns).

#![allow(dead_code)]

use kanhead::dataset::{LabeledDataset, Record};
use kanhead::heads::Head;
use kanhead::matrix::Matrix;
use kanhead::rng::Rng;

/// Scalar probe: L = sum(R .* forward(x)) for a fixed random projection R,
/// evaluated through the forward pass only, so numeric gradients are
/// independent of the backward implementation under test.
pub fn probe_loss(head: &mut Head, x: &Matrix, projection: &Matrix) -> f64 {
    let y = head.forward(x).expect("forward in probe");
    y.data()
        .iter()
        .zip(projection.data())
        .map(|(a, b)| a * b)
        .sum()
}

pub struct GradCheckOutcome {
    pub checked: usize,
    pub max_rel_err: f64,
    pub first_failure: Option<String>,
}

// Relative error with an absolute floor: |a - n| / max(|a|, |n|, 1e-2).
// At tol 1e-5 this means atol 1e-7 / rtol 1e-5, so near-zero gradients are
// judged on a strict absolute scale instead of blowing up the quotient.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-2);
    (analytic - numeric).abs() / denom
}

/// Central finite differences (step `h`) over every parameter entry and
/// every input entry, compared to the analytic backward pass at relative
/// tolerance `tol`.
pub fn grad_check(
    head: &mut Head,
    x: &Matrix,
    h: f64,
    tol: f64,
    rng: &mut Rng,
) -> GradCheckOutcome {
    let mut projection = Matrix::zeros(x.rows(), head.out_dim());
    for v in projection.data_mut() {
        *v = rng.uniform(-1.0, 1.0);
    }

    // Analytic pass.
    head.zero_grads();
    head.forward(x).expect("forward");
    let analytic_input = head.backward(&projection).expect("backward");
    let analytic_params: Vec<(String, Vec<f64>)> = head
        .params()
        .into_iter()
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();

    let mut outcome = GradCheckOutcome {
        checked: 0,
        max_rel_err: 0.0,
        first_failure: None,
    };
    let record =
        |name: &str, entry: usize, analytic: f64, numeric: f64, out: &mut GradCheckOutcome| {
            let err = rel_err(analytic, numeric);
            out.checked += 1;
            if err > out.max_rel_err {
                out.max_rel_err = err;
            }
            if err > tol && out.first_failure.is_none() {
                out.first_failure = Some(format!(
                    "{name}[{entry}]: analytic {analytic} vs numeric {numeric} (rel {err:.3e})"
                ));
            }
        };

    // Parameters.
    let param_count = analytic_params.len();
    for pi in 0..param_count {
        let entries = analytic_params[pi].1.len();
        for e in 0..entries {
            let original = {
                let mut params = head.params();
                let v = params[pi].value.data()[e];
                params[pi].value.data_mut()[e] = v + h;
                v
            };
            let plus = probe_loss(head, x, &projection);
            {
                let mut params = head.params();
                params[pi].value.data_mut()[e] = original - h;
            }
            let minus = probe_loss(head, x, &projection);
            {
                let mut params = head.params();
                params[pi].value.data_mut()[e] = original;
            }
            let numeric = (plus - minus) / (2.0 * h);
            record(
                &analytic_params[pi].0,
                e,
                analytic_params[pi].1[e],
                numeric,
                &mut outcome,
            );
        }
    }

    // Inputs.
    let mut x_mut = x.clone();
    for e in 0..x_mut.len() {
        let original = x_mut.data()[e];
        x_mut.data_mut()[e] = original + h;
        let plus = probe_loss(head, &x_mut, &projection);
        x_mut.data_mut()[e] = original - h;
        let minus = probe_loss(head, &x_mut, &projection);
        x_mut.data_mut()[e] = original;
        let numeric = (plus - minus) / (2.0 * h);
        record("input", e, analytic_input.data()[e], numeric, &mut outcome);
    }
    outcome
}

/// Randomize parameters on [-1, 1], keeping positivity constraints (the
/// RSWAF inverse denominator) intact.
pub fn randomize_head(head: &mut Head, rng: &mut Rng) {
    for p in head.params() {
        if p.name.ends_with("inv_denominator") {
            p.value.data_mut()[0] = rng.uniform(0.5, 3.0);
            continue;
        }
        for v in p.value.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
    }
}

/// Textbook recursive Cox-de Boor evaluation of basis i, degree k.
pub fn cox_de_boor(i: usize, degree: usize, knots: &[f64], x: f64) -> f64 {
    if degree == 0 {
        return if knots[i] <= x && x < knots[i + 1] {
            1.0
        } else {
            0.0
        };
    }
    let mut acc = 0.0;
    let left_span = knots[i + degree] - knots[i];
    if left_span != 0.0 {
        acc += (x - knots[i]) / left_span * cox_de_boor(i, degree - 1, knots, x);
    }
    let right_span = knots[i + degree + 1] - knots[i + 1];
    if right_span != 0.0 {
        acc += (knots[i + degree + 1] - x) / right_span * cox_de_boor(i + 1, degree - 1, knots, x);
    }
    acc
}

fn sentence(pool: &[String], len: usize, rng: &mut Rng) -> Vec<String> {
    (0..len)
        .map(|_| pool[rng.below(pool.len())].clone())
        .collect()
}

/// Linearly separable blobs as token patterns: each class draws sentences
/// from its own small token pool, so mean-pooled embeddings cluster tightly
/// around per-class means.
pub fn blobs_corpus(
    train_per_class: &[usize],
    test_per_class: &[usize],
    seed: u64,
) -> (LabeledDataset, LabeledDataset) {
    assert_eq!(train_per_class.len(), test_per_class.len());
    let classes = train_per_class.len();
    let mut rng = Rng::new(seed).stream("blobs");
    let pools: Vec<Vec<String>> = (0..classes)
        .map(|c| (0..6).map(|t| format!("c{c}_w{t}")).collect())
        .collect();
    let label_names: Vec<String> = (0..classes).map(|c| format!("class{c}")).collect();
    let mut make = |counts: &[usize], tag: &str| -> LabeledDataset {
        let mut records = Vec::new();
        for (label, &n) in counts.iter().enumerate() {
            for i in 0..n {
                let len = 10 + rng.below(8);
                records.push(Record {
                    id: format!("{tag}-{label}-{i}"),
                    tokens: sentence(&pools[label], len, &mut rng),
                    label,
                });
            }
        }
        LabeledDataset {
            records,
            label_names: label_names.clone(),
            skipped_empty: 0,
        }
    };
    let train = make(train_per_class, "train");
    let test = make(test_per_class, "test");
    (train, test)
}

/// Concentric-rings task mapped to token patterns. Each point (x, y) in one
/// of three radial bands becomes the two tokens `x<bin>` `y<bin>`; the
/// matching word-vector table (see `rings_vector_file`) encodes the
/// coordinates themselves, so the pooled feature is ~(x, x, y, y) and class
/// membership is a function of radius only - not linearly separable.
pub struct RingsTask {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Word-vector file content in the standard text format.
    pub vector_file: String,
}

const RING_BINS: usize = 48;
const RING_SPAN: f64 = 1.2;

fn ring_bin(v: f64) -> usize {
    let clamped = v.clamp(-RING_SPAN, RING_SPAN);
    let t = (clamped + RING_SPAN) / (2.0 * RING_SPAN);
    ((t * (RING_BINS - 1) as f64).round() as usize).min(RING_BINS - 1)
}

fn ring_bin_center(bin: usize) -> f64 {
    -RING_SPAN + 2.0 * RING_SPAN * bin as f64 / (RING_BINS - 1) as f64
}

pub fn rings_task(train_per_class: usize, test_per_class: usize, seed: u64) -> RingsTask {
    let bands = [(0.05, 0.35), (0.5, 0.75), (0.9, 1.15)];
    let mut rng = Rng::new(seed).stream("rings");
    let label_names: Vec<String> = (0..3).map(|c| format!("ring{c}")).collect();
    let mut make = |per_class: usize, tag: &str| -> LabeledDataset {
        let mut records = Vec::new();
        for (label, &(lo, hi)) in bands.iter().enumerate() {
            for i in 0..per_class {
                let radius = rng.uniform(lo, hi);
                let angle = rng.uniform(0.0, std::f64::consts::TAU);
                let (x, y) = (radius * angle.cos(), radius * angle.sin());
                records.push(Record {
                    id: format!("{tag}-{label}-{i}"),
                    tokens: vec![format!("x{}", ring_bin(x)), format!("y{}", ring_bin(y))],
                    label,
                });
            }
        }
        LabeledDataset {
            records,
            label_names: label_names.clone(),
            skipped_empty: 0,
        }
    };
    let train = make(train_per_class, "train");
    let test = make(test_per_class, "test");

    let mut vector_file = String::new();
    for bin in 0..RING_BINS {
        let v = 2.0 * ring_bin_center(bin);
        vector_file.push_str(&format!("x{bin} {v} {v} 0 0\n"));
        vector_file.push_str(&format!("y{bin} 0 0 {v} {v}\n"));
    }
    RingsTask {
        train,
        test,
        vector_file,
    }
}
