//! Labeled, pre-tokenized sentence datasets: TSV loading and stratified
//! splitting. Segmentation and normalization are upstream concerns; the
//! loader treats whitespace as the token boundary.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct Record {
    /// Stable line number of the source file, used to join with
    /// precomputed-embedding files.
    pub id: String,
    pub tokens: Vec<String>,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub records: Vec<Record>,
    /// Class names in first-appearance order; labels index into this.
    pub label_names: Vec<String>,
    /// Lines dropped because their sentence was empty.
    pub skipped_empty: usize,
}

impl LabeledDataset {
    /// One record per line: label, TAB, space-separated tokens.
    pub fn load_tsv(path: &Path) -> Result<LabeledDataset> {
        let text = fs::read_to_string(path)?;
        let path_str = path.display().to_string();
        let mut records = Vec::new();
        let mut label_names: Vec<String> = Vec::new();
        let mut skipped_empty = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (label, sentence) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path_str.clone(),
                line: lineno + 1,
                message: "missing TAB between label and sentence".into(),
            })?;
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    line: lineno + 1,
                    message: "empty label".into(),
                });
            }
            let tokens: Vec<String> = sentence.split_whitespace().map(str::to_string).collect();
            if tokens.is_empty() {
                skipped_empty += 1;
                continue;
            }
            let label_idx = match label_names.iter().position(|l| l == label) {
                Some(i) => i,
                None => {
                    label_names.push(label.to_string());
                    label_names.len() - 1
                }
            };
            records.push(Record {
                id: (lineno + 1).to_string(),
                tokens,
                label: label_idx,
            });
        }
        if records.is_empty() {
            return Err(Error::Data(format!("{path_str}: no usable records")));
        }
        Ok(LabeledDataset {
            records,
            label_names,
            skipped_empty,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for rec in &self.records {
            counts[rec.label] += 1;
        }
        counts
    }

    /// Per-class proportional split with largest-remainder rounding,
    /// deterministic under the seed. Both halves keep the full label map.
    pub fn stratified_split(
        &self,
        test_fraction: f64,
        rng: &mut Rng,
    ) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "test_fraction must be in (0, 1), got {test_fraction}"
            )));
        }
        let num_classes = self.num_classes();
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
        for (i, rec) in self.records.iter().enumerate() {
            per_class[rec.label].push(i);
        }
        for (c, members) in per_class.iter().enumerate() {
            if members.len() < 2 {
                return Err(Error::Data(format!(
                    "class '{}' has {} records; at least 2 are needed to split",
                    self.label_names[c],
                    members.len()
                )));
            }
        }

        // Largest-remainder apportionment of the global test target.
        let target_total = (self.len() as f64 * test_fraction).round() as usize;
        let mut take: Vec<usize> = Vec::with_capacity(num_classes);
        let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(num_classes);
        for members in &per_class {
            let exact = members.len() as f64 * test_fraction;
            let base = exact.floor() as usize;
            take.push(base);
            remainders.push((take.len() - 1, exact - base as f64));
        }
        let assigned: usize = take.iter().sum();
        let mut leftover = target_total.saturating_sub(assigned);
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (c, _) in remainders {
            if leftover == 0 {
                break;
            }
            // keep at least one training record per class
            if take[c] + 1 < per_class[c].len() {
                take[c] += 1;
                leftover -= 1;
            }
        }

        let mut is_test = vec![false; self.len()];
        for (c, members) in per_class.iter().enumerate() {
            let mut shuffled = members.clone();
            rng.shuffle(&mut shuffled);
            for &idx in shuffled.iter().take(take[c]) {
                is_test[idx] = true;
            }
        }

        let split = |want_test: bool| LabeledDataset {
            records: self
                .records
                .iter()
                .enumerate()
                .filter(|(i, _)| is_test[*i] == want_test)
                .map(|(_, r)| r.clone())
                .collect(),
            label_names: self.label_names.clone(),
            skipped_empty: 0,
        };
        Ok((split(false), split(true)))
    }
}
