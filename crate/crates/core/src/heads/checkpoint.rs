//! Head checkpointing: a self-describing JSON container with the family tag,
//! shape metadata, named parameter tensors in declaration order, and the
//! init seed. Values round-trip bit-exactly (shortest-representation float
//! formatting re-parses to the same f64).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

use super::{Head, HeadConfig};

const FORMAT_TAG: &str = "kanhead-checkpoint-v1";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: HeadConfig,
    in_dim: usize,
    out_dim: usize,
    seed: u64,
    params: Vec<TensorRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    trainable: bool,
    data: Vec<f64>,
}

pub fn save_head(head: &Head, path: &Path) -> Result<()> {
    let params = head
        .param_views()
        .into_iter()
        .map(|p| TensorRecord {
            name: p.name,
            rows: p.value.rows(),
            cols: p.value.cols(),
            trainable: p.trainable,
            data: p.value.data().to_vec(),
        })
        .collect();
    let file = CheckpointFile {
        format: FORMAT_TAG.to_string(),
        config: head.config().clone(),
        in_dim: head.in_dim(),
        out_dim: head.out_dim(),
        seed: head.init_seed(),
        params,
    };
    let json = serde_json::to_string(&file)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_head(path: &Path) -> Result<Head> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.format != FORMAT_TAG {
        return Err(Error::Data(format!(
            "unsupported checkpoint format '{}'",
            file.format
        )));
    }
    let mut head = Head::new(
        &file.config,
        file.in_dim,
        file.out_dim,
        &mut Rng::new(file.seed),
    )?;
    let mut params = head.params();
    if params.len() != file.params.len() {
        return Err(Error::Data(format!(
            "checkpoint has {} tensors, head expects {}",
            file.params.len(),
            params.len()
        )));
    }
    for (slot, record) in params.iter_mut().zip(file.params) {
        if slot.name != record.name {
            return Err(Error::Data(format!(
                "checkpoint tensor '{}' does not match expected '{}'",
                record.name, slot.name
            )));
        }
        let tensor = Matrix::from_vec(record.rows, record.cols, record.data)?;
        if tensor.shape() != slot.value.shape() {
            return Err(Error::Data(format!(
                "checkpoint tensor '{}' is {}x{}, head expects {}x{}",
                record.name,
                tensor.rows(),
                tensor.cols(),
                slot.value.rows(),
                slot.value.cols()
            )));
        }
        *slot.value = tensor;
    }
    Ok(head)
}
