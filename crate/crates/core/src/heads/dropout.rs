//! Inverted dropout: kept activations are scaled by 1/(1-rate) at train
//! time, so eval mode is exactly the identity.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct DropoutLayer {
    rate: f64,
    mode: DropoutMode,
    rng: Rng,
    mask: Option<Matrix>,
}

impl DropoutLayer {
    pub fn new(rate: f64, rng: Rng) -> Result<DropoutLayer> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(DropoutLayer {
            rate,
            mode: DropoutMode::Eval,
            rng,
            mask: None,
        })
    }

    pub fn set_mode(&mut self, mode: DropoutMode) {
        self.mode = mode;
    }

    pub fn forward(&mut self, input: &Matrix) -> Matrix {
        if self.mode == DropoutMode::Eval || self.rate == 0.0 {
            self.mask = None;
            return input.clone();
        }
        let keep_scale = 1.0 / (1.0 - self.rate);
        let mut mask = Matrix::zeros(input.rows(), input.cols());
        for v in mask.data_mut() {
            if self.rng.next_f64() >= self.rate {
                *v = keep_scale;
            }
        }
        let out = input.hadamard(&mask).expect("mask shape matches input");
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        match self.mask.take() {
            None => Ok(grad_out.clone()),
            Some(mask) => grad_out.hadamard(&mask),
        }
    }
}
