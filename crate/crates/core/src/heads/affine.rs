//! Affine and elementwise-activation layers for the MLP baseline.

use crate::error::{Error, Result};
use crate::matrix::{kaiming_uniform, Activation, Matrix};
use crate::rng::Rng;

use super::{Layer, Param, ParamView};

/// y = x W^T + b with W stored out x in.
#[derive(Debug, Clone)]
pub struct AffineLayer {
    in_dim: usize,
    out_dim: usize,
    weight: Matrix,
    bias: Matrix,
    grad_weight: Matrix,
    grad_bias: Matrix,
    cached_input: Option<Matrix>,
}

impl AffineLayer {
    /// Zero-initialized layer; the usual choice for the output layer so that
    /// training starts from uniform logits.
    pub fn zeros(in_dim: usize, out_dim: usize) -> AffineLayer {
        AffineLayer {
            in_dim,
            out_dim,
            weight: Matrix::zeros(out_dim, in_dim),
            bias: Matrix::zeros(1, out_dim),
            grad_weight: Matrix::zeros(out_dim, in_dim),
            grad_bias: Matrix::zeros(1, out_dim),
            cached_input: None,
        }
    }

    /// Kaiming-uniform weight, zero bias; used for hidden layers.
    pub fn kaiming(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<AffineLayer> {
        let mut layer = AffineLayer::zeros(in_dim, out_dim);
        layer.weight = kaiming_uniform(rng, in_dim, out_dim, in_dim)?;
        Ok(layer)
    }

    pub fn set_weight(&mut self, weight: Matrix) -> Result<()> {
        if weight.shape() != (self.out_dim, self.in_dim) {
            return Err(Error::Shape(format!(
                "affine weight must be {}x{}, got {}x{}",
                self.out_dim,
                self.in_dim,
                weight.rows(),
                weight.cols()
            )));
        }
        self.weight = weight;
        Ok(())
    }

    pub fn set_bias(&mut self, bias: Matrix) -> Result<()> {
        if bias.shape() != (1, self.out_dim) {
            return Err(Error::Shape(format!(
                "affine bias must be 1x{}, got {}x{}",
                self.out_dim,
                bias.rows(),
                bias.cols()
            )));
        }
        self.bias = bias;
        Ok(())
    }
}

impl Layer for AffineLayer {
    fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim {
            return Err(Error::Shape(format!(
                "affine expects {} columns, got {}x{}",
                self.in_dim,
                input.rows(),
                input.cols()
            )));
        }
        let mut out = input.matmul_nt(&self.weight)?;
        out.add_row_broadcast(&self.bias)?;
        self.cached_input = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let input = self
            .cached_input
            .take()
            .ok_or_else(|| Error::State("affine backward called before forward".into()))?;
        if grad_out.shape() != (input.rows(), self.out_dim) {
            return Err(Error::Shape(format!(
                "affine grad must be {}x{}, got {}x{}",
                input.rows(),
                self.out_dim,
                grad_out.rows(),
                grad_out.cols()
            )));
        }
        self.grad_weight.add_assign(&grad_out.matmul_tn(&input)?)?;
        self.grad_bias.add_assign(&grad_out.col_sums())?;
        grad_out.matmul(&self.weight)
    }

    fn params(&mut self) -> Vec<Param<'_>> {
        vec![
            Param {
                name: "weight".into(),
                value: &mut self.weight,
                grad: &mut self.grad_weight,
                trainable: true,
            },
            Param {
                name: "bias".into(),
                value: &mut self.bias,
                grad: &mut self.grad_bias,
                trainable: true,
            },
        ]
    }

    fn param_views(&self) -> Vec<ParamView<'_>> {
        vec![
            ParamView {
                name: "weight".into(),
                value: &self.weight,
                trainable: true,
            },
            ParamView {
                name: "bias".into(),
                value: &self.bias,
                trainable: true,
            },
        ]
    }

    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }
}

/// Elementwise activation between affine layers.
#[derive(Debug, Clone)]
pub struct ActivationLayer {
    activation: Activation,
    dim: usize,
    cached_input: Option<Matrix>,
}

impl ActivationLayer {
    pub fn new(activation: Activation, dim: usize) -> ActivationLayer {
        ActivationLayer {
            activation,
            dim,
            cached_input: None,
        }
    }
}

impl Layer for ActivationLayer {
    fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.dim {
            return Err(Error::Shape(format!(
                "activation expects {} columns, got {}",
                self.dim,
                input.cols()
            )));
        }
        let act = self.activation;
        let out = input.map(|x| act.apply(x));
        self.cached_input = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let input = self
            .cached_input
            .take()
            .ok_or_else(|| Error::State("activation backward called before forward".into()))?;
        let act = self.activation;
        grad_out.hadamard(&input.map(|x| act.derivative(x)))
    }

    fn params(&mut self) -> Vec<Param<'_>> {
        Vec::new()
    }

    fn param_views(&self) -> Vec<ParamView<'_>> {
        Vec::new()
    }

    fn in_dim(&self) -> usize {
        self.dim
    }

    fn out_dim(&self) -> usize {
        self.dim
    }
}
