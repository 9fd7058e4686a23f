//! Classification-head families with explicit forward and backward passes.
//!
//! Every layer obeys one contract: `forward` on a batch, then `backward` on
//! the same batch (gradients accumulate into per-parameter buffers), with
//! `params` exposing the trainable tensors in a stable order that optimizer
//! state is keyed on.

mod affine;
mod bspline;
mod checkpoint;
mod dropout;
mod efficient;
mod faster;
mod fourier;

pub use affine::{ActivationLayer, AffineLayer};
pub use bspline::{bspline_basis, bspline_basis_and_deriv, uniform_knots};
pub use checkpoint::{load_head, save_head};
pub use dropout::{DropoutLayer, DropoutMode};
pub use efficient::EfficientKanLayer;
pub use faster::{rswaf_basis, FasterKanLayer};
pub use fourier::FourierKanLayer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Activation, Matrix};
use crate::rng::Rng;

/// Mutable view of one parameter tensor and its gradient buffer.
pub struct Param<'a> {
    pub name: String,
    pub value: &'a mut Matrix,
    pub grad: &'a mut Matrix,
    pub trainable: bool,
}

/// Read-only view of one parameter tensor.
pub struct ParamView<'a> {
    pub name: String,
    pub value: &'a Matrix,
    pub trainable: bool,
}

/// The uniform layer contract shared by every head family.
pub trait Layer {
    /// Batch forward: input is batch x in, output batch x out. Caches what
    /// backward needs.
    fn forward(&mut self, input: &Matrix) -> Result<Matrix>;

    /// Propagate gradients for the batch of the preceding `forward` call,
    /// accumulating parameter gradients. Errors if no forward is pending.
    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix>;

    /// Parameters in declaration order; the order is stable across calls.
    fn params(&mut self) -> Vec<Param<'_>>;

    fn param_views(&self) -> Vec<ParamView<'_>>;

    fn in_dim(&self) -> usize;

    fn out_dim(&self) -> usize;
}

/// One layer of a head stack.
#[derive(Debug, Clone)]
pub enum LayerKind {
    Affine(AffineLayer),
    Activation(ActivationLayer),
    Fourier(FourierKanLayer),
    EfficientKan(EfficientKanLayer),
    FasterKan(FasterKanLayer),
}

impl LayerKind {
    fn as_layer(&self) -> &dyn Layer {
        match self {
            LayerKind::Affine(l) => l,
            LayerKind::Activation(l) => l,
            LayerKind::Fourier(l) => l,
            LayerKind::EfficientKan(l) => l,
            LayerKind::FasterKan(l) => l,
        }
    }

    fn as_layer_mut(&mut self) -> &mut dyn Layer {
        match self {
            LayerKind::Affine(l) => l,
            LayerKind::Activation(l) => l,
            LayerKind::Fourier(l) => l,
            LayerKind::EfficientKan(l) => l,
            LayerKind::FasterKan(l) => l,
        }
    }
}

/// Head family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadFamily {
    Mlp,
    FourierKan,
    EfficientKan,
    FasterKan,
}

impl HeadFamily {
    pub fn parse(name: &str) -> Result<HeadFamily> {
        match name {
            "mlp" => Ok(HeadFamily::Mlp),
            "fourierkan" => Ok(HeadFamily::FourierKan),
            "efficientkan" => Ok(HeadFamily::EfficientKan),
            "fasterkan" => Ok(HeadFamily::FasterKan),
            other => Err(Error::Config(format!("unknown head family '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadFamily::Mlp => "mlp",
            HeadFamily::FourierKan => "fourierkan",
            HeadFamily::EfficientKan => "efficientkan",
            HeadFamily::FasterKan => "fasterkan",
        }
    }
}

impl std::fmt::Display for HeadFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters for building a head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub family: HeadFamily,
    /// Stack depth, 1 or 2.
    pub layers: usize,
    /// Hidden width for 2-layer stacks.
    pub hidden_dim: usize,
    /// Hidden activation for the 2-layer MLP (relu or sigmoid).
    pub activation: Activation,
    /// Fourier modes, spline grid cells, or RSWAF centers per input.
    pub grid_size: usize,
    /// B-spline order for the spline family.
    pub spline_order: usize,
    /// Learnable per-activation scaling for the spline family.
    pub use_scaler: bool,
    /// Parallel affine-of-SiLU path for the grid family.
    pub use_silu_path: bool,
    /// L1 coefficient on spline weights.
    pub l1_strength: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            family: HeadFamily::Mlp,
            layers: 1,
            hidden_dim: 64,
            activation: Activation::Relu,
            grid_size: 8,
            spline_order: 3,
            use_scaler: true,
            use_silu_path: false,
            l1_strength: 0.0,
        }
    }
}

impl HeadConfig {
    pub fn with_family(family: HeadFamily) -> Self {
        HeadConfig {
            family,
            ..HeadConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.layers) {
            return Err(Error::Config(format!(
                "head layers must be 1 or 2, got {}",
                self.layers
            )));
        }
        if self.layers == 2 && self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        if self.family == HeadFamily::Mlp
            && !matches!(self.activation, Activation::Relu | Activation::Sigmoid)
        {
            return Err(Error::Config(format!(
                "mlp hidden activation must be relu or sigmoid, got {}",
                self.activation.name()
            )));
        }
        if self.family != HeadFamily::Mlp && self.grid_size == 0 {
            return Err(Error::Config("grid_size must be at least 1".into()));
        }
        if self.l1_strength < 0.0 {
            return Err(Error::Config("l1_strength must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A classifier: a 1- or 2-layer stack from one family, emitting raw logits
/// (softmax lives in the loss).
#[derive(Debug, Clone)]
pub struct Head {
    config: HeadConfig,
    in_dim: usize,
    out_dim: usize,
    init_seed: u64,
    layers: Vec<LayerKind>,
}

impl Head {
    pub fn new(config: &HeadConfig, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<Head> {
        config.validate()?;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config(format!(
                "head dimensions must be positive, got {in_dim} -> {out_dim}"
            )));
        }
        let mut layers = Vec::new();
        let (first_out, final_in) = if config.layers == 2 {
            (config.hidden_dim, config.hidden_dim)
        } else {
            (out_dim, in_dim)
        };
        match config.family {
            HeadFamily::Mlp => {
                if config.layers == 2 {
                    layers.push(LayerKind::Affine(AffineLayer::kaiming(
                        in_dim, first_out, rng,
                    )?));
                    layers.push(LayerKind::Activation(ActivationLayer::new(
                        config.activation,
                        first_out,
                    )));
                }
                layers.push(LayerKind::Affine(AffineLayer::zeros(final_in, out_dim)));
            }
            HeadFamily::FourierKan => {
                if config.layers == 2 {
                    let mut hidden = FourierKanLayer::new(in_dim, first_out, config.grid_size);
                    hidden.init_random(rng);
                    layers.push(LayerKind::Fourier(hidden));
                }
                layers.push(LayerKind::Fourier(FourierKanLayer::new(
                    final_in,
                    out_dim,
                    config.grid_size,
                )));
            }
            HeadFamily::EfficientKan => {
                if config.layers == 2 {
                    let mut hidden = EfficientKanLayer::new(
                        in_dim,
                        first_out,
                        config.grid_size,
                        config.spline_order,
                        config.use_scaler,
                        config.l1_strength,
                    );
                    hidden.init_random(rng)?;
                    layers.push(LayerKind::EfficientKan(hidden));
                }
                layers.push(LayerKind::EfficientKan(EfficientKanLayer::new(
                    final_in,
                    out_dim,
                    config.grid_size,
                    config.spline_order,
                    config.use_scaler,
                    config.l1_strength,
                )));
            }
            HeadFamily::FasterKan => {
                if config.layers == 2 {
                    layers.push(LayerKind::FasterKan(FasterKanLayer::new(
                        in_dim,
                        first_out,
                        config.grid_size,
                        config.use_silu_path,
                        rng,
                    )?));
                }
                layers.push(LayerKind::FasterKan(FasterKanLayer::new(
                    final_in,
                    out_dim,
                    config.grid_size,
                    config.use_silu_path,
                    rng,
                )?));
            }
        }
        Ok(Head {
            config: config.clone(),
            in_dim,
            out_dim,
            init_seed: rng.seed(),
            layers,
        })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    pub fn family(&self) -> HeadFamily {
        self.config.family
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// Logits for a batch x in input.
    pub fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim {
            return Err(Error::Shape(format!(
                "head expects {} input columns, got {}x{}",
                self.in_dim,
                input.rows(),
                input.cols()
            )));
        }
        let mut current = input.clone();
        for layer in &mut self.layers {
            current = layer.as_layer_mut().forward(&current)?;
        }
        Ok(current)
    }

    /// Inference-only logits: no state is touched, so a frozen head can be
    /// shared read-only across threads. Runs the forward pass on a scratch
    /// copy of the stack.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.clone().forward(input)
    }

    /// Chain-rule pass over the stack; returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let mut current = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            current = layer.as_layer_mut().backward(&current)?;
        }
        Ok(current)
    }

    /// All parameters, layer by layer, names prefixed with the layer index.
    pub fn params(&mut self) -> Vec<Param<'_>> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for mut p in layer.as_layer_mut().params() {
                p.name = format!("layer{i}.{}", p.name);
                out.push(p);
            }
        }
        out
    }

    pub fn param_views(&self) -> Vec<ParamView<'_>> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for mut p in layer.as_layer().param_views() {
                p.name = format!("layer{i}.{}", p.name);
                out.push(p);
            }
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for p in self.params() {
            p.grad.fill(0.0);
        }
    }

    /// (total, trainable) parameter counts.
    pub fn count_params(&self) -> (usize, usize) {
        let mut total = 0;
        let mut trainable = 0;
        for p in self.param_views() {
            total += p.value.len();
            if p.trainable {
                trainable += p.value.len();
            }
        }
        (total, trainable)
    }

    /// Regularization penalty for the current parameters, accumulating its
    /// gradient. Zero unless a spline layer carries a positive L1 strength.
    pub fn accumulate_regularization(&mut self) -> f64 {
        let mut penalty = 0.0;
        for layer in &mut self.layers {
            if let LayerKind::EfficientKan(l) = layer {
                penalty += l.accumulate_l1_grad();
            }
        }
        penalty
    }
}
