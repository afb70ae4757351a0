//! Dense ReLU networks on flat parameter vectors with batched reverse-mode
//! gradients, Adam and Polyak averaging.
//!
//! Layer `l` stores its weight matrix `W_l` (fan_out × fan_in, row-major)
//! followed by its bias `b_l`. Batched activations are row-major
//! `batch × width` matrices.

mod adam;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{backward, forward, forward_batch, predict_batch, Tape};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("non-finite parameter")]
    NonFiniteParameter,
    #[error("tape was recorded against different parameter values")]
    StaleTape,
    #[error("tau must lie in [0, 1], got {0}")]
    InvalidTau(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width.
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub hidden_activation: Activation,
}

/// Shape and offset of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, NnError> {
        let spec = Self {
            layer_sizes,
            hidden_activation: Activation::Relu,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `input → hidden… → output`.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self, NnError> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_sizes.len() < 3 {
            return Err(NnError::InvalidSpec(format!(
                "need input, at least one hidden and an output layer, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(NnError::InvalidSpec(format!(
                "layer sizes must be >= 1, got {:?}",
                self.layer_sizes
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 1]
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    fan_in: w[0],
                    fan_out: w[1],
                    offset,
                };
                offset += (w[0] + 1) * w[1];
                shape
            })
            .collect()
    }

    /// `Σ (fan_in + 1) · fan_out`.
    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Flat network parameters. Every mutation assigns a new identity so that
/// tapes recorded against older values are rejected by [`backward`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
    #[serde(skip, default = "fresh_id")]
    id: u64,
}

impl PartialEq for ParameterVector {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl ParameterVector {
    pub fn new(spec: &MlpSpec, values: Vec<f64>) -> Result<Self, NnError> {
        if values.len() != spec.param_count() {
            return Err(NnError::DimensionMismatch {
                expected: spec.param_count(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteParameter);
        }
        Ok(Self {
            values,
            id: fresh_id(),
        })
    }

    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            values: vec![0.0; spec.param_count()],
            id: fresh_id(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access; invalidates outstanding tapes.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.id = fresh_id();
        &mut self.values
    }

    pub(crate) fn id(&self) -> u64 {
        self.id
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Weights uniform in `±1/√fan_in`, biases zero.
pub fn init_params(spec: &MlpSpec, rng: &mut impl Rng) -> ParameterVector {
    let mut values = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let bound = 1.0 / (layer.fan_in as f64).sqrt();
        for w in &mut values[layer.weights()] {
            *w = rng.random_range(-bound..=bound);
        }
    }
    ParameterVector {
        values,
        id: fresh_id(),
    }
}

/// `θ̄ ← τθ + (1 − τ)θ̄`.
pub fn polyak_update(
    target: &mut ParameterVector,
    online: &ParameterVector,
    tau: f64,
) -> Result<(), NnError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(NnError::InvalidTau(tau));
    }
    if target.len() != online.len() {
        return Err(NnError::DimensionMismatch {
            expected: target.len(),
            got: online.len(),
        });
    }
    for (t, o) in target.values_mut().iter_mut().zip(&online.values) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}
