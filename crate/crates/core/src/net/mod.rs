//! Fully connected per-phase networks and their optimizer state.
//!
//! A network maps `(x, y, t)` to `(u, v, p)` through `tanh` hidden layers and a
//! linear output layer. Parameters live in one flat vector, layer by layer,
//! each layer stored as its row-major weight matrix followed by its bias.

mod adam;
pub mod checkpoint;
mod jet;

pub use adam::{cosine_lr, AdamConfig, ParamSet};
pub use jet::{BoundMlp, FlowJets, FlowModel, Jet};

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Layer widths of the default network.
pub const DEFAULT_SHAPE: [usize; 5] = [3, 50, 50, 50, 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("gradient length {got} does not match parameter count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid layer shape {0:?}: need input 3, output 3 and at least one layer")]
    BadShape(Vec<usize>),
}

/// Weights and biases of one fully connected network.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    shape: Vec<usize>,
    params: Vec<f64>,
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpan {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: usize,
    pub bias: usize,
}

pub fn param_count(shape: &[usize]) -> usize {
    shape.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

pub fn layer_spans(shape: &[usize]) -> Vec<LayerSpan> {
    let mut off = 0;
    shape
        .windows(2)
        .map(|w| {
            let span = LayerSpan {
                n_in: w[0],
                n_out: w[1],
                weight: off,
                bias: off + w[0] * w[1],
            };
            off += w[0] * w[1] + w[1];
            span
        })
        .collect()
}

fn check_shape(shape: &[usize]) -> Result<(), NetError> {
    if shape.len() < 2 || shape[0] != 3 || shape[shape.len() - 1] != 3 || shape.contains(&0) {
        return Err(NetError::BadShape(shape.to_vec()));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases.
pub fn init_mlp(seed: u64, shape: &[usize]) -> Result<Mlp, NetError> {
    check_shape(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; param_count(shape)];
    for span in layer_spans(shape) {
        let limit = (6.0 / (span.n_in + span.n_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        for w in &mut params[span.weight..span.bias] {
            *w = dist.sample(&mut rng);
        }
    }
    Ok(Mlp {
        shape: shape.to_vec(),
        params,
    })
}

impl Mlp {
    /// Zeroes the last layer, so the network starts as the zero function.
    pub fn zero_output_layer(&mut self) {
        let last = *layer_spans(&self.shape).last().unwrap();
        self.params[last.weight..].fill(0.0);
    }

    pub fn from_params(shape: &[usize], params: Vec<f64>) -> Result<Self, NetError> {
        check_shape(shape)?;
        let expected = param_count(shape);
        if params.len() != expected {
            return Err(NetError::LengthMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            params,
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self, NetError> {
        Self::from_params(shape, vec![0.0; param_count(shape)])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Derivative-free evaluation of `(u, v, p)` at each point.
    ///
    /// Uses the same matrix products and activation as the jet path so the
    /// outputs equal the value slots of [`BoundMlp::eval`].
    pub fn forward(&self, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
        let n = points.len();
        let mut act: Vec<f64> = Vec::with_capacity(3 * n);
        for c in 0..3 {
            act.extend(points.iter().map(|p| p[c]));
        }
        let spans = layer_spans(&self.shape);
        let last = spans.len() - 1;
        for (l, span) in spans.iter().enumerate() {
            let mut out = vec![0.0; span.n_out * n];
            {
                let w = ArrayView2::from_shape(
                    (span.n_out, span.n_in),
                    &self.params[span.weight..span.bias],
                )
                .unwrap();
                let x = ArrayView2::from_shape((span.n_in, n), &act).unwrap();
                let mut y = ArrayViewMut2::from_shape((span.n_out, n), &mut out).unwrap();
                general_mat_mul(1.0, &w, &x, 0.0, &mut y);
            }
            let bias = &self.params[span.bias..span.bias + span.n_out];
            for (row, b) in out.chunks_exact_mut(n.max(1)).zip(bias) {
                for z in row.iter_mut() {
                    *z += b;
                    if l != last {
                        *z = z.tanh();
                    }
                }
            }
            act = out;
        }
        (0..n).map(|p| [act[p], act[n + p], act[2 * n + p]]).collect()
    }
}
