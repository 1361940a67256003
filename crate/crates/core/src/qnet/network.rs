use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{ConvCache, ConvStack};
use super::dense::{DenseCache, DenseStack};
use crate::environment::Action;
use crate::error::QNetError;

/// Architecture description, enough to rebuild a network from its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkSpec {
    Mlp {
        layer_sizes: Vec<usize>,
    },
    Conv {
        grid: usize,
        /// Input channels followed by the three convolution widths.
        channels: Vec<usize>,
        hidden: usize,
        outputs: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layout {
    Dense(DenseStack),
    Conv(ConvStack),
}

pub enum ForwardCache {
    Dense(DenseCache),
    Conv(ConvCache),
}

/// Q-function approximator: one Q-value per action.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    spec: NetworkSpec,
    layout: Layout,
    params: Vec<f64>,
}

impl QNetwork {
    pub fn zeros(spec: NetworkSpec) -> Result<Self, QNetError> {
        let layout = match &spec {
            NetworkSpec::Mlp { layer_sizes } => Layout::Dense(DenseStack::new(layer_sizes)?),
            NetworkSpec::Conv {
                grid,
                channels,
                hidden,
                outputs,
            } => Layout::Conv(ConvStack::new(*grid, channels, *hidden, *outputs)?),
        };
        let count = match &layout {
            Layout::Dense(d) => d.param_count(),
            Layout::Conv(c) => c.param_count(),
        };
        Ok(Self {
            spec,
            layout,
            params: vec![0.0; count],
        })
    }

    pub fn random<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self, QNetError> {
        let mut net = Self::zeros(spec)?;
        match &net.layout {
            Layout::Dense(d) => d.init(&mut net.params, rng),
            Layout::Conv(c) => c.init(&mut net.params, rng),
        }
        Ok(net)
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<f64>) -> Result<Self, QNetError> {
        let mut net = Self::zeros(spec)?;
        if params.len() != net.params.len() {
            return Err(QNetError::Invalid(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(QNetError::Invalid("non-finite parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    /// Default dense architecture: two hidden layers of 128 units.
    pub fn mlp_spec(input_dim: usize, hidden: &[usize]) -> NetworkSpec {
        let mut layer_sizes = vec![input_dim];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(Action::COUNT);
        NetworkSpec::Mlp { layer_sizes }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        match &self.layout {
            Layout::Dense(d) => d.input_dim(),
            Layout::Conv(c) => c.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.layout {
            Layout::Dense(d) => d.output_dim(),
            Layout::Conv(c) => c.output_dim(),
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Named parameter blocks (one weight and one bias block per layer).
    pub fn blocks(&self) -> Vec<(String, Range<usize>)> {
        match &self.layout {
            Layout::Dense(d) => d.blocks("dense", 0),
            Layout::Conv(c) => c.blocks(),
        }
    }

    fn check(&self, cols: usize) -> Result<(), QNetError> {
        match &self.layout {
            Layout::Dense(d) => d.check_input(cols),
            Layout::Conv(c) => c.check_input(cols),
        }
    }

    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>, QNetError> {
        self.check(inputs.ncols())?;
        Ok(match &self.layout {
            Layout::Dense(d) => d.forward(&self.params, inputs.to_owned()),
            Layout::Conv(c) => c.forward(&self.params, inputs),
        })
    }

    /// Q-values for a single observation.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>, QNetError> {
        let view = ArrayView2::from_shape((1, obs.len()), obs).expect("row vector");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_train(
        &self,
        inputs: ArrayView2<f64>,
    ) -> Result<(Array2<f64>, ForwardCache), QNetError> {
        self.check(inputs.ncols())?;
        Ok(match &self.layout {
            Layout::Dense(d) => {
                let (out, cache) = d.forward_train(&self.params, inputs.to_owned());
                (out, ForwardCache::Dense(cache))
            }
            Layout::Conv(c) => {
                let (out, cache) = c.forward_train(&self.params, inputs);
                (out, ForwardCache::Conv(cache))
            }
        })
    }

    /// Gradient of `sum(d_out * output)` with respect to the parameters.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> Vec<f64> {
        match (&self.layout, cache) {
            (Layout::Dense(d), ForwardCache::Dense(cache)) => {
                let mut grad = vec![0.0; self.params.len()];
                d.backward(&self.params, cache, d_out, &mut grad, false);
                grad
            }
            (Layout::Conv(c), ForwardCache::Conv(cache)) => c.backward(&self.params, cache, d_out),
            _ => panic!("forward cache does not belong to this architecture"),
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
