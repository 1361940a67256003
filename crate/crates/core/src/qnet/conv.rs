//! Convolutional Q-network over a square local grid.
//!
//! Three 3x3 same-padding convolutions with ReLU, instance normalisation
//! after the first two, then a dense head. Activations are kept
//! channels-last: a batch of `B` grids of `G x G` cells with `C` channels is an
//! `(B * G * G) x C` matrix, which turns each convolution into one GEMM over
//! an im2col patch matrix.

use std::ops::Range;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dense::{DenseCache, DenseStack};
use crate::error::QNetError;

const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;
const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvStack {
    grid: usize,
    /// Channel counts, input first; one convolution per consecutive pair.
    channels: Vec<usize>,
    head: DenseStack,
}

struct ConvLayerCache {
    patches: Array2<f64>,
    /// Post-ReLU output.
    output: Array2<f64>,
    /// Normalised pre-ReLU values and inverse std per (sample, channel).
    norm: Option<(Array2<f64>, Array2<f64>)>,
}

pub struct ConvCache {
    layers: Vec<ConvLayerCache>,
    head: DenseCache,
}

impl ConvStack {
    pub fn new(
        grid: usize,
        channels: &[usize],
        hidden: usize,
        outputs: usize,
    ) -> Result<Self, QNetError> {
        if grid == 0 || channels.len() != 4 || channels.contains(&0) || hidden == 0 || outputs == 0
        {
            return Err(QNetError::Invalid(format!(
                "conv net needs a grid, four channel counts and a hidden width (got grid {grid}, channels {channels:?}, hidden {hidden})"
            )));
        }
        let flat = grid * grid * channels[3];
        Ok(Self {
            grid,
            channels: channels.to_vec(),
            head: DenseStack::new(&[flat, hidden, outputs])?,
        })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn hidden(&self) -> usize {
        self.head.sizes()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.grid * self.grid * self.channels[0]
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    fn conv_layers(&self) -> usize {
        self.channels.len() - 1
    }

    fn conv_param_count(&self) -> usize {
        (0..self.conv_layers())
            .map(|l| self.kernel_len(l) + self.channels[l + 1])
            .sum()
    }

    fn kernel_len(&self, layer: usize) -> usize {
        TAPS * self.channels[layer] * self.channels[layer + 1]
    }

    pub fn param_count(&self) -> usize {
        self.conv_param_count() + self.head.param_count()
    }

    fn kernel_range(&self, layer: usize) -> Range<usize> {
        let start: usize = (0..layer)
            .map(|l| self.kernel_len(l) + self.channels[l + 1])
            .sum();
        start..start + self.kernel_len(layer)
    }

    fn bias_range(&self, layer: usize) -> Range<usize> {
        let end = self.kernel_range(layer).end;
        end..end + self.channels[layer + 1]
    }

    fn head_range(&self) -> Range<usize> {
        self.conv_param_count()..self.param_count()
    }

    pub fn blocks(&self) -> Vec<(String, Range<usize>)> {
        let mut out: Vec<_> = (0..self.conv_layers())
            .flat_map(|l| {
                [
                    (format!("conv{l}.kernel"), self.kernel_range(l)),
                    (format!("conv{l}.bias"), self.bias_range(l)),
                ]
            })
            .collect();
        out.extend(self.head.blocks("head", self.conv_param_count()));
        out
    }

    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], rng: &mut R) {
        params.iter_mut().for_each(|p| *p = 0.0);
        for l in 0..self.conv_layers() {
            let fan_in = (TAPS * self.channels[l]) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("finite std");
            for w in &mut params[self.kernel_range(l)] {
                *w = normal.sample(rng);
            }
        }
        let head = self.head_range();
        self.head.init(&mut params[head], rng);
    }

    pub fn check_input(&self, cols: usize) -> Result<(), QNetError> {
        if cols != self.input_dim() {
            return Err(QNetError::DimensionMismatch {
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    /// `(B * cells) x C` activations to `(B * cells) x (9 * C)` patches.
    fn im2col(&self, x: &Array2<f64>) -> Array2<f64> {
        let g = self.grid as isize;
        let cells = self.grid * self.grid;
        let c = x.ncols();
        let batch = x.nrows() / cells;
        let mut patches = Array2::zeros((x.nrows(), TAPS * c));
        for b in 0..batch {
            for r in 0..g {
                for q in 0..g {
                    let row = b * cells + (r * g + q) as usize;
                    let mut dst = patches.row_mut(row);
                    let dst = dst.as_slice_mut().expect("contiguous row");
                    for ky in 0..KERNEL as isize {
                        for kx in 0..KERNEL as isize {
                            let (sr, sq) = (r + ky - 1, q + kx - 1);
                            if sr < 0 || sr >= g || sq < 0 || sq >= g {
                                continue;
                            }
                            let src = x.row(b * cells + (sr * g + sq) as usize);
                            let tap = (ky * KERNEL as isize + kx) as usize;
                            dst[tap * c..(tap + 1) * c]
                                .iter_mut()
                                .zip(src.iter())
                                .for_each(|(d, s)| *d = *s);
                        }
                    }
                }
            }
        }
        patches
    }

    /// Adjoint of [`Self::im2col`].
    fn col2im(&self, d_patches: &Array2<f64>, c: usize) -> Array2<f64> {
        let g = self.grid as isize;
        let cells = self.grid * self.grid;
        let batch = d_patches.nrows() / cells;
        let mut dx = Array2::zeros((d_patches.nrows(), c));
        for b in 0..batch {
            for r in 0..g {
                for q in 0..g {
                    let src = d_patches.row(b * cells + (r * g + q) as usize);
                    for ky in 0..KERNEL as isize {
                        for kx in 0..KERNEL as isize {
                            let (sr, sq) = (r + ky - 1, q + kx - 1);
                            if sr < 0 || sr >= g || sq < 0 || sq >= g {
                                continue;
                            }
                            let tap = (ky * KERNEL as isize + kx) as usize;
                            let mut dst = dx.row_mut(b * cells + (sr * g + sq) as usize);
                            dst.iter_mut()
                                .zip(src.iter().skip(tap * c).take(c))
                                .for_each(|(d, s)| *d += *s);
                        }
                    }
                }
            }
        }
        dx
    }

    /// Per-sample, per-channel standardisation over the grid cells.
    fn instance_norm(&self, z: &mut Array2<f64>) -> Array2<f64> {
        let cells = self.grid * self.grid;
        let batch = z.nrows() / cells;
        let mut inv_std = Array2::zeros((batch, z.ncols()));
        for b in 0..batch {
            let mut block = z.slice_mut(ndarray::s![b * cells..(b + 1) * cells, ..]);
            for (ch, mut col) in block.axis_iter_mut(Axis(1)).enumerate() {
                let mean = col.sum() / cells as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cells as f64;
                let inv = 1.0 / (var + NORM_EPS).sqrt();
                col.mapv_inplace(|v| (v - mean) * inv);
                inv_std[[b, ch]] = inv;
            }
        }
        inv_std
    }

    fn instance_norm_backward(
        &self,
        d_norm: &mut Array2<f64>,
        normed: &Array2<f64>,
        inv_std: &Array2<f64>,
    ) {
        let cells = self.grid * self.grid;
        let n = cells as f64;
        let batch = d_norm.nrows() / cells;
        for b in 0..batch {
            let rows = b * cells..(b + 1) * cells;
            let y = normed.slice(ndarray::s![rows.clone(), ..]);
            let mut g = d_norm.slice_mut(ndarray::s![rows, ..]);
            for ch in 0..g.ncols() {
                let mut g_col = g.column_mut(ch);
                let y_col = y.column(ch);
                let mean_g = g_col.sum() / n;
                let mean_gy = g_col
                    .iter()
                    .zip(y_col.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / n;
                let inv = inv_std[[b, ch]];
                g_col
                    .iter_mut()
                    .zip(y_col.iter())
                    .for_each(|(gv, yv)| *gv = inv * (*gv - mean_g - yv * mean_gy));
            }
        }
    }

    fn kernel<'a>(&self, params: &'a [f64], layer: usize) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(
            (TAPS * self.channels[layer], self.channels[layer + 1]),
            &params[self.kernel_range(layer)],
        )
        .expect("kernel block matches its shape")
    }

    fn run(
        &self,
        params: &[f64],
        inputs: ArrayView2<f64>,
        keep: bool,
    ) -> (Array2<f64>, Vec<ConvLayerCache>) {
        let batch = inputs.nrows();
        let cells = self.grid * self.grid;
        let mut act = inputs
            .to_owned()
            .into_shape_with_order((batch * cells, self.channels[0]))
            .expect("input rows hold whole grids");
        let mut caches = Vec::new();
        for l in 0..self.conv_layers() {
            let patches = self.im2col(&act);
            let mut z = patches.dot(&self.kernel(params, l));
            z += &ArrayView1::from(&params[self.bias_range(l)]);
            let norm = (l + 1 < self.conv_layers()).then(|| {
                let inv = self.instance_norm(&mut z);
                (z.clone(), inv)
            });
            z.mapv_inplace(|v| v.max(0.0));
            if keep {
                caches.push(ConvLayerCache {
                    patches,
                    output: z.clone(),
                    norm,
                });
            }
            act = z;
        }
        let flat = act
            .into_shape_with_order((batch, cells * self.channels[self.conv_layers()]))
            .expect("whole grids");
        (flat, caches)
    }

    pub fn forward(&self, params: &[f64], inputs: ArrayView2<f64>) -> Array2<f64> {
        let (flat, _) = self.run(params, inputs, false);
        self.head.forward(&params[self.head_range()], flat)
    }

    pub fn forward_train(
        &self,
        params: &[f64],
        inputs: ArrayView2<f64>,
    ) -> (Array2<f64>, ConvCache) {
        let (flat, layers) = self.run(params, inputs, true);
        let (out, head) = self.head.forward_train(&params[self.head_range()], flat);
        (out, ConvCache { layers, head })
    }

    pub fn backward(&self, params: &[f64], cache: &ConvCache, d_out: &Array2<f64>) -> Vec<f64> {
        let mut grad = vec![0.0; params.len()];
        let head = self.head_range();
        let d_flat = self
            .head
            .backward(
                &params[head.clone()],
                &cache.head,
                d_out,
                &mut grad[head],
                true,
            )
            .expect("input gradient requested");
        let batch = d_flat.nrows();
        let cells = self.grid * self.grid;
        let mut delta = d_flat
            .into_shape_with_order((batch * cells, self.channels[self.conv_layers()]))
            .expect("whole grids");
        for l in (0..self.conv_layers()).rev() {
            let layer = &cache.layers[l];
            delta.zip_mut_with(&layer.output, |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            if let Some((normed, inv_std)) = &layer.norm {
                self.instance_norm_backward(&mut delta, normed, inv_std);
            }
            let d_kernel = layer.patches.t().dot(&delta);
            let d_bias = delta.sum_axis(Axis(0));
            grad[self.kernel_range(l)]
                .iter_mut()
                .zip(d_kernel.iter())
                .for_each(|(g, v)| *g = *v);
            grad[self.bias_range(l)]
                .iter_mut()
                .zip(d_bias.iter())
                .for_each(|(g, v)| *g = *v);
            if l > 0 {
                let d_patches = delta.dot(&self.kernel(params, l).t());
                delta = self.col2im(&d_patches, self.channels[l]);
            }
        }
        grad
    }
}
