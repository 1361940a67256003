use std::ops::Range;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::QNetError;

/// Shape of a fully connected stack: ReLU between layers, identity at the
/// output.
///
/// Parameters are a flat slice. Layer `l` stores its weight matrix row-major
/// as `in x out`, followed by its `out` biases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseStack {
    sizes: Vec<usize>,
}

/// Post-activation outputs of every layer, input first.
#[derive(Debug, Clone)]
pub struct DenseCache {
    activations: Vec<Array2<f64>>,
}

impl DenseStack {
    pub fn new(sizes: &[usize]) -> Result<Self, QNetError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(QNetError::Invalid(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn offset(&self, layer: usize) -> usize {
        self.sizes[..=layer]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn weight_range(&self, layer: usize) -> Range<usize> {
        let start = self.offset(layer);
        start..start + self.sizes[layer] * self.sizes[layer + 1]
    }

    pub fn bias_range(&self, layer: usize) -> Range<usize> {
        let end = self.weight_range(layer).end;
        end..end + self.sizes[layer + 1]
    }

    /// He-normal weights for the rectified layers, a narrower normal for the
    /// linear output layer, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], rng: &mut R) {
        params.iter_mut().for_each(|p| *p = 0.0);
        for l in 0..self.layers() {
            let fan_in = self.sizes[l] as f64;
            let gain = if l + 1 == self.layers() { 1.0 } else { 2.0 };
            let normal = Normal::new(0.0, (gain / fan_in).sqrt()).expect("finite std");
            for w in &mut params[self.weight_range(l)] {
                *w = normal.sample(rng);
            }
        }
    }

    pub fn blocks(&self, prefix: &str, base: usize) -> Vec<(String, Range<usize>)> {
        let shift = |r: Range<usize>| r.start + base..r.end + base;
        (0..self.layers())
            .flat_map(|l| {
                [
                    (format!("{prefix}{l}.weight"), shift(self.weight_range(l))),
                    (format!("{prefix}{l}.bias"), shift(self.bias_range(l))),
                ]
            })
            .collect()
    }

    fn weights<'a>(&self, params: &'a [f64], layer: usize) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(
            (self.sizes[layer], self.sizes[layer + 1]),
            &params[self.weight_range(layer)],
        )
        .expect("weight block matches its shape")
    }

    fn affine(&self, params: &[f64], layer: usize, input: &Array2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights(params, layer));
        z += &ArrayView1::from(&params[self.bias_range(layer)]);
        z
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

    pub fn forward(&self, params: &[f64], inputs: Array2<f64>) -> Array2<f64> {
        let mut act = inputs;
        for l in 0..self.layers() {
            act = self.affine(params, l, &act);
            if l + 1 < self.layers() {
                act.mapv_inplace(|v| v.max(0.0));
            }
        }
        act
    }

    pub fn forward_train(&self, params: &[f64], inputs: Array2<f64>) -> (Array2<f64>, DenseCache) {
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(inputs);
        for l in 0..self.layers() {
            let mut z = self.affine(params, l, &activations[l]);
            if l + 1 < self.layers() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        let out = activations.last().expect("output layer").clone();
        (out, DenseCache { activations })
    }

    /// Gradient of `sum(d_out * output)`, written into `grad` (same layout as
    /// the parameters). Returns the gradient with respect to the input when
    /// `want_input` is set.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &DenseCache,
        d_out: &Array2<f64>,
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Array2<f64>> {
        let mut delta = d_out.clone();
        for l in (0..self.layers()).rev() {
            let input = &cache.activations[l];
            let d_w = input.t().dot(&delta);
            let d_b = delta.sum_axis(Axis(0));
            grad[self.weight_range(l)]
                .iter_mut()
                .zip(d_w.iter())
                .for_each(|(g, v)| *g = *v);
            grad[self.bias_range(l)]
                .iter_mut()
                .zip(d_b.iter())
                .for_each(|(g, v)| *g = *v);
            if l > 0 || want_input {
                let mut upstream = delta.dot(&self.weights(params, l).t());
                if l == 0 {
                    return Some(upstream);
                }
                upstream.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = upstream;
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(sizes: &[usize], seed: u64) -> (DenseStack, Vec<f64>) {
        let stack = DenseStack::new(sizes).unwrap();
        let mut params = vec![0.0; stack.param_count()];
        stack.init(&mut params, &mut ChaCha8Rng::seed_from_u64(seed));
        (stack, params)
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let (stack, params) = random(&[5, 8, 7, 3], 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut x = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
        let w = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        let objective = |x: &Array2<f64>| (stack.forward(&params, x.clone()) * &w).sum();
        let (_, cache) = stack.forward_train(&params, x.clone());
        let mut grad = vec![0.0; params.len()];
        let d_input = stack
            .backward(&params, &cache, &w, &mut grad, true)
            .unwrap();
        let h = 1e-6;
        for idx in 0..x.len() {
            let (r, c) = (idx / 5, idx % 5);
            let orig = x[[r, c]];
            x[[r, c]] = orig + h;
            let up = objective(&x);
            x[[r, c]] = orig - h;
            let down = objective(&x);
            x[[r, c]] = orig;
            assert!(((up - down) / (2.0 * h) - d_input[[r, c]]).abs() < 1e-6);
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let (stack, mut params) = random(&[5, 8, 7, 3], 9);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
        let w = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        let (_, cache) = stack.forward_train(&params, x.clone());
        let mut analytic = vec![0.0; params.len()];
        stack.backward(&params, &cache, &w, &mut analytic, false);
        let h = 1e-6;
        for k in 0..params.len() {
            let orig = params[k];
            params[k] = orig + h;
            let up = (stack.forward(&params, x.clone()) * &w).sum();
            params[k] = orig - h;
            let down = (stack.forward(&params, x.clone()) * &w).sum();
            params[k] = orig;
            assert!(
                ((up - down) / (2.0 * h) - analytic[k]).abs() < 1e-6,
                "param {k}"
            );
        }
    }

    #[test]
    fn layout_covers_all_parameters() {
        let stack = DenseStack::new(&[7, 128, 128, 6]).unwrap();
        let blocks = stack.blocks("dense", 0);
        assert_eq!(blocks.len(), 6);
        assert_eq!(blocks.first().unwrap().1.start, 0);
        assert_eq!(blocks.last().unwrap().1.end, stack.param_count());
        assert_eq!(
            stack.param_count(),
            7 * 128 + 128 + 128 * 128 + 128 + 128 * 6 + 6
        );
        assert!(DenseStack::new(&[7]).is_err());
        assert!(DenseStack::new(&[7, 0, 6]).is_err());
    }
}
