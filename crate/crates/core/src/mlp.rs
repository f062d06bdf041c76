//! Minimal dense-layer machinery with hand-written backward passes.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// One fully-connected layer, weights row-major (out x in).
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Linear {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Xavier-style init: N(0, 1/in_dim), biases zero.
    pub fn random(out_dim: usize, in_dim: usize, rng: &mut SplitMix64) -> Self {
        let std = (1.0 / in_dim as f64).sqrt();
        Linear {
            out_dim,
            in_dim,
            weights: (0..out_dim * in_dim)
                .map(|_| rng.next_gaussian() * std)
                .collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.clear();
        out.reserve(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            out.push(acc);
        }
    }

    /// Accumulate parameter gradients and return the input gradient.
    ///
    /// `d_out` is dLoss/d(pre-activation output).
    pub fn backward(
        &self,
        x: &[f64],
        d_out: &[f64],
        grad: &mut LinearGrad,
        d_in: &mut Vec<f64>,
    ) {
        debug_assert_eq!(d_out.len(), self.out_dim);
        d_in.clear();
        d_in.resize(self.in_dim, 0.0);
        for o in 0..self.out_dim {
            let g = d_out[o];
            grad.bias[o] += g;
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grad.weights[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                d_in[i] += g * row[i];
            }
        }
    }

    /// Spectral norm estimate by power iteration, used for Lipschitz bounds.
    pub fn operator_norm(&self) -> f64 {
        if self.weights.iter().all(|&w| w == 0.0) {
            return 0.0;
        }
        let mut v = vec![1.0 / (self.in_dim as f64).sqrt(); self.in_dim];
        let mut u = vec![0.0; self.out_dim];
        let mut sigma = 0.0;
        for _ in 0..100 {
            // u = W v
            for o in 0..self.out_dim {
                let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                u[o] = row.iter().zip(&v).map(|(w, x)| w * x).sum();
            }
            let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if un == 0.0 {
                return 0.0;
            }
            u.iter_mut().for_each(|x| *x /= un);
            // v = W^T u
            for i in 0..self.in_dim {
                let mut acc = 0.0;
                for o in 0..self.out_dim {
                    acc += self.weights[o * self.in_dim + i] * u[o];
                }
                v[i] = acc;
            }
            sigma = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if sigma == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|x| *x /= sigma);
        }
        sigma
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite()) && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Gradient buffer matching one [`Linear`].
#[derive(Clone, Debug)]
pub struct LinearGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearGrad {
    pub fn zeros_like(layer: &Linear) -> Self {
        LinearGrad {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn add(&mut self, other: &LinearGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| *w *= s);
        self.bias.iter_mut().for_each(|b| *b *= s);
    }
}

/// Layer stack with dimension checking.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpWeights {
    pub layers: Vec<Linear>,
}

impl MlpWeights {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("mlp", "must have at least one layer"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::invalid(
                    "mlp",
                    format!(
                        "layer dims incompatible: {} -> {}",
                        pair[0].out_dim, pair[1].in_dim
                    ),
                ));
            }
        }
        if !self.layers.iter().all(Linear::is_finite) {
            return Err(Error::invalid("mlp", "weights must be finite"));
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }
}

#[inline]
pub fn tanh_prime_from_output(y: f64) -> f64 {
    1.0 - y * y
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn sigmoid_prime_from_output(y: f64) -> f64 {
    y * (1.0 - y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_hand_example() {
        let layer = Linear {
            out_dim: 2,
            in_dim: 3,
            weights: vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5],
            bias: vec![0.1, -0.1],
        };
        let mut out = Vec::new();
        layer.forward(&[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, vec![1.0 - 3.0 + 0.1, 3.0 + (-0.1)]);
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let layer = Linear {
            out_dim: 2,
            in_dim: 2,
            weights: vec![3.0, 0.0, 0.0, 2.0],
            bias: vec![0.0, 0.0],
        };
        assert!((layer.operator_norm() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn backward_accumulates_weight_grads() {
        let layer = Linear {
            out_dim: 1,
            in_dim: 2,
            weights: vec![2.0, -1.0],
            bias: vec![0.0],
        };
        let mut grad = LinearGrad::zeros_like(&layer);
        let mut d_in = Vec::new();
        layer.backward(&[3.0, 4.0], &[1.0], &mut grad, &mut d_in);
        assert_eq!(grad.weights, vec![3.0, 4.0]);
        assert_eq!(grad.bias, vec![1.0]);
        assert_eq!(d_in, vec![2.0, -1.0]);
    }
}
