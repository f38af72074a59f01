//! Fully connected networks over a flat parameter vector with manual backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerShape {
    fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Layer `l` stores its row-major `outputs x inputs` weights followed by its biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<LayerShape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer outputs of one forward pass, input included.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    values: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(layers: Vec<LayerShape>, rng: &mut R) -> Self {
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        let mut params = vec![0.0; total];
        for (l, &off) in layers.iter().zip(&offsets) {
            let a = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut params[off..off + l.inputs * l.outputs] {
                *w = rng.random_range(-a..a);
            }
        }
        Self {
            layers,
            offsets,
            params,
        }
    }

    /// Widths `[input, hidden.., output]` with one activation per layer.
    pub fn from_widths<R: Rng + ?Sized>(widths: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert_eq!(widths.len(), activations.len() + 1, "one activation per layer");
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| LayerShape {
                inputs: w[0],
                outputs: w[1],
                activation,
            })
            .collect();
        Self::new(layers, rng)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty network").outputs
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

    /// Replaces the parameters; the length must match.
    pub fn set_params(&mut self, params: Vec<f64>) -> bool {
        if params.len() != self.params.len() {
            return false;
        }
        self.params = params;
        true
    }

    /// Zeroes the weights and biases of the last layer.
    pub fn zero_last_layer(&mut self) {
        let off = *self.offsets.last().expect("non-empty network");
        self.params[off..].iter_mut().for_each(|p| *p = 0.0);
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut tape = Tape::default();
        self.forward_tape(input, &mut tape);
        tape.values.pop().unwrap_or_default()
    }

    pub fn forward_tape(&self, input: &[f64], tape: &mut Tape) {
        assert_eq!(input.len(), self.input_dim());
        tape.values.resize_with(self.layers.len() + 1, Vec::new);
        tape.values[0].clear();
        tape.values[0].extend_from_slice(input);
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = tape.values.split_at_mut(l + 1);
            let x = &done[l];
            let y = &mut rest[0];
            y.clear();
            let w = &self.params[self.offsets[l]..];
            let b = &w[layer.inputs * layer.outputs..];
            for o in 0..layer.outputs {
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                let z = row.iter().zip(x).fold(b[o], |acc, (wi, xi)| acc + wi * xi);
                y.push(layer.activation.apply(z));
            }
        }
    }

    /// Accumulates `d(out . grad_out)/d(params)` into `grad_params` and
    /// returns the gradient with respect to the input.
    pub fn backward(&self, tape: &Tape, grad_out: &[f64], grad_params: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad_params.len(), self.params.len());
        assert_eq!(grad_out.len(), self.output_dim());
        let mut delta: Vec<f64> = grad_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let y = &tape.values[l + 1];
            let x = &tape.values[l];
            for (d, &yo) in delta.iter_mut().zip(y) {
                *d *= layer.activation.grad_from_output(yo);
            }
            let off = self.offsets[l];
            let w = &self.params[off..off + layer.inputs * layer.outputs];
            let (gw, gb) = grad_params[off..off + layer.param_count()].split_at_mut(layer.inputs * layer.outputs);
            let mut grad_x = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                if d == 0.0 {
                    continue;
                }
                let row_g = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, &xi) in row_g.iter_mut().zip(x) {
                    *g += d * xi;
                }
                let row_w = &w[o * layer.inputs..(o + 1) * layer.inputs];
                for (gx, &wi) in grad_x.iter_mut().zip(row_w) {
                    *gx += d * wi;
                }
            }
            delta = grad_x;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::from_widths(
            &[3, 4, 4, 2],
            &[Activation::Relu, Activation::Sigmoid, Activation::Linear],
            &mut rng,
        )
    }

    #[test]
    fn parameter_layout() {
        let m = net(1);
        assert_eq!(m.param_count(), (3 * 4 + 4) + (4 * 4 + 4) + (4 * 2 + 2));
        assert_eq!(m.forward(&[0.1, 0.2, 0.3]).len(), 2);
    }

    #[test]
    fn zeroed_last_layer_outputs_zero() {
        let mut m = net(2);
        m.zero_last_layer();
        assert_eq!(m.forward(&[1.0, -1.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let m = net(3);
        let x = [0.3, -0.7, 1.1];
        let g_out = [0.6, -1.3];
        let mut tape = Tape::default();
        m.forward_tape(&x, &mut tape);
        let mut grad = vec![0.0; m.param_count()];
        let gx = m.backward(&tape, &g_out, &mut grad);
        let f = |mm: &Mlp, xx: &[f64]| {
            let y = mm.forward(xx);
            y[0] * g_out[0] + y[1] * g_out[1]
        };
        let h = 1e-6;
        for k in 0..m.param_count() {
            let mut p = m.clone();
            p.params_mut()[k] += h;
            let mut q = m.clone();
            q.params_mut()[k] -= h;
            let fd = (f(&p, &x) - f(&q, &x)) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-7, "param {k}: {fd} vs {}", grad[k]);
        }
        for i in 0..3 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (f(&m, &xp) - f(&m, &xm)) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-7);
        }
    }
}
