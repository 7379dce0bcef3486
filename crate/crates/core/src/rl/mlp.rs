use rand::Rng;

use crate::error::RlError;

/// Fully connected layer; `weights` is row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.n_in)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b),
        );
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Feedforward network with ReLU hidden units and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Same shape as the network it was computed for.
pub type Gradients = Mlp;

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Self {
        assert!(
            layer_sizes.len() >= 2,
            "need at least an input and an output layer"
        );
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = (6.0 / n_in as f64).sqrt();
                let mut layer = Dense::zeros(n_in, n_out);
                layer
                    .weights
                    .iter_mut()
                    .for_each(|v| *v = rng.random_range(-bound..bound));
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(layer_sizes: &[usize]) -> Self {
        assert!(
            layer_sizes.len() >= 2,
            "need at least an input and an output layer"
        );
        Self {
            layers: layer_sizes
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, RlError> {
        if layers.is_empty() {
            return Err(RlError::Checkpoint("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(RlError::DimensionMismatch {
                    expected: pair[0].n_out,
                    got: pair[1].n_in,
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(RlError::Checkpoint(format!(
                    "layer {}x{} has wrong parameter count",
                    l.n_out, l.n_in
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_in)
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    /// Parameter by flat index: each layer's weights, then its biases.
    pub fn param(&self, mut index: usize) -> f64 {
        for l in &self.layers {
            if index < l.weights.len() {
                return l.weights[index];
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                return l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for l in &mut self.layers {
            if index < l.weights.len() {
                l.weights[index] = value;
                return;
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                l.bias[index] = value;
                return;
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|v| v * v)
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .chain(l.bias.iter_mut())
                .for_each(|v| *v *= factor);
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), RlError> {
        if x.len() != self.n_inputs() {
            return Err(RlError::DimensionMismatch {
                expected: self.n_inputs(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, RlError> {
        self.check_input(x)?;
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Activations of every layer, input first.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.n_out);
            layer.affine(&acts[i], &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared TD error over the batch, `mean((Q(s)[a] - y)^2)`, and its
    /// exact gradient. Only the chosen action's output unit carries error.
    pub fn loss_and_gradients<S: AsRef<[f64]>>(
        &self,
        inputs: &[S],
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradients), RlError> {
        assert!(!inputs.is_empty(), "batch must not be empty");
        assert!(
            inputs.len() == actions.len() && actions.len() == targets.len(),
            "batch length mismatch"
        );
        let n = inputs.len() as f64;
        let mut grads = Mlp::zeros(&self.layer_sizes());
        let mut loss = 0.0;
        let last = self.layers.len() - 1;

        for ((x, &action), &target) in inputs.iter().zip(actions).zip(targets) {
            let x = x.as_ref();
            self.check_input(x)?;
            if action >= self.n_outputs() {
                return Err(RlError::ActionOutOfRange {
                    action,
                    n_actions: self.n_outputs(),
                });
            }
            let acts = self.trace(x);
            let err = acts[last + 1][action] - target;
            loss += err * err;

            // delta holds dL/d(pre-activation) of the current layer.
            let mut delta = vec![0.0; self.n_outputs()];
            delta[action] = 2.0 * err / n;
            for li in (0..=last).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let g = &mut grads.layers[li];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    row.iter_mut().zip(input).for_each(|(gw, xi)| *gw += d * xi);
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.n_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
                // ReLU: pass gradient only where the unit was active.
                prev.iter_mut().zip(input).for_each(|(p, a)| {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                });
                delta = prev;
            }
        }
        Ok((loss / n, grads))
    }

    /// Plain SGD step `w <- w - lr * g`.
    pub fn apply_update(&mut self, grads: &Gradients, lr: f64) -> Result<(), RlError> {
        if !grads.is_finite() {
            return Err(RlError::NonFiniteGradient);
        }
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights
                .iter_mut()
                .zip(&g.weights)
                .for_each(|(w, gw)| *w -= lr * gw);
            l.bias
                .iter_mut()
                .zip(&g.bias)
                .for_each(|(b, gb)| *b -= lr * gb);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input() {
        let mut layer = Dense::zeros(3, 3);
        for i in 0..3 {
            layer.weights[i * 3 + i] = 1.0;
        }
        let net = Mlp::from_layers(vec![layer]).unwrap();
        assert_eq!(
            net.forward(&[0.5, -1.5, 2.0]).unwrap(),
            vec![0.5, -1.5, 2.0]
        );
    }

    #[test]
    fn hand_computed_two_two_one() {
        // h = relu([[1, -1], [0.5, 2]] x + [0, -1]); y = [2, -3] h + 0.5
        let hidden = Dense {
            n_in: 2,
            n_out: 2,
            weights: vec![1.0, -1.0, 0.5, 2.0],
            bias: vec![0.0, -1.0],
        };
        let out = Dense {
            n_in: 2,
            n_out: 1,
            weights: vec![2.0, -3.0],
            bias: vec![0.5],
        };
        let net = Mlp::from_layers(vec![hidden, out]).unwrap();
        // x = (3, 1): pre = (2, 2.5) -> h = (2, 2.5) -> y = 4 - 7.5 + 0.5 = -3
        assert_abs_diff_eq!(net.forward(&[3.0, 1.0]).unwrap()[0], -3.0, epsilon = 1e-12);
        // x = (1, 3): pre = (-2, 5.5) -> h = (0, 5.5) -> y = -16.5 + 0.5 = -16
        assert_abs_diff_eq!(net.forward(&[1.0, 3.0]).unwrap()[0], -16.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let net = Mlp::zeros(&[3, 2]);
        assert_eq!(
            net.forward(&[1.0]),
            Err(RlError::DimensionMismatch {
                expected: 3,
                got: 1
            })
        );
    }

    #[test]
    fn matching_targets_give_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[4, 8, 3], &mut rng);
        let xs = vec![vec![0.1, 0.2, 0.3, 0.4], vec![-1.0, 0.0, 1.0, 2.0]];
        let actions = [2, 0];
        let targets: Vec<f64> = xs
            .iter()
            .zip(&actions)
            .map(|(x, &a)| net.forward(x).unwrap()[a])
            .collect();
        let (loss, g) = net.loss_and_gradients(&xs, &actions, &targets).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.squared_norm(), 0.0);
    }

    #[test]
    fn linear_single_sample_closed_form() {
        // Q = w.x + b; dL/dw = 2 (Q - y) x, dL/db = 2 (Q - y).
        let layer = Dense {
            n_in: 2,
            n_out: 1,
            weights: vec![0.5, -0.25],
            bias: vec![0.1],
        };
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let x = [2.0, 4.0];
        let q = 0.5 * 2.0 - 0.25 * 4.0 + 0.1;
        let y = 1.0;
        let (loss, g) = net.loss_and_gradients(&[x], &[0], &[y]).unwrap();
        assert_abs_diff_eq!(loss, (q - y) * (q - y), epsilon = 1e-15);
        assert_abs_diff_eq!(g.layers[0].weights[0], 2.0 * (q - y) * 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.layers[0].weights[1], 2.0 * (q - y) * 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.layers[0].bias[0], 2.0 * (q - y), epsilon = 1e-15);
    }

    #[test]
    fn sgd_step_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[3, 4, 2], &mut rng);
        let before = net.clone();
        net.apply_update(&Mlp::zeros(&[3, 4, 2]), 0.5).unwrap();
        assert_eq!(net, before);
        let (_, g) = net
            .loss_and_gradients(&[[1.0, 2.0, 3.0]], &[1], &[10.0])
            .unwrap();
        net.apply_update(&g, 0.0).unwrap();
        assert_eq!(net, before);

        // f(w) = (w * 1 - 0)^2 = w^2 from w = 1 with lr 0.1 lands on 0.8.
        let mut w = Mlp::from_layers(vec![Dense {
            n_in: 1,
            n_out: 1,
            weights: vec![1.0],
            bias: vec![0.0],
        }])
        .unwrap();
        let (loss, g) = w.loss_and_gradients(&[[1.0]], &[0], &[0.0]).unwrap();
        assert_eq!(loss, 1.0);
        let mut only_w = g.clone();
        only_w.set_param(1, 0.0);
        w.apply_update(&only_w, 0.1).unwrap();
        assert_abs_diff_eq!(w.param(0), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut net = Mlp::zeros(&[2, 1]);
        let mut g = Mlp::zeros(&[2, 1]);
        g.set_param(0, f64::NAN);
        assert_eq!(net.apply_update(&g, 0.1), Err(RlError::NonFiniteGradient));
        assert_eq!(net, Mlp::zeros(&[2, 1]));
    }

    #[test]
    fn flat_param_indexing_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::new(&[3, 4, 2], &mut rng);
        assert_eq!(net.num_params(), 3 * 4 + 4 + 4 * 2 + 2);
        for i in 0..net.num_params() {
            net.set_param(i, i as f64);
        }
        for i in 0..net.num_params() {
            assert_eq!(net.param(i), i as f64);
        }
    }
}
