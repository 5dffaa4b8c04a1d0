//! Small dense feed-forward networks with hand-written backpropagation.
//!
//! Every network in the crate (actor, critic, partner model) is an [`Mlp`]
//! with sigmoid hidden layers and a linear output layer. Weights are stored
//! row-major with shape `(out_dim, in_dim)`; batched inputs are `(batch, dim)`.
//!
//! Shape mismatches are programmer errors and panic via `assert!`.

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Mae,
}

impl LossKind {
    /// Mean loss over every element of `output` and its gradient w.r.t. `output`.
    ///
    /// The MAE subgradient at `y == t` is taken as zero.
    pub fn evaluate(self, output: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
        assert_eq!(output.dim(), target.dim(), "loss: output/target shape mismatch");
        let n = output.len().max(1) as f64;
        let diff = output - target;
        match self {
            LossKind::Mse => {
                let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
                (loss, diff.mapv(|d| 2.0 * d / n))
            }
            LossKind::Mae => {
                let loss = diff.iter().map(|d| d.abs()).sum::<f64>() / n;
                let grad = diff.mapv(|d| {
                    if d > 0.0 {
                        1.0 / n
                    } else if d < 0.0 {
                        -1.0 / n
                    } else {
                        0.0
                    }
                });
                (loss, grad)
            }
        }
    }
}

/// Closed interval a layer's weights are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRange {
    pub low: f64,
    pub high: f64,
}

impl WeightRange {
    pub const fn symmetric(half_width: f64) -> Self {
        Self { low: -half_width, high: half_width }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            self.low
        } else {
            rng.random_range(self.low..=self.high)
        }
    }
}

/// Per-layer gradients (or any other parameter-shaped quantity).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.values().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|g| g.is_finite())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(self.biases.iter().flat_map(|b| b.iter().copied()))
    }

    /// Rescales in place so the global L2 norm does not exceed `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        assert!(max_norm > 0.0, "clip_norm: max_norm must be positive");
        let norm = self.global_norm();
        if norm > max_norm {
            let scale = max_norm / norm;
            for w in &mut self.weights {
                w.mapv_inplace(|g| g * scale);
            }
            for b in &mut self.biases {
                b.mapv_inplace(|g| g * scale);
            }
        }
        norm
    }
}

/// Functional form of [`Gradients::clip_norm`].
pub fn clip_gradient_norm(mut grads: Gradients, max_norm: f64) -> Gradients {
    grads.clip_norm(max_norm);
    grads
}

/// Layer outputs recorded by [`Mlp::forward_trace`]; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace always holds the input")
    }
}

/// What drives a backward pass.
#[derive(Debug, Clone, Copy)]
pub enum BackwardSeed<'a> {
    /// Differentiate `loss(output, target)`.
    Target { target: &'a Array2<f64>, loss: LossKind },
    /// Differentiate `<upstream, output>` (chain-rule mode).
    Upstream(&'a Array2<f64>),
}

#[derive(Debug, Clone)]
pub struct Backprop {
    pub grads: Gradients,
    /// Gradient w.r.t. the network input, shape `(batch, input_dim)`.
    pub input_grad: Array2<f64>,
    /// Loss value in target mode, `None` in upstream mode.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl Mlp {
    /// Random network: weights uniform in the per-layer ranges, biases zero.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        ranges: &[WeightRange],
        rng: &mut R,
    ) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let n_layers = layer_sizes.len() - 1;
        if ranges.len() != n_layers {
            return Err(PalError::Config(format!(
                "expected {n_layers} weight ranges, got {}",
                ranges.len()
            )));
        }
        for r in ranges {
            if !(r.low.is_finite() && r.high.is_finite()) || r.low > r.high {
                return Err(PalError::Config(format!("invalid weight range {r:?}")));
            }
        }
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for (l, range) in ranges.iter().enumerate() {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || range.sample(rng)));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation: Activation::Sigmoid,
            output_activation: Activation::Linear,
        })
    }

    /// Network with explicit parameters and the standard sigmoid/linear activations.
    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(PalError::Config("weights/biases layer count mismatch".into()));
        }
        let mut layer_sizes = vec![weights[0].ncols()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.ncols() != *layer_sizes.last().unwrap() || w.nrows() != b.len() {
                return Err(PalError::Config("layer shapes do not chain".into()));
            }
            layer_sizes.push(w.nrows());
        }
        validate_sizes(&layer_sizes)?;
        if weights.iter().flatten().chain(biases.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(PalError::Config("non-finite parameter".into()));
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            hidden_activation: Activation::Sigmoid,
            output_activation: Activation::Linear,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(self.biases.iter().flat_map(|b| b.iter().copied()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "forward: input dimension mismatch");
        let mut x = Array1::from(input.to_vec());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let act = self.activation(l);
            let mut z = w.dot(&x);
            z += b;
            z.mapv_inplace(|v| act.apply(v));
            x = z;
        }
        x.to_vec()
    }

    pub fn forward_batch(&self, inputs: &Array2<f64>) -> Array2<f64> {
        assert_eq!(inputs.ncols(), self.input_dim(), "forward: input dimension mismatch");
        let mut x = inputs.to_owned();
        for l in 0..self.weights.len() {
            x = self.layer_forward(l, &x);
        }
        x
    }

    pub fn forward_trace(&self, inputs: &Array2<f64>) -> ForwardTrace {
        assert_eq!(inputs.ncols(), self.input_dim(), "forward: input dimension mismatch");
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(inputs.to_owned());
        for l in 0..self.weights.len() {
            let next = self.layer_forward(l, activations.last().unwrap());
            activations.push(next);
        }
        ForwardTrace { activations }
    }

    fn layer_forward(&self, l: usize, x: &Array2<f64>) -> Array2<f64> {
        let act = self.activation(l);
        let mut z = x.dot(&self.weights[l].t());
        z += &self.biases[l];
        z.mapv_inplace(|v| act.apply(v));
        z
    }

    /// Exact gradients of the seeded objective w.r.t. every parameter and the input.
    pub fn backward(&self, trace: &ForwardTrace, seed: BackwardSeed<'_>) -> Backprop {
        assert_eq!(trace.activations.len(), self.weights.len() + 1, "backward: trace depth mismatch");
        let output = trace.output();
        let (loss, mut delta) = match seed {
            BackwardSeed::Target { target, loss } => {
                let (value, grad) = loss.evaluate(output, target);
                (Some(value), grad)
            }
            BackwardSeed::Upstream(upstream) => {
                assert_eq!(upstream.dim(), output.dim(), "backward: upstream shape mismatch");
                (None, upstream.to_owned())
            }
        };

        let n = self.weights.len();
        let mut grad_w = Vec::with_capacity(n);
        let mut grad_b = Vec::with_capacity(n);
        for l in (0..n).rev() {
            let act = self.activation(l);
            let y = &trace.activations[l + 1];
            Zip::from(&mut delta).and(y).for_each(|d, &yv| *d *= act.derivative_from_output(yv));
            grad_w.push(delta.t().dot(&trace.activations[l]));
            grad_b.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.weights[l]);
        }
        grad_w.reverse();
        grad_b.reverse();
        Backprop {
            grads: Gradients { weights: grad_w, biases: grad_b },
            input_grad: delta,
            loss,
        }
    }

    /// Forward then backward in one call.
    pub fn gradients(&self, inputs: &Array2<f64>, seed: BackwardSeed<'_>) -> Backprop {
        let trace = self.forward_trace(inputs);
        self.backward(&trace, seed)
    }

    /// Polyak averaging: `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        assert_eq!(self.layer_sizes, online.layer_sizes, "soft_update: shape mismatch");
        for (t, o) in self.weights.iter_mut().zip(&online.weights) {
            Zip::from(t).and(o).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
        for (t, o) in self.biases.iter_mut().zip(&online.biases) {
            Zip::from(t).and(o).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
    }

    /// Largest absolute parameter difference to another network of equal shape.
    pub fn max_abs_diff(&self, other: &Mlp) -> f64 {
        self.params().zip(other.params()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Array2<f64>], &mut [Array1<f64>]) {
        (&mut self.weights, &mut self.biases)
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(PalError::Config(format!(
            "an MLP needs at least input and output sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(PalError::Config(format!("layer sizes must be positive: {layer_sizes:?}")));
    }
    Ok(())
}

/// Adam without weight decay or AMSGrad, with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Gradients,
    second_moment: Gradients,
}

impl Adam {
    pub const DEFAULT_EPSILON: f64 = 1e-7;

    pub fn new(mlp: &Mlp, learning_rate: f64) -> Self {
        Self::with_betas(mlp, learning_rate, 0.9, 0.999)
    }

    pub fn with_betas(mlp: &Mlp, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon: Self::DEFAULT_EPSILON,
            step_count: 0,
            first_moment: Gradients::zeros_like(mlp),
            second_moment: Gradients::zeros_like(mlp),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.second_moment
    }

    /// Applies one update. Non-finite gradients leave everything untouched.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(PalError::NonFinite("non-finite gradient passed to Adam".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let lr = self.learning_rate;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        let (weights, biases) = mlp.params_mut();
        for (l, w) in weights.iter_mut().enumerate() {
            Zip::from(w)
                .and(&mut self.first_moment.weights[l])
                .and(&mut self.second_moment.weights[l])
                .and(&grads.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        for (l, b) in biases.iter_mut().enumerate() {
            Zip::from(b)
                .and(&mut self.first_moment.biases[l])
                .and(&mut self.second_moment.biases[l])
                .and(&grads.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}

/// Stacks equally sized rows into a `(rows, dim)` matrix.
pub fn stack_rows<'a, I>(rows: I, dim: usize) -> Array2<f64>
where
    I: IntoIterator<Item = ArrayView1<'a, f64>>,
{
    let mut data = Vec::new();
    let mut n = 0;
    for row in rows {
        assert_eq!(row.len(), dim, "stack_rows: ragged input");
        data.extend(row.iter().copied());
        n += 1;
    }
    Array2::from_shape_vec((n, dim), data).expect("shape checked above")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_respects_ranges() {
        let sizes = [2, 16, 16, 16, 1];
        let ranges = [WeightRange::symmetric(1.0); 4];
        let net = Mlp::new(&sizes, &ranges, &mut rng(1)).unwrap();
        assert!(net.params().all(|p| (-1.0..=1.0).contains(&p)));
        assert_eq!(net.weights().len(), 4);
        assert_eq!(net.weights()[1].dim(), (16, 16));
        assert_eq!(net.num_params(), 2 * 16 + 16 * 16 * 2 + 16 + 16 * 3 + 1);
    }

    #[test]
    fn degenerate_range_gives_zero_params() {
        let net = Mlp::new(&[3, 4, 2], &[WeightRange::symmetric(0.0); 2], &mut rng(0)).unwrap();
        assert!(net.params().all(|p| p == 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        let r = [WeightRange::symmetric(1.0); 2];
        let a = Mlp::new(&[3, 5, 1], &r, &mut rng(9)).unwrap();
        let b = Mlp::new(&[3, 5, 1], &r, &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_rejects_bad_config() {
        let r = [WeightRange::symmetric(1.0)];
        assert!(matches!(Mlp::new(&[3], &[], &mut rng(0)), Err(PalError::Config(_))));
        assert!(matches!(Mlp::new(&[3, 0, 1], &r, &mut rng(0)), Err(PalError::Config(_))));
        assert!(matches!(Mlp::new(&[3, 1], &[], &mut rng(0)), Err(PalError::Config(_))));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::new(&[2, 4, 1], &[WeightRange::symmetric(0.0); 2], &mut rng(0)).unwrap();
        assert_eq!(net.forward(&[0.3, -7.0]), vec![0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let net = Mlp::from_parts(vec![Array2::eye(3)], vec![Array1::zeros(3)]).unwrap();
        assert_eq!(net.forward(&[1.5, -2.0, 0.25]), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn hand_evaluated_one_two_one() {
        // h = sigmoid([0.5x, -x + 1]), y = 2 h1 - 3 h2 + 0.1 at x = 2
        let net = Mlp::from_parts(
            vec![array![[0.5], [-1.0]], array![[2.0, -3.0]]],
            vec![array![0.0, 1.0], array![0.1]],
        )
        .unwrap();
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let expected = 2.0 * s(1.0) - 3.0 * s(-1.0) + 0.1;
        let got = net.forward(&[2.0])[0];
        assert!((got - expected).abs() < 1e-15);
        // 2 * 0.7310585786300049 - 3 * 0.2689414213699951 + 0.1, evaluated independently
        assert!((got - 0.755_292_893_150_024_5).abs() < 1e-12);
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let net = Mlp::new(&[3, 7, 7, 2], &[WeightRange::symmetric(1.0); 3], &mut rng(3)).unwrap();
        let x = array![[0.1, -0.4, 2.0], [1.0, 0.0, -3.0]];
        let batch = net.forward_batch(&x);
        for (i, row) in x.rows().into_iter().enumerate() {
            let single = net.forward(row.as_slice().unwrap());
            for j in 0..2 {
                assert!((batch[[i, j]] - single[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::new(&[2, 5, 1], &[WeightRange::symmetric(1.0); 2], &mut rng(4)).unwrap();
        let x = array![[0.3, 0.2]];
        let up = Array2::zeros((1, 1));
        let bp = net.gradients(&x, BackwardSeed::Upstream(&up));
        assert!(bp.grads.values().all(|g| g == 0.0));
        assert!(bp.input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mae_output_gradient_sign() {
        let net = Mlp::new(&[2, 3, 1], &[WeightRange::symmetric(1.0); 2], &mut rng(5)).unwrap();
        let x = array![[0.5, -0.5]];
        let y = net.forward_batch(&x)[[0, 0]];
        for target in [y - 1.0, y + 1.0] {
            let t = array![[target]];
            let bp = net.gradients(&x, BackwardSeed::Target { target: &t, loss: LossKind::Mae });
            let out_bias_grad = bp.grads.biases.last().unwrap()[0];
            assert_eq!(out_bias_grad.signum(), (y - target).signum());
        }
        let t = array![[y]];
        let (_, g) = LossKind::Mae.evaluate(&array![[y]], &t);
        assert_eq!(g[[0, 0]], 0.0);
    }

    #[test]
    fn adam_first_step_closed_form() {
        let mut net = Mlp::from_parts(vec![array![[0.0]]], vec![array![0.0]]).unwrap();
        let mut adam = Adam::new(&net, 0.01);
        let grads = Gradients { weights: vec![array![[1.0]]], biases: vec![array![0.0]] };
        adam.step(&mut net, &grads).unwrap();
        assert!((net.weights()[0][[0, 0]] + 0.01).abs() < 1e-8);
        assert_eq!(net.biases()[0][0], 0.0);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn adam_zero_gradients_noop() {
        let mut net = Mlp::new(&[2, 3, 1], &[WeightRange::symmetric(1.0); 2], &mut rng(6)).unwrap();
        let before = net.clone();
        let mut adam = Adam::new(&net, 0.01);
        let zero = Gradients::zeros_like(&net);
        for _ in 0..50 {
            adam.step(&mut net, &zero).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 50);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut net = Mlp::from_parts(vec![array![[0.5]]], vec![array![0.0]]).unwrap();
        let mut adam = Adam::new(&net, 0.01);
        let grads = Gradients { weights: vec![array![[f64::NAN]]], biases: vec![array![0.0]] };
        assert!(matches!(adam.step(&mut net, &grads), Err(PalError::NonFinite(_))));
        assert_eq!(adam.step_count(), 0);
        assert_eq!(net.weights()[0][[0, 0]], 0.5);
    }

    #[test]
    fn adam_matches_scalar_trace_on_square() {
        // Independent scalar Adam on f(w) = w^2 starting at w = 1.
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-7);
        let (mut w, mut m, mut v) = (1.0_f64, 0.0_f64, 0.0_f64);
        let mut expected = Vec::new();
        for t in 1..=3 {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            w -= lr * mh / (vh.sqrt() + eps);
            expected.push(w);
        }

        let mut net = Mlp::from_parts(vec![array![[1.0]]], vec![array![0.0]]).unwrap();
        let mut adam = Adam::new(&net, lr);
        for e in expected {
            let wv = net.weights()[0][[0, 0]];
            let grads = Gradients { weights: vec![array![[2.0 * wv]]], biases: vec![array![0.0]] };
            adam.step(&mut net, &grads).unwrap();
            assert!((net.weights()[0][[0, 0]] - e).abs() < 1e-14);
        }
        // Early steps each move by about lr: 1, 0.9, 0.8, 0.7.
        assert!((net.weights()[0][[0, 0]] - 0.7).abs() < 0.05);
    }

    #[test]
    fn clip_examples() {
        let g = Gradients { weights: vec![array![[0.3, 0.4]]], biases: vec![array![0.0]] };
        assert_eq!(clip_gradient_norm(g.clone(), 1.0), g);
        let g = Gradients { weights: vec![array![[3.0, 4.0]]], biases: vec![array![0.0]] };
        let c = clip_gradient_norm(g, 1.0);
        assert!((c.weights[0][[0, 0]] - 0.6).abs() < 1e-15);
        assert!((c.weights[0][[0, 1]] - 0.8).abs() < 1e-15);
        assert!(c.global_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn soft_update_examples() {
        let mk = |v: f64| Mlp::from_parts(vec![array![[v]]], vec![array![v]]).unwrap();
        let mut t = mk(2.0);
        t.soft_update_from(&mk(4.0), 0.5);
        assert_eq!(t, mk(3.0));
        let mut t = mk(2.0);
        t.soft_update_from(&mk(4.0), 1.0);
        assert_eq!(t, mk(4.0));
        let mut t = mk(2.0);
        t.soft_update_from(&mk(2.0), 0.001);
        assert_eq!(t, mk(2.0));
    }
}
