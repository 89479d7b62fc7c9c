use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
    Identity,
}

/// One affine layer followed by an activation.
///
/// Weights are stored input-major: `weights[i * out_dim + o]` connects input
/// `i` to output `o`. The observation stacks fed to the first layer are mostly
/// zeros, and this layout lets both the forward pass and the weight update
/// skip zero inputs with contiguous row access.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    pub(crate) activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Weight from input `i` to output `o`.
    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights[i * self.out_dim + o]
    }

    pub fn set_weight(&mut self, o: usize, i: usize, value: f64) {
        self.weights[i * self.out_dim + o] = value;
    }

    fn affine_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (i, &a) in input.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.out_dim..(i + 1) * self.out_dim];
            for (y, w) in out.iter_mut().zip(row) {
                *y += a * w;
            }
        }
    }
}

/// Pre-activations and activations of every layer from one forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardTrace {
    pub(crate) input: Vec<f64>,
    pub(crate) pre: Vec<Vec<f64>>,
    pub(crate) post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    pub fn pre_activation(&self, layer: usize) -> &[f64] {
        &self.pre[layer]
    }

    pub fn activation(&self, layer: usize) -> &[f64] {
        &self.post[layer]
    }
}

/// Accumulated parameter gradients, same layout as the network.
///
/// Only rows whose input activation was non-zero are touched, so clearing and
/// applying cost scales with the sparsity of the inputs.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerGrad {
    pub(crate) out_dim: usize,
    pub(crate) dw: Vec<f64>,
    pub(crate) db: Vec<f64>,
    touched: Vec<bool>,
    pub(crate) rows: Vec<usize>,
}

impl LayerGrad {
    fn touch(&mut self, row: usize) {
        if !self.touched[row] {
            self.touched[row] = true;
            self.rows.push(row);
        }
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerGrad {
                out_dim: l.out_dim,
                dw: vec![0.0; l.weights.len()],
                db: vec![0.0; l.out_dim],
                touched: vec![false; l.in_dim],
                rows: Vec::new(),
            })
            .collect();
        Self { layers }
    }

    pub fn clear(&mut self) {
        for g in &mut self.layers {
            for &r in &g.rows {
                g.dw[r * g.out_dim..(r + 1) * g.out_dim].fill(0.0);
                g.touched[r] = false;
            }
            g.rows.clear();
            g.db.fill(0.0);
        }
    }

    /// Gradient entry in the flat parameter order used by [`Mlp::param`].
    pub fn flat(&self, mut idx: usize) -> f64 {
        for g in &self.layers {
            if idx < g.dw.len() {
                return g.dw[idx];
            }
            idx -= g.dw.len();
            if idx < g.db.len() {
                return g.db[idx];
            }
            idx -= g.db.len();
        }
        panic!("gradient index out of range");
    }
}

/// A fully connected network: affine layers with per-layer activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub(crate) input_dim: usize,
    pub(crate) layers: Vec<Layer>,
}

impl Mlp {
    /// Builds a network with `dims = [input, hidden.., output]` and one
    /// activation per layer. Weights are uniform in `[-s, s]` with
    /// `s = sqrt(6 / (fan_in + fan_out))`; biases start at zero.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        Self::validate_shape(dims, activations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (in_dim, out_dim) = (w[0], w[1]);
                let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
                let weights = (0..in_dim * out_dim)
                    .map(|_| rng.random_range(-s..=s))
                    .collect();
                Layer {
                    in_dim,
                    out_dim,
                    weights,
                    bias: vec![0.0; out_dim],
                    activation,
                }
            })
            .collect();
        Ok(Self {
            input_dim: dims[0],
            layers,
        })
    }

    /// Same shape as [`Mlp::init`] with every parameter set to zero.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        let mut net = Self::init(dims, activations, 0)?;
        for l in &mut net.layers {
            l.weights.fill(0.0);
        }
        Ok(net)
    }

    pub(crate) fn validate_shape(dims: &[usize], activations: &[Activation]) -> Result<()> {
        if dims.len() < 2 {
            return Err(NnError::BadDims("need at least an input and an output size".into()));
        }
        if activations.len() != dims.len() - 1 {
            return Err(NnError::BadDims(format!(
                "{} layer sizes need {} activations, got {}",
                dims.len(),
                dims.len() - 1,
                activations.len()
            )));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(NnError::BadDims(format!("size at position {pos} is zero")));
        }
        if let Some(pos) = activations[..activations.len() - 1]
            .iter()
            .position(|&a| a == Activation::Softmax)
        {
            return Err(NnError::SoftmaxNotLast(pos));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn head(&self) -> Activation {
        self.layers.last().map_or(Activation::Identity, |l| l.activation)
    }

    /// Layer sizes including the input, e.g. `[256, 200, 16]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameter access: per layer, all weights (input-major) then biases.
    pub fn param(&self, idx: usize) -> f64 {
        *self.locate(idx)
    }

    pub fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in &mut self.layers {
            if idx < l.weights.len() {
                return &mut l.weights[idx];
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return &mut l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    fn locate(&self, mut idx: usize) -> &f64 {
        for l in &self.layers {
            if idx < l.weights.len() {
                return &l.weights[idx];
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return &l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        let mut trace = ForwardTrace::default();
        self.forward_into(input, &mut trace)?;
        Ok(trace)
    }

    /// Forward pass reusing the buffers of an existing trace.
    pub fn forward_into(&self, input: &[f64], trace: &mut ForwardTrace) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(NnError::InputDim {
                expected: self.input_dim,
                got: input.len(),
            });
        }
        if let Some(pos) = input.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput(pos));
        }
        trace.input.clear();
        trace.input.extend_from_slice(input);
        trace.pre.resize_with(self.layers.len(), Vec::new);
        trace.post.resize_with(self.layers.len(), Vec::new);
        for (l, layer) in self.layers.iter().enumerate() {
            let (pre, post) = (&mut trace.pre, &mut trace.post);
            let prev = if l == 0 { &trace.input } else { &post[l - 1] };
            layer.affine_into(prev, &mut pre[l]);
            let z = &pre[l];
            let a = &mut post[l];
            a.clear();
            match layer.activation {
                Activation::Identity => a.extend_from_slice(z),
                Activation::Relu => a.extend(z.iter().map(|&v| v.max(0.0))),
                Activation::Softmax => {
                    a.extend_from_slice(z);
                    softmax_in_place(a);
                }
            }
        }
        Ok(())
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        let ok = trace.input.len() == self.input_dim
            && trace.pre.len() == self.layers.len()
            && trace.post.len() == self.layers.len()
            && self
                .layers
                .iter()
                .zip(&trace.pre)
                .all(|(l, z)| z.len() == l.out_dim);
        if ok {
            Ok(())
        } else {
            Err(NnError::TraceMismatch)
        }
    }

    /// Converts a gradient w.r.t. the network output into one w.r.t. the
    /// final layer's pre-activation.
    pub fn head_pre_grad(&self, trace: &ForwardTrace, d_out: &[f64]) -> Result<Vec<f64>> {
        self.check_trace(trace)?;
        let last = self.layers.len() - 1;
        let (z, p) = (&trace.pre[last], &trace.post[last]);
        if d_out.len() != z.len() {
            return Err(NnError::TraceMismatch);
        }
        Ok(match self.layers[last].activation {
            Activation::Identity => d_out.to_vec(),
            Activation::Relu => z
                .iter()
                .zip(d_out)
                .map(|(&zi, &g)| if zi > 0.0 { g } else { 0.0 })
                .collect(),
            Activation::Softmax => {
                let dot: f64 = p.iter().zip(d_out).map(|(a, b)| a * b).sum();
                p.iter().zip(d_out).map(|(&pi, &g)| pi * (g - dot)).collect()
            }
        })
    }

    /// Backpropagates `d_head` (gradient w.r.t. the head pre-activation) and
    /// moves every parameter by `scale * gradient` in place.
    pub fn sgd_step(&mut self, trace: &ForwardTrace, d_head: &[f64], scale: f64) -> Result<()> {
        self.check_trace(trace)?;
        if !scale.is_finite() {
            return Err(NnError::NonFinite("step size"));
        }
        if d_head.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("gradient"));
        }
        let mut delta = d_head.to_vec();
        let mut prev_delta = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let a_in: &[f64] = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            if l > 0 {
                self.input_delta(l, trace, &delta, &mut prev_delta);
            }
            let layer = &mut self.layers[l];
            let od = layer.out_dim;
            for (i, &a) in a_in.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let f = scale * a;
                let row = &mut layer.weights[i * od..(i + 1) * od];
                for (w, d) in row.iter_mut().zip(&delta) {
                    *w += f * d;
                }
                if !row.iter().all(|w| w.is_finite()) {
                    return Err(NnError::NonFinite("weights"));
                }
            }
            for (b, d) in layer.bias.iter_mut().zip(&delta) {
                *b += scale * d;
            }
            std::mem::swap(&mut delta, &mut prev_delta);
        }
        Ok(())
    }

    /// Adds the gradient for one sample into `grads` without touching the
    /// parameters. Pair with [`Mlp::apply`] for minibatch steps.
    pub fn accumulate(&self, trace: &ForwardTrace, d_head: &[f64], grads: &mut Gradients) -> Result<()> {
        self.check_trace(trace)?;
        if d_head.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("gradient"));
        }
        let mut delta = d_head.to_vec();
        let mut prev_delta = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let a_in: &[f64] = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            if l > 0 {
                self.input_delta(l, trace, &delta, &mut prev_delta);
            }
            let g = &mut grads.layers[l];
            let od = g.out_dim;
            for (i, &a) in a_in.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                g.touch(i);
                for (w, d) in g.dw[i * od..(i + 1) * od].iter_mut().zip(&delta) {
                    *w += a * d;
                }
            }
            for (b, d) in g.db.iter_mut().zip(&delta) {
                *b += d;
            }
            std::mem::swap(&mut delta, &mut prev_delta);
        }
        Ok(())
    }

    /// Moves parameters by `scale * grads`, then clears `grads`.
    pub fn apply(&mut self, grads: &mut Gradients, scale: f64) -> Result<()> {
        if !scale.is_finite() {
            return Err(NnError::NonFinite("step size"));
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            let od = layer.out_dim;
            for &r in &g.rows {
                let row = &mut layer.weights[r * od..(r + 1) * od];
                for (w, d) in row.iter_mut().zip(&g.dw[r * od..(r + 1) * od]) {
                    *w += scale * d;
                }
                if !row.iter().all(|w| w.is_finite()) {
                    return Err(NnError::NonFinite("weights"));
                }
            }
            for (b, d) in layer.bias.iter_mut().zip(&g.db) {
                *b += scale * d;
            }
        }
        grads.clear();
        Ok(())
    }

    /// Gradient w.r.t. the pre-activation of layer `l - 1`, given `delta` for
    /// layer `l`.
    fn input_delta(&self, l: usize, trace: &ForwardTrace, delta: &[f64], out: &mut Vec<f64>) {
        let layer = &self.layers[l];
        let below = &self.layers[l - 1];
        let z_below = &trace.pre[l - 1];
        let od = layer.out_dim;
        out.clear();
        out.extend((0..layer.in_dim).map(|i| {
            if below.activation == Activation::Relu && z_below[i] <= 0.0 {
                return 0.0;
            }
            let row = &layer.weights[i * od..(i + 1) * od];
            row.iter().zip(delta).map(|(w, d)| w * d).sum()
        }));
    }

    /// One descent step on `(target - V)^2` for a scalar-output network.
    /// Returns the loss before the step.
    pub fn critic_update(&mut self, trace: &ForwardTrace, target: f64, lr: f64) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(NnError::NotScalar(self.output_dim()));
        }
        if !target.is_finite() {
            return Err(NnError::NonFinite("target"));
        }
        self.check_trace(trace)?;
        let delta = target - trace.output()[0];
        let d_head = self.head_pre_grad(trace, &[-2.0 * delta])?;
        self.sgd_step(trace, &d_head, -lr)?;
        Ok(delta * delta)
    }

    /// One ascent step `theta += lr * delta * grad log pi(action)` on a
    /// softmax-headed network.
    pub fn actor_update(&mut self, trace: &ForwardTrace, action: usize, delta: f64, lr: f64) -> Result<()> {
        let d_head = self.log_prob_grad(trace, action, delta)?;
        self.sgd_step(trace, &d_head, lr)
    }

    /// `delta * (onehot(action) - pi)`: the gradient of `delta * log pi(action)`
    /// w.r.t. the softmax logits.
    pub fn log_prob_grad(&self, trace: &ForwardTrace, action: usize, delta: f64) -> Result<Vec<f64>> {
        if self.head() != Activation::Softmax {
            return Err(NnError::NotSoftmax);
        }
        self.check_trace(trace)?;
        let probs = trace.output();
        if action >= probs.len() {
            return Err(NnError::BadAction {
                index: action,
                width: probs.len(),
            });
        }
        if !delta.is_finite() {
            return Err(NnError::NonFinite("TD error"));
        }
        Ok(probs
            .iter()
            .enumerate()
            .map(|(j, &p)| delta * (f64::from(u8::from(j == action)) - p))
            .collect())
    }
}

/// Numerically stable softmax: shifts by the max logit before exponentiating.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actor_and_critic_shapes() {
        let n = 16;
        let omega = 16;
        let actor = Mlp::init(&[n * omega, 200, n], &[Activation::Relu, Activation::Softmax], 1).unwrap();
        let critic = Mlp::init(&[n * omega, 200, 1], &[Activation::Relu, Activation::Identity], 2).unwrap();
        assert_eq!(actor.dims(), vec![256, 200, 16]);
        assert_eq!(critic.dims(), vec![256, 200, 1]);
        assert_eq!(actor.head(), Activation::Softmax);
        assert_eq!(critic.output_dim(), 1);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = Mlp::init(&[5, 7, 3], &[Activation::Relu, Activation::Softmax], 9).unwrap();
        let b = Mlp::init(&[5, 7, 3], &[Activation::Relu, Activation::Softmax], 9).unwrap();
        assert_eq!(a, b);
        let s0 = (6.0f64 / 12.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= s0));
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let c = Mlp::init(&[5, 7, 3], &[Activation::Relu, Activation::Softmax], 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Mlp::init(&[4], &[], 0),
            Err(NnError::BadDims(_))
        ));
        assert!(matches!(
            Mlp::init(&[4, 3, 2], &[Activation::Relu], 0),
            Err(NnError::BadDims(_))
        ));
        assert!(matches!(
            Mlp::init(&[4, 3, 2], &[Activation::Softmax, Activation::Identity], 0),
            Err(NnError::SoftmaxNotLast(0))
        ));
        assert!(matches!(
            Mlp::init(&[4, 0, 2], &[Activation::Relu, Activation::Identity], 0),
            Err(NnError::BadDims(_))
        ));
    }

    #[test]
    fn zero_net_softmax_is_uniform() {
        let net = Mlp::zeros(&[3, 4, 5], &[Activation::Relu, Activation::Softmax]).unwrap();
        let t = net.forward(&[0.3, -1.0, 2.0]).unwrap();
        for &p in t.output() {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_of_equal_logits() {
        let mut v = [0.0, 0.0, 0.0];
        softmax_in_place(&mut v);
        for p in v {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut big = [1000.0, 1000.0];
        softmax_in_place(&mut big);
        assert_eq!(big, [0.5, 0.5]);
    }

    #[test]
    fn identity_layer_is_affine() {
        let mut net = Mlp::zeros(&[2, 2], &[Activation::Identity]).unwrap();
        net.layers[0].set_weight(0, 0, 2.0);
        net.layers[0].set_weight(0, 1, -1.0);
        net.layers[0].set_weight(1, 1, 3.0);
        net.layers[0].bias = vec![0.5, -0.5];
        let t = net.forward(&[1.5, 4.0]).unwrap();
        assert_eq!(t.output(), &[2.0 * 1.5 - 4.0 + 0.5, 12.0 - 0.5]);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = Mlp::zeros(&[2, 1], &[Activation::Identity]).unwrap();
        assert_eq!(
            net.forward(&[1.0]).unwrap_err(),
            NnError::InputDim { expected: 2, got: 1 }
        );
        assert_eq!(net.forward(&[1.0, f64::NAN]).unwrap_err(), NnError::NonFiniteInput(1));
    }

    #[test]
    fn critic_update_fixed_points() {
        let mut net = Mlp::init(&[3, 4, 1], &[Activation::Relu, Activation::Identity], 3).unwrap();
        let x = [0.5, -1.0, 1.0];
        let t = net.forward(&x).unwrap();
        let v = t.output()[0];
        let before = net.clone();
        let loss = net.critic_update(&t, v, 0.1).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);

        let loss = net.critic_update(&t, v + 2.0, 0.0).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(net, before);
    }

    #[test]
    fn critic_update_needs_scalar_head() {
        let mut net = Mlp::init(&[2, 3], &[Activation::Identity], 0).unwrap();
        let t = net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(net.critic_update(&t, 1.0, 0.1).unwrap_err(), NnError::NotScalar(3));
    }

    #[test]
    fn actor_update_zero_delta_and_bad_action() {
        let mut net = Mlp::init(&[2, 4, 3], &[Activation::Relu, Activation::Softmax], 5).unwrap();
        let t = net.forward(&[1.0, -0.5]).unwrap();
        let before = net.clone();
        net.actor_update(&t, 1, 0.0, 0.5).unwrap();
        assert_eq!(net, before);
        assert_eq!(
            net.actor_update(&t, 3, 1.0, 0.1).unwrap_err(),
            NnError::BadAction { index: 3, width: 3 }
        );
        let mut critic = Mlp::init(&[2, 1], &[Activation::Identity], 0).unwrap();
        let tc = critic.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(critic.actor_update(&tc, 0, 1.0, 0.1).unwrap_err(), NnError::NotSoftmax);
    }

    #[test]
    fn positive_delta_raises_taken_action_probability() {
        for seed in 0..20 {
            let mut net = Mlp::init(&[4, 6, 3], &[Activation::Relu, Activation::Softmax], seed).unwrap();
            let x = [1.0, 0.0, -1.0, 0.5];
            let t = net.forward(&x).unwrap();
            let action = (seed % 3) as usize;
            let before = t.output()[action];
            net.actor_update(&t, action, 0.7, 0.01).unwrap();
            let after = net.forward(&x).unwrap().output()[action];
            assert!(after > before, "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn batch_accumulate_matches_single_step() {
        let net = Mlp::init(&[3, 5, 2], &[Activation::Relu, Activation::Identity], 4).unwrap();
        let t = net.forward(&[0.0, 1.0, -2.0]).unwrap();
        let d = [0.3, -0.7];
        let mut a = net.clone();
        a.sgd_step(&t, &d, -0.05).unwrap();
        let mut b = net.clone();
        let mut g = Gradients::zeros_like(&b);
        b.accumulate(&t, &d, &mut g).unwrap();
        b.apply(&mut g, -0.05).unwrap();
        for i in 0..a.num_params() {
            assert!((a.param(i) - b.param(i)).abs() < 1e-15);
        }
        for i in 0..b.num_params() {
            assert_eq!(g.flat(i), 0.0);
        }
    }

    #[test]
    fn trace_from_another_network_is_rejected() {
        let a = Mlp::init(&[3, 2], &[Activation::Identity], 0).unwrap();
        let mut b = Mlp::init(&[4, 1], &[Activation::Identity], 0).unwrap();
        let t = a.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(b.critic_update(&t, 0.0, 0.1).unwrap_err(), NnError::TraceMismatch);
    }
}
