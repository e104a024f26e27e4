//! Fully connected network with manual backpropagation.

use rand::Rng;

use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Self::Linear => 0,
            Self::Relu => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Self::Linear),
            1 => Some(Self::Relu),
            _ => None,
        }
    }
}

/// Affine layer followed by an activation.
///
/// Weights are stored input-major: `weights[i * outputs + j]` connects
/// input `i` to output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    inputs: usize,
    outputs: usize,
    weights: Vec<F>,
    bias: Vec<F>,
    activation: Activation,
}

impl<F: Scalar> Dense<F> {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<F>, bias: Vec<F>, activation: Activation) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(EbeError::Empty("layer dimensions"));
        }
        if weights.len() != inputs * outputs {
            return Err(EbeError::DimensionMismatch { expected: inputs * outputs, got: weights.len() });
        }
        if bias.len() != outputs {
            return Err(EbeError::DimensionMismatch { expected: outputs, got: bias.len() });
        }
        Ok(Self { inputs, outputs, weights, bias, activation })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Result<Self> {
        Self::new(inputs, outputs, vec![F::zero(); inputs * outputs], vec![F::zero(); outputs], activation)
    }

    /// Fan-in scaled uniform initialisation, `U(-1/√fan_in, 1/√fan_in)`.
    pub fn fan_in_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || F::lit(rng.random_range(-bound..bound));
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self::new(inputs, outputs, weights, bias, activation)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn bias(&self) -> &[F] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn forward_into(&self, x: &[F], out: &mut Vec<F>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        // Zero inputs are common (binary grids) and contribute nothing.
        for (&xi, row) in x.iter().zip(self.weights.chunks_exact(self.outputs)) {
            if xi == F::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        if self.activation == Activation::Relu {
            for o in out.iter_mut() {
                *o = o.max(F::zero());
            }
        }
    }
}

/// Dot product with independent partial sums so the loop vectorises.
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    const LANES: usize = 8;
    let mut acc = [F::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: F = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    for (xa, xb) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += xa[k] * xb[k];
        }
    }
    acc.iter().copied().sum::<F>() + tail
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub(crate) layers: Vec<(Vec<F>, Vec<F>)>,
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros_like(net: &Mlp<F>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![F::zero(); l.weights.len()], vec![F::zero(); l.bias.len()]))
                .collect(),
        }
    }

    pub fn clear(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|v| *v = F::zero());
            b.iter_mut().for_each(|v| *v = F::zero());
        }
    }

    /// Same order as [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<F> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b).copied()).collect()
    }
}

/// Reusable forward/backward buffers.
#[derive(Debug, Clone, Default)]
pub struct Workspace<F> {
    acts: Vec<Vec<F>>,
    delta: Vec<F>,
    delta_prev: Vec<F>,
}

/// Multilayer perceptron. Hidden layers use rectifiers, the output is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    layers: Vec<Dense<F>>,
}

impl<F: Scalar> Mlp<F> {
    /// Randomly initialised network with layer sizes `[input, hidden.., output]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        Self::build(sizes, |i, o, act| Dense::fan_in_uniform(i, o, act, rng))
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::build(sizes, Dense::zeros)
    }

    fn build(sizes: &[usize], mut layer: impl FnMut(usize, usize, Activation) -> Result<Dense<F>>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(EbeError::Empty("network needs an input and an output size"));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| layer(w[0], w[1], if k == last { Activation::Linear } else { Activation::Relu }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense<F>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(EbeError::Empty("network layers"));
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(EbeError::DimensionMismatch { expected: w[0].outputs, got: w[1].inputs });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense<F>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    /// `[input, hidden.., output]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs && a.activation == b.activation)
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Layer by layer: weights, then biases.
    pub fn parameters(&self) -> Vec<F> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_parameters(&mut self, params: &[F]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(EbeError::DimensionMismatch { expected: self.num_parameters(), got: params.len() });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().expect("length checked"));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[F]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(EbeError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[F]) -> Result<Vec<F>> {
        let mut ws = Workspace::default();
        Ok(self.forward_with(x, &mut ws)?.to_vec())
    }

    /// Forward pass that keeps every layer's output in `ws` for [`backward`](Self::backward).
    pub fn forward_with<'w>(&self, x: &[F], ws: &'w mut Workspace<F>) -> Result<&'w [F]> {
        self.check_input(x)?;
        ws.acts.resize_with(self.layers.len() + 1, Vec::new);
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(x);
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(k + 1);
            layer.forward_into(&done[k], &mut rest[0]);
        }
        Ok(&ws.acts[self.layers.len()])
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂output` for the input of
    /// the last [`forward_with`](Self::forward_with) call on `ws`.
    pub fn backward(&self, ws: &mut Workspace<F>, d_out: &[F], grads: &mut Gradients<F>) -> Result<()> {
        if d_out.len() != self.output_dim() {
            return Err(EbeError::DimensionMismatch { expected: self.output_dim(), got: d_out.len() });
        }
        let Workspace { acts, delta, delta_prev } = ws;
        delta.clear();
        delta.extend_from_slice(d_out);
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &acts[k];
            let (gw, gb) = &mut grads.layers[k];
            for (g, &d) in gb.iter_mut().zip(delta.iter()) {
                *g += d;
            }
            for (&xi, grow) in input.iter().zip(gw.chunks_exact_mut(layer.outputs)) {
                if xi == F::zero() {
                    continue;
                }
                for (g, &d) in grow.iter_mut().zip(delta.iter()) {
                    *g += xi * d;
                }
            }
            if k == 0 {
                break;
            }
            let relu = self.layers[k - 1].activation == Activation::Relu;
            delta_prev.clear();
            for (&a, wrow) in input.iter().zip(layer.weights.chunks_exact(layer.outputs)) {
                if relu && a <= F::zero() {
                    delta_prev.push(F::zero());
                    continue;
                }
                delta_prev.push(dot(wrow, delta));
            }
            std::mem::swap(delta, delta_prev);
        }
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense<F>] {
        &mut self.layers
    }

    /// Overwrites this network's parameters with `other`'s.
    pub fn copy_from(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(EbeError::DimensionMismatch { expected: self.num_parameters(), got: other.num_parameters() });
        }
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.weights.copy_from_slice(&src.weights);
            dst.bias.copy_from_slice(&src.bias);
        }
        Ok(())
    }
}

impl<F> Dense<F> {
    pub(crate) fn params_mut(&mut self) -> (&mut [F], &mut [F]) {
        (&mut self.weights, &mut self.bias)
    }
}

/// Gradient-descent update rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// `v ← μ v + g`, `θ ← θ − η v`.
    SgdMomentum { learning_rate: f64, momentum: f64 },
    Adam { learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn sgd_momentum(learning_rate: f64, momentum: f64) -> Self {
        Self::SgdMomentum { learning_rate, momentum }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::Adam { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer<F> {
    kind: OptimizerKind,
    first: Gradients<F>,
    second: Gradients<F>,
    steps: u64,
}

impl<F: Scalar> Optimizer<F> {
    pub fn new(kind: OptimizerKind, net: &Mlp<F>) -> Self {
        Self { kind, first: Gradients::zeros_like(net), second: Gradients::zeros_like(net), steps: 0 }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step(&mut self, net: &mut Mlp<F>, grads: &Gradients<F>) {
        self.steps += 1;
        let layers = net.layers_mut().iter_mut().zip(&mut self.first.layers).zip(&mut self.second.layers).zip(&grads.layers);
        match self.kind {
            OptimizerKind::SgdMomentum { learning_rate, momentum } => {
                let (lr, mu) = (F::lit(learning_rate), F::lit(momentum));
                for (((layer, (vw, vb)), _), (gw, gb)) in layers {
                    let (w, b) = layer.params_mut();
                    sgd_momentum_update(w, vw, gw, lr, mu);
                    sgd_momentum_update(b, vb, gb, lr, mu);
                }
            }
            OptimizerKind::Adam { learning_rate, beta1, beta2, epsilon } => {
                let t = self.steps as i32;
                let h = AdamStep {
                    b1: F::lit(beta1),
                    b2: F::lit(beta2),
                    c1: F::one() - F::lit(beta1).powi(t),
                    c2: F::one() - F::lit(beta2).powi(t),
                    lr: F::lit(learning_rate),
                    eps: F::lit(epsilon),
                };
                for (((layer, (mw, mb)), (sw, sb)), (gw, gb)) in layers {
                    let (w, b) = layer.params_mut();
                    h.apply(w, mw, sw, gw);
                    h.apply(b, mb, sb, gb);
                }
            }
        }
    }
}

fn sgd_momentum_update<F: Scalar>(p: &mut [F], v: &mut [F], g: &[F], lr: F, mu: F) {
    for ((p, v), &g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
        *v = mu * *v + g;
        *p -= lr * *v;
    }
}

struct AdamStep<F> {
    b1: F,
    b2: F,
    c1: F,
    c2: F,
    lr: F,
    eps: F,
}

impl<F: Scalar> AdamStep<F> {
    fn apply(&self, p: &mut [F], m: &mut [F], s: &mut [F], g: &[F]) {
        let n = p.len().min(m.len()).min(s.len()).min(g.len());
        let (p, m, s, g) = (&mut p[..n], &mut m[..n], &mut s[..n], &g[..n]);
        let (one_b1, one_b2) = (F::one() - self.b1, F::one() - self.b2);
        let (inv_c1, inv_c2) = (self.c1.recip(), self.c2.recip());
        for i in 0..n {
            m[i] = self.b1 * m[i] + one_b1 * g[i];
            s[i] = self.b2 * s[i] + one_b2 * g[i] * g[i];
            let m_hat = m[i] * inv_c1;
            let s_hat = s[i] * inv_c2;
            p[i] -= self.lr * m_hat / (s_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::<f64>::zeros(&[4, 8, 3]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let layer = Dense::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.5], Activation::Linear).unwrap();
        let net = Mlp::from_layers(vec![layer]).unwrap();
        assert_eq!(net.forward(&[3.0, -4.0]).unwrap(), vec![3.0, -3.5]);
    }

    #[test]
    fn seeded_networks_are_identical() {
        let a = Mlp::<f64>::new(&[5, 16, 2], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = Mlp::<f64>::new(&[5, 16, 2], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let x = [0.1, 0.2, -0.3, 1.0, 0.0];
        assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
    }

    #[test]
    fn rejects_mismatched_input_and_layers() {
        let net = Mlp::<f64>::zeros(&[3, 2]).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        let a = Dense::<f64>::zeros(3, 4, Activation::Relu).unwrap();
        let b = Dense::<f64>::zeros(5, 2, Activation::Linear).unwrap();
        assert!(Mlp::from_layers(vec![a, b]).is_err());
    }

    #[test]
    fn parameters_round_trip() {
        let mut net = Mlp::<f64>::new(&[3, 4, 2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let p: Vec<f64> = (0..net.num_parameters()).map(|i| i as f64).collect();
        net.set_parameters(&p).unwrap();
        assert_eq!(net.parameters(), p);
        assert!(net.set_parameters(&p[1..]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences_on_sum_output() {
        let net = Mlp::<f64>::new(&[3, 5, 4, 2], &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let x = [0.3, -0.7, 1.1];
        let mut ws = Workspace::default();
        net.forward_with(&x, &mut ws).unwrap();
        let mut g = Gradients::zeros_like(&net);
        net.backward(&mut ws, &[1.0, -2.0], &mut g).unwrap();
        let analytic = g.flatten();
        let base = net.parameters();
        let h = 1e-6;
        for i in 0..base.len() {
            let eval = |delta: f64| {
                let mut n = net.clone();
                let mut p = base.clone();
                p[i] += delta;
                n.set_parameters(&p).unwrap();
                let y = n.forward(&x).unwrap();
                y[0] - 2.0 * y[1]
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((numeric - analytic[i]).abs() < 1e-6, "param {i}: {numeric} vs {}", analytic[i]);
        }
    }

    #[test]
    fn sgd_momentum_accumulates_velocity() {
        let mut net = Mlp::from_layers(vec![Dense::new(1, 1, vec![1.0_f64], vec![0.0], Activation::Linear).unwrap()]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::sgd_momentum(0.1, 0.9), &net);
        let g = Gradients { layers: vec![(vec![1.0], vec![0.0])] };
        opt.step(&mut net, &g);
        assert!((net.layers()[0].weights()[0] - 0.9).abs() < 1e-15);
        opt.step(&mut net, &g);
        // v = 0.9 * 1 + 1 = 1.9
        assert!((net.layers()[0].weights()[0] - (0.9 - 0.19)).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut net = Mlp::from_layers(vec![Dense::new(1, 1, vec![1.0_f64], vec![0.0], Activation::Linear).unwrap()]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::adam(0.01), &net);
        let g = Gradients { layers: vec![(vec![3.0], vec![0.0])] };
        opt.step(&mut net, &g);
        assert!((net.layers()[0].weights()[0] - 0.99).abs() < 1e-9);
        assert_eq!(net.layers()[0].bias()[0], 0.0);
    }
}
