//! Small fully-connected networks with hand-rolled backprop and an Adam
//! optimizer. Generic over the scalar so gradient checks can run in `f64`
//! while training and checkpoints use `f32`.

use rand::Rng;

use crate::scalar::Real;

/// One affine layer; weights are row-major `(out_dim x in_dim)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<R> {
    pub weights: Vec<R>,
    pub bias: Vec<R>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<R: Real> Linear<R> {
    /// Uniform init in +-1/sqrt(in_dim) for weights and biases. Draws are
    /// made in `f64` so the init is identical across scalar types.
    fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let k = 1.0 / (in_dim as f64).sqrt();
        let mut draw = || R::cst(rng.random_range(-k..k));
        Self {
            weights: (0..in_dim * out_dim).map(|_| draw()).collect(),
            bias: (0..out_dim).map(|_| draw()).collect(),
            in_dim,
            out_dim,
        }
    }

    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: vec![R::zero(); in_dim * out_dim],
            bias: vec![R::zero(); out_dim],
            in_dim,
            out_dim,
        }
    }

    fn forward_into(&self, input: &[R], out: &mut Vec<R>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, x) in row.iter().zip(input) {
                acc = acc + *w * *x;
            }
            out.push(acc);
        }
    }
}

/// Multi-layer perceptron: ReLU between layers, linear output. Output
/// squashing (tanh for the actor) is applied by the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<R> {
    layers: Vec<Linear<R>>,
}

/// Activations recorded by [`Mlp::forward_trace`] for the backward pass.
/// `acts[0]` is the input; `acts[l]` the output of layer `l` after its
/// activation.
pub struct Trace<R> {
    acts: Vec<Vec<R>>,
}

impl<R> Trace<R> {
    pub fn output(&self) -> &[R] {
        self.acts.last().expect("trace holds at least the input")
    }
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Clone, Debug)]
pub struct Gradients<R> {
    layers: Vec<Linear<R>>,
}

impl<R: Real> Gradients<R> {
    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = R::zero());
            l.bias.iter_mut().for_each(|b| *b = R::zero());
        }
    }

    pub fn scale(&mut self, s: R) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = *w * s);
            l.bias.iter_mut().for_each(|b| *b = *b * s);
        }
    }

    fn flat(&self) -> impl Iterator<Item = R> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }
}

impl<R: Real> Mlp<R> {
    /// Build from the full dimension table `[input, hidden.., output]`.
    pub fn new(dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert!(dims.iter().all(|&d| d > 0), "zero-width layer");
        let layers = dims.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect();
        Self { layers }
    }

    /// All-zero parameters (tests).
    pub fn zeroed(dims: &[usize]) -> Self {
        let layers = dims.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Linear<R>>) -> Self {
        assert!(!layers.is_empty());
        for pair in layers.windows(2) {
            assert_eq!(pair[0].out_dim, pair[1].in_dim, "layer dims must chain");
        }
        Self { layers }
    }

    pub fn layers(&self) -> &[Linear<R>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Dimension table `[input, hidden.., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.out_dim));
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &[R]) -> Vec<R> {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if i != last {
                next.iter_mut().for_each(|v| *v = v.max(R::zero()));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Forward pass that records activations for [`Mlp::backward`].
    pub fn forward_trace(&self, input: &[R]) -> Trace<R> {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward_into(acts.last().unwrap(), &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = v.max(R::zero()));
            }
            acts.push(out);
        }
        Trace { acts }
    }

    pub fn zero_gradients(&self) -> Gradients<R> {
        Gradients {
            layers: self.layers.iter().map(|l| Linear::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    /// Accumulate parameter gradients for one sample and return the loss
    /// gradient with respect to the network input.
    ///
    /// `grad_out` is dLoss/dOutput at the (linear) network output.
    pub fn backward(&self, trace: &Trace<R>, grad_out: &[R], grads: &mut Gradients<R>) -> Vec<R> {
        assert_eq!(grad_out.len(), self.output_dim(), "output dimension mismatch");
        let mut g = grad_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.acts[l];
            let output = &trace.acts[l + 1];
            // Hidden activations are ReLU: zero gradient where the unit was off.
            if l != self.layers.len() - 1 {
                for (gi, out) in g.iter_mut().zip(output) {
                    if *out <= R::zero() {
                        *gi = R::zero();
                    }
                }
            }
            let gl = &mut grads.layers[l];
            let mut g_in = vec![R::zero(); layer.in_dim];
            for o in 0..layer.out_dim {
                let go = g[o];
                gl.bias[o] = gl.bias[o] + go;
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let grow = &mut gl.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    grow[i] = grow[i] + go * input[i];
                    g_in[i] = g_in[i] + go * row[i];
                }
            }
            g = g_in;
        }
        g
    }

    /// Polyak update toward `source`: `theta' <- tau*theta + (1-tau)*theta'`.
    pub fn soft_update_from(&mut self, source: &Self, tau: R) {
        let one_minus = R::one() - tau;
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            for (tw, sw) in t.weights.iter_mut().zip(&s.weights) {
                *tw = tau * *sw + one_minus * *tw;
            }
            for (tb, sb) in t.bias.iter_mut().zip(&s.bias) {
                *tb = tau * *sb + one_minus * *tb;
            }
        }
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn apply<F: FnMut(&mut R, usize)>(&mut self, mut f: F) {
        let mut idx = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                f(w, idx);
                idx += 1;
            }
        }
    }

    fn flat_params(&self) -> impl Iterator<Item = R> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }
}

/// Adam with the standard constants (beta1 0.9, beta2 0.999, eps 1e-8).
#[derive(Clone, Debug)]
pub struct Adam<R> {
    lr: R,
    beta1: f64,
    beta2: f64,
    eps: R,
    t: u64,
    m: Vec<R>,
    v: Vec<R>,
}

impl<R: Real> Adam<R> {
    pub fn new(net: &Mlp<R>, lr: f64) -> Self {
        let n = net.param_count();
        Self {
            lr: R::cst(lr),
            beta1: 0.9,
            beta2: 0.999,
            eps: R::cst(1e-8),
            t: 0,
            m: vec![R::zero(); n],
            v: vec![R::zero(); n],
        }
    }

    pub fn step(&mut self, net: &mut Mlp<R>, grads: &Gradients<R>) {
        self.t += 1;
        let b1 = R::cst(self.beta1);
        let b2 = R::cst(self.beta2);
        let bc1 = R::cst(1.0 - self.beta1.powi(self.t as i32));
        let bc2 = R::cst(1.0 - self.beta2.powi(self.t as i32));
        let one = R::one();
        let g: Vec<R> = grads.flat().collect();
        assert_eq!(g.len(), self.m.len(), "gradient/optimizer shape mismatch");
        let (m, v) = (&mut self.m, &mut self.v);
        let (lr, eps) = (self.lr, self.eps);
        net.apply(|p, i| {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        });
    }
}

/// Central finite-difference gradient of `loss` with respect to every
/// parameter of `net`. Test oracle; O(params) loss evaluations.
pub fn finite_difference_gradients<R: Real>(
    net: &Mlp<R>,
    eps: f64,
    mut loss: impl FnMut(&Mlp<R>) -> R,
) -> Vec<R> {
    let n = net.param_count();
    let eps_r = R::cst(eps);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut plus = net.clone();
        plus.apply(|p, j| {
            if j == i {
                *p = *p + eps_r;
            }
        });
        let mut minus = net.clone();
        minus.apply(|p, j| {
            if j == i {
                *p = *p - eps_r;
            }
        });
        out.push((loss(&plus) - loss(&minus)) / (R::cst(2.0) * eps_r));
    }
    out
}

/// Flattened analytic gradients in the same order as
/// [`finite_difference_gradients`].
pub fn flatten_gradients<R: Real>(grads: &Gradients<R>) -> Vec<R> {
    grads.flat().collect()
}

/// Flattened parameters (checkpoint comparisons and tests).
pub fn flatten_params<R: Real>(net: &Mlp<R>) -> Vec<R> {
    net.flat_params().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::<f64>::zeroed(&[3, 4, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_identity_layer() {
        let mut l = Linear::<f64>::zeros(2, 2);
        l.weights = vec![1.0, 0.0, 0.0, 1.0];
        let net = Mlp::from_layers(vec![l]);
        assert_eq!(net.forward(&[0.3, -0.7]), vec![0.3, -0.7]);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn forward_rejects_wrong_input_length() {
        let net = Mlp::<f64>::zeroed(&[3, 2]);
        net.forward(&[1.0, 2.0]);
    }

    fn scalar_loss(net: &Mlp<f64>, input: &[f64], weights: &[f64]) -> f64 {
        net.forward(input).iter().zip(weights).map(|(o, w)| o * w).sum()
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dims in [vec![2, 4, 3], vec![5, 8, 8, 2], vec![1, 6, 1]] {
            let net = Mlp::<f64>::new(&dims, &mut rng);
            let input: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mix: Vec<f64> =
                (0..*dims.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();

            let trace = net.forward_trace(&input);
            let mut grads = net.zero_gradients();
            net.backward(&trace, &mix, &mut grads);
            let analytic = flatten_gradients(&grads);
            let numeric =
                finite_difference_gradients(&net, 1e-4, |n| scalar_loss(n, &input, &mix));
            for (a, n) in analytic.iter().zip(&numeric) {
                let denom = a.abs().max(n.abs()).max(1e-6);
                assert!((a - n).abs() / denom < 1e-3, "analytic {a} vs numeric {n}");
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::<f64>::new(&[3, 5, 2], &mut rng);
        let input = [0.2, -0.4, 0.9];
        let mix = [0.7, -1.3];
        let trace = net.forward_trace(&input);
        let mut grads = net.zero_gradients();
        let g_in = net.backward(&trace, &mix, &mut grads);
        let eps = 1e-6;
        for i in 0..input.len() {
            let mut plus = input;
            plus[i] += eps;
            let mut minus = input;
            minus[i] -= eps;
            let numeric =
                (scalar_loss(&net, &plus, &mix) - scalar_loss(&net, &minus, &mix)) / (2.0 * eps);
            assert!((g_in[i] - numeric).abs() < 1e-6, "input grad {i}");
        }
    }

    #[test]
    fn adam_reduces_quadratic_loss() {
        // regress the single output of a 1->1 net to 3.0
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::<f64>::new(&[1, 1], &mut rng);
        let mut opt = Adam::new(&net, 0.05);
        let loss_of = |n: &Mlp<f64>| {
            let y = n.forward(&[1.0])[0];
            (y - 3.0) * (y - 3.0)
        };
        let before = loss_of(&net);
        for _ in 0..500 {
            let trace = net.forward_trace(&[1.0]);
            let y = trace.output()[0];
            let mut grads = net.zero_gradients();
            net.backward(&trace, &[2.0 * (y - 3.0)], &mut grads);
            opt.step(&mut net, &grads);
        }
        assert!(loss_of(&net) < before.min(1e-4));
    }

    #[test]
    fn soft_update_blends_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let online = Mlp::<f64>::new(&[2, 3, 1], &mut rng);
        let mut target = Mlp::<f64>::new(&[2, 3, 1], &mut rng);
        let before = flatten_params(&target);
        let tau = 0.005;
        let mut expect: Vec<f64> = Vec::new();
        for (o, t) in flatten_params(&online).iter().zip(&before) {
            expect.push(tau * o + (1.0 - tau) * t);
        }
        target.soft_update_from(&online, tau);
        for (got, want) in flatten_params(&target).iter().zip(&expect) {
            assert_eq!(got, want, "polyak update must be exact");
        }
        // tau = 1 is a hard copy
        let mut hard = Mlp::<f64>::new(&[2, 3, 1], &mut rng);
        hard.soft_update_from(&online, 1.0);
        assert_eq!(flatten_params(&hard), flatten_params(&online));
    }

    #[test]
    fn init_is_deterministic_and_scalar_agnostic() {
        let a = Mlp::<f32>::new(&[4, 8, 2], &mut ChaCha8Rng::seed_from_u64(7));
        let b = Mlp::<f32>::new(&[4, 8, 2], &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(flatten_params(&a), flatten_params(&b));
        let wide = Mlp::<f64>::new(&[4, 8, 2], &mut ChaCha8Rng::seed_from_u64(7));
        for (x, y) in flatten_params(&a).iter().zip(flatten_params(&wide)) {
            assert_eq!(*x, y as f32);
        }
    }
}
