//! Classical discriminator, binary cross-entropy losses and ADADELTA.
//!
//! The network is fully connected: input -> hidden layers with leaky
//! rectifiers -> one sigmoid output. Probabilities inside every logarithm are
//! clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`; past the clamp the loss is flat
//! and so is its gradient.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::generator::Generator;
use crate::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(&self, a: f64) -> f64 {
        match *self {
            Activation::LeakyRelu { slope } => {
                if a > 0.0 {
                    a
                } else {
                    slope * a
                }
            }
            Activation::Sigmoid => sigmoid(a),
            Activation::Identity => a,
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(&self, a: f64) -> f64 {
        match *self {
            Activation::LeakyRelu { slope } => {
                if a > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(a);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `y = act(W x + b)` with `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorParams {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer pre-activations and outputs of one forward pass.
struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: f64,
}

impl DiscriminatorParams {
    /// Default topology `input -> 64 -> 32 -> 1`, leaky slope 0.2.
    pub fn new_default<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Result<Self> {
        Self::glorot(input_dim, &[64, 32], 0.2, rng)
    }

    /// Zero biases, weights uniform in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden, slope)?;
        for layer in &mut net.layers {
            let s = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            let dist = Uniform::new_inclusive(-s, s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for w in &mut layer.weights {
                *w = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn zeros(input_dim: usize, hidden: &[usize], slope: f64) -> Result<Self> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
                activation: if i + 2 == widths.len() {
                    Activation::Sigmoid
                } else {
                    Activation::LeakyRelu { slope }
                },
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("discriminator has no layers".into()))?;
        let mut width = first.inputs;
        for (i, l) in self.layers.iter().enumerate() {
            if l.inputs != width || l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::InvalidArgument(format!("layer {i} has inconsistent shape")));
            }
            width = l.outputs;
        }
        if width != 1 {
            return Err(Error::InvalidArgument(format!("final width is {width}, expected 1")));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    /// Layer by layer, weights then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                what: "discriminator parameters",
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::LengthMismatch {
                what: "discriminator input",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for l in &self.layers {
            let a = l.pre_activation(&h);
            let next = a.iter().map(|&v| l.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(a);
        }
        Trace {
            inputs,
            pre,
            output: h[0],
        }
    }

    /// `D(x)`, clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.trace(x).output.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
    }

    /// Backpropagates `upstream = dLoss/dD_raw` through one traced pass,
    /// accumulating parameter gradients into `grad` and returning `dLoss/dx`.
    fn backward(&self, t: &Trace, upstream: f64, grad: &mut [f64]) -> Vec<f64> {
        let mut delta = vec![upstream];
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.n_params();
        }
        for (idx, l) in self.layers.iter().enumerate().rev() {
            let dz: Vec<f64> = delta
                .iter()
                .zip(&t.pre[idx])
                .map(|(d, &a)| d * l.activation.derivative(a))
                .collect();
            let input = &t.inputs[idx];
            let base = offsets[idx];
            for (o, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &mut grad[base + o * l.inputs..base + (o + 1) * l.inputs];
                for (w, &xi) in row.iter_mut().zip(input) {
                    *w += g * xi;
                }
                grad[base + l.weights.len() + o] += g;
            }
            let mut next = vec![0.0; l.inputs];
            for (o, &g) in dz.iter().enumerate() {
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += g * w;
                }
            }
            delta = next;
        }
        delta
    }

    /// `dD/dx` with the output clamp applied (zero when clamped).
    pub fn input_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let t = self.trace(x);
        let d = t.output;
        let mut scratch = vec![0.0; self.n_params()];
        let active = clamp_active(d);
        let gx = self.backward(&t, if active { 1.0 } else { 0.0 }, &mut scratch);
        Ok((d.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP), gx))
    }
}

fn clamp_active(d: f64) -> bool {
    d > PROB_CLAMP && d < 1.0 - PROB_CLAMP
}

fn non_empty(batch: &[Vec<f64>], what: &str) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InsufficientSamples(format!("empty {what} batch")));
    }
    Ok(())
}

/// `mean log D(real) + mean log(1 - D(fake))`; larger is a better classifier.
pub fn loss_discriminator(d: &DiscriminatorParams, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
    non_empty(real, "real")?;
    non_empty(fake, "fake")?;
    let mut real_term = 0.0;
    for x in real {
        real_term += d.forward(x)?.ln();
    }
    let mut fake_term = 0.0;
    for x in fake {
        fake_term += (1.0 - d.forward(x)?).ln();
    }
    Ok(real_term / real.len() as f64 + fake_term / fake.len() as f64)
}

/// `-mean log D(fake)`
pub fn loss_generator(d: &DiscriminatorParams, fake: &[Vec<f64>]) -> Result<f64> {
    non_empty(fake, "fake")?;
    let mut sum = 0.0;
    for x in fake {
        sum -= d.forward(x)?.ln();
    }
    Ok(sum / fake.len() as f64)
}

/// Gradient of `-L_D` with respect to the flattened discriminator parameters.
pub fn grads_discriminator(d: &DiscriminatorParams, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<Vec<f64>> {
    non_empty(real, "real")?;
    non_empty(fake, "fake")?;
    for x in real.iter().chain(fake) {
        d.check_input(x)?;
    }
    let n = d.n_params();
    let mut grad = vec![0.0; n];
    let wr = 1.0 / real.len() as f64;
    let wf = 1.0 / fake.len() as f64;
    for x in real {
        let t = d.trace(x);
        // d(-log D)/dD
        if clamp_active(t.output) {
            d.backward(&t, -wr / t.output, &mut grad);
        }
    }
    for x in fake {
        let t = d.trace(x);
        // d(-log(1-D))/dD
        if clamp_active(t.output) {
            d.backward(&t, wf / (1.0 - t.output), &mut grad);
        }
    }
    Ok(grad)
}

/// Gradient of `L_G` with respect to the generator parameters, chained through
/// the exact generator Jacobian (`x = -<σ_z>`).
pub fn grad_generator_params(
    d: &DiscriminatorParams,
    generator: &Generator,
    latents: &[Vec<f64>],
) -> Result<Vec<f64>> {
    Ok(generator_loss_and_grad(d, generator, latents)?.1)
}

/// `(L_G, dL_G/dφ_g)` for one latent batch. Per-sample work runs in parallel;
/// the reduction is sequential so results do not depend on the thread count.
pub fn generator_loss_and_grad(
    d: &DiscriminatorParams,
    generator: &Generator,
    latents: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    non_empty(latents, "latent")?;
    if d.input_dim() != generator.layout.n_qubits {
        return Err(Error::LengthMismatch {
            what: "discriminator input vs generator qubits",
            expected: generator.layout.n_qubits,
            actual: d.input_dim(),
        });
    }
    let per_sample: Vec<(f64, Vec<f64>)> = latents
        .par_iter()
        .map(|z| -> Result<(f64, Vec<f64>)> {
            let jac = generator.jacobian(z)?;
            let x: Vec<f64> = jac.expectations.iter().map(|e| -e).collect();
            let (dval, dx) = d.input_gradient(&x)?;
            // d(-log D)/dφ = -(1/D) Σ_i dD/dx_i · dx_i/dφ, with dx_i/dφ = -J_i.
            let mut g = vec![0.0; generator.n_params()];
            for (row, &dxi) in jac.rows.iter().zip(&dx) {
                let coeff = dxi / dval;
                if coeff == 0.0 {
                    continue;
                }
                for (gp, j) in g.iter_mut().zip(row) {
                    *gp += coeff * j;
                }
            }
            Ok((-dval.ln(), g))
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / latents.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; generator.n_params()];
    for (l, g) in per_sample {
        loss += l * scale;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b * scale;
        }
    }
    Ok((loss, grad))
}

/// ADADELTA with a learning-rate multiplier:
///
/// ```text
/// E[g²]  <- ρ E[g²] + (1-ρ) g²
/// Δ      = -lr · sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g
/// E[Δ²]  <- ρ E[Δ²] + (1-ρ) (Δ/lr)²
/// ```
///
/// The unscaled update `Δ/lr` feeds the second accumulator, as in the common
/// framework implementations that expose a learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaState {
    pub rho: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub accum_grad_sq: Vec<f64>,
    pub accum_update_sq: Vec<f64>,
    /// Number of updates applied so far.
    pub steps: u64,
}

impl AdadeltaState {
    pub const DEFAULT_RHO: f64 = 0.95;
    pub const DEFAULT_EPSILON: f64 = 1e-7;

    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self::with_constants(n_params, learning_rate, Self::DEFAULT_RHO, Self::DEFAULT_EPSILON)
    }

    pub fn with_constants(n_params: usize, learning_rate: f64, rho: f64, epsilon: f64) -> Self {
        Self {
            rho,
            epsilon,
            learning_rate,
            accum_grad_sq: vec![0.0; n_params],
            accum_update_sq: vec![0.0; n_params],
            steps: 0,
        }
    }

    /// In-place variant of [`adadelta_step`].
    pub fn step_in_place(&mut self, params: &mut [f64], gradient: &[f64]) -> Result<()> {
        let n = self.accum_grad_sq.len();
        if params.len() != n || gradient.len() != n {
            return Err(Error::LengthMismatch {
                what: "optimizer state vs parameters",
                expected: n,
                actual: if params.len() != n { params.len() } else { gradient.len() },
            });
        }
        let (rho, eps, lr) = (self.rho, self.epsilon, self.learning_rate);
        for i in 0..n {
            let g = gradient[i];
            let eg = rho * self.accum_grad_sq[i] + (1.0 - rho) * g * g;
            let unit = (self.accum_update_sq[i] + eps).sqrt() / (eg + eps).sqrt() * g;
            self.accum_grad_sq[i] = eg;
            self.accum_update_sq[i] = rho * self.accum_update_sq[i] + (1.0 - rho) * unit * unit;
            params[i] -= lr * unit;
        }
        self.steps += 1;
        Ok(())
    }
}

/// One ADADELTA update; returns new parameters and state.
pub fn adadelta_step(state: &AdadeltaState, params: &[f64], gradient: &[f64]) -> Result<(Vec<f64>, AdadeltaState)> {
    let mut next_state = state.clone();
    let mut next = params.to_vec();
    next_state.step_in_place(&mut next, gradient)?;
    Ok((next, next_state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{Architecture, CircuitLayout};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    /// Straight matrix arithmetic, no tracing or layer abstraction.
    fn oracle_forward(d: &DiscriminatorParams, x: &[f64]) -> f64 {
        let mut h = x.to_vec();
        for l in &d.layers {
            let mut next = vec![0.0; l.outputs];
            for o in 0..l.outputs {
                let mut a = l.biases[o];
                for i in 0..l.inputs {
                    a += l.weights[o * l.inputs + i] * h[i];
                }
                next[o] = match l.activation {
                    Activation::LeakyRelu { slope } => if a > 0.0 { a } else { slope * a },
                    Activation::Sigmoid => 1.0 / (1.0 + (-a).exp()),
                    Activation::Identity => a,
                };
            }
            h = next;
        }
        h[0]
    }

    #[test]
    fn zero_network_outputs_one_half() {
        let d = DiscriminatorParams::zeros(3, &[64, 32], 0.2).unwrap();
        assert_eq!(d.forward(&[0.3, -0.2, 0.9]).unwrap(), 0.5);
        let single = DiscriminatorParams {
            layers: vec![DenseLayer { inputs: 1, outputs: 1, weights: vec![1.0], biases: vec![0.0], activation: Activation::Sigmoid }],
        };
        assert_eq!(single.forward(&[0.0]).unwrap(), 0.5);
        assert!(single.forward(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn forward_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DiscriminatorParams::glorot(3, &[8, 5], 0.2, &mut rng).unwrap();
        for x in batch(20, 3, &mut rng) {
            assert!((d.forward(&x).unwrap() - oracle_forward(&d, &x)).abs() < 1e-10);
        }
    }

    #[test]
    fn output_is_clamped() {
        let single = DiscriminatorParams {
            layers: vec![DenseLayer { inputs: 1, outputs: 1, weights: vec![100.0], biases: vec![0.0], activation: Activation::Sigmoid }],
        };
        assert_eq!(single.forward(&[1.0]).unwrap(), 1.0 - PROB_CLAMP);
        assert_eq!(single.forward(&[-1.0]).unwrap(), PROB_CLAMP);
        let g = grads_discriminator(&single, &[vec![1.0]], &[vec![-1.0]]).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn loss_values_for_constant_classifiers() {
        let d = DiscriminatorParams::zeros(2, &[4], 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (r, f) = (batch(7, 2, &mut rng), batch(5, 2, &mut rng));
        assert!((loss_discriminator(&d, &r, &f).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        assert!((loss_generator(&d, &f).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(loss_generator(&d, &[]).is_err());
        assert!(loss_discriminator(&d, &[], &f).is_err());

        // D(x) = sigmoid(a·x): with real at +1 and fake at -1 pick a so D(real) = 1-δ.
        let delta: f64 = 1e-3;
        let a = ((1.0 - delta) / delta).ln();
        let sharp = DiscriminatorParams {
            layers: vec![DenseLayer { inputs: 1, outputs: 1, weights: vec![a], biases: vec![0.0], activation: Activation::Sigmoid }],
        };
        let ld = loss_discriminator(&sharp, &[vec![1.0]], &[vec![-1.0]]).unwrap();
        assert!((ld - 2.0 * (1.0 - delta).ln()).abs() < 1e-12);
        let lg = loss_generator(&sharp, &[vec![1.0]]).unwrap();
        assert!((lg + (1.0 - delta).ln()).abs() < 1e-12);
    }

    #[test]
    fn losses_match_per_sample_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = DiscriminatorParams::glorot(3, &[6, 4], 0.2, &mut rng).unwrap();
        let (r, f) = (batch(9, 3, &mut rng), batch(11, 3, &mut rng));
        let o = |x: &Vec<f64>| oracle_forward(&d, x).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let ld = r.iter().map(|x| o(x).ln()).sum::<f64>() / 9.0 + f.iter().map(|x| (1.0 - o(x)).ln()).sum::<f64>() / 11.0;
        assert!((loss_discriminator(&d, &r, &f).unwrap() - ld).abs() < 1e-12);
        let lg = -f.iter().map(|x| o(x).ln()).sum::<f64>() / 11.0;
        assert!((loss_generator(&d, &f).unwrap() - lg).abs() < 1e-12);
    }

    #[test]
    fn discriminator_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..8 {
            let mut d = DiscriminatorParams::glorot(3, &[6], 0.2, &mut rng).unwrap();
            // Nonzero biases so no unit sits exactly at the leaky kink.
            let mut flat = d.to_flat();
            for v in &mut flat {
                *v += rng.random_range(-0.1..0.1);
            }
            d.set_flat(&flat).unwrap();
            let (r, f) = (batch(6, 3, &mut rng), batch(6, 3, &mut rng));
            let g = grads_discriminator(&d, &r, &f).unwrap();
            let h = 1e-6;
            for j in 0..flat.len() {
                let mut plus = d.clone();
                let mut minus = d.clone();
                let mut fp = flat.clone();
                let mut fm = flat.clone();
                fp[j] += h;
                fm[j] -= h;
                plus.set_flat(&fp).unwrap();
                minus.set_flat(&fm).unwrap();
                let fd = -(loss_discriminator(&plus, &r, &f).unwrap() - loss_discriminator(&minus, &r, &f).unwrap()) / (2.0 * h);
                let tol = 1e-5 * fd.abs().max(1.0);
                assert!((g[j] - fd).abs() < tol, "param {j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn output_bias_gradient_vanishes_for_symmetric_constant_classifier() {
        let d = DiscriminatorParams::zeros(2, &[4], 0.2).unwrap();
        let b = vec![vec![0.2, -0.4], vec![0.9, 0.1]];
        let g = grads_discriminator(&d, &b, &b).unwrap();
        let last = *g.last().unwrap();
        assert!(last.abs() < 1e-15);
    }

    #[test]
    fn gradient_is_linear_in_loss_scale() {
        // Duplicating every sample leaves the mean loss (and its gradient)
        // unchanged; scaling the batch weights by c scales the gradient by c.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = DiscriminatorParams::glorot(2, &[5], 0.2, &mut rng).unwrap();
        let (r, f) = (batch(4, 2, &mut rng), batch(4, 2, &mut rng));
        let g1 = grads_discriminator(&d, &r, &f).unwrap();
        let rr: Vec<Vec<f64>> = r.iter().chain(&r).cloned().collect();
        let ff: Vec<Vec<f64>> = f.iter().chain(&f).cloned().collect();
        let g2 = grads_discriminator(&d, &rr, &ff).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12);
        }
        // Real-only half of the loss plus fake-only half equals the whole.
        let c = 3.0;
        let scaled: Vec<f64> = g1.iter().map(|v| c * v).collect();
        let sum: f64 = scaled.iter().zip(&g1).map(|(s, g)| s - c * g).sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn generator_gradient_matches_end_to_end_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let layout = CircuitLayout::gaussian_3d();
        for _ in 0..3 {
            let d = DiscriminatorParams::glorot(3, &[8, 4], 0.2, &mut rng).unwrap();
            let g = Generator::initialize(Architecture::Style, layout.clone(), 1.0, &mut rng).unwrap();
            let zs: Vec<Vec<f64>> = (0..4).map(|_| crate::generator::LatentVector::sample(3, &mut rng).0).collect();
            let grad = grad_generator_params(&d, &g, &zs).unwrap();
            let loss = |p: &[f64]| {
                let gen = Generator::new(Architecture::Style, layout.clone(), p.to_vec()).unwrap();
                let fake: Vec<Vec<f64>> = zs.iter().map(|z| gen.sample_exact(z).unwrap()).collect();
                loss_generator(&d, &fake).unwrap()
            };
            let h = 1e-5;
            for j in 0..g.n_params() {
                let mut p = g.params.clone();
                let mut m = g.params.clone();
                p[j] += h;
                m[j] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                assert!((grad[j] - fd).abs() < 1e-4, "param {j}: {} vs {fd}", grad[j]);
            }
        }
    }

    #[test]
    fn generator_gradient_vanishes_when_discriminator_ignores_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut d = DiscriminatorParams::glorot(1, &[4], 0.2, &mut rng).unwrap();
        d.layers[0].weights.iter_mut().for_each(|w| *w = 0.0);
        d.layers[0].biases = vec![0.3, -0.2, 0.5, 0.1];
        let g = Generator::initialize(Architecture::Style, CircuitLayout::gamma_1d(), 1.0, &mut rng).unwrap();
        let grad = grad_generator_params(&d, &g, &[vec![0.4], vec![-1.2]]).unwrap();
        assert!(grad.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_gate_generator_gradient_closed_form() {
        // Only the final RY is active; x = -cos θ, D(x) = sigmoid(w x + b).
        // L = -log sigmoid(w x + b) => dL/dθ = -(1 - D) · w · sin θ.
        let (w, b, theta) = (1.3, -0.2, 0.9);
        let d = DiscriminatorParams {
            layers: vec![DenseLayer { inputs: 1, outputs: 1, weights: vec![w], biases: vec![b], activation: Activation::Sigmoid }],
        };
        let mut params = vec![0.0; 10];
        params[9] = theta;
        let g = Generator::new(Architecture::Style, CircuitLayout::gamma_1d(), params).unwrap();
        let grad = grad_generator_params(&d, &g, &[vec![0.0]]).unwrap();
        let x = -theta.cos();
        let dval = 1.0 / (1.0 + (-(w * x + b)).exp());
        let expected = -(1.0 - dval) * w * theta.sin();
        assert!((grad[9] - expected).abs() < 1e-12);
    }

    #[test]
    fn adadelta_zero_gradient_keeps_parameters() {
        let mut s = AdadeltaState::new(2, 0.1);
        s.accum_grad_sq = vec![0.4, 0.2];
        s.accum_update_sq = vec![0.1, 0.3];
        let (p, s2) = adadelta_step(&s, &[1.0, -2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert!((s2.accum_grad_sq[0] - 0.95 * 0.4).abs() < 1e-15);
        assert!((s2.accum_update_sq[1] - 0.95 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn adadelta_first_step_hand_computation() {
        let (g, rho, eps, lr): (f64, f64, f64, f64) = (1.0, 0.95, 1e-7, 0.1);
        let s = AdadeltaState::with_constants(1, lr, rho, eps);
        let (p, _) = adadelta_step(&s, &[0.0], &[g]).unwrap();
        let expected = -lr * eps.sqrt() / ((1.0 - rho) * g * g + eps).sqrt() * g;
        assert!((p[0] - expected).abs() < 1e-18);
        assert!((p[0] + 1.4142121e-4).abs() < 1e-11);
    }

    #[test]
    fn adadelta_two_step_hand_trace() {
        // Hand trace with g = 1, ρ = 0.95, ε = 1e-7, lr = 0.1. Under a constant
        // gradient the second step is about 1.27% larger than the first: the
        // update accumulator grows faster than the gradient accumulator.
        let s = AdadeltaState::new(1, 0.1);
        let (p1, s1) = adadelta_step(&s, &[0.0], &[1.0]).unwrap();
        let (p2, s2) = adadelta_step(&s1, &p1, &[1.0]).unwrap();
        assert!((p1[0] + 1.4142121481616534e-4).abs() < 1e-16);
        assert!((p2[0] + 2.846440445651036e-4).abs() < 1e-16);
        let ratio = (p2[0] - p1[0]) / p1[0];
        assert!((ratio - 1.0127393540998417).abs() < 1e-9);
        assert_eq!(s2.steps, 2);
        // Shrinking gradients do give shrinking steps.
        let (p3, _) = adadelta_step(&s1, &p1, &[0.1]).unwrap();
        assert!((p3[0] - p1[0]).abs() < p1[0].abs());
    }

    #[test]
    fn adadelta_shape_mismatch() {
        let s = AdadeltaState::new(2, 0.1);
        assert!(adadelta_step(&s, &[0.0], &[1.0]).is_err());
    }
}
