//! A small fully connected feature extractor with a linear classifier head,
//! trained by explicit backpropagation.
//!
//! The extractor applies a leaky-ReLU after every hidden layer and projects
//! linearly into the latent space; the classifier is a single linear map from
//! latents to class scores. Everything is plain f64 with deterministic,
//! seeded initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::persistence::PointCloud;

/// Network shape: `input_dim -> hidden_layers ... -> latent_dim -> num_classes`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    #[serde(default)]
    pub hidden_layers: Vec<usize>,
    pub latent_dim: usize,
    pub num_classes: usize,
    #[serde(default = "default_slope")]
    pub leaky_relu_slope: f64,
}

fn default_slope() -> f64 {
    0.1
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("model.input_dim: must be at least 1"));
        }
        if self.latent_dim < 2 {
            return Err(Error::config("model.latent_dim: must be at least 2"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("model.num_classes: must be at least 2"));
        }
        if self.hidden_layers.iter().any(|&w| w == 0) {
            return Err(Error::config("model.hidden_layers: widths must be at least 1"));
        }
        if !self.leaky_relu_slope.is_finite() {
            return Err(Error::config("model.leaky_relu_slope: must be finite"));
        }
        Ok(())
    }

    /// Layer widths of the extractor including input and latent.
    fn phi_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(self.latent_dim);
        dims
    }
}

/// A dense layer, weights stored row-major as `[out_dim x in_dim]`.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    fn seeded<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        // Uniform in +-1/sqrt(fan_in).
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = (0..out_dim * in_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let bias = (0..out_dim).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            in_dim,
            out_dim,
            weight,
            bias,
        }
    }

    pub(crate) fn zeros_like(&self) -> Tensors {
        Tensors {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for o in 0..self.out_dim {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            out[o] += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }
}

/// Weight/bias buffers matching one layer (gradients, momentum).
#[derive(Debug, Clone)]
pub(crate) struct Tensors {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Extractor and classifier parameters plus SGD momentum buffers.
#[derive(Debug, Clone)]
pub struct ModelState {
    config: ModelConfig,
    pub(crate) phi: Vec<Linear>,
    pub(crate) gamma: Linear,
    pub(crate) phi_momentum: Vec<Tensors>,
    pub(crate) gamma_momentum: Tensors,
}

/// Cached per-sample activations for the backward pass.
pub(crate) struct ForwardTrace {
    /// Inputs to each extractor layer: `activations[k]` feeds layer k.
    pub activations: Vec<Vec<f64>>,
    /// Pre-activation outputs of the hidden layers only.
    pub pre_activations: Vec<Vec<f64>>,
    pub latent: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ModelState {
    /// Seeded deterministic initialization.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = config.phi_dims();
        let phi: Vec<Linear> = dims
            .windows(2)
            .map(|w| Linear::seeded(w[0], w[1], &mut rng))
            .collect();
        let gamma = Linear::seeded(config.latent_dim, config.num_classes, &mut rng);
        let phi_momentum = phi.iter().map(Linear::zeros_like).collect();
        let gamma_momentum = gamma.zeros_like();
        Ok(Self {
            config: config.clone(),
            phi,
            gamma,
            phi_momentum,
            gamma_momentum,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Rebuild from explicit parameters (used when loading checkpoints).
    /// Momentum buffers start at zero.
    pub(crate) fn from_parameters(
        config: ModelConfig,
        phi: Vec<Linear>,
        gamma: Linear,
    ) -> Result<Self> {
        config.validate()?;
        let dims = config.phi_dims();
        if phi.len() + 1 != dims.len() {
            return Err(Error::invalid_input(format!(
                "expected {} extractor layers, got {}",
                dims.len() - 1,
                phi.len()
            )));
        }
        for (k, layer) in phi.iter().enumerate() {
            if layer.in_dim != dims[k]
                || layer.out_dim != dims[k + 1]
                || layer.weight.len() != dims[k] * dims[k + 1]
                || layer.bias.len() != dims[k + 1]
            {
                return Err(Error::invalid_input(format!(
                    "extractor layer {k} has inconsistent shape"
                )));
            }
        }
        if gamma.in_dim != config.latent_dim
            || gamma.out_dim != config.num_classes
            || gamma.weight.len() != config.latent_dim * config.num_classes
            || gamma.bias.len() != config.num_classes
        {
            return Err(Error::invalid_input("classifier has inconsistent shape"));
        }
        let all = phi
            .iter()
            .chain(std::iter::once(&gamma))
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("parameters must be finite"));
        }
        let phi_momentum = phi.iter().map(Linear::zeros_like).collect();
        let gamma_momentum = gamma.zeros_like();
        Ok(Self {
            config,
            phi,
            gamma,
            phi_momentum,
            gamma_momentum,
        })
    }

    fn leaky(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x
        } else {
            self.config.leaky_relu_slope * x
        }
    }

    fn leaky_grad(&self, x: f64) -> f64 {
        if x >= 0.0 {
            1.0
        } else {
            self.config.leaky_relu_slope
        }
    }

    pub(crate) fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.config.input_dim {
            return Err(Error::invalid_input(format!(
                "input has dimension {}, expected {}",
                x.len(),
                self.config.input_dim
            )));
        }
        let hidden = self.phi.len() - 1;
        let mut activations = Vec::with_capacity(hidden + 1);
        let mut pre_activations = Vec::with_capacity(hidden);
        activations.push(x.to_vec());
        for k in 0..hidden {
            let z = self.phi[k].apply(activations.last().expect("nonempty"));
            let a = z.iter().map(|&v| self.leaky(v)).collect();
            pre_activations.push(z);
            activations.push(a);
        }
        let latent = self.phi[hidden].apply(activations.last().expect("nonempty"));
        let logits = self.gamma.apply(&latent);
        Ok(ForwardTrace {
            activations,
            pre_activations,
            latent,
            logits,
        })
    }

    /// Latent representations and class scores for a batch of inputs.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<(PointCloud, Vec<Vec<f64>>)> {
        if inputs.is_empty() {
            return Err(Error::invalid_input("forward pass needs at least one input"));
        }
        let mut latents = Vec::with_capacity(inputs.len());
        let mut logits = Vec::with_capacity(inputs.len());
        for x in inputs {
            let trace = self.forward_trace(x)?;
            latents.push(trace.latent);
            logits.push(trace.logits);
        }
        Ok((PointCloud::new(latents)?, logits))
    }

    /// Latent representations only.
    pub fn latents(&self, inputs: &[Vec<f64>]) -> Result<PointCloud> {
        Ok(self.forward(inputs)?.0)
    }

    /// Predicted 1-based class: argmax of the scores, ties broken toward the
    /// lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let trace = self.forward_trace(x)?;
        Ok(argmax_class(&trace.logits))
    }

    /// Accumulates parameter gradients for one sample.
    ///
    /// `dlogits` is the loss gradient at the class scores; `dlatent_extra` is
    /// an additional loss gradient applied directly at the latent (the
    /// connectivity penalty enters here). Both are summed before
    /// backpropagating through the extractor.
    pub(crate) fn backward_trace(
        &self,
        trace: &ForwardTrace,
        dlogits: &[f64],
        dlatent_extra: &[f64],
        phi_grads: &mut [Tensors],
        gamma_grads: &mut Tensors,
    ) {
        let latent_dim = self.config.latent_dim;
        // Classifier.
        let mut dlatent = dlatent_extra.to_vec();
        for k in 0..self.gamma.out_dim {
            let g = dlogits[k];
            gamma_grads.bias[k] += g;
            let row = &self.gamma.weight[k * latent_dim..(k + 1) * latent_dim];
            for j in 0..latent_dim {
                gamma_grads.weight[k * latent_dim + j] += g * trace.latent[j];
                dlatent[j] += g * row[j];
            }
        }
        // Latent projection (no activation).
        let hidden = self.phi.len() - 1;
        let mut upstream = dlatent;
        {
            let layer = &self.phi[hidden];
            let grads = &mut phi_grads[hidden];
            let input = &trace.activations[hidden];
            let mut dinput = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let g = upstream[o];
                grads.bias[o] += g;
                let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    grads.weight[o * layer.in_dim + i] += g * input[i];
                    dinput[i] += g * row[i];
                }
            }
            upstream = dinput;
        }
        // Hidden layers, last to first.
        for k in (0..hidden).rev() {
            let layer = &self.phi[k];
            let grads = &mut phi_grads[k];
            let input = &trace.activations[k];
            let pre = &trace.pre_activations[k];
            let mut dinput = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let g = upstream[o] * self.leaky_grad(pre[o]);
                grads.bias[o] += g;
                let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    grads.weight[o * layer.in_dim + i] += g * input[i];
                    dinput[i] += g * row[i];
                }
            }
            upstream = dinput;
        }
    }

    /// One SGD-with-momentum update:
    /// `g += wd * theta; v = mu * v + g; theta -= lr * v`, with separate
    /// weight decay for the extractor and the classifier.
    pub(crate) fn apply_sgd(
        &mut self,
        phi_grads: &[Tensors],
        gamma_grads: &Tensors,
        lr: f64,
        momentum: f64,
        weight_decay_phi: f64,
        weight_decay_gamma: f64,
    ) {
        for (k, layer) in self.phi.iter_mut().enumerate() {
            update_tensor(
                &mut layer.weight,
                &phi_grads[k].weight,
                &mut self.phi_momentum[k].weight,
                lr,
                momentum,
                weight_decay_phi,
            );
            update_tensor(
                &mut layer.bias,
                &phi_grads[k].bias,
                &mut self.phi_momentum[k].bias,
                lr,
                momentum,
                weight_decay_phi,
            );
        }
        update_tensor(
            &mut self.gamma.weight,
            &gamma_grads.weight,
            &mut self.gamma_momentum.weight,
            lr,
            momentum,
            weight_decay_gamma,
        );
        update_tensor(
            &mut self.gamma.bias,
            &gamma_grads.bias,
            &mut self.gamma_momentum.bias,
            lr,
            momentum,
            weight_decay_gamma,
        );
    }

    pub(crate) fn zero_grads(&self) -> (Vec<Tensors>, Tensors) {
        (
            self.phi.iter().map(Linear::zeros_like).collect(),
            self.gamma.zeros_like(),
        )
    }

    /// Flat view of all parameters, extractor layers then classifier, used by
    /// gradient checks.
    #[cfg(test)]
    pub(crate) fn parameters_mut(&mut self) -> Vec<&mut f64> {
        let mut out = Vec::new();
        for layer in &mut self.phi {
            out.extend(layer.weight.iter_mut());
            out.extend(layer.bias.iter_mut());
        }
        out.extend(self.gamma.weight.iter_mut());
        out.extend(self.gamma.bias.iter_mut());
        out
    }
}

fn update_tensor(
    theta: &mut [f64],
    grad: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    for i in 0..theta.len() {
        let g = grad[i] + weight_decay * theta[i];
        velocity[i] = momentum * velocity[i] + g;
        theta[i] -= lr * velocity[i];
    }
}

/// 1-based argmax with ties broken toward the lowest class.
pub fn argmax_class(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_2_2_2() -> ModelConfig {
        ModelConfig {
            input_dim: 2,
            hidden_layers: vec![2],
            latent_dim: 2,
            num_classes: 2,
            leaky_relu_slope: 0.1,
        }
    }

    fn hand_model() -> ModelState {
        let mut m = ModelState::init(&config_2_2_2(), 0).unwrap();
        m.phi[0].weight = vec![0.5, -0.25, 1.0, 0.75];
        m.phi[0].bias = vec![0.1, -0.2];
        m.phi[1].weight = vec![-1.0, 2.0, 0.5, 0.5];
        m.phi[1].bias = vec![0.0, 1.0];
        m.gamma.weight = vec![1.0, -1.0, 0.0, 2.0];
        m.gamma.bias = vec![0.5, -0.5];
        m
    }

    #[test]
    fn hand_computed_2_2_2_forward() {
        // x = (1, -2):
        //   pre1 = (0.5 + 0.5 + 0.1, 1 - 1.5 - 0.2) = (1.1, -0.7)
        //   act1 = (1.1, -0.07)                       (slope 0.1)
        //   latent = (-1.1 - 0.14, 0.55 - 0.035 + 1) = (-1.24, 1.515)
        //   logits = (-1.24 - 1.515 + 0.5, 3.03 - 0.5) = (-2.255, 2.53)
        let m = hand_model();
        let (latents, logits) = m.forward(&[vec![1.0, -2.0]]).unwrap();
        let z = latents.point(0);
        assert!((z[0] + 1.24).abs() < 1e-12 && (z[1] - 1.515).abs() < 1e-12);
        assert!((logits[0][0] + 2.255).abs() < 1e-12 && (logits[0][1] - 2.53).abs() < 1e-12);
        assert_eq!(m.predict(&[1.0, -2.0]).unwrap(), 2);
    }

    #[test]
    fn zero_weight_model_breaks_ties_toward_lowest_class() {
        let mut m = ModelState::init(&config_2_2_2(), 1).unwrap();
        for layer in &mut m.phi {
            layer.weight.iter_mut().for_each(|w| *w = 0.0);
            layer.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        m.gamma.weight.iter_mut().for_each(|w| *w = 0.0);
        m.gamma.bias.iter_mut().for_each(|b| *b = 0.0);
        assert_eq!(m.predict(&[3.0, -4.0]).unwrap(), 1);
    }

    #[test]
    fn single_layer_identity_reproduces_inputs() {
        let cfg = ModelConfig {
            input_dim: 2,
            hidden_layers: vec![],
            latent_dim: 2,
            num_classes: 2,
            leaky_relu_slope: 0.1,
        };
        let mut m = ModelState::init(&cfg, 2).unwrap();
        m.phi[0].weight = vec![1.0, 0.0, 0.0, 1.0];
        m.phi[0].bias = vec![0.0, 0.0];
        let (latents, _) = m.forward(&[vec![0.3, -0.7], vec![2.0, 5.0]]).unwrap();
        assert_eq!(latents.point(0), &[0.3, -0.7]);
        assert_eq!(latents.point(1), &[2.0, 5.0]);
    }

    #[test]
    fn init_is_seed_deterministic_and_bounded() {
        let cfg = config_2_2_2();
        let a = ModelState::init(&cfg, 7).unwrap();
        let b = ModelState::init(&cfg, 7).unwrap();
        assert_eq!(a.phi[0].weight, b.phi[0].weight);
        assert_eq!(a.gamma.bias, b.gamma.bias);
        let bound = 1.0 / (2.0_f64).sqrt();
        assert!(a.phi[0].weight.iter().all(|w| w.abs() <= bound));
        let c = ModelState::init(&cfg, 8).unwrap();
        assert_ne!(a.phi[0].weight, c.phi[0].weight);
    }

    #[test]
    fn forward_rejects_shape_mismatch() {
        let m = hand_model();
        assert!(m.forward(&[vec![1.0]]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = config_2_2_2();
        cfg.latent_dim = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = config_2_2_2();
        cfg.num_classes = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = config_2_2_2();
        cfg.hidden_layers = vec![0];
        assert!(cfg.validate().is_err());
    }
}
