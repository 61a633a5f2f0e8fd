//! The trainable classifier.
//!
//! A softmax output layer, optionally preceded by one ReLU hidden layer.
//! Parameters are `f64` throughout. Training runs shuffled mini-batch Adam on
//! the mean cross-entropy and stops at the first epoch whose training
//! accuracy reaches the configured threshold.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::pool::Sample;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Width of the ReLU hidden layer; `0` means plain softmax regression.
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub target_train_accuracy: f64,
    pub max_epochs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_units: 0,
            learning_rate: 1.5e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 32,
            target_train_accuracy: 0.98,
            max_epochs: 500,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.target_train_accuracy > 0.0 && self.target_train_accuracy <= 1.0) {
            return fail(format!(
                "target_train_accuracy must lie in (0, 1], got {}",
                self.target_train_accuracy
            ));
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return fail(format!("{name} must lie in [0, 1), got {beta}"));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return fail(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        Ok(())
    }
}

/// A dense layer `y = W x + b` with `W` stored row-major, `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Gradients (or Adam moments) shaped like a model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(layers: &[Layer]) -> Self {
        Self {
            layers: layers.iter().map(|l| Layer::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layers: Vec<Layer>,
    first_moment: Gradients,
    second_moment: Gradients,
    step_count: u64,
}

/// Outcome of one [`Model::train_to_threshold`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_train_accuracy: f64,
    pub threshold_reached: bool,
}

struct Activations {
    /// Hidden pre-activations, when a hidden layer exists.
    hidden_pre: Option<Vec<f64>>,
    /// Input to the output layer.
    penultimate: Vec<f64>,
    logits: Vec<f64>,
}

impl Model {
    /// A model with every weight and bias set to zero.
    pub fn zeros(config: &ModelConfig, input_dim: usize, num_classes: usize) -> Self {
        let layers = if config.hidden_units == 0 {
            vec![Layer::zeros(input_dim, num_classes)]
        } else {
            vec![
                Layer::zeros(input_dim, config.hidden_units),
                Layer::zeros(config.hidden_units, num_classes),
            ]
        };
        Self::from_layers(layers).expect("zero layers are consistent")
    }

    /// Weights uniform in `±1/√fan_in`, zero biases, zero Adam state.
    pub fn init<R: Rng + ?Sized>(
        config: &ModelConfig,
        input_dim: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidInput("input dimension must be at least 1".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let mut model = Self::zeros(config, input_dim, num_classes);
        for layer in &mut model.layers {
            let scale = 1.0 / (layer.in_dim as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-scale..=scale);
            }
        }
        Ok(model)
    }

    /// Builds a model from explicit layers; consecutive dimensions must chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() || layers.len() > 2 {
            return Err(Error::InvalidInput(format!(
                "expected 1 or 2 layers, got {}",
                layers.len()
            )));
        }
        for layer in &layers {
            if layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.bias.len() != layer.out_dim
                || layer.in_dim == 0
            {
                return Err(Error::InvalidInput("layer buffers do not match its shape".into()));
            }
        }
        if layers.len() == 2 && layers[0].out_dim != layers[1].in_dim {
            return Err(Error::InvalidInput("layer dimensions do not chain".into()));
        }
        if layers.last().map_or(0, |l| l.out_dim) < 2 {
            return Err(Error::InvalidInput("output layer needs at least 2 classes".into()));
        }
        let first_moment = Gradients::zeros_like(&layers);
        let second_moment = first_moment.clone();
        Ok(Self {
            layers,
            first_moment,
            second_moment,
            step_count: 0,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Direct parameter access, for probes and finite-difference checks.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.output_layer().out_dim
    }

    /// Width of the layer feeding the softmax.
    pub fn penultimate_dim(&self) -> usize {
        self.output_layer().in_dim
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(Layer::num_parameters).sum()
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

    fn output_layer(&self) -> &Layer {
        self.layers.last().expect("model has at least one layer")
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.input_dim(),
                features.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("feature {i} is not finite")));
        }
        Ok(())
    }

    fn activations(&self, features: &[f64]) -> Activations {
        match self.layers.as_slice() {
            [output] => Activations {
                hidden_pre: None,
                penultimate: features.to_vec(),
                logits: output.forward(features),
            },
            [hidden, output] => {
                let pre = hidden.forward(features);
                let post: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
                let logits = output.forward(&post);
                Activations {
                    hidden_pre: Some(pre),
                    penultimate: post,
                    logits,
                }
            }
            _ => unreachable!("layer count is validated on construction"),
        }
    }

    /// Raw output-layer scores.
    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(self.activations(features).logits)
    }

    /// Activation feeding the output layer (the input itself without a hidden
    /// layer).
    pub fn penultimate(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(self.activations(features).penultimate)
    }

    /// Class probabilities `P(y | x)`.
    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(softmax(&self.activations(features).logits))
    }

    /// Predicted class, ties to the lowest index.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(features)?))
    }

    /// `vec((p - e_ŷ) ⊗ h)`: the cross-entropy gradient with respect to the
    /// output weights when the label is the model's own prediction `ŷ`.
    ///
    /// Entry `c * H + j` is `(p_c - [c = ŷ]) * h_j`.
    pub fn grad_embedding(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        let acts = self.activations(features);
        let mut residual = softmax(&acts.logits);
        let predicted = argmax(&residual);
        residual[predicted] -= 1.0;
        Ok(residual
            .iter()
            .flat_map(|&r| acts.penultimate.iter().map(move |&h| r * h))
            .collect())
    }

    /// Mean cross-entropy of `samples`.
    pub fn loss(&self, samples: &[&Sample]) -> Result<f64> {
        self.validate_batch(samples)?;
        let total: f64 = samples
            .iter()
            .map(|s| cross_entropy(&self.activations(&s.features).logits, s.label))
            .sum();
        Ok(total / samples.len() as f64)
    }

    /// Mean cross-entropy of `samples` and its gradient with respect to every
    /// parameter.
    pub fn loss_and_gradients(&self, samples: &[&Sample]) -> Result<(f64, Gradients)> {
        self.validate_batch(samples)?;
        Ok(self.backward(samples))
    }

    fn validate_batch(&self, samples: &[&Sample]) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        for s in samples {
            self.check_input(&s.features)?;
            if s.label >= self.num_classes() {
                return Err(Error::InvalidInput(format!(
                    "sample {} has label {} but the model has {} classes",
                    s.id,
                    s.label,
                    self.num_classes()
                )));
            }
        }
        Ok(())
    }

    fn backward(&self, samples: &[&Sample]) -> (f64, Gradients) {
        let mut grads = Gradients::zeros_like(&self.layers);
        let scale = 1.0 / samples.len() as f64;
        let mut loss = 0.0;
        let out_index = self.layers.len() - 1;
        for sample in samples {
            let acts = self.activations(&sample.features);
            loss += cross_entropy(&acts.logits, sample.label);

            let mut delta = softmax(&acts.logits);
            delta[sample.label] -= 1.0;
            delta.iter_mut().for_each(|d| *d *= scale);

            accumulate_outer(&mut grads.layers[out_index], &delta, &acts.penultimate);

            if let Some(pre) = &acts.hidden_pre {
                let output = &self.layers[out_index];
                let mut hidden_delta = vec![0.0; output.in_dim];
                for (row, d) in output.weights.chunks_exact(output.in_dim).zip(&delta) {
                    for (hd, w) in hidden_delta.iter_mut().zip(row) {
                        *hd += w * d;
                    }
                }
                for (hd, &z) in hidden_delta.iter_mut().zip(pre) {
                    if z <= 0.0 {
                        *hd = 0.0;
                    }
                }
                accumulate_outer(&mut grads.layers[0], &hidden_delta, &sample.features);
            }
        }
        (loss * scale, grads)
    }

    fn adam_step(&mut self, grads: &Gradients, config: &ModelConfig) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let correction1 = 1.0 - config.adam_beta1.powi(t);
        let correction2 = 1.0 - config.adam_beta2.powi(t);
        let params = self.layers.iter_mut().flat_map(|l| {
            l.weights.iter_mut().chain(l.bias.iter_mut())
        });
        let m = self
            .first_moment
            .layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()));
        let v = self
            .second_moment
            .layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()));
        let g = grads.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()));
        for (((param, m), v), &g) in params.zip(m).zip(v).zip(g) {
            *m = config.adam_beta1 * *m + (1.0 - config.adam_beta1) * g;
            *v = config.adam_beta2 * *v + (1.0 - config.adam_beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *param -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
    }

    /// Trains a copy of `self` on `labeled` until the training accuracy after
    /// an epoch reaches `config.target_train_accuracy`, or `max_epochs` have
    /// run. At least one epoch always runs.
    pub fn train_to_threshold<R: Rng + ?Sized>(
        &self,
        labeled: &[&Sample],
        config: &ModelConfig,
        rng: &mut R,
    ) -> Result<(Model, TrainReport)> {
        config.validate()?;
        if labeled.is_empty() {
            return Err(Error::CannotTrain("the labeled set is empty".into()));
        }
        self.validate_batch(labeled)?;

        let mut model = self.clone();
        let mut order: Vec<usize> = (0..labeled.len()).collect();
        let mut batch: Vec<&Sample> = Vec::with_capacity(config.batch_size);
        let mut accuracy = 0.0;
        for epoch in 1..=config.max_epochs {
            order.shuffle(rng);
            for chunk in order.chunks(config.batch_size) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| labeled[i]));
                let (loss, grads) = model.backward(&batch);
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        step: model.step_count + 1,
                    });
                }
                model.adam_step(&grads, config);
            }
            accuracy = model.accuracy_unchecked(labeled.iter().copied());
            if accuracy >= config.target_train_accuracy {
                return Ok((
                    model,
                    TrainReport {
                        epochs_run: epoch,
                        final_train_accuracy: accuracy,
                        threshold_reached: true,
                    },
                ));
            }
        }
        Ok((
            model,
            TrainReport {
                epochs_run: config.max_epochs,
                final_train_accuracy: accuracy,
                threshold_reached: false,
            },
        ))
    }

    /// Fraction of `samples` whose predicted class equals the label.
    pub fn evaluate_accuracy<'a, I>(&self, samples: I) -> Result<f64>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let mut total = 0usize;
        let mut correct = 0usize;
        for sample in samples {
            total += 1;
            if self.predict(&sample.features)? == sample.label {
                correct += 1;
            }
        }
        if total == 0 {
            return Err(Error::InvalidInput("cannot evaluate on an empty set".into()));
        }
        Ok(correct as f64 / total as f64)
    }

    fn accuracy_unchecked<'a>(&self, samples: impl Iterator<Item = &'a Sample>) -> f64 {
        let mut total = 0usize;
        let mut correct = 0usize;
        for s in samples {
            total += 1;
            if argmax(&self.activations(&s.features).logits) == s.label {
                correct += 1;
            }
        }
        correct as f64 / total as f64
    }
}

fn accumulate_outer(layer: &mut Layer, delta: &[f64], input: &[f64]) {
    for ((row, b), &d) in layer
        .weights
        .chunks_exact_mut(layer.in_dim)
        .zip(layer.bias.iter_mut())
        .zip(delta)
    {
        *b += d;
        for (w, x) in row.iter_mut().zip(input) {
            *w += d * x;
        }
    }
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    log_total - logits[label]
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
