//! Online identification of the aggregated partner control law.
//!
//! Every real step the agent records the state together with the partner
//! control it sensed one step later, and fits a small regression network to
//! a fresh subset of the identification buffer. No reward is involved.

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PalError, Result};
use crate::nn::{Adam, BackwardSeed, LossKind, Mlp, WeightRange};
use crate::replay::{ReplayBuffer, SamplingStrategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentificationConfig {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    /// Items; 100 s of reality at 0.05 s per step. Set by the harness from
    /// seconds, so not part of config files.
    #[serde(skip)]
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub train_fraction: f64,
    pub minibatch_size: usize,
    pub strategy: SamplingStrategy,
    pub hidden_weight_range: f64,
    pub output_weight_range: f64,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 3,
            hidden_units: 16,
            buffer_capacity: 2000,
            learning_rate: 0.01,
            epochs_per_update: 4,
            train_fraction: 0.10,
            minibatch_size: 20,
            strategy: SamplingStrategy::Cer,
            hidden_weight_range: 1.0,
            output_weight_range: 1e-4,
        }
    }
}

impl IdentificationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(PalError::Config(format!("identification: {what}")));
        if self.hidden_layers == 0 || self.hidden_units == 0 {
            return bad("network needs at least one hidden layer with units");
        }
        if self.buffer_capacity == 0 || self.minibatch_size == 0 || self.epochs_per_update == 0 {
            return bad("capacity, mini-batch size and epochs must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("train_fraction must be in (0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if let SamplingStrategy::Per { alpha } = self.strategy {
            if !(alpha >= 0.0) {
                return bad("PER alpha must be non-negative");
            }
        }
        Ok(())
    }

    fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(self.hidden_units, self.hidden_layers));
        sizes.push(output);
        sizes
    }
}

/// One `(state, partner control)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IdExperience {
    pub state: Vec<f64>,
    pub partner_control: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdUpdateSummary {
    pub train_size: usize,
    pub mse_before: f64,
    pub mse_after: f64,
}

#[derive(Debug, Clone)]
pub struct PartnerIdentifier {
    model: Mlp,
    optimizer: Adam,
    buffer: ReplayBuffer<IdExperience>,
    config: IdentificationConfig,
}

impl PartnerIdentifier {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        partner_dim: usize,
        config: IdentificationConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes(state_dim, partner_dim);
        let mut ranges = vec![WeightRange::symmetric(config.hidden_weight_range); config.hidden_layers];
        ranges.push(WeightRange::symmetric(config.output_weight_range));
        let model = Mlp::new(&sizes, &ranges, rng)?;
        Ok(Self::from_model(model, config))
    }

    /// Wraps an existing model (e.g. restored from a checkpoint) with a fresh
    /// optimizer and an empty buffer.
    pub fn from_model(model: Mlp, config: IdentificationConfig) -> Self {
        let optimizer = Adam::new(&model, config.learning_rate);
        let buffer = ReplayBuffer::for_strategy(config.buffer_capacity, config.strategy);
        Self { model, optimizer, buffer, config }
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn buffer(&self) -> &ReplayBuffer<IdExperience> {
        &self.buffer
    }

    pub fn config(&self) -> &IdentificationConfig {
        &self.config
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// Stores the pair that became observable this step, unmodified.
    ///
    /// # Panics
    /// If the dimensions do not match the model.
    pub fn record(&mut self, state: &[f64], partner_control: &[f64]) {
        assert_eq!(state.len(), self.model.input_dim(), "record: state dimension mismatch");
        assert_eq!(
            partner_control.len(),
            self.model.output_dim(),
            "record: partner control dimension mismatch"
        );
        self.buffer.push(IdExperience {
            state: state.to_vec(),
            partner_control: partner_control.to_vec(),
        });
    }

    pub fn predict(&self, state: &[f64]) -> Vec<f64> {
        self.model.forward(state)
    }

    /// Size of the training set drawn for one update.
    pub fn train_set_size(&self) -> usize {
        ((self.config.train_fraction * self.buffer.len() as f64).round() as usize).max(1)
    }

    /// One identification update: draw the training set, then run the
    /// configured number of shuffled mini-batch epochs of Adam on MSE.
    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<IdUpdateSummary> {
        if self.buffer.is_empty() {
            return Err(PalError::EmptyBuffer);
        }
        let m = self.train_set_size();
        let indices = match self.config.strategy {
            SamplingStrategy::Cer => self.buffer.sample_cer_distinct_indices(m, rng)?,
            SamplingStrategy::Uniform => index::sample(rng, self.buffer.len(), m).into_vec(),
            SamplingStrategy::Per { alpha } => self.buffer.sample_per_indices(m, alpha, rng)?,
        };
        let (inputs, targets) = self.gather(&indices);
        let mse_before = mse(&self.model.forward_batch(&inputs), &targets);

        let mut order: Vec<usize> = (0..indices.len()).collect();
        let batch = self.config.minibatch_size;
        for _ in 0..self.config.epochs_per_update {
            order.shuffle(rng);
            for chunk in order.chunks(batch) {
                let x = inputs.select(ndarray::Axis(0), chunk);
                let y = targets.select(ndarray::Axis(0), chunk);
                let bp = self
                    .model
                    .gradients(&x, BackwardSeed::Target { target: &y, loss: LossKind::Mse });
                self.optimizer.step(&mut self.model, &bp.grads)?;
            }
        }

        let predictions = self.model.forward_batch(&inputs);
        let mse_after = mse(&predictions, &targets);
        if !mse_after.is_finite() {
            return Err(PalError::NonFinite("identification loss diverged".into()));
        }
        if self.buffer.is_prioritized() {
            for (row, &i) in indices.iter().enumerate() {
                let err = (&predictions.row(row) - &targets.row(row)).mapv(f64::abs).mean().unwrap_or(0.0);
                self.buffer.update_priority(i, err)?;
            }
        }
        Ok(IdUpdateSummary { train_size: indices.len(), mse_before, mse_after })
    }

    fn gather(&self, indices: &[usize]) -> (Array2<f64>, Array2<f64>) {
        let sd = self.model.input_dim();
        let pd = self.model.output_dim();
        let mut x = Array2::zeros((indices.len(), sd));
        let mut y = Array2::zeros((indices.len(), pd));
        for (row, &i) in indices.iter().enumerate() {
            let e = self.buffer.get(i).expect("sampled index in range");
            x.row_mut(row).assign(&ndarray::aview1(&e.state));
            y.row_mut(row).assign(&ndarray::aview1(&e.partner_control));
        }
        (x, y)
    }

    /// Mean squared prediction error over arbitrary labelled data.
    pub fn evaluate_mse(&self, data: &[IdExperience]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let total: f64 = data
            .iter()
            .map(|e| {
                self.predict(&e.state)
                    .iter()
                    .zip(&e.partner_control)
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>()
                    / e.partner_control.len() as f64
            })
            .sum();
        total / data.len() as f64
    }
}

fn mse(pred: &Array2<f64>, target: &Array2<f64>) -> f64 {
    LossKind::Mse.evaluate(pred, target).0
}
