use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{QFunction, RmsProp};
use super::replay::{ReplayBuffer, Transition};
use super::{select_action, td_targets, QError};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learner steps between target-network syncs.
    pub target_sync_every: u64,
    /// Transitions collected before the first update.
    pub learn_start: usize,
    /// Environment steps per gradient step.
    pub train_every: u64,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    pub rms_decay: f64,
    pub rms_eps: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch_size: 32,
            learning_rate: 2.5e-4,
            target_sync_every: 1_000,
            learn_start: 5_000,
            train_every: 4,
            replay_capacity: 100_000,
            hidden: vec![64, 64],
            rms_decay: 0.95,
            rms_eps: 1e-6,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), QError> {
        let bad = |m: String| Err(QError::Argument(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if self.batch_size == 0
            || self.train_every == 0
            || self.target_sync_every == 0
            || self.replay_capacity == 0
        {
            return bad(
                "batch_size, train_every, target_sync_every and replay_capacity must be >= 1"
                    .into(),
            );
        }
        if self.learn_start < self.batch_size {
            return bad(format!(
                "learn_start {} below batch_size {}",
                self.learn_start, self.batch_size
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.rms_decay) || self.rms_eps <= 0.0 {
            return bad("rms_decay must be in [0, 1) and rms_eps > 0".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be >= 1".into());
        }
        Ok(())
    }

    pub fn layer_sizes(&self, inputs: usize, actions: usize) -> Vec<usize> {
        let mut sizes = vec![inputs];
        sizes.extend(&self.hidden);
        sizes.push(actions);
        sizes
    }
}

/// Online network, target copy, optimizer state and replay memory of one
/// training run.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    pub config: LearnerConfig,
    online: QFunction<f32>,
    target: QFunction<f32>,
    optimizer: RmsProp<f32>,
    buffer: ReplayBuffer,
    rng: SplitMix64,
    env_steps: u64,
    learner_steps: u64,
}

impl DqnLearner {
    pub fn new(
        config: LearnerConfig,
        inputs: usize,
        actions: usize,
        mut rng: SplitMix64,
    ) -> Result<Self, QError> {
        config.validate()?;
        let online = QFunction::random(&config.layer_sizes(inputs, actions), &mut rng)?;
        let optimizer = RmsProp::new(online.param_count(), config.rms_decay, config.rms_eps);
        Ok(Self {
            buffer: ReplayBuffer::new(config.replay_capacity),
            target: online.clone(),
            online,
            optimizer,
            rng,
            env_steps: 0,
            learner_steps: 0,
            config,
        })
    }

    pub fn online(&self) -> &QFunction<f32> {
        &self.online
    }

    pub fn target(&self) -> &QFunction<f32> {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn learner_steps(&self) -> u64 {
        self.learner_steps
    }

    pub fn act(&mut self, obs: &[f32], epsilon: f64) -> Result<usize, QError> {
        // Skip the forward pass on exploratory steps.
        if epsilon > 0.0 && self.rng.random::<f64>() < epsilon {
            return Ok(self.rng.random_range(0..self.online.output_len()));
        }
        let values = self.online.forward(obs)?;
        select_action(&values, 0.0, &mut self.rng)
    }

    /// Stores a transition and runs a gradient step when one is due.
    /// Returns the batch loss if an update happened.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f32>, QError> {
        self.buffer.push(t);
        self.env_steps += 1;
        if self.buffer.len() < self.config.learn_start
            || !self.env_steps.is_multiple_of(self.config.train_every)
        {
            return Ok(None);
        }
        let loss = self.learn()?;
        Ok(Some(loss))
    }

    fn learn(&mut self) -> Result<f32, QError> {
        let batch = self.buffer.sample(self.config.batch_size, &mut self.rng)?;
        let targets = td_targets(&batch, &self.target, self.config.gamma as f32)?;
        let inputs: Vec<&[f32]> = batch.iter().map(|t| t.obs.as_slice()).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let loss = self.optimizer.apply_update(
            &mut self.online,
            &inputs,
            &actions,
            &targets,
            self.config.learning_rate,
        )?;
        self.learner_steps += 1;
        if self
            .learner_steps
            .is_multiple_of(self.config.target_sync_every)
        {
            self.target = self.online.clone();
        }
        Ok(loss)
    }
}
