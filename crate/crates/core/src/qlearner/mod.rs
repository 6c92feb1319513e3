//! Deep Q-learning: replay memory, a small MLP action-value function,
//! TD(0) targets from a target network, and epsilon-greedy control.

mod checkpoint;
mod learner;
mod mlp;
mod replay;
mod schedule;

use rand::Rng;
use thiserror::Error;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, timestamp_utc,
    Checkpoint, CheckpointError, CheckpointMeta, FORMAT_VERSION, MAGIC,
};
pub use learner::{DqnLearner, LearnerConfig};
pub use mlp::{param_count, QFunction, Real, RmsProp};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::EpsilonSchedule;

#[derive(Debug, Error)]
pub enum QError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("numerical divergence: {0}")]
    Divergence(String),
}

/// Epsilon-greedy choice; greedy ties go to the lowest index.
pub fn select_action<F: Real>(
    values: &[F],
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<usize, QError> {
    if values.is_empty() {
        return Err(QError::Argument("no action values".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(QError::Argument(format!(
            "epsilon {epsilon} outside [0, 1]"
        )));
    }
    // Draw only when exploring is possible so epsilon = 0 consumes no randomness.
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..values.len()));
    }
    Ok(argmax(values))
}

pub fn argmax<F: Real>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `r` for terminal transitions, otherwise `r + gamma * max_a Q_target(s', a)`.
pub fn td_targets(
    batch: &[&Transition],
    target: &QFunction<f32>,
    gamma: f32,
) -> Result<Vec<f32>, QError> {
    batch
        .iter()
        .map(|t| {
            if t.terminal {
                return Ok(t.reward);
            }
            let next = target.forward(&t.next_obs)?;
            let best = next.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            Ok(t.reward + gamma * best)
        })
        .collect()
}
