//! Two-player Pong with personality-shaped rewards.
//!
//! - [`court`]: deterministic Pong physics, observations and rendering
//! - [`personas`]: ID and SUPEREGO reward rules, exact bounds and the
//!   exhaustive outcome enumeration
//! - [`happiness`]: reward normalized into `[0, 1]` by its achievable range
//! - [`qlearner`]: from-scratch DQN (MLP, replay, target network, checkpoints)
//! - [`opponents`]: the hand-coded tracker
//! - [`arena`]: training, evaluation, tournaments and their statistics
//! - [`cli`]: configuration and command dispatch for the `persona-pong` binary

pub mod arena;
pub mod cli;
pub mod court;
pub mod happiness;
pub mod opponents;
pub mod personas;
pub mod qlearner;
pub mod rng;
