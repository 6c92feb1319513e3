use std::sync::Arc;

use rand::Rng;

use crate::court::{Action, GameState, Observer, Side};
use crate::opponents::TrackerPolicy;
use crate::personas::Personality;
use crate::qlearner::{select_action, Checkpoint};
use crate::rng::{self, SplitMix64};

use super::ArenaError;

pub const HANDCODED: &str = "HANDCODED";

/// Where an agent's moves come from. Networks are frozen and shared.
#[derive(Debug, Clone)]
pub enum PolicySource {
    Handcoded(TrackerPolicy),
    Network(Arc<Checkpoint>),
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub name: String,
    /// Objective the agent was trained on; none for the hand-coded AI.
    pub personality: Option<Personality>,
    pub side: Side,
    pub policy: PolicySource,
    pub mirror: bool,
    pub epsilon: f64,
}

impl AgentSpec {
    pub fn handcoded(side: Side) -> Self {
        Self {
            name: HANDCODED.to_string(),
            personality: None,
            side,
            policy: PolicySource::Handcoded(TrackerPolicy::default()),
            mirror: false,
            epsilon: 0.0,
        }
    }

    /// A frozen network agent named after its checkpoint (`ID_L` etc.).
    pub fn from_checkpoint(
        ck: Arc<Checkpoint>,
        side: Side,
        mirror: bool,
    ) -> Result<Self, ArenaError> {
        ck.check_use(side, mirror, ck.meta.obs_mode)?;
        Ok(Self {
            name: ck.meta.agent_name(),
            personality: Some(ck.meta.personality),
            side,
            policy: PolicySource::Network(ck),
            mirror,
            epsilon: 0.0,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<(), ArenaError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ArenaError::Argument(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if let PolicySource::Network(ck) = &self.policy {
            ck.check_use(self.side, self.mirror, ck.meta.obs_mode)?;
        }
        Ok(())
    }

    pub(crate) fn controller(&self, seed: u64) -> Controller {
        match &self.policy {
            PolicySource::Handcoded(p) => Controller::Handcoded(*p),
            PolicySource::Network(ck) => Controller::Network {
                ck: Arc::clone(ck),
                observer: Observer::new(ck.meta.obs_mode, self.side),
                rng: rng::stream(seed),
                epsilon: self.epsilon,
            },
        }
    }
}

/// Per-match policy instance (owns the frame stack and exploration rng).
pub(crate) enum Controller {
    Handcoded(TrackerPolicy),
    Network {
        ck: Arc<Checkpoint>,
        observer: Observer,
        rng: SplitMix64,
        epsilon: f64,
    },
}

impl Controller {
    pub(crate) fn act(&mut self, state: &GameState, side: Side) -> Result<Action, ArenaError> {
        match self {
            Controller::Handcoded(p) => Ok(p.action(state, side)),
            Controller::Network {
                ck,
                observer,
                rng,
                epsilon,
            } => {
                // The frame stack must see every state, explored or not.
                let obs = observer.observe(state);
                if *epsilon > 0.0 && rng.random::<f64>() < *epsilon {
                    return Ok(Action::ALL[rng.random_range(0..Action::COUNT)]);
                }
                let values = ck.qf.forward(&obs)?;
                let a = select_action(&values, 0.0, rng)?;
                Ok(Action::from_index(a).expect("network has three outputs"))
            }
        }
    }
}
