//! The hand-coded opponent: a throttled ball tracker.

use serde::{Deserialize, Serialize};

use crate::court::{Action, GameState, Side};

/// Follows the ball while it approaches and drifts back to mid-court while
/// it recedes. The paddle only moves on a fraction of ticks so that its
/// average speed stays at `speed_fraction` of a served ball's vertical
/// speed; steeper or faster returns outrun it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerPolicy {
    /// Dead zone half-width as a fraction of paddle height.
    pub dead_zone_fraction: f64,
    pub speed_fraction: f64,
}

impl Default for TrackerPolicy {
    fn default() -> Self {
        Self {
            dead_zone_fraction: 0.25,
            speed_fraction: 0.8,
        }
    }
}

impl TrackerPolicy {
    pub fn dead_zone(&self, state: &GameState) -> f64 {
        self.dead_zone_fraction * state.config.paddle_height
    }

    /// Average paddle speed in court units per tick.
    pub fn tracking_speed(&self, state: &GameState) -> f64 {
        (self.speed_fraction * state.config.serve_vertical_speed()).min(state.config.paddle_step)
    }

    // Moves on tick n iff ceil(n * duty) steps past ceil((n - 1) * duty).
    fn moves_this_tick(&self, state: &GameState) -> bool {
        let duty = self.tracking_speed(state) / state.config.paddle_step;
        let n = state.tick as f64;
        ((n + 1.0) * duty).ceil() > (n * duty).ceil()
    }

    pub fn action(&self, state: &GameState, side: Side) -> Action {
        let target = if state.ball_incoming(side) {
            state.ball[1]
        } else {
            0.5
        };
        let dy = target - state.paddle(side);
        if dy.abs() <= self.dead_zone(state) || !self.moves_this_tick(state) {
            Action::Stay
        } else if dy > 0.0 {
            Action::Up
        } else {
            Action::Down
        }
    }
}

/// The default tracker's move for `side`.
pub fn handcoded_action(state: &GameState, side: Side) -> Action {
    TrackerPolicy::default().action(state, side)
}
