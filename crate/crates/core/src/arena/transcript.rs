use serde::{Deserialize, Serialize};

use crate::court::{CourtConfig, GameState, Side};
use crate::personas::{
    step_reward, Personality, PointEvent, Quarters, RewardRule, RewardTrace, Scorer,
};
use crate::rng;

use super::agent::AgentSpec;
use super::ArenaError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTag {
    pub name: String,
    pub personality: Option<Personality>,
}

/// One point. Rewards are listed as `[left perspective, right perspective]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    /// Step (1-based) on which the point was scored.
    pub tick: u64,
    pub scorer: Side,
    pub score: [u8; 2],
    pub stalled: bool,
    pub r_id: [f64; 2],
    pub r_se: [f64; 2],
}

/// Complete record of one match. Only point steps carry reward, so the
/// point list plus the step count determines every reward trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTranscript {
    pub seed: u64,
    pub left: AgentTag,
    pub right: AgentTag,
    pub points_to_win: u8,
    /// Number of environment steps `n`.
    pub steps: u64,
    pub final_score: [u8; 2],
    pub winner: Side,
    pub stalls: u32,
    pub points: Vec<PointRecord>,
}

impl MatchTranscript {
    pub fn agent(&self, side: Side) -> &AgentTag {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// The side `name` played, if it took part.
    pub fn side_of(&self, name: &str) -> Option<Side> {
        if self.left.name == name {
            Some(Side::Left)
        } else if self.right.name == name {
            Some(Side::Right)
        } else {
            None
        }
    }

    /// Point events seen from `side`, rebuilt from the recorded scores.
    pub fn point_events(&self, side: Side) -> Result<Vec<PointEvent>, ArenaError> {
        self.points
            .iter()
            .map(|p| {
                let scorer = if p.scorer == side {
                    Scorer::Own
                } else {
                    Scorer::Opponent
                };
                let own = p.score[side.index()];
                let opp = p.score[side.opposite().index()];
                Ok(PointEvent::new(scorer, own, opp, self.points_to_win)?)
            })
            .collect()
    }

    /// Exact cumulative reward of `side` under `rule`, recomputed from the
    /// point events.
    pub fn cumulative_quarters(
        &self,
        rule: &dyn RewardRule,
        side: Side,
    ) -> Result<Quarters, ArenaError> {
        let events = self.point_events(side)?;
        if !events.last().is_some_and(|e| e.is_terminus) {
            return Err(ArenaError::Persona(
                crate::personas::PersonaError::IncompleteTrace,
            ));
        }
        Ok(events
            .iter()
            .fold(Quarters(0), |acc, e| acc + rule.point_reward(e)))
    }

    pub fn cumulative(&self, rule: &dyn RewardRule, side: Side) -> Result<f64, ArenaError> {
        Ok(self.cumulative_quarters(rule, side)?.to_f64())
    }

    /// Dense per-step trace `r_1..r_n` for `side`.
    pub fn reward_trace(
        &self,
        rule: &dyn RewardRule,
        side: Side,
    ) -> Result<RewardTrace, ArenaError> {
        let events = self.point_events(side)?;
        let mut trace = RewardTrace {
            rewards: vec![0.0; self.steps as usize],
            terminated: false,
        };
        for (p, e) in self.points.iter().zip(&events) {
            let slot = trace
                .rewards
                .get_mut((p.tick as usize).wrapping_sub(1))
                .ok_or_else(|| {
                    ArenaError::Argument(format!(
                        "point tick {} outside 1..={}",
                        p.tick, self.steps
                    ))
                })?;
            *slot = step_reward(rule, Some(e));
        }
        trace.terminated = events.last().is_some_and(|e| e.is_terminus)
            && self.points.last().map(|p| p.tick) == Some(self.steps);
        Ok(trace)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// Plays one match to the terminus.
pub fn run_match(
    left: &AgentSpec,
    right: &AgentSpec,
    court: &CourtConfig,
    seed: u64,
) -> Result<MatchTranscript, ArenaError> {
    run_match_with(left, right, court, seed, |_| Ok(()))
}

/// [`run_match`] that hands every state, the initial one included, to
/// `on_state`.
pub fn run_match_with(
    left: &AgentSpec,
    right: &AgentSpec,
    court: &CourtConfig,
    seed: u64,
    mut on_state: impl FnMut(&GameState) -> Result<(), ArenaError>,
) -> Result<MatchTranscript, ArenaError> {
    if left.side != Side::Left || right.side != Side::Right {
        return Err(ArenaError::Argument(format!(
            "agents are assigned to {} and {}, expected left and right",
            left.side, right.side
        )));
    }
    left.validate()?;
    right.validate()?;
    let mut state = GameState::new_match(*court, seed)?;
    let mut lc = left.controller(rng::derive_seed(seed, 1));
    let mut rc = right.controller(rng::derive_seed(seed, 2));
    let mut points = Vec::new();
    let mut stalls = 0;
    on_state(&state)?;
    while !state.is_terminal() {
        let a_left = lc.act(&state, Side::Left)?;
        let a_right = rc.act(&state, Side::Right)?;
        let ev = state.step(a_left, a_right)?;
        on_state(&state)?;
        if let Some(scorer) = ev.point_scored {
            stalls += ev.stalled as u32;
            let l = PointEvent::from_step(&ev, &state, Side::Left);
            let r = PointEvent::from_step(&ev, &state, Side::Right);
            let pair = |p: Personality| [step_reward(&p, l.as_ref()), step_reward(&p, r.as_ref())];
            points.push(PointRecord {
                tick: state.tick,
                scorer,
                score: state.scores,
                stalled: ev.stalled,
                r_id: pair(Personality::Id),
                r_se: pair(Personality::SuperEgo),
            });
        }
    }
    let tag = |a: &AgentSpec| AgentTag {
        name: a.name.clone(),
        personality: a.personality,
    };
    Ok(MatchTranscript {
        seed,
        left: tag(left),
        right: tag(right),
        points_to_win: court.points_to_win,
        steps: state.tick,
        final_score: state.scores,
        winner: state.winner().expect("terminal state has a winner"),
        stalls,
        points,
    })
}
