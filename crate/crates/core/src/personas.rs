//! Personality reward rules and cumulative-reward accounting.
//!
//! Rewards are paid only on point events. Every built-in rule pays whole
//! multiples of a quarter point, so rules are expressed in [`Quarters`] and
//! all totals (including the exhaustive outcome enumeration) are exact.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::court::{GameState, Side, StepEvents};

#[derive(Debug, Error, PartialEq)]
pub enum PersonaError {
    #[error("unknown personality `{0}`")]
    Unknown(String),
    #[error("inconsistent point event: {0}")]
    BadEvent(String),
    #[error("reward trace has no terminus event")]
    IncompleteTrace,
}

/// Exact reward amount in units of 1/4.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Quarters(pub i32);

impl Quarters {
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 4.0
    }
}

impl std::ops::Add for Quarters {
    type Output = Quarters;
    fn add(self, rhs: Quarters) -> Quarters {
        Quarters(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Quarters {
    fn add_assign(&mut self, rhs: Quarters) {
        self.0 += rhs.0;
    }
}

impl fmt::Display for Quarters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// Who scored, from the evaluated agent's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scorer {
    Own,
    Opponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointEvent {
    pub scorer: Scorer,
    pub own_after: u8,
    pub opp_after: u8,
    pub is_terminus: bool,
    /// Meaningful only when `is_terminus` is set.
    pub match_won: bool,
}

impl PointEvent {
    /// Builds an event, deriving the terminus flags from the score.
    pub fn new(
        scorer: Scorer,
        own_after: u8,
        opp_after: u8,
        points_to_win: u8,
    ) -> Result<Self, PersonaError> {
        let (scorer_pts, other_pts) = match scorer {
            Scorer::Own => (own_after, opp_after),
            Scorer::Opponent => (opp_after, own_after),
        };
        if own_after > points_to_win || opp_after > points_to_win {
            return Err(PersonaError::BadEvent(format!(
                "score {own_after}:{opp_after} exceeds {points_to_win}"
            )));
        }
        if scorer_pts == 0 {
            return Err(PersonaError::BadEvent(
                "scorer has zero points after scoring".into(),
            ));
        }
        if other_pts >= points_to_win {
            return Err(PersonaError::BadEvent(
                "point scored after the match ended".into(),
            ));
        }
        let is_terminus = scorer_pts == points_to_win;
        Ok(Self {
            scorer,
            own_after,
            opp_after,
            is_terminus,
            match_won: is_terminus && scorer == Scorer::Own,
        })
    }

    /// The point event (if any) produced by one court step, seen by `side`.
    /// `state` is the state after the step.
    pub fn from_step(events: &StepEvents, state: &GameState, side: Side) -> Option<PointEvent> {
        let scorer = events.point_scored?;
        let who = if scorer == side {
            Scorer::Own
        } else {
            Scorer::Opponent
        };
        let ev = PointEvent::new(
            who,
            state.score(side),
            state.score(side.opposite()),
            state.config.points_to_win,
        );
        Some(ev.expect("court produces consistent scores"))
    }

    pub fn diff(&self) -> i32 {
        self.own_after as i32 - self.opp_after as i32
    }
}

/// A per-point reward rule with known extreme cumulative values.
pub trait RewardRule: Send + Sync {
    fn name(&self) -> &str;
    fn point_reward(&self, event: &PointEvent) -> Quarters;
    /// Minimum and maximum cumulative reward over any finished match.
    fn bounds(&self) -> (Quarters, Quarters);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Personality {
    #[serde(rename = "id")]
    Id,
    #[serde(rename = "se")]
    SuperEgo,
}

impl Personality {
    pub const ALL: [Personality; 2] = [Personality::Id, Personality::SuperEgo];

    pub fn short(self) -> &'static str {
        match self {
            Personality::Id => "id",
            Personality::SuperEgo => "se",
        }
    }

    /// Upper-case tag used in agent names.
    pub fn tag(self) -> &'static str {
        match self {
            Personality::Id => "ID",
            Personality::SuperEgo => "SE",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, PersonaError> {
        match name.to_ascii_lowercase().as_str() {
            "id" => Ok(Personality::Id),
            "se" | "superego" | "super_ego" => Ok(Personality::SuperEgo),
            _ => Err(PersonaError::Unknown(name.to_string())),
        }
    }
}

impl fmt::Display for Personality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl std::str::FromStr for Personality {
    type Err = PersonaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Personality::from_name(s)
    }
}

impl RewardRule for Personality {
    fn name(&self) -> &str {
        self.short()
    }

    fn point_reward(&self, ev: &PointEvent) -> Quarters {
        match self {
            Personality::Id => match ev.scorer {
                Scorer::Own => Quarters(4),
                Scorer::Opponent => Quarters(-4),
            },
            Personality::SuperEgo => {
                let d = ev.diff();
                let base = match ev.scorer {
                    Scorer::Own if d <= 1 => 2,
                    Scorer::Own => 1,
                    Scorer::Opponent if d == 0 => 2,
                    Scorer::Opponent if d >= 1 => 0,
                    Scorer::Opponent => -2,
                };
                // Losing the match costs an extra half point.
                let terminal = if ev.is_terminus && !ev.match_won {
                    -2
                } else {
                    0
                };
                Quarters(base + terminal)
            }
        }
    }

    fn bounds(&self) -> (Quarters, Quarters) {
        match self {
            Personality::Id => (Quarters(-44), Quarters(44)),
            Personality::SuperEgo => (Quarters(-24), Quarters(42)),
        }
    }
}

/// Reward paid for one environment step; steps without a point pay nothing.
pub fn step_reward(rule: &dyn RewardRule, event: Option<&PointEvent>) -> f64 {
    event.map_or(0.0, |e| rule.point_reward(e).to_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBounds {
    pub r_star: f64,
    pub r_star_star: f64,
}

pub fn bounds(rule: &dyn RewardRule) -> RewardBounds {
    let (lo, hi) = rule.bounds();
    RewardBounds {
        r_star: lo.to_f64(),
        r_star_star: hi.to_f64(),
    }
}

/// Name-keyed set of reward rules; starts with `id` and `se`.
#[derive(Clone)]
pub struct PersonaRegistry {
    rules: BTreeMap<String, Arc<dyn RewardRule>>,
}

impl Default for PersonaRegistry {
    fn default() -> Self {
        let mut r = Self {
            rules: BTreeMap::new(),
        };
        for p in Personality::ALL {
            r.register(Arc::new(p));
        }
        r
    }
}

impl PersonaRegistry {
    pub fn register(&mut self, rule: Arc<dyn RewardRule>) {
        self.rules.insert(rule.name().to_ascii_lowercase(), rule);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn RewardRule>, PersonaError> {
        let key = match Personality::from_name(name) {
            Ok(p) => p.short().to_string(),
            Err(_) => name.to_ascii_lowercase(),
        };
        self.rules
            .get(&key)
            .cloned()
            .ok_or_else(|| PersonaError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }
}

/// Per-step rewards `r_1..r_n` of one agent over one match.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardTrace {
    pub rewards: Vec<f64>,
    /// Set once the terminus step has been pushed.
    pub terminated: bool,
}

impl RewardTrace {
    pub fn push(&mut self, r: f64, terminus: bool) {
        debug_assert!(!self.terminated, "push after terminus");
        self.rewards.push(r);
        self.terminated |= terminus;
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Sum of a finished trace.
pub fn cumulative(trace: &RewardTrace) -> Result<f64, PersonaError> {
    if !trace.terminated {
        return Err(PersonaError::IncompleteTrace);
    }
    Ok(trace.rewards.iter().sum())
}

/// Cumulative reward of a point sequence (`true` = own point), exactly.
pub fn sequence_reward(
    rule: &dyn RewardRule,
    seq: &[bool],
    points_to_win: u8,
) -> Result<Quarters, PersonaError> {
    let (mut own, mut opp) = (0u8, 0u8);
    let mut total = Quarters(0);
    let mut finished = false;
    for &mine in seq {
        if finished {
            return Err(PersonaError::BadEvent("points after the terminus".into()));
        }
        let scorer = if mine {
            own += 1;
            Scorer::Own
        } else {
            opp += 1;
            Scorer::Opponent
        };
        let ev = PointEvent::new(scorer, own, opp, points_to_win)?;
        finished = ev.is_terminus;
        total += rule.point_reward(&ev);
    }
    if !finished {
        return Err(PersonaError::IncompleteTrace);
    }
    Ok(total)
}

/// One achievable pair of cumulative rewards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCell {
    pub count: u64,
    /// First sequence (own points first) reaching this pair, as O/X string.
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extreme {
    pub value: Quarters,
    pub witness: String,
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub first: String,
    pub second: String,
    pub sequences: u64,
    pub outcomes: BTreeMap<(Quarters, Quarters), OutcomeCell>,
    /// Min and max of the first rule's total.
    pub first_range: (Extreme, Extreme),
    pub second_range: (Extreme, Extreme),
}

impl Enumeration {
    pub fn range_of(&self, name: &str) -> Option<&(Extreme, Extreme)> {
        if name.eq_ignore_ascii_case(&self.first) {
            Some(&self.first_range)
        } else if name.eq_ignore_ascii_case(&self.second) {
            Some(&self.second_range)
        } else {
            None
        }
    }

    /// CSV with columns `r_id,r_se,count,witness` (first rule, second rule).
    pub fn to_csv(&self) -> String {
        let mut out = format!("r_{},r_{},count,witness\n", self.first, self.second);
        for ((a, b), cell) in &self.outcomes {
            out.push_str(&format!("{a},{b},{},{}\n", cell.count, cell.witness));
        }
        out
    }
}

/// Walks every terminal point sequence and tallies both rules' totals.
pub fn enumerate_outcome_set(
    first: &dyn RewardRule,
    second: &dyn RewardRule,
    points_to_win: u8,
) -> Enumeration {
    struct Walk<'a> {
        rules: [&'a dyn RewardRule; 2],
        target: u8,
        path: Vec<u8>,
        sequences: u64,
        outcomes: BTreeMap<(Quarters, Quarters), OutcomeCell>,
        ranges: [Option<(Extreme, Extreme)>; 2],
    }

    impl Walk<'_> {
        fn visit(&mut self, own: u8, opp: u8, totals: [Quarters; 2]) {
            for mine in [true, false] {
                let (o, x) = if mine { (own + 1, opp) } else { (own, opp + 1) };
                let scorer = if mine { Scorer::Own } else { Scorer::Opponent };
                let ev = PointEvent::new(scorer, o, x, self.target).expect("walk stays in range");
                let next = [
                    totals[0] + self.rules[0].point_reward(&ev),
                    totals[1] + self.rules[1].point_reward(&ev),
                ];
                self.path.push(if mine { b'O' } else { b'X' });
                if ev.is_terminus {
                    self.finish(next);
                } else {
                    self.visit(o, x, next);
                }
                self.path.pop();
            }
        }

        fn finish(&mut self, totals: [Quarters; 2]) {
            self.sequences += 1;
            let witness = || String::from_utf8(self.path.clone()).expect("ascii");
            self.outcomes
                .entry((totals[0], totals[1]))
                .and_modify(|c| c.count += 1)
                .or_insert_with(|| OutcomeCell {
                    count: 1,
                    witness: witness(),
                });
            for (k, total) in totals.into_iter().enumerate() {
                match &mut self.ranges[k] {
                    None => {
                        let w = witness();
                        self.ranges[k] = Some((
                            Extreme {
                                value: total,
                                witness: w.clone(),
                            },
                            Extreme {
                                value: total,
                                witness: w,
                            },
                        ));
                    }
                    Some((lo, hi)) => {
                        if total < lo.value {
                            *lo = Extreme {
                                value: total,
                                witness: witness(),
                            };
                        }
                        if total > hi.value {
                            *hi = Extreme {
                                value: total,
                                witness: witness(),
                            };
                        }
                    }
                }
            }
        }
    }

    let mut walk = Walk {
        rules: [first, second],
        target: points_to_win,
        path: Vec::with_capacity(2 * points_to_win as usize),
        sequences: 0,
        outcomes: BTreeMap::new(),
        ranges: [None, None],
    };
    walk.visit(0, 0, [Quarters(0), Quarters(0)]);
    let [a, b] = walk.ranges;
    Enumeration {
        first: first.name().to_string(),
        second: second.name().to_string(),
        sequences: walk.sequences,
        outcomes: walk.outcomes,
        first_range: a.expect("at least one sequence"),
        second_range: b.expect("at least one sequence"),
    }
}
