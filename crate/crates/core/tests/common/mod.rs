//! Oracles shared by the integration tests and the acceptance suite. Each
//! one recomputes its quantity from first principles instead of asking the
//! library.

#![allow(dead_code)]

use std::sync::Arc;

use persona_pong::arena::{play_series, AgentSpec, MatchTranscript};
use persona_pong::court::{Action, CourtConfig, GameState, ObsMode, Side, COMPACT_LEN};
use persona_pong::happiness::happiness;
use persona_pong::personas::{bounds, Personality};
use persona_pong::qlearner::{Checkpoint, CheckpointMeta, QFunction, FORMAT_VERSION};
use persona_pong::rng;
use rand::Rng;

/// Reward extremes of a finished match, straight from the rule definitions.
pub const ID_BOUNDS: (f64, f64) = (-11.0, 11.0);
pub const SE_BOUNDS: (f64, f64) = (-6.0, 10.5);

// ---------------------------------------------------------------------------
// Network oracles

/// Plain nested-loop forward pass over the documented parameter layout:
/// per layer, an outputs x inputs weight matrix (row-major), then biases.
pub fn ref_forward(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut act = x.to_vec();
    let mut off = 0;
    for (l, w) in sizes.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = &params[off..off + n_in * n_out];
        let biases = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        off += n_in * n_out + n_out;
        let last = l + 2 == sizes.len();
        act = (0..n_out)
            .map(|o| {
                let z: f64 = biases[o]
                    + (0..n_in)
                        .map(|i| weights[o * n_in + i] * act[i])
                        .sum::<f64>();
                if last {
                    z
                } else {
                    z.max(0.0)
                }
            })
            .collect();
    }
    act
}

pub struct Sample {
    pub x: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

/// Mean Huber(1) loss of the taken actions' values against the targets.
pub fn ref_loss(sizes: &[usize], params: &[f64], batch: &[Sample]) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|s| {
            let e = ref_forward(sizes, params, &s.x)[s.action] - s.target;
            if e.abs() <= 1.0 {
                0.5 * e * e
            } else {
                e.abs() - 0.5
            }
        })
        .sum();
    total / batch.len() as f64
}

// One ulp of a unit-sized loss over 2h is about 1e-10.
pub const GRAD_FLOOR: f64 = 1e-5;

pub struct GradCheck {
    pub max_rel_error: f64,
    pub loss_gap: f64,
    pub params: usize,
}

/// Central-difference comparison (step 1e-6) of the library's analytic
/// gradient on a random `sizes` network and a random batch. Relative error
/// is `|a - n| / max(|a| + |n|, GRAD_FLOOR)`; the floor sits above the
/// difference quotient's round-off so near-zero gradients compare absolutely.
pub fn gradient_check(sizes: &[usize], batch_len: usize, seed: u64) -> GradCheck {
    let mut r = rng::stream(seed);
    let qf = QFunction::<f64>::random(sizes, &mut r).unwrap();
    let params = qf.params().to_vec();
    let mut batch = Vec::with_capacity(batch_len);
    while batch.len() < batch_len {
        let x: Vec<f64> = (0..sizes[0]).map(|_| r.random_range(-1.0..1.0)).collect();
        let action = r.random_range(0..sizes[sizes.len() - 1]);
        let q = ref_forward(sizes, &params, &x)[action];
        // Errors on both sides of the Huber threshold, away from the kink.
        let e: f64 = r.random_range(-3.0..3.0);
        if (e.abs() - 1.0).abs() < 1e-3 {
            continue;
        }
        batch.push(Sample {
            x,
            action,
            target: q - e,
        });
    }
    let inputs: Vec<&[f64]> = batch.iter().map(|s| s.x.as_slice()).collect();
    let actions: Vec<usize> = batch.iter().map(|s| s.action).collect();
    let targets: Vec<f64> = batch.iter().map(|s| s.target).collect();
    let (loss, grad) = qf.td_loss_and_grad(&inputs, &actions, &targets).unwrap();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut p = params.clone();
    for i in 0..p.len() {
        let keep = p[i];
        p[i] = keep + h;
        let up = ref_loss(sizes, &p, &batch);
        p[i] = keep - h;
        let down = ref_loss(sizes, &p, &batch);
        p[i] = keep;
        let numeric = (up - down) / (2.0 * h);
        let rel = (grad[i] - numeric).abs() / (grad[i].abs() + numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(rel);
    }
    GradCheck {
        max_rel_error: worst,
        loss_gap: (loss - ref_loss(sizes, &params, &batch)).abs(),
        params: params.len(),
    }
}

// ---------------------------------------------------------------------------
// Reward oracles

/// Superego reward of one point, written out from the rule table. `d` is
/// own minus opponent score after the point.
pub fn se_point(own_scored: bool, d: i32, lost_match: bool) -> f64 {
    let base = match (own_scored, d) {
        (true, d) if d <= 1 => 0.5,
        (true, _) => 0.25,
        (false, 0) => 0.5,
        (false, d) if d >= 1 => 0.0,
        (false, _) => -0.5,
    };
    base - if lost_match { 0.5 } else { 0.0 }
}

/// Rewards of `side` for every point of a transcript, rebuilt from the
/// recorded score line only: (ID, SE) per point.
pub fn oracle_rewards(t: &MatchTranscript, side: Side) -> Vec<(f64, f64)> {
    let me = side.index();
    let them = side.opposite().index();
    let mut prev = [0u8; 2];
    let mut out = Vec::new();
    for p in &t.points {
        let own_scored = p.score[me] > prev[me];
        let d = p.score[me] as i32 - p.score[them] as i32;
        let lost = p.score[them] == t.points_to_win;
        out.push((
            if own_scored { 1.0 } else { -1.0 },
            se_point(own_scored, d, lost),
        ));
        prev = p.score;
    }
    out
}

fn unit_h(r: f64, (lo, hi): (f64, f64)) -> f64 {
    (r - lo) / (hi - lo)
}

/// Checks the happiness range, ID telescoping, per-point zero-sum and the
/// recorded rewards against the oracle on every transcript.
pub fn check_corpus(ts: &[MatchTranscript]) -> Result<CorpusSummary, String> {
    let mut s = CorpusSummary::default();
    for (k, t) in ts.iter().enumerate() {
        let ctx = |m: String| format!("match {k} (seed {}): {m}", t.seed);
        for side in [Side::Left, Side::Right] {
            let i = side.index();
            let oracle = oracle_rewards(t, side);
            let r_id: f64 = oracle.iter().map(|x| x.0).sum();
            let r_se: f64 = oracle.iter().map(|x| x.1).sum();
            let diff = t.final_score[i] as f64 - t.final_score[side.opposite().index()] as f64;
            if r_id != diff {
                return Err(ctx(format!("R_ID {r_id} != score difference {diff}")));
            }
            let lib_id = t
                .cumulative(&Personality::Id, side)
                .map_err(|e| ctx(e.to_string()))?;
            let lib_se = t
                .cumulative(&Personality::SuperEgo, side)
                .map_err(|e| ctx(e.to_string()))?;
            if lib_id != r_id || lib_se != r_se {
                return Err(ctx(format!(
                    "library ({lib_id}, {lib_se}) vs oracle ({r_id}, {r_se})"
                )));
            }
            let dense: f64 = t
                .reward_trace(&Personality::Id, side)
                .map_err(|e| ctx(e.to_string()))?
                .rewards
                .iter()
                .sum();
            if dense != r_id {
                return Err(ctx(format!(
                    "dense ID trace sums to {dense}, expected {r_id}"
                )));
            }
            for (p, (oid, ose)) in t.points.iter().zip(&oracle) {
                if p.r_id[i] != *oid || p.r_se[i] != *ose {
                    return Err(ctx(format!(
                        "point at tick {} recorded ({}, {}), oracle ({oid}, {ose})",
                        p.tick, p.r_id[i], p.r_se[i]
                    )));
                }
            }
            for (p, r, b) in [
                (Personality::Id, r_id, ID_BOUNDS),
                (Personality::SuperEgo, r_se, SE_BOUNDS),
            ] {
                let want = unit_h(r, b);
                let h = happiness(r, bounds(&p)).map_err(|e| ctx(e.to_string()))?;
                if !(0.0..=1.0).contains(&h.value)
                    || h.out_of_range
                    || (h.value - want).abs() > 1e-12
                {
                    return Err(ctx(format!("{} H = {} (oracle {want})", p.tag(), h.value)));
                }
                s.h_min = s.h_min.min(h.value);
                s.h_max = s.h_max.max(h.value);
            }
        }
        for p in &t.points {
            if p.r_id[0] + p.r_id[1] != 0.0 {
                return Err(ctx(format!(
                    "ID rewards {:?} at tick {} do not cancel",
                    p.r_id, p.tick
                )));
            }
            s.points += 1;
        }
        s.matches += 1;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusSummary {
    pub matches: usize,
    pub points: usize,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for CorpusSummary {
    fn default() -> Self {
        Self {
            matches: 0,
            points: 0,
            h_min: f64::INFINITY,
            h_max: f64::NEG_INFINITY,
        }
    }
}

// ---------------------------------------------------------------------------
// Agents

pub fn zero_checkpoint(personality: Personality, side: Side) -> Checkpoint {
    let sizes = vec![COMPACT_LEN, Action::COUNT];
    Checkpoint {
        meta: CheckpointMeta {
            format_version: FORMAT_VERSION,
            personality,
            side,
            obs_mode: ObsMode::Compact,
            layer_sizes: sizes.clone(),
            frames_trained: 0,
            seed: 0,
            created_utc: "1970-01-01T00:00:00Z".into(),
        },
        qf: QFunction::zeros(&sizes).unwrap(),
    }
}

/// Uniformly random mover: a network agent with exploration rate 1.
pub fn random_agent(name: &str, personality: Personality, side: Side) -> AgentSpec {
    AgentSpec::from_checkpoint(Arc::new(zero_checkpoint(personality, side)), side, false)
        .unwrap()
        .with_name(name)
        .with_epsilon(1.0)
}

pub fn random_corpus(matches: usize, seed: u64, workers: usize) -> Vec<MatchTranscript> {
    let l = random_agent("RAND_L", Personality::Id, Side::Left);
    let r = random_agent("RAND_R", Personality::SuperEgo, Side::Right);
    play_series(&l, &r, &CourtConfig::default(), matches, seed, workers).unwrap()
}

// ---------------------------------------------------------------------------
// Physics

#[derive(Debug, Default, Clone, Copy)]
pub struct PhysicsSummary {
    pub sequences: usize,
    pub steps: u64,
    pub max_mirror_gap: f64,
    pub paddle_hits: u64,
}

fn gap(a: &GameState, b: &GameState) -> f64 {
    let pairs = [
        (a.ball[0], b.ball[0]),
        (a.ball[1], b.ball[1]),
        (a.velocity[0], b.velocity[0]),
        (a.velocity[1], b.velocity[1]),
        (a.paddles[0], b.paddles[0]),
        (a.paddles[1], b.paddles[1]),
    ];
    pairs.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs `count` matches of uniformly random actions and checks termination,
/// containment, score monotonicity and that every step commutes with the
/// left/right mirror (to 1e-12).
pub fn physics_check(count: usize, seed: u64) -> Result<PhysicsSummary, String> {
    let config = CourtConfig::default();
    let half = config.paddle_height / 2.0;
    let limit = (2 * config.points_to_win as u64 - 1) * config.max_ticks_per_point as u64;
    let mut out = PhysicsSummary::default();
    for k in 0..count {
        let match_seed = rng::derive_seed(seed, k as u64);
        let mut acts = rng::stream(match_seed ^ 0xA5A5);
        let mut s = GameState::new_match(config, match_seed).map_err(|e| e.to_string())?;
        let ctx = |s: &GameState, msg: String| format!("sequence {k}, tick {}: {msg}", s.tick);
        while !s.is_terminal() {
            let a = Action::ALL[acts.random_range(0..3)];
            let b = Action::ALL[acts.random_range(0..3)];
            let before = s.scores;
            let mut m = s.mirrored();
            let ev = s.step(a, b).map_err(|e| e.to_string())?;
            let evm = m.step(b, a).map_err(|e| e.to_string())?;
            out.steps += 1;
            out.paddle_hits += ev.paddle_hit.is_some() as u64;

            let mirrored = s.mirrored();
            let g = gap(&mirrored, &m);
            out.max_mirror_gap = out.max_mirror_gap.max(g);
            if g > 1e-12
                || mirrored.scores != m.scores
                || mirrored.phase != m.phase
                || mirrored.tick != m.tick
            {
                return Err(ctx(
                    &s,
                    format!(
                        "mirror mismatch (gap {g:e}, scores {:?} vs {:?})",
                        mirrored.scores, m.scores
                    ),
                ));
            }
            if ev.point_scored.map(Side::opposite) != evm.point_scored
                || ev.paddle_hit.map(Side::opposite) != evm.paddle_hit
            {
                return Err(ctx(&s, "mirrored run produced different events".into()));
            }
            if !(0.0..=1.0).contains(&s.ball[0]) || !(0.0..=1.0).contains(&s.ball[1]) {
                return Err(ctx(&s, format!("ball escaped to {:?}", s.ball)));
            }
            for p in s.paddles {
                if p < half - 1e-12 || p > 1.0 - half + 1e-12 {
                    return Err(ctx(&s, format!("paddle centre {p} leaves the court")));
                }
            }
            let gained: i32 = (0..2).map(|i| s.scores[i] as i32 - before[i] as i32).sum();
            if s.scores[0] < before[0]
                || s.scores[1] < before[1]
                || gained > 1
                || (gained == 1) != ev.point_scored.is_some()
            {
                return Err(ctx(
                    &s,
                    format!("score went from {before:?} to {:?}", s.scores),
                ));
            }
            if s.tick > limit {
                return Err(ctx(&s, "match exceeded its tick limit".into()));
            }
        }
        let w = s
            .winner()
            .ok_or_else(|| format!("sequence {k}: terminal without a winner"))?;
        if s.scores[w.index()] != config.points_to_win
            || s.scores[w.opposite().index()] >= config.points_to_win
        {
            return Err(format!("sequence {k}: final score {:?}", s.scores));
        }
        out.sequences += 1;
    }
    Ok(out)
}
