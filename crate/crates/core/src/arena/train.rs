use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};

use crate::court::{Action, CourtConfig, GameState, ObsMode, Observer, Side};
use crate::opponents::TrackerPolicy;
use crate::personas::{step_reward, Personality, PointEvent};
use crate::qlearner::{
    save_checkpoint, Checkpoint, CheckpointMeta, DqnLearner, EpsilonSchedule, LearnerConfig,
    QError, Transition, FORMAT_VERSION,
};
use crate::rng;

use super::stats::LearningCurveLog;
use super::ArenaError;

// Child-stream indices of the run seed; match seeds use 0.. upward.
const LEARNER_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub personality: Personality,
    pub side: Side,
    pub frames: u64,
    pub court: CourtConfig,
    pub learner: LearnerConfig,
    /// Defaults to [`EpsilonSchedule::for_total_frames`].
    pub schedule: Option<EpsilonSchedule>,
    pub obs_mode: ObsMode,
    pub opponent: TrackerPolicy,
    pub seed: u64,
    pub snapshot_every: u64,
    /// Where snapshots and the curve log are written; in-memory only if unset.
    pub out_dir: Option<PathBuf>,
}

impl TrainSpec {
    pub fn new(personality: Personality, side: Side, frames: u64, seed: u64) -> Self {
        Self {
            personality,
            side,
            frames,
            court: CourtConfig::default(),
            learner: LearnerConfig::default(),
            schedule: None,
            obs_mode: ObsMode::Compact,
            opponent: TrackerPolicy::default(),
            seed,
            snapshot_every: 50_000,
            out_dir: None,
        }
    }

    pub fn agent_name(&self) -> String {
        format!("{}_{}", self.personality.tag(), self.side.letter())
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub frames: u64,
    pub checkpoint: Checkpoint,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Periodic snapshots in frame order; the final network is separate.
    pub snapshots: Vec<Snapshot>,
    pub final_snapshot: Snapshot,
    pub curve: LearningCurveLog,
}

pub fn snapshot_file_name(agent: &str, frames: u64) -> String {
    format!("{agent}_f{frames:09}.ckpt")
}

pub fn final_file_name(agent: &str) -> String {
    format!("{agent}_final.ckpt")
}

pub const CURVE_FILE: &str = "curve.csv";

fn write_snapshot(
    dir: Option<&Path>,
    file: String,
    ck: &Checkpoint,
) -> Result<Option<PathBuf>, ArenaError> {
    let Some(dir) = dir else { return Ok(None) };
    let path = dir.join(file);
    save_checkpoint(&path, &ck.qf, &ck.meta)?;
    Ok(Some(path))
}

/// DQN training against the hand-coded opponent.
pub fn train(spec: &TrainSpec) -> Result<TrainOutcome, ArenaError> {
    spec.court.validate()?;
    spec.learner.validate()?;
    if spec.frames < spec.learner.learn_start as u64 {
        return Err(ArenaError::Argument(format!(
            "frame budget {} is below learn_start {}",
            spec.frames, spec.learner.learn_start
        )));
    }
    if spec.snapshot_every == 0 {
        return Err(ArenaError::Argument("snapshot cadence must be >= 1".into()));
    }
    let out_dir = spec.out_dir.as_deref();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| ArenaError::io(dir, e))?;
    }
    let name = spec.agent_name();
    let schedule = spec
        .schedule
        .unwrap_or_else(|| EpsilonSchedule::for_total_frames(spec.frames));
    let input_len = spec.obs_mode.input_len();
    let mut learner = DqnLearner::new(
        spec.learner.clone(),
        input_len,
        Action::COUNT,
        rng::stream(rng::derive_seed(spec.seed, LEARNER_STREAM)),
    )?;
    let layer_sizes = learner.online().sizes().to_vec();
    let meta = |frames: u64| CheckpointMeta {
        format_version: FORMAT_VERSION,
        personality: spec.personality,
        side: spec.side,
        obs_mode: spec.obs_mode,
        layer_sizes: layer_sizes.clone(),
        frames_trained: frames,
        seed: spec.seed,
        created_utc: crate::qlearner::timestamp_utc(),
    };

    info!(
        "training {name}: {} environment steps (one step = one court tick), seed {}",
        spec.frames, spec.seed
    );
    let mut snapshots = Vec::new();
    let mut curve = LearningCurveLog::default();
    let mut match_index = 0u64;
    let mut state = GameState::new_match(spec.court, rng::derive_seed(spec.seed, match_index))?;
    let mut observer = Observer::new(spec.obs_mode, spec.side);
    let mut obs = observer.observe(&state);
    let mut match_reward = 0.0;

    for frame in 0..spec.frames {
        let epsilon = schedule.epsilon_at(frame);
        let a = learner.act(&obs, epsilon)?;
        let own = Action::from_index(a).expect("three actions");
        let opp = spec.opponent.action(&state, spec.side.opposite());
        let ev = match spec.side {
            Side::Left => state.step(own, opp)?,
            Side::Right => state.step(opp, own)?,
        };
        let point = PointEvent::from_step(&ev, &state, spec.side);
        let reward = step_reward(&spec.personality, point.as_ref());
        match_reward += reward;
        let terminal = state.is_terminal();
        let next_obs = observer.observe(&state);
        let transition = Transition {
            obs,
            action: a,
            reward: reward as f32,
            next_obs: next_obs.clone(),
            terminal,
        };
        let done = frame + 1;
        match learner.observe(transition) {
            Ok(_) => {}
            Err(QError::Divergence(msg)) => {
                let last_snapshot = snapshots.last().and_then(|s: &Snapshot| s.path.clone());
                return Err(ArenaError::Divergence {
                    message: format!("{name} at frame {done}: {msg}"),
                    last_snapshot,
                });
            }
            Err(e) => return Err(e.into()),
        }

        if terminal {
            curve.push(done, match_reward);
            let row = curve.rows.last().unwrap();
            debug!(
                "{name} match {} frames {done} R {} ma10 {:.3} eps {epsilon:.3}",
                row.match_index, row.reward, row.reward_ma10
            );
            match_index += 1;
            match_reward = 0.0;
            state = GameState::new_match(spec.court, rng::derive_seed(spec.seed, match_index))?;
            observer.reset();
            obs = observer.observe(&state);
        } else {
            obs = next_obs;
        }

        if done % spec.snapshot_every == 0 {
            let checkpoint = Checkpoint {
                meta: meta(done),
                qf: learner.online().clone(),
            };
            let path = write_snapshot(out_dir, snapshot_file_name(&name, done), &checkpoint)?;
            info!(
                "{name}: snapshot at {done} frames, {} matches, last ma10 {:.3}",
                curve.rows.len(),
                curve.rows.last().map_or(f64::NAN, |r| r.reward_ma10)
            );
            snapshots.push(Snapshot {
                frames: done,
                checkpoint,
                path,
            });
        }
    }

    let checkpoint = Checkpoint {
        meta: meta(spec.frames),
        qf: learner.online().clone(),
    };
    let path = write_snapshot(out_dir, final_file_name(&name), &checkpoint)?;
    if let Some(dir) = out_dir {
        let p = dir.join(CURVE_FILE);
        fs::write(&p, curve.to_csv()).map_err(|e| ArenaError::io(&p, e))?;
    }
    Ok(TrainOutcome {
        snapshots,
        final_snapshot: Snapshot {
            frames: spec.frames,
            checkpoint,
            path,
        },
        curve,
    })
}
