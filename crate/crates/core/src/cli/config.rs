//! Run configuration: defaults, then an optional JSON file, then flags.
//!
//! Every key can be set from the command line with its dotted path, e.g.
//! `--court.paddle_height 0.2` or `--learner.hidden=[32,32]`. Values are
//! parsed as JSON and fall back to plain strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::court::{CourtConfig, ObsMode, Side};
use crate::opponents::TrackerPolicy;
use crate::personas::Personality;
use crate::qlearner::{EpsilonSchedule, LearnerConfig};

use super::CliError;

pub const OUT_ENV: &str = "PERSONA_PONG_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub start: f64,
    pub end: f64,
    /// Fraction of the frame budget spent decaying from `start` to `end`.
    pub decay_fraction: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.1,
        }
    }
}

impl ScheduleConfig {
    pub fn schedule(&self, frames: u64) -> EpsilonSchedule {
        let decay = ((frames as f64) * self.decay_fraction).round().max(1.0) as u64;
        EpsilonSchedule {
            start: self.start,
            end: self.end,
            decay_frames: decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Output directory; defaults to `$PERSONA_PONG_OUT`, else `out`.
    pub out: PathBuf,
    /// Checkpoint path or `handcoded` (eval, match).
    pub agent: Option<String>,
    /// Checkpoint path or `handcoded` (eval, match).
    pub opponent: String,
    /// Checkpoints taking part in a tournament.
    pub agents: Vec<PathBuf>,
    /// `LEFT:RIGHT` agent names; empty means the four default pairings.
    pub pairings: Vec<String>,
    /// Test-phase transcript files (report).
    pub test: Vec<PathBuf>,
    /// Society-phase transcript files (report).
    pub society: Vec<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out: std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            agent: None,
            opponent: "handcoded".into(),
            agents: Vec::new(),
            pairings: Vec::new(),
            test: Vec::new(),
            society: Vec::new(),
        }
    }
}

/// Fully resolved settings of one command; echoed as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub personality: Personality,
    /// Paddle to control; `train` defaults to left, `eval` to the checkpoint's side.
    pub side: Option<Side>,
    /// Allow a checkpoint to drive the paddle it was not trained on.
    pub mirror: bool,
    pub obs: ObsMode,
    pub frames: u64,
    pub snapshot_every: u64,
    /// Matches per series; `eval` 1000, `tournament` 100 and `match` 1 when unset.
    pub matches: Option<usize>,
    /// Exploration rate of network agents during eval/match/tournament.
    pub epsilon: f64,
    pub court: CourtConfig,
    pub learner: LearnerConfig,
    pub schedule: ScheduleConfig,
    pub opponent: TrackerPolicy,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            personality: Personality::Id,
            side: None,
            mirror: false,
            obs: ObsMode::Compact,
            frames: 300_000,
            snapshot_every: 50_000,
            matches: None,
            epsilon: 0.0,
            court: CourtConfig::default(),
            learner: LearnerConfig::default(),
            schedule: ScheduleConfig::default(),
            opponent: TrackerPolicy::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.court
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.learner
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(CliError::Config(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        let s = &self.schedule;
        if !((0.0..=1.0).contains(&s.start)
            && (0.0..=1.0).contains(&s.end)
            && s.decay_fraction > 0.0)
        {
            return Err(CliError::Config(
                "schedule start/end must be in [0, 1] and decay_fraction > 0".into(),
            ));
        }
        if self.snapshot_every == 0 {
            return Err(CliError::Config("snapshot_every must be >= 1".into()));
        }
        Ok(())
    }
}

// Top-level keys without a dedicated flag. `opponent` is left out because
// `--opponent` names a player; its fields take dotted flags.
const BARE_KEYS: [&str; 5] = ["snapshot_every", "court", "learner", "schedule", "paths"];

/// Splits `--a.b value` / `--a.b=value` overrides (and the bare keys above)
/// out of `args`.
pub fn extract_dotted(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !key.contains('.') && !BARE_KEYS.contains(&key.as_str()) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().unwrap_or_default(),
        };
        overrides.push((key, value));
    }
    (rest, overrides)
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Sets `path` (dotted) inside `tree`; the key must already exist.
pub fn set_dotted(tree: &mut Value, path: &str, raw: &str) -> Result<(), CliError> {
    let mut node = tree;
    for part in path.split('.') {
        node = node
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| CliError::Usage(format!("unknown setting `--{path}`")))?;
    }
    *node = parse_value(raw);
    Ok(())
}

/// Defaults, then `file`, then dotted overrides, then `flags` (top-level
/// keys set by named flags).
pub fn resolve(
    file: Option<&Path>,
    dotted: &[(String, String)],
    flags: &[(&str, Value)],
) -> Result<RunConfig, CliError> {
    let mut tree = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !patch.is_object() {
            return Err(CliError::Config(format!(
                "{}: top level must be an object",
                path.display()
            )));
        }
        merge(&mut tree, patch);
    }
    for (k, v) in dotted {
        set_dotted(&mut tree, k, v)?;
    }
    for (k, v) in flags {
        set_dotted(&mut tree, k, &v.to_string())?;
    }
    let cfg: RunConfig =
        serde_json::from_value(tree).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_extraction() {
        let args: Vec<String> = [
            "train",
            "--court.paddle_height",
            "0.2",
            "--seed",
            "3",
            "--learner.hidden=[8,8]",
            "--snapshot_every",
            "7",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let (rest, over) = extract_dotted(args);
        assert_eq!(rest, ["train", "--seed", "3"]);
        assert_eq!(
            over,
            [
                ("court.paddle_height".into(), "0.2".into()),
                ("learner.hidden".into(), "[8,8]".into()),
                ("snapshot_every".into(), "7".into())
            ]
        );
    }

    #[test]
    fn precedence_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(
            &file,
            r#"{"seed": 5, "court": {"paddle_height": 0.3}, "frames": 1000}"#,
        )
        .unwrap();
        let cfg = resolve(
            Some(&file),
            &[("court.paddle_height".into(), "0.25".into())],
            &[("seed", Value::from(9u64))],
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.frames, 1000);
        assert_eq!(cfg.court.paddle_height, 0.25);
        assert!(matches!(
            resolve(None, &[("court.nope".into(), "1".into())], &[]),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            resolve(None, &[("court.paddle_height".into(), "0".into())], &[]),
            Err(CliError::Config(_))
        ));
        std::fs::write(&file, r#"{"bogus": 1}"#).unwrap();
        assert!(matches!(
            resolve(Some(&file), &[], &[]),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn schedule_matches_default_fraction() {
        assert_eq!(
            ScheduleConfig::default().schedule(300_000),
            EpsilonSchedule::for_total_frames(300_000)
        );
    }
}
