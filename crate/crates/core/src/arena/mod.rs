//! Experiment harness: training runs, evaluation against the hand-coded
//! opponent, agent-vs-agent tournaments, and their statistics.
//!
//! Match `i` of a series always uses seed `derive_seed(base, i)`, so results
//! do not depend on how many workers play the series.

mod agent;
mod stats;
mod train;
mod transcript;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::court::{CourtConfig, CourtError};
use crate::happiness::{AgentPhaseData, HappinessError};
use crate::personas::{bounds, PersonaError};
use crate::qlearner::{CheckpointError, QError};
use crate::rng;

pub use agent::{AgentSpec, PolicySource, HANDCODED};
pub use stats::{
    format_pct, moving_average, rewards_by_agent, table1_csv, table2_csv, AgentStats, CurveRow,
    LearningCurveLog, PairingStats, CURVE_WINDOW, TABLE1_HEADER, TABLE2_HEADER,
};
pub use train::{
    final_file_name, snapshot_file_name, train, Snapshot, TrainOutcome, TrainSpec, CURVE_FILE,
};
pub use transcript::{run_match, run_match_with, AgentTag, MatchTranscript, PointRecord};

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error(transparent)]
    Court(#[from] CourtError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error(transparent)]
    Learner(#[from] QError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Happiness(#[from] HappinessError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("training diverged ({message}); last good snapshot: {}", last_snapshot.as_ref().map_or("none".to_string(), |p| p.display().to_string()))]
    Divergence {
        message: String,
        last_snapshot: Option<PathBuf>,
    },
    #[error("{0}")]
    Argument(String),
}

impl ArenaError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ArenaError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Runs `count` closures indexed `0..count` on `workers` threads and
/// returns results in index order.
fn run_indexed<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>, ArenaError>
where
    T: Send,
    F: Fn(usize) -> Result<T, ArenaError> + Sync + Send,
{
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ArenaError::Argument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

/// A series of matches between two agents on their assigned sides.
pub fn play_series(
    a: &AgentSpec,
    b: &AgentSpec,
    court: &CourtConfig,
    matches: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<MatchTranscript>, ArenaError> {
    if a.side == b.side {
        return Err(ArenaError::Argument(format!(
            "both agents assigned to the {} side",
            a.side
        )));
    }
    let (left, right) = if a.side == crate::court::Side::Left {
        (a, b)
    } else {
        (b, a)
    };
    run_indexed(matches, workers, |i| {
        run_match(left, right, court, rng::derive_seed(base_seed, i as u64))
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub agent: AgentStats,
    pub opponent: AgentStats,
    pub transcripts: Vec<MatchTranscript>,
}

/// Test phase: `matches` games of `agent` against `opponent`.
pub fn evaluate(
    agent: &AgentSpec,
    opponent: &AgentSpec,
    court: &CourtConfig,
    matches: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Evaluation, ArenaError> {
    if matches == 0 {
        return Err(ArenaError::Argument(
            "evaluation needs at least one match".into(),
        ));
    }
    if agent.name == opponent.name {
        return Err(ArenaError::Argument(format!(
            "agent and opponent share the name `{}`",
            agent.name
        )));
    }
    let transcripts = play_series(agent, opponent, court, matches, base_seed, workers)?;
    Ok(Evaluation {
        agent: AgentStats::from_transcripts(&agent.name, &transcripts)?,
        opponent: AgentStats::from_transcripts(&opponent.name, &transcripts)?,
        transcripts,
    })
}

/// The four society pairings as (left, right) agent names.
pub const DEFAULT_PAIRINGS: [(&str, &str); 4] = [
    ("ID_L", "ID_R"),
    ("SE_L", "SE_R"),
    ("ID_L", "SE_R"),
    ("SE_L", "ID_R"),
];

#[derive(Debug, Clone)]
pub struct TournamentResult {
    pub pairings: Vec<PairingStats>,
    pub transcripts: Vec<MatchTranscript>,
}

impl TournamentResult {
    /// Each agent's cumulative rewards under its own personality.
    pub fn society_rewards(
        &self,
    ) -> Result<
        std::collections::BTreeMap<String, (crate::personas::Personality, Vec<f64>)>,
        ArenaError,
    > {
        rewards_by_agent(&self.transcripts)
    }
}

/// Frozen agents playing each other; pairing `k` uses base seed
/// `derive_seed(base_seed, k)`.
pub fn tournament(
    pairings: &[(AgentSpec, AgentSpec)],
    court: &CourtConfig,
    matches: usize,
    base_seed: u64,
    workers: usize,
) -> Result<TournamentResult, ArenaError> {
    if pairings.is_empty() {
        return Err(ArenaError::Argument(
            "tournament needs at least one pairing".into(),
        ));
    }
    if matches == 0 {
        return Err(ArenaError::Argument(
            "tournament needs at least one match per pairing".into(),
        ));
    }
    for (l, r) in pairings {
        if l.name == r.name {
            return Err(ArenaError::Argument(format!(
                "agent `{}` cannot be paired with itself",
                l.name
            )));
        }
    }
    let per_pairing: Vec<Vec<MatchTranscript>> = pairings
        .iter()
        .enumerate()
        .map(|(k, (l, r))| {
            play_series(
                l,
                r,
                court,
                matches,
                rng::derive_seed(base_seed, k as u64),
                workers,
            )
        })
        .collect::<Result<_, _>>()?;
    let mut stats = Vec::with_capacity(pairings.len());
    for ((l, r), ts) in pairings.iter().zip(&per_pairing) {
        let (left, right) = if l.side == crate::court::Side::Left {
            (l, r)
        } else {
            (r, l)
        };
        stats.push(PairingStats::from_transcripts(&left.name, &right.name, ts)?);
    }
    Ok(TournamentResult {
        pairings: stats,
        transcripts: per_pairing.into_iter().flatten().collect(),
    })
}

/// Joins test-phase and society-phase transcripts into per-agent reward
/// lists for the happiness report. Agents without a personality (the
/// hand-coded AI) are skipped; an agent present in only one phase yields an
/// empty list for the other, which the report rejects.
pub fn phase_data(
    test: &[MatchTranscript],
    society: &[MatchTranscript],
) -> Result<Vec<AgentPhaseData>, ArenaError> {
    let test = rewards_by_agent(test)?;
    let society = rewards_by_agent(society)?;
    let mut names: Vec<&String> = test.keys().chain(society.keys()).collect();
    names.sort();
    names.dedup();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let p = test
            .get(name)
            .or_else(|| society.get(name))
            .map(|(p, _)| *p)
            .expect("name came from a map");
        out.push(AgentPhaseData {
            agent: name.clone(),
            bounds: bounds(&p),
            test: test.get(name).map(|(_, v)| v.clone()).unwrap_or_default(),
            society: society
                .get(name)
                .map(|(_, v)| v.clone())
                .unwrap_or_default(),
        });
    }
    Ok(out)
}
