//! Command-line front end: `persona-pong <command> [flags]`.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid config or input,
//! 3 checkpoint incompatibility, 4 numerical divergence.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::Value;
use thiserror::Error;

use crate::arena::{
    self, evaluate, phase_data, play_series, run_match_with, table1_csv, table2_csv, train,
    AgentSpec, ArenaError, MatchTranscript, PolicySource, TrainSpec, DEFAULT_PAIRINGS,
};
use crate::court::{render, ObsMode, Side, PIXEL_SIZE};
use crate::happiness::happiness_report;
use crate::personas::{enumerate_outcome_set, Personality};
use crate::qlearner::{load_checkpoint, Checkpoint, CheckpointError};
use crate::rng;

pub use config::{extract_dotted, resolve, PathsConfig, RunConfig, ScheduleConfig, OUT_ENV};

pub const CONFIG_FILE: &str = "config.json";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const STATS_FILE: &str = "stats.csv";
pub const MATCH_FILE: &str = "match.jsonl";
pub const TOURNAMENT_FILE: &str = "tournament.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";
pub const HAPPINESS_FILE: &str = "happiness.csv";
pub const FRAMES_DIR: &str = "frames";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Checkpoint(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Checkpoint(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }
}

impl From<ArenaError> for CliError {
    fn from(e: ArenaError) -> Self {
        match e {
            ArenaError::Checkpoint(CheckpointError::Incompatible(_)) => {
                CliError::Checkpoint(e.to_string())
            }
            ArenaError::Divergence { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        ArenaError::from(e).into()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "persona-pong",
    version,
    about = "Pong agents trained on Id and Superego reward rules",
    after_help = "Any config key can also be set with its dotted path, e.g. --court.paddle_height 0.2"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a DQN agent against the hand-coded opponent.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Test phase: play an agent against an opponent and write Table-1 stats.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        players: Players,
    },
    /// Play matches and write their transcripts.
    Match {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        players: Players,
        /// Write an 84x84 PGM image of every step under OUT/frames.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Society phase: frozen agents play each other.
    Tournament {
        #[command(flatten)]
        common: Common,
        /// Checkpoint taking part (repeatable).
        #[arg(long = "agent", value_name = "PATH")]
        agents: Vec<PathBuf>,
        /// `LEFT:RIGHT` pairing of agent names (repeatable; default: the four standard pairings).
        #[arg(long = "pairing", value_name = "L:R")]
        pairings: Vec<String>,
    },
    /// Enumerate every terminal point sequence and certify reward bounds.
    Enumerate {
        #[command(flatten)]
        common: Common,
    },
    /// Happiness comparison between test-phase and society-phase transcripts.
    Report {
        #[command(flatten)]
        common: Common,
        /// Test-phase transcript file (repeatable).
        #[arg(long, value_name = "PATH")]
        test: Vec<PathBuf>,
        /// Society-phase transcript file (repeatable).
        #[arg(long, value_name = "PATH")]
        society: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training budget in environment steps.
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    matches: Option<usize>,
    /// Exploration rate of network agents outside training.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = parse_personality)]
    personality: Option<Personality>,
    #[arg(long)]
    side: Option<Side>,
    /// Let a checkpoint drive the paddle it was not trained on.
    #[arg(long)]
    mirror: bool,
    #[arg(long)]
    obs: Option<ObsMode>,
    /// Output directory (default: $PERSONA_PONG_OUT, else `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Parallel match workers; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, Args)]
struct Players {
    /// Checkpoint path or `handcoded`.
    #[arg(long)]
    agent: Option<String>,
    /// Checkpoint path or `handcoded`.
    #[arg(long)]
    opponent: Option<String>,
}

fn parse_personality(s: &str) -> Result<Personality, String> {
    Personality::from_name(s).map_err(|e| e.to_string())
}

fn json<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("flag value serializes")
}

impl Common {
    fn flag_values(&self) -> Vec<(&'static str, Value)> {
        let mut out = Vec::new();
        if let Some(v) = self.seed {
            out.push(("seed", json(v)));
        }
        if let Some(v) = self.frames {
            out.push(("frames", json(v)));
        }
        if let Some(v) = self.matches {
            out.push(("matches", json(v)));
        }
        if let Some(v) = self.epsilon {
            out.push(("epsilon", json(v)));
        }
        if let Some(v) = self.personality {
            out.push(("personality", json(v)));
        }
        if let Some(v) = self.side {
            out.push(("side", json(v)));
        }
        if self.mirror {
            out.push(("mirror", json(true)));
        }
        if let Some(v) = self.obs {
            out.push(("obs", json(v)));
        }
        if let Some(v) = &self.out {
            out.push(("paths.out", json(v)));
        }
        out
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn run_from_args(args: Vec<String>) -> i32 {
    let (rest, dotted) = extract_dotted(args);
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command, &dotted) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `persona-pong --help` for usage");
            }
            e.exit_code()
        }
    }
}

fn run(command: Command, dotted: &[(String, String)]) -> Result<(), CliError> {
    let (common, mut extra) = match &command {
        Command::Train { common } | Command::Enumerate { common } => (common, Vec::new()),
        Command::Eval { common, players }
        | Command::Match {
            common, players, ..
        } => {
            let mut v = Vec::new();
            if let Some(a) = &players.agent {
                v.push(("paths.agent", json(a)));
            }
            if let Some(o) = &players.opponent {
                v.push(("paths.opponent", json(o)));
            }
            (common, v)
        }
        Command::Tournament {
            common,
            agents,
            pairings,
        } => {
            let mut v = Vec::new();
            if !agents.is_empty() {
                v.push(("paths.agents", json(agents)));
            }
            if !pairings.is_empty() {
                v.push(("paths.pairings", json(pairings)));
            }
            (common, v)
        }
        Command::Report {
            common,
            test,
            society,
        } => {
            let mut v = Vec::new();
            if !test.is_empty() {
                v.push(("paths.test", json(test)));
            }
            if !society.is_empty() {
                v.push(("paths.society", json(society)));
            }
            (common, v)
        }
    };
    if common.workers == 0 {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }
    let mut flags = common.flag_values();
    flags.append(&mut extra);
    let cfg = resolve(common.config.as_deref(), dotted, &flags)?;
    let workers = common.workers;
    match command {
        Command::Train { .. } => cmd_train(&cfg),
        Command::Eval { .. } => cmd_eval(&cfg, workers),
        Command::Match { dump_frames, .. } => cmd_match(&cfg, workers, dump_frames),
        Command::Tournament { .. } => cmd_tournament(&cfg, workers),
        Command::Enumerate { .. } => cmd_enumerate(&cfg),
        Command::Report { .. } => cmd_report(&cfg),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn echo_config(cfg: &RunConfig) -> Result<(), CliError> {
    write_file(&cfg.paths.out.join(CONFIG_FILE), cfg.to_json_pretty())
}

fn transcripts_jsonl(ts: &[MatchTranscript]) -> String {
    let mut out = String::new();
    for t in ts {
        out.push_str(&t.to_json_line());
        out.push('\n');
    }
    out
}

pub fn read_transcripts(path: &Path) -> Result<Vec<MatchTranscript>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let side = cfg.side.unwrap_or(Side::Left);
    let cfg = &RunConfig {
        side: Some(side),
        ..cfg.clone()
    };
    echo_config(cfg)?;
    let spec = TrainSpec {
        court: cfg.court,
        learner: cfg.learner.clone(),
        schedule: Some(cfg.schedule.schedule(cfg.frames)),
        obs_mode: cfg.obs,
        opponent: cfg.opponent,
        snapshot_every: cfg.snapshot_every,
        out_dir: Some(cfg.paths.out.clone()),
        ..TrainSpec::new(cfg.personality, side, cfg.frames, cfg.seed)
    };
    let outcome = train(&spec)?;
    let last = outcome.curve.rows.last();
    println!(
        "{}: {} frames, {} matches, final R_ma10 {}",
        spec.agent_name(),
        cfg.frames,
        outcome.curve.rows.len(),
        last.map_or("n/a".to_string(), |r| format!("{:.3}", r.reward_ma10))
    );
    for s in outcome
        .snapshots
        .iter()
        .chain(std::iter::once(&outcome.final_snapshot))
    {
        if let Some(p) = &s.path {
            println!("  {:>9} frames -> {}", s.frames, p.display());
        }
    }
    Ok(())
}

/// `handcoded` or a checkpoint path, placed on `side` (or the checkpoint's
/// own side when `side` is none).
fn load_agent(cfg: &RunConfig, source: &str, side: Option<Side>) -> Result<AgentSpec, CliError> {
    if source.eq_ignore_ascii_case("handcoded") {
        let mut a = AgentSpec::handcoded(side.unwrap_or(Side::Left));
        a.policy = PolicySource::Handcoded(cfg.opponent);
        return Ok(a);
    }
    let ck = load_checkpoint(Path::new(source))?;
    let side = side.unwrap_or(ck.meta.side);
    Ok(AgentSpec::from_checkpoint(Arc::new(ck), side, cfg.mirror)?.with_epsilon(cfg.epsilon))
}

fn players(cfg: &RunConfig) -> Result<(AgentSpec, AgentSpec), CliError> {
    let source = cfg.paths.agent.as_deref().ok_or_else(|| {
        CliError::Usage("missing --agent (checkpoint path or `handcoded`)".into())
    })?;
    let agent = load_agent(cfg, source, cfg.side)?;
    let mut opponent = load_agent(cfg, &cfg.paths.opponent, Some(agent.side.opposite()))?;
    if opponent.name == agent.name {
        opponent.name = format!("{}_OPP", opponent.name);
    }
    Ok((agent, opponent))
}

fn cmd_eval(cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    let (agent, opponent) = players(cfg)?;
    let n = cfg.matches.unwrap_or(1000);
    echo_config(&RunConfig {
        side: Some(agent.side),
        matches: Some(n),
        ..cfg.clone()
    })?;
    info!(
        "eval {} ({}) vs {} over {n} matches",
        agent.name, agent.side, opponent.name
    );
    let ev = evaluate(&agent, &opponent, &cfg.court, n, cfg.seed, workers)?;
    let out = &cfg.paths.out;
    write_file(
        &out.join(TRANSCRIPTS_FILE),
        transcripts_jsonl(&ev.transcripts),
    )?;
    let table = table1_csv(std::slice::from_ref(&ev.agent));
    write_file(&out.join(STATS_FILE), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_match(cfg: &RunConfig, workers: usize, dump_frames: bool) -> Result<(), CliError> {
    let (agent, opponent) = players(cfg)?;
    let n = cfg.matches.unwrap_or(1);
    echo_config(&RunConfig {
        side: Some(agent.side),
        matches: Some(n),
        ..cfg.clone()
    })?;
    if n == 0 {
        return Err(CliError::Config("matches must be >= 1".into()));
    }
    let out = &cfg.paths.out;
    let transcripts = if dump_frames {
        let dir = out.join(FRAMES_DIR);
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        let (left, right) = if agent.side == Side::Left {
            (&agent, &opponent)
        } else {
            (&opponent, &agent)
        };
        let mut ts = Vec::with_capacity(n);
        for i in 0..n {
            let seed = rng::derive_seed(cfg.seed, i as u64);
            ts.push(run_match_with(left, right, &cfg.court, seed, |state| {
                let path = dir.join(format!("m{i:04}_t{:06}.pgm", state.tick));
                render(state, PIXEL_SIZE, PIXEL_SIZE)?
                    .save_pgm(&path)
                    .map_err(ArenaError::from)
            })?);
        }
        ts
    } else {
        play_series(&agent, &opponent, &cfg.court, n, cfg.seed, workers)?
    };
    write_file(&out.join(MATCH_FILE), transcripts_jsonl(&transcripts))?;
    for t in &transcripts {
        println!(
            "{} {}:{} {} (winner {}, {} steps)",
            t.left.name,
            t.final_score[0],
            t.final_score[1],
            t.right.name,
            t.agent(t.winner).name,
            t.steps
        );
    }
    Ok(())
}

fn parse_pairing(s: &str) -> Result<(String, String), CliError> {
    match s.split_once(':') {
        Some((l, r)) if !l.is_empty() && !r.is_empty() => Ok((l.to_string(), r.to_string())),
        _ => Err(CliError::Config(format!(
            "pairing `{s}` is not of the form LEFT:RIGHT"
        ))),
    }
}

fn cmd_tournament(cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    if cfg.paths.agents.len() < 2 {
        return Err(CliError::Usage(
            "tournament needs at least two --agent checkpoints".into(),
        ));
    }
    let mut pool: BTreeMap<String, Arc<Checkpoint>> = BTreeMap::new();
    for path in &cfg.paths.agents {
        let ck = load_checkpoint(path)?;
        let name = ck.meta.agent_name();
        if pool.insert(name.clone(), Arc::new(ck)).is_some() {
            return Err(CliError::Config(format!(
                "two checkpoints are named {name}"
            )));
        }
    }
    let names: Vec<(String, String)> = if cfg.paths.pairings.is_empty() {
        DEFAULT_PAIRINGS
            .iter()
            .map(|(l, r)| (l.to_string(), r.to_string()))
            .collect()
    } else {
        cfg.paths
            .pairings
            .iter()
            .map(|s| parse_pairing(s))
            .collect::<Result<_, _>>()?
    };
    let pick = |name: &str, side: Side| -> Result<AgentSpec, CliError> {
        let ck = pool.get(name).ok_or_else(|| {
            CliError::Config(format!("no checkpoint named {name} among the agents"))
        })?;
        let mut a =
            AgentSpec::from_checkpoint(Arc::clone(ck), side, cfg.mirror)?.with_epsilon(cfg.epsilon);
        a.name = name.to_string();
        Ok(a)
    };
    let pairings = names
        .iter()
        .map(|(l, r)| Ok((pick(l, Side::Left)?, pick(r, Side::Right)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let n = cfg.matches.unwrap_or(100);
    echo_config(&RunConfig {
        matches: Some(n),
        ..cfg.clone()
    })?;
    let result = arena::tournament(&pairings, &cfg.court, n, cfg.seed, workers)?;
    let out = &cfg.paths.out;
    write_file(
        &out.join(TRANSCRIPTS_FILE),
        transcripts_jsonl(&result.transcripts),
    )?;
    let table = table2_csv(&result.pairings);
    write_file(&out.join(TOURNAMENT_FILE), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_enumerate(cfg: &RunConfig) -> Result<(), CliError> {
    echo_config(cfg)?;
    let e = enumerate_outcome_set(
        &Personality::Id,
        &Personality::SuperEgo,
        cfg.court.points_to_win,
    );
    let out = &cfg.paths.out;
    write_file(&out.join(OUTCOMES_FILE), e.to_csv())?;
    let mut bounds = String::from("personality,r_min,r_max,min_witness,max_witness,sequences\n");
    for (name, (lo, hi)) in [(&e.first, &e.first_range), (&e.second, &e.second_range)] {
        let _ = writeln!(
            bounds,
            "{name},{},{},{},{},{}",
            lo.value, hi.value, lo.witness, hi.witness, e.sequences
        );
    }
    write_file(&out.join(BOUNDS_FILE), &bounds)?;
    println!(
        "{} terminal sequences, {} distinct (R_ID, R_SE) pairs",
        e.sequences,
        e.outcomes.len()
    );
    let (lo, hi) = e
        .range_of(cfg.personality.short())
        .expect("both rules enumerated");
    println!(
        "{}: R* = {} ({}), R** = {} ({})",
        cfg.personality.tag(),
        lo.value,
        lo.witness,
        hi.value,
        hi.witness
    );
    Ok(())
}

fn cmd_report(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.paths.test.is_empty() || cfg.paths.society.is_empty() {
        return Err(CliError::Usage(
            "report needs at least one --test and one --society transcript file".into(),
        ));
    }
    let load = |paths: &[PathBuf]| -> Result<Vec<MatchTranscript>, CliError> {
        let mut all = Vec::new();
        for p in paths {
            all.extend(read_transcripts(p)?);
        }
        Ok(all)
    };
    let test = load(&cfg.paths.test)?;
    let society = load(&cfg.paths.society)?;
    let data = phase_data(&test, &society)?;
    let report = happiness_report(&data).map_err(ArenaError::from)?;
    echo_config(cfg)?;
    write_file(&cfg.paths.out.join(HAPPINESS_FILE), report.to_csv())?;
    print!("{}", report.to_table());
    Ok(())
}
