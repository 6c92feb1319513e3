use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::court::Side;
use crate::personas::Personality;

use super::transcript::MatchTranscript;
use super::ArenaError;

/// One agent's row: average score, share of matches won, and average
/// cumulative reward under both personalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub agent: String,
    pub matches: usize,
    pub wins: usize,
    pub avg_score: f64,
    pub pct_won: f64,
    pub avg_r_id: f64,
    pub avg_r_se: f64,
}

pub const TABLE1_HEADER: &str = "agent,avg_score,pct_won,avg_r_id,avg_r_se";
pub const TABLE2_HEADER: &str = "match,avg_score_l,avg_score_r,pct_won_l,pct_won_r";

pub fn format_pct(p: f64) -> String {
    if (p - p.round()).abs() < 1e-9 {
        format!("{}%", p.round() as i64)
    } else {
        format!("{p:.1}%")
    }
}

impl AgentStats {
    /// Aggregates every transcript in which `agent` played.
    pub fn from_transcripts(
        agent: &str,
        transcripts: &[MatchTranscript],
    ) -> Result<AgentStats, ArenaError> {
        let mut n = 0usize;
        let (mut wins, mut score, mut r_id, mut r_se) = (0usize, 0u64, 0.0, 0.0);
        for t in transcripts {
            let Some(side) = t.side_of(agent) else {
                continue;
            };
            n += 1;
            wins += (t.winner == side) as usize;
            score += t.final_score[side.index()] as u64;
            r_id += t.cumulative(&Personality::Id, side)?;
            r_se += t.cumulative(&Personality::SuperEgo, side)?;
        }
        if n == 0 {
            return Err(ArenaError::Argument(format!(
                "no matches for agent `{agent}`"
            )));
        }
        let nf = n as f64;
        Ok(AgentStats {
            agent: agent.to_string(),
            matches: n,
            wins,
            avg_score: score as f64 / nf,
            pct_won: 100.0 * wins as f64 / nf,
            avg_r_id: r_id / nf,
            avg_r_se: r_se / nf,
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.2},{},{:.2},{:.2}",
            self.agent,
            self.avg_score,
            format_pct(self.pct_won),
            self.avg_r_id,
            self.avg_r_se
        )
    }
}

pub fn table1_csv(rows: &[AgentStats]) -> String {
    let mut out = format!("{TABLE1_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Summary of all matches between one left and one right agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingStats {
    pub left: String,
    pub right: String,
    pub matches: usize,
    pub avg_score: [f64; 2],
    pub wins: [usize; 2],
}

impl PairingStats {
    pub fn from_transcripts(
        left: &str,
        right: &str,
        transcripts: &[MatchTranscript],
    ) -> Result<Self, ArenaError> {
        let mut n = 0usize;
        let mut score = [0u64; 2];
        let mut wins = [0usize; 2];
        for t in transcripts
            .iter()
            .filter(|t| t.left.name == left && t.right.name == right)
        {
            n += 1;
            score[0] += t.final_score[0] as u64;
            score[1] += t.final_score[1] as u64;
            wins[t.winner.index()] += 1;
        }
        if n == 0 {
            return Err(ArenaError::Argument(format!(
                "no matches for pairing {left} vs {right}"
            )));
        }
        Ok(Self {
            left: left.to_string(),
            right: right.to_string(),
            matches: n,
            avg_score: [score[0] as f64 / n as f64, score[1] as f64 / n as f64],
            wins,
        })
    }

    pub fn pct_won(&self, side: Side) -> f64 {
        100.0 * self.wins[side.index()] as f64 / self.matches as f64
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{} vs {},{:.2},{:.2},{},{}",
            self.left,
            self.right,
            self.avg_score[0],
            self.avg_score[1],
            format_pct(self.pct_won(Side::Left)),
            format_pct(self.pct_won(Side::Right))
        )
    }
}

pub fn table2_csv(rows: &[PairingStats]) -> String {
    let mut out = format!("{TABLE2_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Cumulative reward of every agent with a personality, under that
/// personality, in transcript order.
pub fn rewards_by_agent(
    transcripts: &[MatchTranscript],
) -> Result<BTreeMap<String, (Personality, Vec<f64>)>, ArenaError> {
    let mut out: BTreeMap<String, (Personality, Vec<f64>)> = BTreeMap::new();
    for t in transcripts {
        for side in [Side::Left, Side::Right] {
            let tag = t.agent(side);
            let Some(p) = tag.personality else { continue };
            let r = t.cumulative(&p, side)?;
            let entry = out.entry(tag.name.clone()).or_insert((p, Vec::new()));
            if entry.0 != p {
                return Err(ArenaError::Argument(format!(
                    "agent `{}` appears with two personalities",
                    tag.name
                )));
            }
            entry.1.push(r);
        }
    }
    Ok(out)
}

/// Trailing mean over the last `window` entries; early entries average the
/// available prefix.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub match_index: usize,
    pub frames: u64,
    pub reward: f64,
    pub reward_ma10: f64,
}

/// Per-match cumulative reward of the trained personality during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveLog {
    pub rows: Vec<CurveRow>,
}

pub const CURVE_WINDOW: usize = 10;

impl LearningCurveLog {
    pub fn push(&mut self, frames: u64, reward: f64) {
        let start = self.rows.len().saturating_sub(CURVE_WINDOW - 1);
        let tail: f64 = self.rows[start..].iter().map(|r| r.reward).sum::<f64>() + reward;
        let count = self.rows.len() - start + 1;
        self.rows.push(CurveRow {
            match_index: self.rows.len(),
            frames,
            reward,
            reward_ma10: tail / count as f64,
        });
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reward).collect()
    }

    /// CSV: `match,frames,R,R_ma10`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("match,frames,R,R_ma10\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.4}",
                r.match_index, r.frames, r.reward, r.reward_ma10
            );
        }
        out
    }
}
