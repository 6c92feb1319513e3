//! Happiness: cumulative reward normalized by its achievable range,
//! `H = (R - R*) / (R** - R*)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::personas::RewardBounds;

#[derive(Debug, Error, PartialEq)]
pub enum HappinessError {
    #[error("degenerate reward bounds: R* = {0}, R** = {1}")]
    DegenerateBounds(f64, f64),
    #[error("no reward values to aggregate")]
    Empty,
    #[error("agent `{agent}` is missing {phase} data")]
    Incomplete { agent: String, phase: Phase },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Test,
    Society,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Test => "test",
            Phase::Society => "society",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Happiness {
    pub value: f64,
    /// `R` fell outside the bounds, so `value` is outside [0, 1].
    pub out_of_range: bool,
}

pub fn happiness(r: f64, bounds: RewardBounds) -> Result<Happiness, HappinessError> {
    let RewardBounds {
        r_star,
        r_star_star,
    } = bounds;
    if r_star.partial_cmp(&r_star_star) != Some(std::cmp::Ordering::Less) {
        return Err(HappinessError::DegenerateBounds(r_star, r_star_star));
    }
    let value = (r - r_star) / (r_star_star - r_star);
    Ok(Happiness {
        value,
        out_of_range: !(r_star..=r_star_star).contains(&r),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean_of_h: f64,
    pub h_of_mean: f64,
    pub out_of_range: usize,
}

/// Both aggregation orders; they agree analytically and are computed
/// separately as a cross-check.
pub fn aggregate_happiness(
    values: &[f64],
    bounds: RewardBounds,
) -> Result<Aggregate, HappinessError> {
    if values.is_empty() {
        return Err(HappinessError::Empty);
    }
    let n = values.len() as f64;
    let mut sum_h = 0.0;
    let mut out_of_range = 0;
    for &r in values {
        let h = happiness(r, bounds)?;
        sum_h += h.value;
        out_of_range += h.out_of_range as usize;
    }
    let mean_r = values.iter().sum::<f64>() / n;
    Ok(Aggregate {
        mean_of_h: sum_h / n,
        h_of_mean: happiness(mean_r, bounds)?.value,
        out_of_range,
    })
}

/// Cumulative rewards of one agent under its own personality.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPhaseData {
    pub agent: String,
    pub bounds: RewardBounds,
    pub test: Vec<f64>,
    pub society: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HappinessRow {
    pub agent: String,
    pub test: Aggregate,
    pub society: Aggregate,
    /// 1 = happiest.
    pub rank_test: usize,
    pub rank_society: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HappinessReport {
    pub rows: Vec<HappinessRow>,
    /// Kendall rank correlation between test and society happiness across
    /// agents; negative means the happier test agents are less happy in
    /// society.
    pub cross_phase_tau: f64,
}

impl HappinessReport {
    pub fn cross_phase_sign(&self) -> i8 {
        if self.cross_phase_tau > 0.0 {
            1
        } else if self.cross_phase_tau < 0.0 {
            -1
        } else {
            0
        }
    }

    /// CSV: `agent,phase,h_mean,h_of_mean_r,rank`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent,phase,h_mean,h_of_mean_r,rank\n");
        for r in &self.rows {
            for (phase, agg, rank) in [
                (Phase::Test, r.test, r.rank_test),
                (Phase::Society, r.society, r.rank_society),
            ] {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{:.6},{}",
                    r.agent, phase, agg.mean_of_h, agg.h_of_mean, rank
                );
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>8} {:>5} {:>10} {:>5}\n",
            "agent", "H_test", "rank", "H_society", "rank"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:>8.3} {:>5} {:>10.3} {:>5}",
                r.agent, r.test.mean_of_h, r.rank_test, r.society.mean_of_h, r.rank_society
            );
        }
        let relation = match self.cross_phase_sign() {
            -1 => "inverted",
            1 => "preserved",
            _ => "unrelated",
        };
        let _ = writeln!(
            out,
            "cross-phase ordering: {relation} (tau = {:.3})",
            self.cross_phase_tau
        );
        out
    }
}

fn ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut rank = vec![0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    rank
}

fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let x = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if x > 0.0 {
                s += 1;
            } else if x < 0.0 {
                s -= 1;
            }
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

pub fn happiness_report(agents: &[AgentPhaseData]) -> Result<HappinessReport, HappinessError> {
    let mut rows = Vec::with_capacity(agents.len());
    for a in agents {
        let missing = |phase| HappinessError::Incomplete {
            agent: a.agent.clone(),
            phase,
        };
        let test = aggregate_happiness(&a.test, a.bounds).map_err(|e| match e {
            HappinessError::Empty => missing(Phase::Test),
            e => e,
        })?;
        let society = aggregate_happiness(&a.society, a.bounds).map_err(|e| match e {
            HappinessError::Empty => missing(Phase::Society),
            e => e,
        })?;
        rows.push(HappinessRow {
            agent: a.agent.clone(),
            test,
            society,
            rank_test: 0,
            rank_society: 0,
        });
    }
    let h_test: Vec<f64> = rows.iter().map(|r| r.test.mean_of_h).collect();
    let h_soc: Vec<f64> = rows.iter().map(|r| r.society.mean_of_h).collect();
    for (row, (rt, rs)) in rows
        .iter_mut()
        .zip(ranks(&h_test).into_iter().zip(ranks(&h_soc)))
    {
        row.rank_test = rt;
        row.rank_society = rs;
    }
    Ok(HappinessReport {
        rows,
        cross_phase_tau: kendall_tau(&h_test, &h_soc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ID: RewardBounds = RewardBounds {
        r_star: -11.0,
        r_star_star: 11.0,
    };
    const SE: RewardBounds = RewardBounds {
        r_star: -6.0,
        r_star_star: 10.5,
    };

    #[test]
    fn endpoints() {
        assert_eq!(happiness(11.0, ID).unwrap().value, 1.0);
        assert_eq!(happiness(-6.0, SE).unwrap().value, 0.0);
        assert_eq!(happiness(10.5, SE).unwrap().value, 1.0);
    }

    #[test]
    fn table_values() {
        // (10.76 + 11) / 22 = 0.98909; (5.09 + 6) / 16.5 = 0.67212
        assert!((happiness(10.76, ID).unwrap().value - 0.9891).abs() < 1e-4);
        assert!((happiness(5.09, SE).unwrap().value - 0.6721).abs() < 1e-4);
    }

    #[test]
    fn out_of_range_flagged_not_clamped() {
        let h = happiness(12.0, ID).unwrap();
        assert!(h.out_of_range);
        assert!(h.value > 1.0);
        assert!(!happiness(0.0, ID).unwrap().out_of_range);
    }

    #[test]
    fn degenerate_bounds() {
        let b = RewardBounds {
            r_star: 1.0,
            r_star_star: 1.0,
        };
        assert!(matches!(
            happiness(1.0, b),
            Err(HappinessError::DegenerateBounds(..))
        ));
    }

    #[test]
    fn aggregation() {
        let a = aggregate_happiness(&[11.0, 11.0], ID).unwrap();
        assert_eq!((a.mean_of_h, a.h_of_mean), (1.0, 1.0));
        let a = aggregate_happiness(&[-11.0, 11.0], ID).unwrap();
        assert_eq!((a.mean_of_h, a.h_of_mean), (0.5, 0.5));
        assert_eq!(aggregate_happiness(&[], ID), Err(HappinessError::Empty));
    }

    #[test]
    fn report_ranks_and_relation() {
        let agents = vec![
            AgentPhaseData {
                agent: "A".into(),
                bounds: ID,
                test: vec![10.0],
                society: vec![-2.0],
            },
            AgentPhaseData {
                agent: "B".into(),
                bounds: ID,
                test: vec![5.0],
                society: vec![3.0],
            },
        ];
        let r = happiness_report(&agents).unwrap();
        assert_eq!((r.rows[0].rank_test, r.rows[0].rank_society), (1, 2));
        assert_eq!((r.rows[1].rank_test, r.rows[1].rank_society), (2, 1));
        assert_eq!(r.cross_phase_sign(), -1);
        let csv = r.to_csv();
        assert!(csv.starts_with("agent,phase,h_mean,h_of_mean_r,rank\nA,test,"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn report_requires_both_phases() {
        let agents = vec![AgentPhaseData {
            agent: "ID_L".into(),
            bounds: ID,
            test: vec![10.0],
            society: vec![],
        }];
        assert_eq!(
            happiness_report(&agents),
            Err(HappinessError::Incomplete {
                agent: "ID_L".into(),
                phase: Phase::Society
            })
        );
    }

    proptest::proptest! {
        #[test]
        fn monotone_and_linear(a in -20.0f64..20.0, b in -20.0f64..20.0, lo in -10.0f64..0.0, span in 0.5f64..30.0) {
            let bounds = RewardBounds { r_star: lo, r_star_star: lo + span };
            let ha = happiness(a, bounds).unwrap().value;
            let hb = happiness(b, bounds).unwrap().value;
            if a < b { proptest::prop_assert!(ha < hb); }
            let agg = aggregate_happiness(&[a, b], bounds).unwrap();
            proptest::prop_assert!((agg.mean_of_h - agg.h_of_mean).abs() <= 1e-12);
        }
    }
}
