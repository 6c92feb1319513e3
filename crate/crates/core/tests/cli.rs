mod common;

use std::path::Path;
use std::process::{Command, Output};

use persona_pong::court::Side;
use persona_pong::personas::Personality;
use persona_pong::qlearner::save_checkpoint;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persona-pong"))
        .args(args)
        .current_dir(dir)
        .env_remove("PERSONA_PONG_OUT")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["eval", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(
        run(dir.path(), &["enumerate", "--court.bogus", "1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn enumerate_certifies_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["enumerate", "--personality", "se", "--out", "e"],
    );
    assert_eq!(out.status.code(), Some(0));
    let bounds = read(dir.path(), "e/bounds.csv");
    assert!(bounds.contains("\nid,-11,11,"));
    assert!(bounds.contains("\nse,-6,10.5,"));
    let outcomes = read(dir.path(), "e/outcomes.csv");
    let se: Vec<f64> = outcomes
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(se.iter().copied().fold(f64::INFINITY, f64::min), -6.0);
    assert_eq!(se.iter().copied().fold(f64::NEG_INFINITY, f64::max), 10.5);
    assert!(String::from_utf8_lossy(&out.stdout).contains("705432"));
}

#[test]
fn eval_writes_transcripts_and_one_stats_row() {
    let dir = tempfile::tempdir().unwrap();
    let ck = common::zero_checkpoint(Personality::Id, Side::Left);
    save_checkpoint(&dir.path().join("id_l.ckpt"), &ck.qf, &ck.meta).unwrap();
    let out = run(
        dir.path(),
        &[
            "eval",
            "--agent",
            "id_l.ckpt",
            "--opponent",
            "handcoded",
            "--matches",
            "1000",
            "--epsilon",
            "0",
            "--workers",
            "2",
            "--out",
            "ev",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        read(dir.path(), "ev/transcripts.jsonl").lines().count(),
        1000
    );
    let stats = read(dir.path(), "ev/stats.csv");
    let lines: Vec<&str> = stats.lines().collect();
    assert_eq!(lines[0], "agent,avg_score,pct_won,avg_r_id,avg_r_se");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("ID_L,"));
    let cfg: serde_json::Value = serde_json::from_str(&read(dir.path(), "ev/config.json")).unwrap();
    assert_eq!(cfg["matches"], 1000);
    assert!(cfg.get("workers").is_none());

    // Wrong side without the mirror flag.
    let out = run(
        dir.path(),
        &[
            "eval",
            "--agent",
            "id_l.ckpt",
            "--side",
            "right",
            "--matches",
            "2",
            "--out",
            "ev2",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let out = run(
        dir.path(),
        &[
            "eval",
            "--agent",
            "id_l.ckpt",
            "--side",
            "right",
            "--mirror",
            "--matches",
            "2",
            "--out",
            "ev2",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"seed": 4, "matches": 3, "court": {"points_to_win": 3}}"#,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &[
            "match",
            "--config",
            "c.json",
            "--agent",
            "handcoded",
            "--matches",
            "2",
            "--court.points_to_win",
            "2",
            "--out",
            "m",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cfg: serde_json::Value = serde_json::from_str(&read(dir.path(), "m/config.json")).unwrap();
    assert_eq!(cfg["seed"], 4);
    assert_eq!(cfg["matches"], 2);
    assert_eq!(cfg["court"]["points_to_win"], 2);
    let lines = read(dir.path(), "m/match.jsonl");
    assert_eq!(lines.lines().count(), 2);
    assert!(lines.lines().all(|l| l.contains("\"points_to_win\":2")));

    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"court": {"paddle_height": 2.0}}"#,
    )
    .unwrap();
    assert_eq!(
        run(
            dir.path(),
            &[
                "match",
                "--config",
                "bad.json",
                "--agent",
                "handcoded",
                "--out",
                "m2"
            ]
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_persona-pong"))
        .args(["enumerate", "--court.points_to_win", "3"])
        .current_dir(dir.path())
        .env("PERSONA_PONG_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from_env/bounds.csv").exists());
}

#[test]
fn frame_dump_writes_one_image_per_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "match",
            "--agent",
            "handcoded",
            "--dump-frames",
            "--court.points_to_win",
            "1",
            "--out",
            "m",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let line = read(dir.path(), "m/match.jsonl");
    let t: persona_pong::arena::MatchTranscript = serde_json::from_str(line.trim()).unwrap();
    let frames = std::fs::read_dir(dir.path().join("m/frames"))
        .unwrap()
        .count() as u64;
    assert_eq!(frames, t.steps + 1);
    let pgm = std::fs::read(dir.path().join("m/frames/m0000_t000000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n84 84\n255\n"));
}

#[test]
fn divergence_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "train",
            "--frames",
            "30000",
            "--snapshot_every",
            "1000",
            "--learner.learning_rate",
            "1e30",
            "--out",
            "t",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("last good snapshot"));
}

#[test]
fn report_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (side, p) in [("left", Personality::Id), ("right", Personality::SuperEgo)] {
        let side: Side = side.parse().unwrap();
        let ck = common::zero_checkpoint(p, side);
        save_checkpoint(
            &d.join(format!("{}.ckpt", ck.meta.agent_name())),
            &ck.qf,
            &ck.meta,
        )
        .unwrap();
    }
    assert_eq!(
        run(
            d,
            &[
                "eval",
                "--agent",
                "ID_L.ckpt",
                "--matches",
                "5",
                "--out",
                "t1"
            ]
        )
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        run(
            d,
            &[
                "eval",
                "--agent",
                "SE_R.ckpt",
                "--matches",
                "5",
                "--out",
                "t2"
            ]
        )
        .status
        .code(),
        Some(0)
    );
    let out = run(
        d,
        &[
            "tournament",
            "--agent",
            "ID_L.ckpt",
            "--agent",
            "SE_R.ckpt",
            "--pairing",
            "ID_L:SE_R",
            "--matches",
            "5",
            "--out",
            "s",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(read(d, "s/tournament.csv")
        .starts_with("match,avg_score_l,avg_score_r,pct_won_l,pct_won_r\nID_L vs SE_R,"));
    let args = [
        "report",
        "--test",
        "t1/transcripts.jsonl",
        "--test",
        "t2/transcripts.jsonl",
        "--society",
        "s/transcripts.jsonl",
    ];
    assert_eq!(
        run(d, &[&args[..], &["--out", "r1"]].concat())
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run(d, &[&args[..], &["--out", "r2"]].concat())
            .status
            .code(),
        Some(0)
    );
    let a = read(d, "r1/happiness.csv");
    assert_eq!(a, read(d, "r2/happiness.csv"));
    assert!(a.starts_with("agent,phase,h_mean,h_of_mean_r,rank"));
    assert_eq!(a.lines().count(), 5);
}
