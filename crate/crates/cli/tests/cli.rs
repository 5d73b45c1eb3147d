use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use drivesafe::domain::{AffectiveState, ContentId};
use drivesafe::mining::{mine_rules, read_rules, write_transactions, ContextTransaction, Item};
use drivesafe::recommend::{learn_transitions, plan_repair, RepairPlan, Target};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data");

fn drivesafe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drivesafe"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn state(v: i64, a: i64) -> AffectiveState {
    AffectiveState::new(v, a).unwrap()
}

const SCRIPT: &str = "duration_s = 240\nseed = 5\ninclude_physio = false\n\
    [[activity]]\nstart_s = 0\nend_s = 120\nactivity = 3\n\
    [[activity]]\nstart_s = 120\nend_s = 240\nactivity = 0\n\
    [[mood]]\nperiod = 0\nvalence = 2\narousal = 7\n";

fn synth(dir: &Path) -> String {
    fs::write(dir.join("script.toml"), SCRIPT).unwrap();
    let out = drivesafe(&[
        "synth",
        dir.join("script.toml").to_str().unwrap(),
        dir.join("bundle").to_str().unwrap(),
    ]);
    stdout(&out).trim().to_string()
}

#[test]
fn stats_prints_descriptive_anova_and_interval_tables() {
    let text = stdout(&drivesafe(&[
        "stats",
        &format!("{DATA}/responses.tsv"),
        "--binary",
        &format!("{DATA}/binary.tsv"),
    ]));
    assert!(text
        .lines()
        .any(|l| l.starts_with('A') && l.contains("4.83") && l.contains("0.37")));
    assert!(text
        .lines()
        .any(|l| l.starts_with("Model") && l.contains("4.88") && l.contains("5.02")));
    assert!(text
        .lines()
        .any(|l| l.starts_with("Wilson") && l.contains("0.8014") && l.contains("0.9742")));
    assert!(text.contains("37 of 40"));
}

#[test]
fn run_with_seed_override_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let run = |seed: &str, out: &str| {
        let path = dir.path().join(out);
        stdout(&drivesafe(&[
            "run",
            &manifest,
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]));
        fs::read_to_string(path.join("events.log")).unwrap()
    };
    let a = run("9", "a");
    assert_eq!(a, run("9", "b"));
    assert_eq!(
        a.lines()
            .filter(|l| l.contains("\"SafetyNotification\""))
            .count(),
        800
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["notifications"], 800);
    assert_eq!(report["periods_processed"], 2);
}

#[test]
fn run_without_out_streams_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let text = stdout(&drivesafe(&["run", &manifest]));
    assert!(text
        .lines()
        .all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn mine_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let db: Vec<ContextTransaction> = (0..10u64)
        .map(|p| {
            let items = if p % 3 == 0 {
                vec![
                    Item::Activity(3),
                    Item::Arousal(7),
                    Item::Valence(2),
                    Item::Content(ContentId(20)),
                ]
            } else {
                vec![Item::Activity(0), Item::Arousal(4), Item::Valence(7)]
            };
            ContextTransaction::new(p, items).unwrap()
        })
        .collect();
    let path = dir.path().join("tx.jsonl");
    write_transactions(fs::File::create(&path).unwrap(), &db).unwrap();
    let text = stdout(&drivesafe(&[
        "mine",
        path.to_str().unwrap(),
        "--min-support",
        "0.2",
    ]));
    let rules = read_rules(text.as_bytes()).unwrap();
    assert_eq!(rules, mine_rules(&db, 0.2, 0.6).unwrap());
    assert!(!rules.is_empty());
}

#[test]
fn plan_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let history = vec![
        (state(2, 7), ContentId(20), state(7, 6)),
        (state(2, 7), ContentId(20), state(7, 6)),
        (state(2, 7), ContentId(4), state(3, 8)),
    ];
    let model = learn_transitions(&history, 1.0).unwrap();
    let path = dir.path().join("model.tsv");
    fs::write(&path, model.to_tsv()).unwrap();
    let text = stdout(&drivesafe(&[
        "plan",
        path.to_str().unwrap(),
        "2,7",
        "positive",
        "--horizon",
        "3",
        "--candidates",
        "4,20",
    ]));
    let got: RepairPlan = serde_json::from_str(&text).unwrap();
    let target: Target = "positive".parse().unwrap();
    let want = plan_repair(
        &model,
        state(2, 7),
        &target,
        3,
        &[ContentId(4), ContentId(20)],
    )
    .unwrap()
    .unwrap();
    assert_eq!(got.contents, want.contents);
    assert_eq!(got.contents[0], ContentId(20));
}

#[test]
fn bad_inputs_fail_with_messages() {
    let missing = drivesafe(&["run", "/nonexistent/manifest.toml"]);
    assert!(!missing.status.success());
    assert!(!missing.stderr.is_empty());
    let bad_target = drivesafe(&["plan", "model.tsv", "2,7", "elated"]);
    assert!(!bad_target.status.success());
    let bad_mode = drivesafe(&["run", "m.toml", "--mode", "fast"]);
    assert!(String::from_utf8_lossy(&bad_mode.stderr).contains("simulated|realtime"));
}
