#![allow(dead_code)]

pub mod oracle;

use std::fmt::Write;
use std::path::Path;

use drivesafe::cpsnet::{run_scenario, Manifest, Mode, RunOutput};
use drivesafe::scenario::{emit_session, SessionScript};

/// One two-minute period of a scripted session.
#[derive(Debug, Clone, Copy)]
pub struct PeriodSpec {
    pub activity: u8,
    pub valence: u8,
    pub arousal: u8,
    pub content: Option<u32>,
}

pub const fn period(activity: u8, valence: u8, arousal: u8, content: Option<u32>) -> PeriodSpec {
    PeriodSpec {
        activity,
        valence,
        arousal,
        content,
    }
}

/// Script text with one activity segment, waypoint and playback row per
/// period; `extra` is appended verbatim.
pub fn script_text(seed: u64, periods: &[PeriodSpec], include_physio: bool, extra: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "duration_s = {}\nseed = {seed}\ninclude_physio = {include_physio}",
        periods.len() * 120
    )
    .unwrap();
    for (i, p) in periods.iter().enumerate() {
        let start = i * 120;
        writeln!(
            s,
            "[[activity]]\nstart_s = {start}\nend_s = {}\nactivity = {}",
            start + 120,
            p.activity
        )
        .unwrap();
        writeln!(
            s,
            "[[mood]]\nperiod = {i}\nvalence = {}\narousal = {}",
            p.valence, p.arousal
        )
        .unwrap();
        if let Some(c) = p.content {
            writeln!(s, "[[playback]]\nperiod = {i}\ncontent = {c}").unwrap();
        }
    }
    s.push_str(extra);
    s
}

pub fn emit(text: &str, dir: &Path) -> Manifest {
    let script = SessionScript::from_toml(text).unwrap();
    let bundle = emit_session(&script, dir).unwrap();
    Manifest::load(&bundle.manifest).unwrap()
}

pub fn run(text: &str, dir: &Path) -> RunOutput {
    run_scenario(&emit(text, dir), Mode::Simulated).unwrap()
}

/// Ten periods embedding activity 3 / arousal 7 / valence 2 / content 20
/// four times; the other periods are positive and play nothing.
pub fn pattern_session() -> Vec<PeriodSpec> {
    (0..10)
        .map(|i| match i {
            1 | 4 | 6 | 9 => period(3, 2, 7, Some(20)),
            _ => period(0, 7, 4, None),
        })
        .collect()
}

/// Full planner sweep over every table shape up to 4 states, 3 contents and
/// horizon 4, every start and acceptance set. Returns the number of checks.
pub fn viterbi_sweep(seed: u64) -> Result<usize, String> {
    use drivesafe::domain::ContentId;
    use drivesafe::recommend::plan_repair_indexed;
    use oracle::{brute_plan, random_table, rng};

    let mut r = rng(seed);
    let mut checked = 0;
    for states in 1..=4usize {
        for contents in 1..=3usize {
            for _ in 0..6 {
                let (table, probs) = random_table(&mut r, states, contents);
                let ids: Vec<ContentId> = (1..=contents as u32).map(ContentId).collect();
                for horizon in 1..=4 {
                    for start in 0..states {
                        for mask in 0u32..(1 << states) {
                            let accept = |s: usize| mask & (1 << s) != 0;
                            let got = plan_repair_indexed(&table, start, accept, horizon, &ids)
                                .map_err(|e| e.to_string())?;
                            let want = brute_plan(&probs, start, &accept, horizon);
                            let ok = match (&got, &want) {
                                (None, None) => true,
                                (Some(g), Some((path, prod))) => {
                                    g.steps == *path && (g.log_likelihood - prod.ln()).abs() < 1e-9
                                }
                                _ => false,
                            };
                            if !ok {
                                return Err(format!(
                                    "states {states} contents {contents} horizon {horizon} start {start} mask {mask:b}: planner {got:?} vs oracle {want:?}"
                                ));
                            }
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(checked)
}

/// Frequent itemsets and rules on `dbs` random databases against the
/// powerset oracle, at every support/confidence pair given.
pub fn apriori_sweep(
    seed: u64,
    dbs: usize,
    supports: &[f64],
    confidences: &[f64],
) -> Result<usize, String> {
    use drivesafe::mining::{apriori_frequent, mine_rules};
    use oracle::{brute_frequent, brute_rules, random_db, rng};

    let mut r = rng(seed);
    for i in 0..dbs {
        let db = random_db(&mut r, 12);
        for &s in supports {
            let got = apriori_frequent(&db, s)
                .map_err(|e| e.to_string())?
                .into_map();
            if got != brute_frequent(&db, s) {
                return Err(format!(
                    "database {i}: frequent itemsets differ at support {s}"
                ));
            }
            for &c in confidences {
                let got = mine_rules(&db, s, c).map_err(|e| e.to_string())?;
                let want = brute_rules(&db, s, c);
                let same = got.len() == want.len()
                    && got.iter().zip(&want).all(|(g, w)| {
                        g.antecedent == w.antecedent
                            && g.consequent == w.consequent
                            && g.support == w.support
                            && (g.confidence - w.confidence).abs() < 1e-12
                    });
                if !same {
                    return Err(format!(
                        "database {i}: rules differ at support {s} confidence {c}"
                    ));
                }
            }
        }
    }
    Ok(dbs)
}
