//! Stand-in activity and mood classifiers plus classification-report metrics.
//!
//! The camera-based activity recognizer is replaced by a confusion-matrix
//! profile: for a ground-truth class, the predicted class is sampled from that
//! class's row. Mood estimation either replays a scripted valence/arousal trace
//! or applies a small rule table to physiological window features.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{activity_meta, AffectiveState, DomainError, Meta, ACTIVITY_COUNT};
use crate::sigproc::PhysioFeatures;
use crate::tsv::{self, TsvError};

const PROFILE_TESTSET_TSV: &str = include_str!("../data/profile_testset.tsv");
const PROFILE_REALTIME_TSV: &str = include_str!("../data/profile_realtime.tsv");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InferenceError {
    #[error("profile row {row} sums to {sum}, expected 1")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("profile entry ({row},{col}) = {value} is not a probability")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("malformed profile: {0}")]
    Table(#[from] TsvError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("classification report needs at least one pair")]
    EmptyReport,
    #[error("mood replay has no entry for period {0}")]
    EndOfReplay(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityObservation {
    pub t_ms: u64,
    pub activity: u8,
    pub confidence: f64,
}

impl ActivityObservation {
    pub fn meta(&self) -> Meta {
        activity_meta(self.activity).unwrap_or(Meta::DistractedDriving)
    }
}

/// Row-stochastic 10x10 confusion model, true class to predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierProfile {
    confusion: Vec<[f64; ACTIVITY_COUNT]>,
    pub seed: u64,
}

impl ClassifierProfile {
    pub fn new(
        confusion: [[f64; ACTIVITY_COUNT]; ACTIVITY_COUNT],
        seed: u64,
    ) -> Result<Self, InferenceError> {
        for (row, r) in confusion.iter().enumerate() {
            for (col, &value) in r.iter().enumerate() {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(InferenceError::BadEntry { row, col, value });
                }
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(InferenceError::RowNotStochastic { row, sum });
            }
        }
        Ok(Self {
            confusion: confusion.to_vec(),
            seed,
        })
    }

    pub fn identity(seed: u64) -> Self {
        let mut m = [[0.0; ACTIVITY_COUNT]; ACTIVITY_COUNT];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self::new(m, seed).unwrap()
    }

    /// Profile matching the published held-out test-set report: the safe
    /// class is never missed, and 6 of 912 distracted frames read as safe.
    pub fn test_set(seed: u64) -> Self {
        Self::from_tsv(PROFILE_TESTSET_TSV, seed).expect("bundled profile_testset.tsv")
    }

    /// Approximate profile for the in-vehicle deployment (about 84% accurate).
    pub fn realtime(seed: u64) -> Self {
        Self::from_tsv(PROFILE_REALTIME_TSV, seed).expect("bundled profile_realtime.tsv")
    }

    /// Parses `profile.tsv`: a header line then ten rows of `true p0 .. p9`.
    pub fn from_tsv(text: &str, seed: u64) -> Result<Self, InferenceError> {
        let mut m = [[f64::NAN; ACTIVITY_COUNT]; ACTIVITY_COUNT];
        let mut seen = [false; ACTIVITY_COUNT];
        for row in tsv::rows(text, "true")? {
            let id: usize = row.parse(0, "true")?;
            if id >= ACTIVITY_COUNT || seen[id] {
                return Err(TsvError {
                    line: row.line,
                    message: format!("bad or repeated row id {id}"),
                }
                .into());
            }
            seen[id] = true;
            for (j, cell) in m[id].iter_mut().enumerate() {
                *cell = row.parse(j + 1, "probability")?;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(TsvError {
                line: 0,
                message: format!("row {missing} missing"),
            }
            .into());
        }
        Self::new(m, seed)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("true");
        for j in 0..ACTIVITY_COUNT {
            out.push_str(&format!("\tp{j}"));
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push_str(&format!("\t{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn row(&self, true_class: u8) -> Result<&[f64; ACTIVITY_COUNT], InferenceError> {
        self.confusion.get(true_class as usize).ok_or_else(|| {
            DomainError::OutOfRange {
                field: "activity id",
                value: true_class as i64,
                min: 0,
                max: ACTIVITY_COUNT as i64 - 1,
            }
            .into()
        })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Samples a predicted class from the profile row of `true_class`. The
/// reported confidence is the row probability of the drawn class.
pub fn classify_activity(
    profile: &ClassifierProfile,
    true_class: u8,
    t_ms: u64,
    rng: &mut ChaCha8Rng,
) -> Result<ActivityObservation, InferenceError> {
    let row = profile.row(true_class)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = None;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if p > 0.0 && u < acc {
            pick = Some(j);
            break;
        }
    }
    // u landed in the rounding slack above the cumulative sum
    let pick = pick.unwrap_or_else(|| row.iter().rposition(|&p| p > 0.0).unwrap());
    Ok(ActivityObservation {
        t_ms,
        activity: pick as u8,
        confidence: row[pick],
    })
}

/// A profile bundled with the per-stream random state that drives it.
#[derive(Debug, Clone)]
pub struct ActivityClassifier {
    profile: ClassifierProfile,
    rng: ChaCha8Rng,
}

impl ActivityClassifier {
    pub fn new(profile: ClassifierProfile) -> Self {
        let rng = profile.rng();
        Self { profile, rng }
    }

    pub fn classify(
        &mut self,
        true_class: u8,
        t_ms: u64,
    ) -> Result<ActivityObservation, InferenceError> {
        classify_activity(&self.profile, true_class, t_ms, &mut self.rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when nothing was predicted as this class; precision is reported as 0.
    pub precision_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub micro_avg: AverageMetrics,
    pub weighted_avg: AverageMetrics,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class precision/recall/F1 for an arbitrary label set, in `labels` order.
pub fn classification_report_for<L: PartialEq + fmt::Display>(
    pairs: &[(L, L)],
    labels: &[L],
) -> Result<ClassificationReport, InferenceError> {
    if pairs.is_empty() {
        return Err(InferenceError::EmptyReport);
    }
    let mut classes = Vec::with_capacity(labels.len());
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for label in labels {
        let tp = pairs
            .iter()
            .filter(|(t, p)| t == label && p == label)
            .count();
        let fp = pairs
            .iter()
            .filter(|(t, p)| t != label && p == label)
            .count();
        let fn_ = pairs
            .iter()
            .filter(|(t, p)| t == label && p != label)
            .count();
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        classes.push(ClassMetrics {
            label: label.to_string(),
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: tp + fn_,
            precision_undefined: tp + fp == 0,
        });
    }
    let total: usize = classes.iter().map(|c| c.support).sum();
    let micro_p = ratio(tp_all, tp_all + fp_all);
    let micro_r = ratio(tp_all, tp_all + fn_all);
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
        }
    };
    let weighted_avg = AverageMetrics {
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
        support: total,
    };
    Ok(ClassificationReport {
        micro_avg: AverageMetrics {
            precision: micro_p,
            recall: micro_r,
            f1: harmonic(micro_p, micro_r),
            support: total,
        },
        weighted_avg,
        classes,
    })
}

/// Binary safe/distracted report, safe class first.
pub fn classification_report(
    pairs: &[(Meta, Meta)],
) -> Result<ClassificationReport, InferenceError> {
    classification_report_for(pairs, &[Meta::SafeDriving, Meta::DistractedDriving])
}

/// Collapses ten-class (true, predicted) pairs onto the meta-classes.
pub fn collapse_to_meta(pairs: &[(u8, u8)]) -> Result<Vec<(Meta, Meta)>, InferenceError> {
    pairs
        .iter()
        .map(|&(t, p)| Ok((activity_meta(t)?, activity_meta(p)?)))
        .collect()
}

/// Expands a square count matrix (rows true, columns predicted) into pairs.
pub fn pairs_from_confusion<L: Copy>(labels: &[L], counts: &[Vec<usize>]) -> Vec<(L, L)> {
    let mut out = Vec::new();
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            out.extend(std::iter::repeat_n((labels[i], labels[j]), c));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoodSource {
    Stub,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoodEstimate {
    pub state: AffectiveState,
    pub period_index: u64,
    pub source: MoodSource,
}

/// Scripted valence/arousal per observation period (`mood_trace.tsv`).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MoodTrace {
    entries: BTreeMap<u64, AffectiveState>,
}

impl MoodTrace {
    pub fn new(entries: impl IntoIterator<Item = (u64, AffectiveState)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn from_tsv(text: &str) -> Result<Self, InferenceError> {
        let mut entries = BTreeMap::new();
        for row in tsv::rows(text, "period")? {
            let state = AffectiveState::new(row.parse(1, "valence")?, row.parse(2, "arousal")?)?;
            entries.insert(row.parse(0, "period")?, state);
        }
        Ok(Self { entries })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("period\tvalence\tarousal\n");
        for (p, s) in &self.entries {
            out.push_str(&format!("{p}\t{}\t{}\n", s.valence(), s.arousal()));
        }
        out
    }

    pub fn get(&self, period: u64) -> Option<AffectiveState> {
        self.entries.get(&period).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Rule table for the stub estimator: EDA window standard deviation picks an
/// arousal band (higher spread, higher arousal); valence is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StubMapping {
    /// Ascending cut points between the four EDA spread bands.
    pub eda_std_edges: [f64; 3],
    pub arousal_by_band: [u8; 4],
    pub valence: u8,
}

impl Default for StubMapping {
    fn default() -> Self {
        Self {
            eda_std_edges: [0.05, 0.15, 0.4],
            arousal_by_band: [1, 4, 6, 8],
            valence: 5,
        }
    }
}

impl StubMapping {
    pub fn band(&self, eda_std: f64) -> usize {
        self.eda_std_edges
            .iter()
            .filter(|&&edge| eda_std >= edge)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MoodEstimator {
    Stub(StubMapping),
    Replay(MoodTrace),
}

pub fn estimate_mood(
    features: Option<&PhysioFeatures>,
    estimator: &MoodEstimator,
    period: u64,
) -> Result<MoodEstimate, InferenceError> {
    match estimator {
        MoodEstimator::Replay(trace) => {
            let state = trace
                .get(period)
                .ok_or(InferenceError::EndOfReplay(period))?;
            Ok(MoodEstimate {
                state,
                period_index: period,
                source: MoodSource::Replay,
            })
        }
        MoodEstimator::Stub(map) => {
            let eda_std = features.map_or(0.0, |f| f.eda.window.std);
            let arousal = map.arousal_by_band[map.band(eda_std)];
            Ok(MoodEstimate {
                state: AffectiveState::new(map.valence as i64, arousal as i64)?,
                period_index: period,
                source: MoodSource::Stub,
            })
        }
    }
}
