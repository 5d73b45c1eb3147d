//! Bayesian mood-repair recommendation.
//!
//! A [`TransitionModel`] tallies lifelog triples (current affective state,
//! content played, next affective state) and answers the smoothed conditional
//! `P(next | content, current)`. [`plan_repair`] then searches for the content
//! sequence whose most likely state path reaches a target affect (by default
//! positive valence) with maximal summed log-probability. Contents are decision
//! variables chosen per step, so the Viterbi recursion maximizes jointly over
//! the content and the state at every step.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{AffectiveState, ContentId, DomainError, Polarity};
use crate::mining::{AssociationRule, Item};
use crate::tsv::{self, TsvError};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_HORIZON: usize = 5;

/// Log-probabilities are compared in units of 1e-12 nats. Integer sums are
/// exact and order-independent, so equal-probability paths tie exactly and the
/// deterministic tie-break is well defined.
const SCORE_SCALE: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecommendError {
    #[error("smoothing alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("candidate content set is empty")]
    EmptyCandidates,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("state index {0} is outside the state space")]
    BadState(usize),
    #[error("malformed model: {0}")]
    Table(#[from] TsvError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("bad target `{0}`; expected `positive`, `valence>=N` or `v,a`")]
    BadTarget(String),
}

/// Granularity of the affective state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSpace {
    /// All 81 (valence, arousal) cells.
    #[default]
    Full,
    /// 3x3 grid of 3x3 blocks; each block is represented by its center cell.
    Coarse,
}

impl StateSpace {
    pub fn size(self) -> usize {
        match self {
            StateSpace::Full => 81,
            StateSpace::Coarse => 9,
        }
    }

    pub fn index(self, state: AffectiveState) -> usize {
        match self {
            StateSpace::Full => state.index(),
            StateSpace::Coarse => {
                ((state.valence() - 1) / 3) as usize * 3 + ((state.arousal() - 1) / 3) as usize
            }
        }
    }

    pub fn state(self, idx: usize) -> Option<AffectiveState> {
        match self {
            StateSpace::Full => AffectiveState::from_index(idx),
            StateSpace::Coarse => (idx < 9).then(|| {
                AffectiveState::new((idx / 3) as i64 * 3 + 2, (idx % 3) as i64 * 3 + 2).unwrap()
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateSpace::Full => "full",
            StateSpace::Coarse => "coarse",
        }
    }
}

impl FromStr for StateSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(StateSpace::Full),
            "coarse" => Ok(StateSpace::Coarse),
            other => Err(format!("unknown state space `{other}`")),
        }
    }
}

/// Conditional transition probabilities over indexed states.
pub trait Transitions {
    fn state_count(&self) -> usize;

    /// `P(to | content, from)`; zero marks an impossible transition.
    fn prob(&self, from: usize, content: ContentId, to: usize) -> f64;
}

/// Laplace-smoothed transition counts learned from a driver's lifelog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    state_space: StateSpace,
    alpha: f64,
    counts: BTreeMap<(usize, ContentId, usize), u64>,
    totals: BTreeMap<(usize, ContentId), u64>,
}

impl TransitionModel {
    pub fn new(state_space: StateSpace, alpha: f64) -> Result<Self, RecommendError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(RecommendError::InvalidAlpha(alpha));
        }
        Ok(Self {
            state_space,
            alpha,
            counts: BTreeMap::new(),
            totals: BTreeMap::new(),
        })
    }

    pub fn state_space(&self) -> StateSpace {
        self.state_space
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn observe(&mut self, from: AffectiveState, content: ContentId, to: AffectiveState) {
        self.add_count(
            self.state_space.index(from),
            content,
            self.state_space.index(to),
            1,
        );
    }

    fn add_count(&mut self, from: usize, content: ContentId, to: usize, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry((from, content, to)).or_default() += n;
        *self.totals.entry((from, content)).or_default() += n;
    }

    pub fn count(&self, from: AffectiveState, content: ContentId, to: AffectiveState) -> u64 {
        let ss = self.state_space;
        self.counts
            .get(&(ss.index(from), content, ss.index(to)))
            .copied()
            .unwrap_or(0)
    }

    /// Smoothed `P(to | content, from)`.
    pub fn probability(&self, from: AffectiveState, content: ContentId, to: AffectiveState) -> f64 {
        self.prob(
            self.state_space.index(from),
            content,
            self.state_space.index(to),
        )
    }

    pub fn observations(&self) -> u64 {
        self.totals.values().sum()
    }

    /// Counts multiplied by `k` with alpha scaled by the same factor.
    pub fn scaled(&self, k: u64) -> Result<Self, RecommendError> {
        let mut out = TransitionModel::new(self.state_space, self.alpha * k as f64)?;
        for (&(f, c, t), &n) in &self.counts {
            out.add_count(f, c, t, n * k);
        }
        Ok(out)
    }

    /// Persists as `model.tsv`: metadata comments, then `s c s_next count`
    /// rows with states written as `v,a`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# alpha={:?}\n# state_space={}\ns\tc\ts_next\tcount\n",
            self.alpha,
            self.state_space.name()
        );
        for (&(f, c, t), &n) in &self.counts {
            let (f, t) = (
                self.state_space.state(f).unwrap(),
                self.state_space.state(t).unwrap(),
            );
            out.push_str(&format!(
                "{},{}\t{}\t{},{}\t{}\n",
                f.valence(),
                f.arousal(),
                c,
                t.valence(),
                t.arousal(),
                n
            ));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, RecommendError> {
        let mut alpha = DEFAULT_ALPHA;
        let mut space = StateSpace::Full;
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let meta = line.trim_start_matches('#').trim();
            if let Some(v) = meta.strip_prefix("alpha=") {
                alpha = v.parse().map_err(|_| TsvError {
                    line: 0,
                    message: format!("bad alpha `{v}`"),
                })?;
            } else if let Some(v) = meta.strip_prefix("state_space=") {
                space = v.parse().map_err(|m| TsvError {
                    line: 0,
                    message: m,
                })?;
            }
        }
        let mut model = TransitionModel::new(space, alpha)?;
        let state = |row: &tsv::Row, idx, name| -> Result<AffectiveState, RecommendError> {
            row.get(idx, name)?.parse().map_err(|m: String| {
                TsvError {
                    line: row.line,
                    message: m,
                }
                .into()
            })
        };
        for row in tsv::rows(text, "s")? {
            let from = state(&row, 0, "s")?;
            let content = ContentId(row.parse(1, "c")?);
            let to = state(&row, 2, "s_next")?;
            model.add_count(
                space.index(from),
                content,
                space.index(to),
                row.parse(3, "count")?,
            );
        }
        Ok(model)
    }

    /// Hex SHA-256 of the canonical `model.tsv` text; identifies a snapshot.
    pub fn snapshot_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }
}

impl Transitions for TransitionModel {
    fn state_count(&self) -> usize {
        self.state_space.size()
    }

    fn prob(&self, from: usize, content: ContentId, to: usize) -> f64 {
        let count = self.counts.get(&(from, content, to)).copied().unwrap_or(0) as f64;
        let total = self.totals.get(&(from, content)).copied().unwrap_or(0) as f64;
        (count + self.alpha) / (total + self.alpha * self.state_space.size() as f64)
    }
}

/// Tallies `history` into a full-resolution model.
pub fn learn_transitions(
    history: &[(AffectiveState, ContentId, AffectiveState)],
    alpha: f64,
) -> Result<TransitionModel, RecommendError> {
    learn_transitions_in(history, alpha, StateSpace::Full)
}

pub fn learn_transitions_in(
    history: &[(AffectiveState, ContentId, AffectiveState)],
    alpha: f64,
    state_space: StateSpace,
) -> Result<TransitionModel, RecommendError> {
    let mut model = TransitionModel::new(state_space, alpha)?;
    for &(from, content, to) in history {
        model.observe(from, content, to);
    }
    Ok(model)
}

/// Explicit conditional probability table, used for hand-built models.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    states: usize,
    contents: Vec<ContentId>,
    probs: Vec<f64>,
}

impl TransitionTable {
    /// All-zero table; fill with [`TransitionTable::set`].
    pub fn new(states: usize, mut contents: Vec<ContentId>) -> Self {
        contents.sort();
        contents.dedup();
        let probs = vec![0.0; states * contents.len() * states];
        Self {
            states,
            contents,
            probs,
        }
    }

    fn slot(&self, from: usize, content: ContentId, to: usize) -> Option<usize> {
        let c = self.contents.binary_search(&content).ok()?;
        (from < self.states && to < self.states)
            .then(|| (from * self.contents.len() + c) * self.states + to)
    }

    pub fn set(&mut self, from: usize, content: ContentId, to: usize, p: f64) {
        let slot = self
            .slot(from, content, to)
            .expect("state or content outside the table");
        self.probs[slot] = p;
    }

    pub fn contents(&self) -> &[ContentId] {
        &self.contents
    }
}

impl Transitions for TransitionTable {
    fn state_count(&self) -> usize {
        self.states
    }

    fn prob(&self, from: usize, content: ContentId, to: usize) -> f64 {
        self.slot(from, content, to).map_or(0.0, |s| self.probs[s])
    }
}

/// Which affective states end a repair plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Target {
    /// Valence at or above the bound.
    MinValence(u8),
    Polarity(Polarity),
    Exact(AffectiveState),
}

impl Default for Target {
    fn default() -> Self {
        Target::MinValence(6)
    }
}

impl Target {
    pub fn accepts(&self, state: AffectiveState) -> bool {
        match *self {
            Target::MinValence(v) => state.valence() >= v,
            Target::Polarity(p) => state.polarity() == p,
            Target::Exact(s) => state == s,
        }
    }
}

impl FromStr for Target {
    type Err = RecommendError;

    /// `positive`, `neutral`, `negative`, `valence>=N`, or an exact `v,a`.
    fn from_str(s: &str) -> Result<Self, RecommendError> {
        let t = s.trim();
        match t {
            "positive" => return Ok(Target::Polarity(Polarity::Positive)),
            "neutral" => return Ok(Target::Polarity(Polarity::Neutral)),
            "negative" => return Ok(Target::Polarity(Polarity::Negative)),
            _ => {}
        }
        if let Some(v) = t.strip_prefix("valence>=") {
            let v: u8 = v
                .trim()
                .parse()
                .map_err(|_| RecommendError::BadTarget(s.into()))?;
            return Ok(Target::MinValence(v));
        }
        t.parse::<AffectiveState>()
            .map(Target::Exact)
            .map_err(|_| RecommendError::BadTarget(s.into()))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::MinValence(v) => write!(f, "valence>={v}"),
            Target::Polarity(p) => write!(f, "{}", format!("{p:?}").to_lowercase()),
            Target::Exact(s) => write!(f, "{},{}", s.valence(), s.arousal()),
        }
    }
}

/// A plan over indexed states.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedPlan {
    /// `(content, resulting state)` per step.
    pub steps: Vec<(ContentId, usize)>,
    pub log_likelihood: f64,
}

fn quantize(p: f64) -> Option<i64> {
    (p > 0.0).then(|| (p.ln() * SCORE_SCALE).round() as i64)
}

#[derive(Clone)]
struct Partial {
    score: i64,
    path: Vec<(ContentId, usize)>,
}

impl Partial {
    /// Higher score wins; equal scores prefer the shorter path, then the
    /// lexicographically smaller `(content, state)` sequence.
    fn beats(&self, other: &Partial) -> bool {
        (other.score, self.path.len(), &self.path) < (self.score, other.path.len(), &other.path)
    }
}

fn check_plan_args(
    n: usize,
    start: usize,
    horizon: usize,
    candidates: &[ContentId],
) -> Result<(), RecommendError> {
    if candidates.is_empty() {
        return Err(RecommendError::EmptyCandidates);
    }
    if horizon == 0 {
        return Err(RecommendError::ZeroHorizon);
    }
    if start >= n {
        return Err(RecommendError::BadState(start));
    }
    Ok(())
}

/// Viterbi search over indexed states.
///
/// Returns `Ok(None)` when no path of at most `horizon` steps ends in an
/// accepted state. A start state that is already accepted yields an empty plan.
pub fn plan_repair_indexed<M: Transitions + ?Sized>(
    model: &M,
    start: usize,
    accept: impl Fn(usize) -> bool,
    horizon: usize,
    candidates: &[ContentId],
) -> Result<Option<IndexedPlan>, RecommendError> {
    check_plan_args(model.state_count(), start, horizon, candidates)?;
    if accept(start) {
        return Ok(Some(IndexedPlan {
            steps: Vec::new(),
            log_likelihood: 0.0,
        }));
    }
    Ok(viterbi(model, start, accept, horizon, candidates))
}

fn viterbi<M: Transitions + ?Sized>(
    model: &M,
    start: usize,
    accept: impl Fn(usize) -> bool,
    horizon: usize,
    candidates: &[ContentId],
) -> Option<IndexedPlan> {
    let n = model.state_count();
    let mut contents = candidates.to_vec();
    contents.sort();
    contents.dedup();
    let width = contents.len();

    // quantized log-probabilities, None for impossible transitions
    let mut table = vec![None; n * width * n];
    for from in 0..n {
        for (ci, &c) in contents.iter().enumerate() {
            for to in 0..n {
                table[(from * width + ci) * n + to] = quantize(model.prob(from, c, to));
            }
        }
    }

    let mut layer: Vec<Option<Partial>> = vec![None; n];
    layer[start] = Some(Partial {
        score: 0,
        path: Vec::new(),
    });
    let mut best: Option<Partial> = None;
    for _ in 0..horizon {
        let mut next: Vec<Option<Partial>> = vec![None; n];
        for (from, cur) in layer.iter().enumerate() {
            let Some(cur) = cur else { continue };
            for (ci, &c) in contents.iter().enumerate() {
                for (to, slot) in next.iter_mut().enumerate() {
                    let Some(step) = table[(from * width + ci) * n + to] else {
                        continue;
                    };
                    let score = cur.score + step;
                    if slot.as_ref().is_some_and(|s| s.score > score) {
                        continue;
                    }
                    let mut path = Vec::with_capacity(cur.path.len() + 1);
                    path.extend_from_slice(&cur.path);
                    path.push((c, to));
                    let cand = Partial { score, path };
                    if slot.as_ref().is_none_or(|s| cand.beats(s)) {
                        *slot = Some(cand);
                    }
                }
            }
        }
        for (state, cand) in next.iter().enumerate() {
            if let Some(cand) = cand {
                if accept(state) && best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand.clone());
                }
            }
        }
        layer = next;
    }

    best.map(|b| {
        let mut prev = start;
        let log_likelihood = b
            .path
            .iter()
            .map(|&(c, to)| {
                let lp = model.prob(prev, c, to).ln();
                prev = to;
                lp
            })
            .sum();
        IndexedPlan {
            steps: b.path,
            log_likelihood,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairPlan {
    pub contents: Vec<ContentId>,
    pub predicted_states: Vec<AffectiveState>,
    pub log_likelihood: f64,
}

impl RepairPlan {
    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    /// Recomputes the summed log-likelihood of this plan under `model`.
    pub fn log_likelihood_under(&self, model: &TransitionModel, start: AffectiveState) -> f64 {
        let mut prev = start;
        self.contents
            .iter()
            .zip(&self.predicted_states)
            .map(|(&c, &s)| {
                let lp = model.probability(prev, c, s).ln();
                prev = s;
                lp
            })
            .sum()
    }
}

/// Maximum-likelihood content sequence from `start` to a state accepted by
/// `target`, over at most `horizon` contents drawn from `candidates`.
///
/// Among equally likely plans the shorter one wins; remaining ties go to the
/// lowest content id, then the lowest state index, compared step by step from
/// the start. `Ok(None)` signals that no plan
/// exists within the horizon.
pub fn plan_repair(
    model: &TransitionModel,
    start: AffectiveState,
    target: &Target,
    horizon: usize,
    candidates: &[ContentId],
) -> Result<Option<RepairPlan>, RecommendError> {
    let ss = model.state_space();
    let start_idx = ss.index(start);
    check_plan_args(ss.size(), start_idx, horizon, candidates)?;
    // acceptance of the start is judged on the exact state, not its coarse cell
    if target.accepts(start) {
        return Ok(Some(RepairPlan {
            contents: Vec::new(),
            predicted_states: Vec::new(),
            log_likelihood: 0.0,
        }));
    }
    let accept = |idx: usize| ss.state(idx).is_some_and(|s| target.accepts(s));
    let plan = viterbi(model, start_idx, accept, horizon, candidates);
    Ok(plan.map(|p| RepairPlan {
        contents: p.steps.iter().map(|s| s.0).collect(),
        predicted_states: p.steps.iter().map(|s| ss.state(s.1).unwrap()).collect(),
        log_likelihood: p.log_likelihood,
    }))
}

/// Contents suggested by rules whose antecedent holds in `context`, ordered
/// by confidence (descending), support (descending), then id. When no rule
/// applies, the whole catalog is returned in id order.
pub fn candidate_contents(
    rules: &[AssociationRule],
    context: &std::collections::BTreeSet<Item>,
    catalog: &[ContentId],
) -> Vec<ContentId> {
    let mut matched: Vec<&AssociationRule> =
        rules.iter().filter(|r| r.applies_to(context)).collect();
    if matched.is_empty() {
        let mut all = catalog.to_vec();
        all.sort();
        all.dedup();
        return all;
    }
    matched.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.support.total_cmp(&a.support))
            .then(a.consequent.cmp(&b.consequent))
    });
    let mut out = Vec::new();
    for r in matched {
        if !out.contains(&r.consequent) {
            out.push(r.consequent);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::Itemset;

    fn st(v: i64, a: i64) -> AffectiveState {
        AffectiveState::new(v, a).unwrap()
    }

    #[test]
    fn empty_history_is_uniform() {
        let m = learn_transitions(&[], 1.0).unwrap();
        for (f, t) in [(st(1, 1), st(9, 9)), (st(5, 5), st(5, 5))] {
            assert!((m.probability(f, ContentId(3), t) - 1.0 / 81.0).abs() < 1e-15);
        }
        let c = learn_transitions_in(&[], 2.0, StateSpace::Coarse).unwrap();
        assert!((c.probability(st(1, 1), ContentId(1), st(9, 9)) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn tiny_alpha_concentrates_on_observed() {
        let m = learn_transitions(&[(st(2, 7), ContentId(20), st(6, 4))], 1e-9).unwrap();
        assert!(m.probability(st(2, 7), ContentId(20), st(6, 4)) > 1.0 - 1e-6);
    }

    #[test]
    fn hand_counted_toy_history() {
        let (a, b, c) = (st(2, 2), st(5, 5), st(8, 8));
        let k = ContentId(1);
        let history = [(a, k, b), (a, k, b), (a, k, c), (b, k, c)];
        let m = learn_transitions_in(&history, 0.5, StateSpace::Coarse).unwrap();
        // (2 + 0.5) / (3 + 0.5 * 9)
        assert!((m.probability(a, k, b) - 2.5 / 7.5).abs() < 1e-15);
        assert!((m.probability(a, k, c) - 1.5 / 7.5).abs() < 1e-15);
        assert!((m.probability(a, k, a) - 0.5 / 7.5).abs() < 1e-15);
        assert!((m.probability(b, k, c) - 1.5 / 5.5).abs() < 1e-15);
        assert_eq!(m.count(a, k, b), 2);
    }

    #[test]
    fn conditionals_are_distributions() {
        let history = [
            (st(1, 1), ContentId(1), st(2, 2)),
            (st(1, 1), ContentId(1), st(9, 1)),
        ];
        let m = learn_transitions(&history, 0.3).unwrap();
        for from in [st(1, 1), st(4, 4)] {
            for c in [ContentId(1), ContentId(2)] {
                let sum: f64 = AffectiveState::all()
                    .map(|to| m.probability(from, c, to))
                    .sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        assert_eq!(
            learn_transitions(&[], 0.0).unwrap_err(),
            RecommendError::InvalidAlpha(0.0)
        );
        assert!(TransitionModel::new(StateSpace::Full, f64::NAN).is_err());
    }

    #[test]
    fn model_tsv_round_trip_and_hash() {
        let history = [
            (st(3, 8), ContentId(20), st(5, 6)),
            (st(5, 6), ContentId(4), st(7, 4)),
        ];
        let m = learn_transitions(&history, 0.75).unwrap();
        let back = TransitionModel::from_tsv(&m.to_tsv()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.snapshot_hash(), m.snapshot_hash());
        let other = learn_transitions(&history[..1], 0.75).unwrap();
        assert_ne!(other.snapshot_hash(), m.snapshot_hash());
    }

    #[test]
    fn already_at_target_gives_empty_plan() {
        let m = learn_transitions(&[], 1.0).unwrap();
        let p = plan_repair(&m, st(7, 5), &Target::default(), 5, &[ContentId(1)])
            .unwrap()
            .unwrap();
        assert!(p.is_empty());
        assert_eq!(p.log_likelihood, 0.0);
    }

    #[test]
    fn deterministic_chain() {
        let (c1, c2) = (ContentId(1), ContentId(2));
        let mut t = TransitionTable::new(3, vec![c1, c2]);
        for s in 0..3 {
            for c in [c1, c2] {
                t.set(s, c, s, 1.0);
            }
        }
        t.set(0, c1, 0, 0.0);
        t.set(0, c1, 1, 1.0);
        t.set(1, c2, 1, 0.0);
        t.set(1, c2, 2, 1.0);
        let p = plan_repair_indexed(&t, 0, |s| s == 2, 4, &[c1, c2])
            .unwrap()
            .unwrap();
        assert_eq!(p.steps, vec![(c1, 1), (c2, 2)]);
        assert_eq!(p.log_likelihood, 0.0);
        assert!(plan_repair_indexed(&t, 0, |s| s == 2, 1, &[c1, c2])
            .unwrap()
            .is_none());
    }

    #[test]
    fn plan_errors() {
        let m = learn_transitions(&[], 1.0).unwrap();
        assert_eq!(
            plan_repair(&m, st(2, 2), &Target::default(), 3, &[]),
            Err(RecommendError::EmptyCandidates)
        );
        assert_eq!(
            plan_repair(&m, st(2, 2), &Target::default(), 0, &[ContentId(1)]),
            Err(RecommendError::ZeroHorizon)
        );
    }

    #[test]
    fn uniform_model_picks_lowest_ids() {
        // every path of a given length is equally likely; the one-step plan
        // to the first accepted cell with the lowest content id wins
        let m = learn_transitions(&[], 1.0).unwrap();
        let p = plan_repair(
            &m,
            st(3, 8),
            &Target::default(),
            5,
            &[ContentId(9), ContentId(4)],
        )
        .unwrap()
        .unwrap();
        assert_eq!(p.contents, vec![ContentId(4)]);
        assert_eq!(p.predicted_states, vec![st(6, 1)]);
        assert!((p.log_likelihood - (1.0f64 / 81.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn learned_plan_follows_evidence() {
        let (calm, lift) = (ContentId(5), ContentId(20));
        let mut history = Vec::new();
        for _ in 0..20 {
            history.push((st(3, 8), lift, st(5, 6)));
            history.push((st(5, 6), calm, st(7, 4)));
            history.push((st(3, 8), calm, st(3, 9)));
        }
        let m = learn_transitions(&history, 1.0).unwrap();
        let p = plan_repair(&m, st(3, 8), &Target::default(), 5, &[calm, lift])
            .unwrap()
            .unwrap();
        assert_eq!(p.contents, vec![lift, calm]);
        assert_eq!(p.predicted_states, vec![st(5, 6), st(7, 4)]);
        assert!((p.log_likelihood_under(&m, st(3, 8)) - p.log_likelihood).abs() < 1e-12);
    }

    #[test]
    fn candidate_ranking() {
        let items = |names: &[&str]| {
            names
                .iter()
                .map(|s| s.parse::<Item>().unwrap())
                .collect::<Vec<_>>()
        };
        let rule = |ante: &[&str], c: u32, support: f64, confidence: f64| AssociationRule {
            antecedent: Itemset::new(items(ante)),
            consequent: ContentId(c),
            support,
            confidence,
        };
        let context = items(&["activity_3", "arousal_7", "valence_2", "env_light_low"])
            .into_iter()
            .collect();
        let rules = vec![
            rule(&["activity_3", "arousal_7", "valence_2"], 20, 0.4, 1.0),
            rule(&["activity_3"], 7, 0.5, 0.8),
            rule(&["valence_2"], 8, 0.3, 0.8),
            rule(&["activity_1"], 9, 0.9, 1.0),
        ];
        let catalog: Vec<ContentId> = (1..=24).map(ContentId).collect();
        assert_eq!(
            candidate_contents(&rules, &context, &catalog),
            vec![ContentId(20), ContentId(7), ContentId(8)]
        );
        let other = items(&["activity_5", "arousal_1", "valence_9"])
            .into_iter()
            .collect();
        assert_eq!(candidate_contents(&rules, &other, &catalog), catalog);
    }

    #[test]
    fn target_parsing() {
        assert_eq!(
            "valence>=6".parse::<Target>().unwrap(),
            Target::MinValence(6)
        );
        assert_eq!(
            "positive".parse::<Target>().unwrap(),
            Target::Polarity(Polarity::Positive)
        );
        assert_eq!("7,4".parse::<Target>().unwrap(), Target::Exact(st(7, 4)));
        assert!("happy".parse::<Target>().is_err());
        assert_eq!(Target::MinValence(6).to_string(), "valence>=6");
    }
}
