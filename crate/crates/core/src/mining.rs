//! Context fusion and Apriori association-rule mining.
//!
//! Each observation period becomes one [`ContextTransaction`]: the recognized
//! activity, the estimated valence and arousal, the discretized cabin
//! environment and, when something was playing, the content id. Apriori finds
//! the itemsets at or above a relative minimum support, and rules are read off
//! as `context -> content` mappings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{ContentId, EnvThresholds, Humidity, Light, Temperature};
use crate::inference::{ActivityObservation, MoodEstimate};
use crate::sigproc::EnvSnapshot;

/// Absolute slack applied when comparing supports and confidences against
/// their thresholds.
pub const THRESHOLD_SLACK: f64 = 1e-12;

pub const DEFAULT_MIN_SUPPORT: f64 = 0.1;
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MiningError {
    #[error("transaction database is empty")]
    EmptyDb,
    #[error("min_support must be in (0, 1], got {0}")]
    InvalidSupport(f64),
    #[error("min_confidence must be in [0, 1], got {0}")]
    InvalidConfidence(f64),
    #[error(
        "activity observed in period {activity_period} but mood belongs to period {mood_period}"
    )]
    PeriodMismatch {
        activity_period: u64,
        mood_period: u64,
    },
    #[error("transaction holds two `{0}` items")]
    DuplicateItemType(&'static str),
    #[error("transaction lacks a `{0}` item")]
    MissingItem(&'static str),
    #[error("unrecognized item `{0}`")]
    BadItem(String),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// One typed fact about a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Item {
    Activity(u8),
    Arousal(u8),
    Valence(u8),
    EnvLight(Light),
    EnvTemp(Temperature),
    EnvHum(Humidity),
    Content(ContentId),
}

impl Item {
    pub fn kind(&self) -> &'static str {
        match self {
            Item::Activity(_) => "activity",
            Item::Arousal(_) => "arousal",
            Item::Valence(_) => "valence",
            Item::EnvLight(_) => "env_light",
            Item::EnvTemp(_) => "env_temp",
            Item::EnvHum(_) => "env_hum",
            Item::Content(_) => "content",
        }
    }

    pub fn is_content(&self) -> bool {
        matches!(self, Item::Content(_))
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Activity(a) => write!(f, "activity_{a}"),
            Item::Arousal(a) => write!(f, "arousal_{a}"),
            Item::Valence(v) => write!(f, "valence_{v}"),
            Item::EnvLight(l) => write!(f, "env_light_{}", l.as_str()),
            Item::EnvTemp(t) => write!(f, "env_temp_{}", t.as_str()),
            Item::EnvHum(h) => write!(f, "env_hum_{}", h.as_str()),
            Item::Content(c) => write!(f, "content_{c}"),
        }
    }
}

impl FromStr for Item {
    type Err = MiningError;

    fn from_str(s: &str) -> Result<Self, MiningError> {
        let bad = || MiningError::BadItem(s.to_string());
        let (kind, value) = s.rsplit_once('_').ok_or_else(bad)?;
        let num = |max: u32| -> Result<u32, MiningError> {
            value
                .parse::<u32>()
                .ok()
                .filter(|v| *v <= max)
                .ok_or_else(bad)
        };
        Ok(match kind {
            "activity" => Item::Activity(num(9)? as u8),
            "arousal" => Item::Arousal(num(9).ok().filter(|v| *v >= 1).ok_or_else(bad)? as u8),
            "valence" => Item::Valence(num(9).ok().filter(|v| *v >= 1).ok_or_else(bad)? as u8),
            "content" => Item::Content(ContentId(
                num(u32::MAX).ok().filter(|v| *v >= 1).ok_or_else(bad)?,
            )),
            "env_light" => Item::EnvLight(match value {
                "low" => Light::Low,
                "medium" => Light::Medium,
                "high" => Light::High,
                _ => return Err(bad()),
            }),
            "env_temp" => Item::EnvTemp(match value {
                "cold" => Temperature::Cold,
                "comfort" => Temperature::Comfort,
                "hot" => Temperature::Hot,
                _ => return Err(bad()),
            }),
            "env_hum" => Item::EnvHum(match value {
                "dry" => Humidity::Dry,
                "comfort" => Humidity::Comfort,
                "humid" => Humidity::Humid,
                _ => return Err(bad()),
            }),
            _ => return Err(bad()),
        })
    }
}

impl Serialize for Item {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Item {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Items serialized as a list of strings in string order.
fn serialize_items<'a, S: Serializer>(
    items: impl Iterator<Item = &'a Item>,
    s: S,
) -> Result<S::Ok, S::Error> {
    let mut names: Vec<String> = items.map(Item::to_string).collect();
    names.sort();
    names.serialize(s)
}

/// A sorted, duplicate-free set of items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Itemset(Vec<Item>);

impl Itemset {
    pub fn new(items: impl IntoIterator<Item = Item>) -> Self {
        let set: BTreeSet<Item> = items.into_iter().collect();
        Self(set.into_iter().collect())
    }

    pub fn items(&self) -> &[Item] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: &Item) -> bool {
        self.0.binary_search(item).is_ok()
    }

    pub fn is_subset_of(&self, items: &BTreeSet<Item>) -> bool {
        self.0.iter().all(|i| items.contains(i))
    }

    pub fn without(&self, item: &Item) -> Itemset {
        Itemset(self.0.iter().filter(|i| *i != item).copied().collect())
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{item}")?;
        }
        f.write_str(">")
    }
}

impl Serialize for Itemset {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_items(self.0.iter(), s)
    }
}

impl<'de> Deserialize<'de> for Itemset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Itemset::new(Vec::<Item>::deserialize(d)?))
    }
}

/// One period's fused context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTransaction")]
pub struct ContextTransaction {
    pub period: u64,
    #[serde(serialize_with = "serialize_item_set")]
    items: BTreeSet<Item>,
}

fn serialize_item_set<S: Serializer>(items: &BTreeSet<Item>, s: S) -> Result<S::Ok, S::Error> {
    serialize_items(items.iter(), s)
}

#[derive(Deserialize)]
struct RawTransaction {
    period: u64,
    items: Vec<Item>,
}

impl TryFrom<RawTransaction> for ContextTransaction {
    type Error = MiningError;

    fn try_from(raw: RawTransaction) -> Result<Self, MiningError> {
        ContextTransaction::new(raw.period, raw.items)
    }
}

impl ContextTransaction {
    /// Builds a transaction, enforcing at most one item per kind and the
    /// presence of activity, arousal and valence.
    pub fn new(period: u64, items: impl IntoIterator<Item = Item>) -> Result<Self, MiningError> {
        let mut kinds = BTreeSet::new();
        let mut set = BTreeSet::new();
        for item in items {
            if !kinds.insert(item.kind()) && !set.contains(&item) {
                return Err(MiningError::DuplicateItemType(item.kind()));
            }
            set.insert(item);
        }
        for required in ["activity", "arousal", "valence"] {
            if !kinds.contains(required) {
                return Err(MiningError::MissingItem(required));
            }
        }
        Ok(Self { period, items: set })
    }

    pub fn items(&self) -> &BTreeSet<Item> {
        &self.items
    }

    pub fn content(&self) -> Option<ContentId> {
        self.items.iter().find_map(|i| match i {
            Item::Content(c) => Some(*c),
            _ => None,
        })
    }

    /// The same context with any content item removed.
    pub fn context_only(&self) -> BTreeSet<Item> {
        self.items
            .iter()
            .filter(|i| !i.is_content())
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub period_ms: u64,
    pub env_thresholds: EnvThresholds,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            period_ms: 120_000,
            env_thresholds: EnvThresholds::default(),
        }
    }
}

/// Fuses one period's observations into a transaction. The activity
/// observation must fall inside the mood estimate's period.
pub fn fuse_context(
    activity: &ActivityObservation,
    mood: &MoodEstimate,
    env: &EnvSnapshot,
    playing: Option<ContentId>,
    config: &FusionConfig,
) -> Result<ContextTransaction, MiningError> {
    let activity_period = activity.t_ms / config.period_ms.max(1);
    if activity_period != mood.period_index {
        return Err(MiningError::PeriodMismatch {
            activity_period,
            mood_period: mood.period_index,
        });
    }
    let bucket = env.bucket(&config.env_thresholds);
    let mut items = vec![
        Item::Activity(activity.activity),
        Item::Arousal(mood.state.arousal()),
        Item::Valence(mood.state.valence()),
        Item::EnvLight(bucket.light),
        Item::EnvTemp(bucket.temperature),
        Item::EnvHum(bucket.humidity),
    ];
    items.extend(playing.map(Item::Content));
    ContextTransaction::new(mood.period_index, items)
}

/// Frequent itemsets with their relative supports.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrequentItemsets {
    supports: BTreeMap<Itemset, f64>,
}

impl FrequentItemsets {
    pub fn from_supports(supports: impl IntoIterator<Item = (Itemset, f64)>) -> Self {
        Self {
            supports: supports.into_iter().collect(),
        }
    }

    pub fn support(&self, itemset: &Itemset) -> Option<f64> {
        self.supports.get(itemset).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Itemset, f64)> {
        self.supports.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn into_map(self) -> BTreeMap<Itemset, f64> {
        self.supports
    }
}

fn is_sorted_subset(needle: &[u32], hay: &[u32]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Every itemset whose relative support is at least `min_support`.
///
/// Classic level-wise Apriori: frequent `(k-1)`-itemsets sharing their first
/// `k-2` items are joined into `k`-candidates, candidates with an infrequent
/// `(k-1)`-subset are pruned, and survivors are counted against the database.
pub fn apriori_frequent(
    db: &[ContextTransaction],
    min_support: f64,
) -> Result<FrequentItemsets, MiningError> {
    if db.is_empty() {
        return Err(MiningError::EmptyDb);
    }
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(MiningError::InvalidSupport(min_support));
    }
    let universe: Vec<Item> = db
        .iter()
        .flat_map(|t| t.items.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index = |item: &Item| universe.binary_search(item).unwrap() as u32;
    let rows: Vec<Vec<u32>> = db
        .iter()
        .map(|t| t.items.iter().map(index).collect())
        .collect();
    let n = db.len() as f64;
    let frequent = |count: usize| count as f64 / n >= min_support - THRESHOLD_SLACK;

    let mut out: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut level: Vec<Vec<u32>> = Vec::new();
    let mut singles = vec![0usize; universe.len()];
    for row in &rows {
        for &i in row {
            singles[i as usize] += 1;
        }
    }
    for (i, &c) in singles.iter().enumerate() {
        if frequent(c) {
            level.push(vec![i as u32]);
            out.insert(vec![i as u32], c);
        }
    }

    while level.len() > 1 {
        let prev: BTreeSet<&Vec<u32>> = level.iter().collect();
        let mut candidates = Vec::new();
        for (a_idx, a) in level.iter().enumerate() {
            for b in &level[a_idx + 1..] {
                let k = a.len();
                if a[..k - 1] != b[..k - 1] {
                    // level is sorted, so no later b shares a's prefix either
                    break;
                }
                let mut cand = a.clone();
                cand.push(b[k - 1]);
                let all_subsets_frequent = (0..cand.len()).all(|skip| {
                    let sub: Vec<u32> = cand
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, v)| *v)
                        .collect();
                    prev.contains(&sub)
                });
                if all_subsets_frequent {
                    candidates.push(cand);
                }
            }
        }
        let mut next = Vec::new();
        for cand in candidates {
            let count = rows.iter().filter(|r| is_sorted_subset(&cand, r)).count();
            if frequent(count) {
                out.insert(cand.clone(), count);
                next.push(cand);
            }
        }
        next.sort();
        level = next;
    }

    Ok(FrequentItemsets::from_supports(out.into_iter().map(
        |(ids, count)| {
            (
                Itemset(ids.into_iter().map(|i| universe[i as usize]).collect()),
                count as f64 / n,
            )
        },
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Itemset,
    #[serde(with = "content_item")]
    pub consequent: ContentId,
    pub support: f64,
    pub confidence: f64,
}

mod content_item {
    use super::*;

    pub fn serialize<S: Serializer>(id: &ContentId, s: S) -> Result<S::Ok, S::Error> {
        Item::Content(*id).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ContentId, D::Error> {
        match Item::deserialize(d)? {
            Item::Content(c) => Ok(c),
            other => Err(serde::de::Error::custom(format!(
                "consequent `{other}` is not a content item"
            ))),
        }
    }
}

impl AssociationRule {
    pub fn applies_to(&self, context: &BTreeSet<Item>) -> bool {
        self.antecedent.is_subset_of(context)
    }
}

impl fmt::Display for AssociationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {} (support {:.3}, confidence {:.3})",
            self.antecedent,
            Item::Content(self.consequent),
            self.support,
            self.confidence
        )
    }
}

/// Rules `context -> content` from a frequent-itemset map.
///
/// Every frequent itemset holding exactly one content item and at least one
/// other item yields a candidate; its confidence is the itemset's support over
/// the support of the remaining items. Output is sorted by antecedent, then
/// consequent.
pub fn apriori_rules(
    frequent: &FrequentItemsets,
    min_confidence: f64,
) -> Result<Vec<AssociationRule>, MiningError> {
    if !(0.0..=1.0).contains(&min_confidence) {
        return Err(MiningError::InvalidConfidence(min_confidence));
    }
    let mut rules = Vec::new();
    for (itemset, support) in frequent.iter() {
        let mut contents = itemset.items().iter().filter(|i| i.is_content());
        let (Some(content), None) = (contents.next(), contents.next()) else {
            continue;
        };
        if itemset.len() < 2 {
            continue;
        }
        let antecedent = itemset.without(content);
        let Some(ante_support) = frequent.support(&antecedent) else {
            continue;
        };
        let confidence = support / ante_support;
        if confidence >= min_confidence - THRESHOLD_SLACK {
            let Item::Content(id) = *content else {
                unreachable!()
            };
            rules.push(AssociationRule {
                antecedent,
                consequent: id,
                support,
                confidence: confidence.min(1.0),
            });
        }
    }
    rules.sort_by(|a, b| {
        a.antecedent
            .cmp(&b.antecedent)
            .then(a.consequent.cmp(&b.consequent))
    });
    Ok(rules)
}

/// Mines rules straight from a transaction database.
pub fn mine_rules(
    db: &[ContextTransaction],
    min_support: f64,
    min_confidence: f64,
) -> Result<Vec<AssociationRule>, MiningError> {
    apriori_rules(&apriori_frequent(db, min_support)?, min_confidence)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, MiningError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MiningError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| MiningError::Json {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(mut writer: impl Write, rows: &[T]) -> Result<(), MiningError> {
    for row in rows {
        let line = serde_json::to_string(row).map_err(|e| MiningError::Io(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| MiningError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Reads `transactions.jsonl`.
pub fn read_transactions(reader: impl BufRead) -> Result<Vec<ContextTransaction>, MiningError> {
    read_jsonl(reader)
}

pub fn write_transactions(
    writer: impl Write,
    db: &[ContextTransaction],
) -> Result<(), MiningError> {
    write_jsonl(writer, db)
}

/// Reads `rules.jsonl`.
pub fn read_rules(reader: impl BufRead) -> Result<Vec<AssociationRule>, MiningError> {
    read_jsonl(reader)
}

pub fn write_rules(writer: impl Write, rules: &[AssociationRule]) -> Result<(), MiningError> {
    write_jsonl(writer, rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AffectiveState;
    use crate::inference::MoodSource;
    use crate::sigproc::window_features;

    fn tx(period: u64, names: &[&str]) -> ContextTransaction {
        ContextTransaction::new(period, names.iter().map(|n| n.parse::<Item>().unwrap())).unwrap()
    }

    fn set(names: &[&str]) -> Itemset {
        Itemset::new(names.iter().map(|n| n.parse::<Item>().unwrap()))
    }

    fn comfort_env() -> EnvSnapshot {
        EnvSnapshot {
            light: window_features(&[500.0; 30]).unwrap(),
            temperature: window_features(&[22.0; 30]).unwrap(),
            humidity: window_features(&[45.0; 30]).unwrap(),
            window_len: 30,
        }
    }

    #[test]
    fn item_strings_round_trip() {
        for s in [
            "activity_0",
            "arousal_7",
            "valence_2",
            "env_light_high",
            "env_temp_cold",
            "env_hum_humid",
            "content_20",
        ] {
            assert_eq!(s.parse::<Item>().unwrap().to_string(), s);
        }
        for s in [
            "activity_10",
            "arousal_0",
            "content_0",
            "env_light_dim",
            "mood_3",
            "x",
        ] {
            assert!(s.parse::<Item>().is_err(), "{s}");
        }
    }

    #[test]
    fn fuse_context_example() {
        let activity = ActivityObservation {
            t_ms: 130_000,
            activity: 3,
            confidence: 1.0,
        };
        let mood = MoodEstimate {
            state: AffectiveState::new(2, 7).unwrap(),
            period_index: 1,
            source: MoodSource::Replay,
        };
        let cfg = FusionConfig::default();
        let t = fuse_context(&activity, &mood, &comfort_env(), Some(ContentId(20)), &cfg).unwrap();
        let names: Vec<String> = t.items().iter().map(Item::to_string).collect();
        assert_eq!(
            names,
            [
                "activity_3",
                "arousal_7",
                "valence_2",
                "env_light_medium",
                "env_temp_comfort",
                "env_hum_comfort",
                "content_20"
            ]
        );
        assert_eq!(
            t,
            fuse_context(&activity, &mood, &comfort_env(), Some(ContentId(20)), &cfg).unwrap()
        );

        let silent = fuse_context(&activity, &mood, &comfort_env(), None, &cfg).unwrap();
        assert_eq!(silent.content(), None);
        assert_eq!(silent.items().len(), 6);

        let late = ActivityObservation {
            t_ms: 250_000,
            ..activity
        };
        assert_eq!(
            fuse_context(&late, &mood, &comfort_env(), None, &cfg),
            Err(MiningError::PeriodMismatch {
                activity_period: 2,
                mood_period: 1
            })
        );
    }

    #[test]
    fn transaction_invariants() {
        let dup = ContextTransaction::new(
            0,
            ["activity_1", "activity_2", "arousal_1", "valence_1"].map(|s| s.parse().unwrap()),
        );
        assert_eq!(dup, Err(MiningError::DuplicateItemType("activity")));
        let missing =
            ContextTransaction::new(0, ["activity_1", "arousal_1"].map(|s| s.parse().unwrap()));
        assert_eq!(missing, Err(MiningError::MissingItem("valence")));
    }

    #[test]
    fn support_of_single_item() {
        let mut db = Vec::new();
        for p in 0..10 {
            let arousal = if p < 4 { "arousal_7" } else { "arousal_3" };
            db.push(tx(
                p,
                &["activity_0", arousal, &format!("valence_{}", 1 + p % 9)],
            ));
        }
        let f = apriori_frequent(&db, 0.1).unwrap();
        assert_eq!(f.support(&set(&["arousal_7"])), Some(0.4));
        assert_eq!(f.support(&set(&["activity_0"])), Some(1.0));
    }

    #[test]
    fn unanimous_support() {
        let db = vec![
            tx(0, &["activity_0", "arousal_5", "valence_5", "content_1"]),
            tx(1, &["activity_0", "arousal_5", "valence_6"]),
            tx(2, &["activity_0", "arousal_5", "valence_5", "content_2"]),
        ];
        let f = apriori_frequent(&db, 1.0).unwrap();
        let keys: Vec<_> = f.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(
            keys,
            vec![
                set(&["activity_0"]),
                set(&["activity_0", "arousal_5"]),
                set(&["arousal_5"])
            ]
        );
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(apriori_frequent(&[], 0.1), Err(MiningError::EmptyDb));
        let db = vec![tx(0, &["activity_0", "arousal_5", "valence_5"])];
        assert_eq!(
            apriori_frequent(&db, 0.0),
            Err(MiningError::InvalidSupport(0.0))
        );
        assert_eq!(
            apriori_frequent(&db, 1.5),
            Err(MiningError::InvalidSupport(1.5))
        );
        assert!(apriori_rules(&FrequentItemsets::default(), 1.2).is_err());
    }

    #[test]
    fn rule_from_support_map() {
        let f = FrequentItemsets::from_supports([
            (set(&["activity_3", "arousal_7", "valence_2"]), 0.3),
            (
                set(&["activity_3", "arousal_7", "valence_2", "content_20"]),
                0.24,
            ),
        ]);
        let rules = apriori_rules(&f, 0.7).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(
            rules[0].antecedent,
            set(&["activity_3", "arousal_7", "valence_2"])
        );
        assert_eq!(rules[0].consequent, ContentId(20));
        assert!((rules[0].confidence - 0.8).abs() < 1e-12);
        assert!((rules[0].support - 0.24).abs() < 1e-15);
        assert!(apriori_rules(&f, 0.9).unwrap().is_empty());
    }

    #[test]
    fn no_content_no_rules() {
        let db = vec![
            tx(0, &["activity_0", "arousal_5", "valence_5"]),
            tx(1, &["activity_1", "arousal_5", "valence_6"]),
        ];
        assert!(mine_rules(&db, 0.1, 0.0).unwrap().is_empty());
    }

    #[test]
    fn full_confidence_rules_always_cooccur() {
        let db = vec![
            tx(0, &["activity_3", "arousal_7", "valence_2", "content_20"]),
            tx(1, &["activity_3", "arousal_7", "valence_2", "content_20"]),
            tx(2, &["activity_3", "arousal_2", "valence_2", "content_4"]),
            tx(3, &["activity_0", "arousal_7", "valence_8"]),
        ];
        let rules = mine_rules(&db, 0.25, 1.0).unwrap();
        assert!(!rules.is_empty());
        for r in &rules {
            let with_ante: Vec<_> = db.iter().filter(|t| r.applies_to(t.items())).collect();
            assert!(
                with_ante.iter().all(|t| t.content() == Some(r.consequent)),
                "{r}"
            );
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let db = vec![
            tx(
                0,
                &[
                    "activity_3",
                    "arousal_7",
                    "valence_2",
                    "content_20",
                    "env_light_low",
                ],
            ),
            tx(1, &["activity_0", "arousal_5", "valence_5"]),
        ];
        let mut buf = Vec::new();
        write_transactions(&mut buf, &db).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        // item strings are written in string order
        assert!(text.starts_with(r#"{"period":0,"items":["activity_3","arousal_7","content_20","env_light_low","valence_2"]}"#));
        assert_eq!(read_transactions(&buf[..]).unwrap(), db);

        let rules = mine_rules(&db, 0.5, 0.5).unwrap();
        let mut buf = Vec::new();
        write_rules(&mut buf, &rules).unwrap();
        assert_eq!(read_rules(&buf[..]).unwrap(), rules);

        let err =
            read_transactions(&b"{\"period\":0,\"items\":[\"activity_1\"]}\n"[..]).unwrap_err();
        assert!(matches!(err, MiningError::Json { line: 1, .. }));
    }
}
