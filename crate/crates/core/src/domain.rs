//! Shared vocabulary: activity classes, affective states, the valence/arousal
//! mood map, the content catalog and discretized cabin environment.
//!
//! The activity, mood and catalog tables ship as tab-separated files under
//! `data/` and are parsed once on first use. Everything here is immutable after
//! load.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::tsv::{self, TsvError};

const MOODS_TSV: &str = include_str!("../data/moods.tsv");
const ACTIVITIES_TSV: &str = include_str!("../data/activities.tsv");
const CATALOG_TSV: &str = include_str!("../data/catalog.tsv");

/// Lowest and highest integer value on both affect axes.
pub const AFFECT_MIN: u8 = 1;
pub const AFFECT_MAX: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("{field} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        field: &'static str,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("unknown mood label `{0}`")]
    UnknownLabel(String),
    #[error("malformed table: {0}")]
    Table(#[from] TsvError),
    #[error("table is incomplete: {0}")]
    Incomplete(String),
    #[error("duplicate content id {0}")]
    DuplicateContent(u32),
}

/// Binary meta-class every activity collapses to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Meta {
    SafeDriving,
    DistractedDriving,
}

impl fmt::Display for Meta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Meta::SafeDriving => "SafeDriving",
            Meta::DistractedDriving => "DistractedDriving",
        })
    }
}

impl std::str::FromStr for Meta {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "SafeDriving" => Ok(Meta::SafeDriving),
            "DistractedDriving" => Ok(Meta::DistractedDriving),
            _ => Err(()),
        }
    }
}

/// Number of driver activity classes.
pub const ACTIVITY_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityClass {
    pub id: u8,
    pub description: String,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityTable {
    classes: Vec<ActivityClass>,
}

impl ActivityTable {
    /// Parses `activities.tsv` (`id`, `description`, `meta`). All ten ids must
    /// be present exactly once.
    pub fn from_tsv(text: &str) -> Result<Self, DomainError> {
        let mut slots: Vec<Option<ActivityClass>> = vec![None; ACTIVITY_COUNT];
        for row in tsv::rows(text, "id")? {
            let id: u8 = row.parse(0, "id")?;
            let slot = slots.get_mut(id as usize).ok_or(DomainError::OutOfRange {
                field: "activity id",
                value: id as i64,
                min: 0,
                max: ACTIVITY_COUNT as i64 - 1,
            })?;
            let meta = row.get(2, "meta")?.trim().parse().map_err(|_| TsvError {
                line: row.line,
                message: "meta must be SafeDriving or DistractedDriving".into(),
            })?;
            *slot = Some(ActivityClass {
                id,
                description: row.get(1, "description")?.trim().to_string(),
                meta,
            });
        }
        let classes = slots
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| DomainError::Incomplete(format!("activity {i} missing"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { classes })
    }

    pub fn builtin() -> &'static ActivityTable {
        static TABLE: OnceLock<ActivityTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            ActivityTable::from_tsv(ACTIVITIES_TSV).expect("bundled activities.tsv")
        })
    }

    pub fn get(&self, id: u8) -> Result<&ActivityClass, DomainError> {
        self.classes
            .get(id as usize)
            .ok_or(DomainError::OutOfRange {
                field: "activity id",
                value: id as i64,
                min: 0,
                max: ACTIVITY_COUNT as i64 - 1,
            })
    }

    pub fn classes(&self) -> &[ActivityClass] {
        &self.classes
    }
}

/// Meta-class of activity `id` from the bundled table.
pub fn activity_meta(id: u8) -> Result<Meta, DomainError> {
    ActivityTable::builtin().get(id).map(|c| c.meta)
}

/// A (valence, arousal) pair, both on the integer scale 1..=9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawState")]
pub struct AffectiveState {
    valence: u8,
    arousal: u8,
}

#[derive(Deserialize)]
struct RawState {
    valence: i64,
    arousal: i64,
}

impl TryFrom<RawState> for AffectiveState {
    type Error = DomainError;

    fn try_from(raw: RawState) -> Result<Self, DomainError> {
        AffectiveState::new(raw.valence, raw.arousal)
    }
}

fn check_axis(field: &'static str, value: i64) -> Result<u8, DomainError> {
    if (AFFECT_MIN as i64..=AFFECT_MAX as i64).contains(&value) {
        Ok(value as u8)
    } else {
        Err(DomainError::OutOfRange {
            field,
            value,
            min: AFFECT_MIN as i64,
            max: AFFECT_MAX as i64,
        })
    }
}

impl AffectiveState {
    pub fn new(valence: i64, arousal: i64) -> Result<Self, DomainError> {
        Ok(Self {
            valence: check_axis("valence", valence)?,
            arousal: check_axis("arousal", arousal)?,
        })
    }

    pub fn valence(self) -> u8 {
        self.valence
    }

    pub fn arousal(self) -> u8 {
        self.arousal
    }

    /// Row-major index into the 9x9 grid, valence major.
    pub fn index(self) -> usize {
        (self.valence - 1) as usize * 9 + (self.arousal - 1) as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        (idx < 81).then(|| Self {
            valence: (idx / 9) as u8 + 1,
            arousal: (idx % 9) as u8 + 1,
        })
    }

    pub fn all() -> impl Iterator<Item = AffectiveState> {
        (0..81).map(|i| Self::from_index(i).unwrap())
    }

    pub fn polarity(self) -> Polarity {
        Polarity::of_valence(self.valence)
    }
}

impl fmt::Display for AffectiveState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.valence, self.arousal)
    }
}

impl std::str::FromStr for AffectiveState {
    type Err = String;

    /// Accepts `v,a` with optional surrounding parentheses.
    fn from_str(s: &str) -> Result<Self, String> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let (v, a) = inner
            .split_once(',')
            .ok_or_else(|| format!("expected `valence,arousal`, got `{s}`"))?;
        let v: i64 = v.trim().parse().map_err(|_| format!("bad valence `{v}`"))?;
        let a: i64 = a.trim().parse().map_err(|_| format!("bad arousal `{a}`"))?;
        AffectiveState::new(v, a).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Neutral,
    Positive,
}

impl Polarity {
    pub fn of_valence(valence: u8) -> Polarity {
        match valence {
            v if v <= 4 => Polarity::Negative,
            5 => Polarity::Neutral,
            _ => Polarity::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoodLabel {
    pub name: String,
    pub polarity: Polarity,
}

/// The 81-cell valence/arousal to mood-label map.
///
/// Labels repeat across cells ("Dejected" sits at both (1,1) and (2,1)), so
/// the coordinate pair is the identifier, not the label text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoodTable {
    cells: Vec<String>,
}

impl MoodTable {
    /// Parses `moods.tsv` (`valence`, `arousal`, `label`); every cell of the
    /// grid must appear exactly once.
    pub fn from_tsv(text: &str) -> Result<Self, DomainError> {
        let mut cells: Vec<Option<String>> = vec![None; 81];
        for row in tsv::rows(text, "valence")? {
            let state = AffectiveState::new(row.parse(0, "valence")?, row.parse(1, "arousal")?)?;
            let slot = &mut cells[state.index()];
            if slot.is_some() {
                return Err(DomainError::Incomplete(format!(
                    "cell {state} listed twice"
                )));
            }
            *slot = Some(row.get(2, "label")?.trim().to_string());
        }
        let cells = cells
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    DomainError::Incomplete(format!(
                        "cell {} missing",
                        AffectiveState::from_index(i).unwrap()
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { cells })
    }

    pub fn builtin() -> &'static MoodTable {
        static TABLE: OnceLock<MoodTable> = OnceLock::new();
        TABLE.get_or_init(|| MoodTable::from_tsv(MOODS_TSV).expect("bundled moods.tsv"))
    }

    pub fn label(&self, state: AffectiveState) -> &str {
        &self.cells[state.index()]
    }

    pub fn lookup(&self, state: AffectiveState) -> MoodLabel {
        MoodLabel {
            name: self.label(state).to_string(),
            polarity: state.polarity(),
        }
    }

    /// Every cell carrying `name`.
    pub fn coordinates_of<'a>(
        &'a self,
        name: &'a str,
    ) -> impl Iterator<Item = AffectiveState> + 'a {
        AffectiveState::all().filter(move |s| self.cells[s.index()] == name)
    }

    /// Polarity of a label, decided by the valence coordinates of the cells it
    /// occupies. A label spanning more than one polarity is rejected.
    pub fn polarity_of(&self, name: &str) -> Result<Polarity, DomainError> {
        let mut found: Option<Polarity> = None;
        for state in self.coordinates_of(name) {
            match found {
                None => found = Some(state.polarity()),
                Some(p) if p == state.polarity() => {}
                Some(_) => {
                    return Err(DomainError::UnknownLabel(format!(
                        "{name} (mixed polarity)"
                    )))
                }
            }
        }
        found.ok_or_else(|| DomainError::UnknownLabel(name.to_string()))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("valence\tarousal\tlabel\n");
        for s in AffectiveState::all() {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                s.valence(),
                s.arousal(),
                self.label(s)
            ));
        }
        out
    }
}

pub fn mood_lookup(state: AffectiveState) -> MoodLabel {
    MoodTable::builtin().lookup(state)
}

pub fn mood_polarity(label: &str) -> Result<Polarity, DomainError> {
    MoodTable::builtin().polarity_of(label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentId(pub u32);

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Content {
    pub id: ContentId,
    pub title: String,
    pub valence_tendency: i8,
}

/// Content catalog, kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Catalog {
    entries: Vec<Content>,
}

impl Catalog {
    pub fn new(mut entries: Vec<Content>) -> Result<Self, DomainError> {
        entries.sort_by_key(|c| c.id);
        if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(DomainError::DuplicateContent(w[0].id.0));
        }
        if let Some(c) = entries.iter().find(|c| c.id.0 == 0) {
            return Err(DomainError::OutOfRange {
                field: "content id",
                value: c.id.0 as i64,
                min: 1,
                max: u32::MAX as i64,
            });
        }
        Ok(Self { entries })
    }

    pub fn from_tsv(text: &str) -> Result<Self, DomainError> {
        let mut entries = Vec::new();
        for row in tsv::rows(text, "id")? {
            entries.push(Content {
                id: ContentId(row.parse(0, "id")?),
                title: row.get(1, "title")?.trim().to_string(),
                valence_tendency: row.parse(2, "valence_tendency")?,
            });
        }
        Self::new(entries)
    }

    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| Catalog::from_tsv(CATALOG_TSV).expect("bundled catalog.tsv"))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\ttitle\tvalence_tendency\n");
        for c in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", c.id, c.title, c.valence_tendency));
        }
        out
    }

    pub fn entries(&self) -> &[Content] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ContentId> + '_ {
        self.entries.iter().map(|c| c.id)
    }

    pub fn get(&self, id: ContentId) -> Option<&Content> {
        self.entries
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Light {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Temperature {
    Cold,
    Comfort,
    Hot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Humidity {
    Dry,
    Comfort,
    Humid,
}

impl Light {
    pub fn as_str(self) -> &'static str {
        match self {
            Light::Low => "low",
            Light::Medium => "medium",
            Light::High => "high",
        }
    }
}

impl Temperature {
    pub fn as_str(self) -> &'static str {
        match self {
            Temperature::Cold => "cold",
            Temperature::Comfort => "comfort",
            Temperature::Hot => "hot",
        }
    }
}

impl Humidity {
    pub fn as_str(self) -> &'static str {
        match self {
            Humidity::Dry => "dry",
            Humidity::Comfort => "comfort",
            Humidity::Humid => "humid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvironmentBucket {
    pub light: Light,
    pub temperature: Temperature,
    pub humidity: Humidity,
}

/// Cut points for the three environment axes. A value equal to the upper
/// cut of a band falls into the next band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvThresholds {
    pub light_lux: [f64; 2],
    pub temperature_c: [f64; 2],
    pub humidity_rh: [f64; 2],
}

impl Default for EnvThresholds {
    fn default() -> Self {
        Self {
            light_lux: [100.0, 1000.0],
            temperature_c: [18.0, 26.0],
            humidity_rh: [30.0, 60.0],
        }
    }
}

fn band(value: f64, cuts: [f64; 2]) -> usize {
    if value < cuts[0] {
        0
    } else if value <= cuts[1] {
        1
    } else {
        2
    }
}

impl EnvThresholds {
    pub fn bucket(
        &self,
        light_lux: f64,
        temperature_c: f64,
        humidity_rh: f64,
    ) -> EnvironmentBucket {
        EnvironmentBucket {
            light: [Light::Low, Light::Medium, Light::High][band(light_lux, self.light_lux)],
            temperature: [Temperature::Cold, Temperature::Comfort, Temperature::Hot]
                [band(temperature_c, self.temperature_c)],
            humidity: [Humidity::Dry, Humidity::Comfort, Humidity::Humid]
                [band(humidity_rh, self.humidity_rh)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(v: i64, a: i64) -> AffectiveState {
        AffectiveState::new(v, a).unwrap()
    }

    #[test]
    fn mood_examples() {
        assert_eq!(mood_lookup(st(5, 5)).name, "Neutral");
        assert_eq!(mood_lookup(st(1, 1)).name, "Dejected");
        assert_eq!(mood_lookup(st(9, 9)).name, "Self confident");
        assert_eq!(mood_lookup(st(3, 9)).name, "Angry");
    }

    #[test]
    fn out_of_range_state_rejected() {
        assert!(AffectiveState::new(0, 5).is_err());
        assert!(AffectiveState::new(5, 10).is_err());
        assert!(serde_json::from_str::<AffectiveState>(r#"{"valence":10,"arousal":1}"#).is_err());
    }

    #[test]
    fn polarity_by_coordinates() {
        let table = MoodTable::builtin();
        assert_eq!(
            table.polarity_of(table.label(st(5, 5))).unwrap(),
            Polarity::Neutral
        );
        assert_eq!(
            table.polarity_of(table.label(st(2, 7))).unwrap(),
            Polarity::Negative
        );
        assert_eq!(
            table.polarity_of(table.label(st(8, 3))).unwrap(),
            Polarity::Positive
        );
        assert!(matches!(
            mood_polarity("Blissful"),
            Err(DomainError::UnknownLabel(_))
        ));
        // repeated labels resolve through every cell they occupy
        assert_eq!(mood_polarity("Dejected").unwrap(), Polarity::Negative);
        assert_eq!(mood_polarity("Enthusiastic").unwrap(), Polarity::Positive);
    }

    #[test]
    fn polarity_partition_counts() {
        let mut counts = [0usize; 3];
        for s in AffectiveState::all() {
            counts[match s.polarity() {
                Polarity::Negative => 0,
                Polarity::Neutral => 1,
                Polarity::Positive => 2,
            }] += 1;
        }
        assert_eq!(counts, [36, 9, 36]);
    }

    #[test]
    fn activity_meta_examples() {
        assert_eq!(activity_meta(0).unwrap(), Meta::SafeDriving);
        assert_eq!(activity_meta(3).unwrap(), Meta::DistractedDriving);
        assert_eq!(activity_meta(9).unwrap(), Meta::DistractedDriving);
        assert!(activity_meta(10).is_err());
        let safe = ActivityTable::builtin()
            .classes()
            .iter()
            .filter(|c| c.meta == Meta::SafeDriving)
            .count();
        assert_eq!(safe, 1);
    }

    #[test]
    fn mood_table_round_trips_through_tsv() {
        let table = MoodTable::builtin();
        assert_eq!(&MoodTable::from_tsv(&table.to_tsv()).unwrap(), table);
        for s in AffectiveState::all() {
            assert_eq!(AffectiveState::from_index(s.index()), Some(s));
            assert!(table.coordinates_of(table.label(s)).any(|c| c == s));
        }
    }

    #[test]
    fn incomplete_mood_table_rejected() {
        let text: String = MOODS_TSV
            .lines()
            .take(50)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            MoodTable::from_tsv(&text),
            Err(DomainError::Incomplete(_))
        ));
    }

    #[test]
    fn catalog_rejects_duplicates() {
        let text = "id\ttitle\tvalence_tendency\n1\ta\t0\n1\tb\t1\n";
        assert_eq!(
            Catalog::from_tsv(text),
            Err(DomainError::DuplicateContent(1))
        );
        assert!(Catalog::builtin().get(ContentId(20)).is_some());
    }

    #[test]
    fn environment_buckets() {
        let t = EnvThresholds::default();
        let b = t.bucket(500.0, 22.0, 45.0);
        assert_eq!(b.light, Light::Medium);
        assert_eq!(b.temperature, Temperature::Comfort);
        assert_eq!(b.humidity, Humidity::Comfort);
        let b = t.bucket(10.0, 30.0, 80.0);
        assert_eq!(
            (b.light, b.temperature, b.humidity),
            (Light::Low, Temperature::Hot, Humidity::Humid)
        );
        assert_eq!(t.bucket(2000.0, 5.0, 10.0).humidity, Humidity::Dry);
    }

    #[test]
    fn state_parses_from_text() {
        assert_eq!("3,8".parse::<AffectiveState>().unwrap(), st(3, 8));
        assert_eq!("(7, 4)".parse::<AffectiveState>().unwrap(), st(7, 4));
        assert!("0,4".parse::<AffectiveState>().is_err());
    }
}
