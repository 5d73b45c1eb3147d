//! Layered message fabric and orchestration loop: body-area sink,
//! environment gateway and camera nodes feed the edge node, which classifies
//! activity, estimates mood, fuses context, mines rules and learns
//! transitions; the on-vehicle node plans mood repair; the cloud stub serves
//! the content catalog.
//!
//! All traffic is carried in length-prefixed [`Envelope`] frames over
//! directed links with a fixed latency and a bounded in-flight queue. A
//! discrete-event scheduler owns the clock, so simulated runs are
//! deterministic for a given seed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{
    ActivityTable, AffectiveState, Catalog, Content, ContentId, EnvThresholds, Meta, MoodTable,
    ACTIVITY_COUNT,
};
use crate::inference::{
    estimate_mood, ActivityClassifier, ActivityObservation, ClassifierProfile, MoodEstimator,
    MoodSource, MoodTrace, StubMapping,
};
use crate::mining::{
    fuse_context, mine_rules, AssociationRule, ContextTransaction, FusionConfig, Item,
    DEFAULT_MIN_CONFIDENCE, DEFAULT_MIN_SUPPORT,
};
use crate::recommend::{
    candidate_contents, plan_repair, RepairPlan, StateSpace, Target, TransitionModel,
    DEFAULT_ALPHA, DEFAULT_HORIZON,
};
use crate::scenario::{builtin_profile, read_sensor_csv, ActivityTimeline, PlaybackSchedule};
use crate::sigproc::{env_snapshot, physio_features, Channel, SensorFrame, MOVING_AVERAGE_WINDOW};

/// Wire format version carried by every envelope.
pub const WIRE_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MsgType {
    SensorBatch,
    ActivityEvent,
    MoodResult,
    TransactionBatch,
    RuleSet,
    RepairPlanMsg,
    SafetyNotification,
    CatalogRequest,
    CatalogResponse,
}

impl MsgType {
    pub const ALL: [MsgType; 9] = [
        MsgType::SensorBatch,
        MsgType::ActivityEvent,
        MsgType::MoodResult,
        MsgType::TransactionBatch,
        MsgType::RuleSet,
        MsgType::RepairPlanMsg,
        MsgType::SafetyNotification,
        MsgType::CatalogRequest,
        MsgType::CatalogResponse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgType::SensorBatch => "SensorBatch",
            MsgType::ActivityEvent => "ActivityEvent",
            MsgType::MoodResult => "MoodResult",
            MsgType::TransactionBatch => "TransactionBatch",
            MsgType::RuleSet => "RuleSet",
            MsgType::RepairPlanMsg => "RepairPlanMsg",
            MsgType::SafetyNotification => "SafetyNotification",
            MsgType::CatalogRequest => "CatalogRequest",
            MsgType::CatalogResponse => "CatalogResponse",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MsgType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        MsgType::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Sensor-side batch for one observation period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensorBatch {
    /// EMG, ECG, EDA and EEG windows from the body-area sink.
    Physio {
        period: u64,
        frames: Vec<SensorFrame>,
    },
    /// Light, temperature and humidity windows from the cabin gateway.
    Environment {
        period: u64,
        frames: Vec<SensorFrame>,
    },
    /// Content the on-vehicle player ran during the period.
    Playback {
        period: u64,
        content: Option<ContentId>,
    },
}

impl SensorBatch {
    pub fn period(&self) -> u64 {
        match self {
            SensorBatch::Physio { period, .. }
            | SensorBatch::Environment { period, .. }
            | SensorBatch::Playback { period, .. } => *period,
        }
    }
}

/// Camera frame, represented by its ground-truth activity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub t_ms: u64,
    pub activity: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyNotification {
    pub t_ms: u64,
    pub activity: u8,
    pub meta: Meta,
    pub confidence: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoodResult {
    pub period: u64,
    pub state: AffectiveState,
    pub label: String,
    pub source: MoodSource,
    /// Fused context items of the period, without the playing content.
    pub context: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionBatch {
    pub transactions: Vec<ContextTransaction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub period: u64,
    pub rules: Vec<AssociationRule>,
    /// Transition model snapshot in its `model.tsv` form.
    pub model: String,
    pub model_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairPlanMsg {
    pub period: u64,
    pub start: AffectiveState,
    pub target: Target,
    pub horizon: usize,
    pub candidates: Vec<ContentId>,
    pub plan: Option<RepairPlan>,
    pub model_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CatalogRequest {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogResponse {
    pub entries: Vec<Content>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    SensorBatch(SensorBatch),
    ActivityEvent(ActivityEvent),
    MoodResult(MoodResult),
    TransactionBatch(TransactionBatch),
    RuleSet(RuleSet),
    RepairPlanMsg(RepairPlanMsg),
    SafetyNotification(SafetyNotification),
    CatalogRequest(CatalogRequest),
    CatalogResponse(CatalogResponse),
}

impl Payload {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Payload::SensorBatch(_) => MsgType::SensorBatch,
            Payload::ActivityEvent(_) => MsgType::ActivityEvent,
            Payload::MoodResult(_) => MsgType::MoodResult,
            Payload::TransactionBatch(_) => MsgType::TransactionBatch,
            Payload::RuleSet(_) => MsgType::RuleSet,
            Payload::RepairPlanMsg(_) => MsgType::RepairPlanMsg,
            Payload::SafetyNotification(_) => MsgType::SafetyNotification,
            Payload::CatalogRequest(_) => MsgType::CatalogRequest,
            Payload::CatalogResponse(_) => MsgType::CatalogResponse,
        }
    }

    fn from_value(msg_type: MsgType, v: serde_json::Value) -> Result<Payload, serde_json::Error> {
        use serde_json::from_value as de;
        Ok(match msg_type {
            MsgType::SensorBatch => Payload::SensorBatch(de(v)?),
            MsgType::ActivityEvent => Payload::ActivityEvent(de(v)?),
            MsgType::MoodResult => Payload::MoodResult(de(v)?),
            MsgType::TransactionBatch => Payload::TransactionBatch(de(v)?),
            MsgType::RuleSet => Payload::RuleSet(de(v)?),
            MsgType::RepairPlanMsg => Payload::RepairPlanMsg(de(v)?),
            MsgType::SafetyNotification => Payload::SafetyNotification(de(v)?),
            MsgType::CatalogRequest => Payload::CatalogRequest(de(v)?),
            MsgType::CatalogResponse => Payload::CatalogResponse(de(v)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub version: u64,
    pub driver_id: String,
    /// Strictly increasing per (sender, msg_type) stream.
    pub seq: u64,
    /// Simulated send time in milliseconds.
    pub sent_at: u64,
    pub payload: Payload,
}

impl Envelope {
    pub fn new(driver_id: impl Into<String>, seq: u64, sent_at: u64, payload: Payload) -> Self {
        Self {
            version: WIRE_VERSION,
            driver_id: driver_id.into(),
            seq,
            sent_at,
            payload,
        }
    }

    pub fn msg_type(&self) -> MsgType {
        self.payload.msg_type()
    }
}

#[derive(Serialize)]
struct WireOut<'a> {
    version: u64,
    msg_type: MsgType,
    driver_id: &'a str,
    seq: u64,
    sent_at: u64,
    payload: &'a Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("frame of {0} bytes is shorter than the 4-byte length prefix")]
    MissingPrefix(usize),
    #[error("truncated frame: length prefix declares {declared} bytes, {available} present")]
    Truncated { declared: usize, available: usize },
    #[error("{0} trailing bytes after the declared body")]
    Trailing(usize),
    #[error("body is not a structured object: {0}")]
    Body(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}`: {message}")]
    InvalidField {
        field: &'static str,
        message: String,
    },
    #[error("field `msg_type`: unknown message type `{0}`")]
    UnknownMsgType(String),
    #[error("field `version`: expected {expected}, got {got}")]
    VersionMismatch { expected: u64, got: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot encode envelope: {0}")]
pub struct EncodeError(String);

/// 4-byte big-endian body length followed by the JSON body.
pub fn encode(env: &Envelope) -> Result<Vec<u8>, EncodeError> {
    let body = serde_json::to_vec(&WireOut {
        version: env.version,
        msg_type: env.msg_type(),
        driver_id: &env.driver_id,
        seq: env.seq,
        sent_at: env.sent_at,
        payload: &env.payload,
    })
    .map_err(|e| EncodeError(e.to_string()))?;
    let len = u32::try_from(body.len())
        .map_err(|_| EncodeError(format!("body of {} bytes", body.len())))?;
    let mut frame = Vec::with_capacity(body.len() + 4);
    frame.extend_from_slice(&len.to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

pub fn decode(frame: &[u8]) -> Result<Envelope, DecodeError> {
    let prefix: [u8; 4] = frame
        .get(..4)
        .and_then(|p| p.try_into().ok())
        .ok_or(DecodeError::MissingPrefix(frame.len()))?;
    let declared = u32::from_be_bytes(prefix) as usize;
    let body = &frame[4..];
    match body.len().cmp(&declared) {
        Ordering::Less => {
            return Err(DecodeError::Truncated {
                declared,
                available: body.len(),
            })
        }
        Ordering::Greater => return Err(DecodeError::Trailing(body.len() - declared)),
        Ordering::Equal => {}
    }
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| DecodeError::Body(e.to_string()))?;
    let mut obj = match value {
        serde_json::Value::Object(m) => m,
        other => {
            return Err(DecodeError::Body(format!(
                "expected an object, got {other}"
            )))
        }
    };
    let field = |obj: &serde_json::Map<String, serde_json::Value>, name: &'static str| {
        obj.get(name)
            .cloned()
            .ok_or(DecodeError::MissingField(name))
    };
    let uint = |v: serde_json::Value, name: &'static str| {
        v.as_u64().ok_or_else(|| DecodeError::InvalidField {
            field: name,
            message: format!("expected an unsigned integer, got {v}"),
        })
    };
    let version = uint(field(&obj, "version")?, "version")?;
    if version != WIRE_VERSION {
        return Err(DecodeError::VersionMismatch {
            expected: WIRE_VERSION,
            got: version,
        });
    }
    let msg_type = match field(&obj, "msg_type")? {
        serde_json::Value::String(s) => {
            s.parse::<MsgType>().map_err(DecodeError::UnknownMsgType)?
        }
        other => {
            return Err(DecodeError::InvalidField {
                field: "msg_type",
                message: format!("expected a string, got {other}"),
            })
        }
    };
    let driver_id = match field(&obj, "driver_id")? {
        serde_json::Value::String(s) => s,
        other => {
            return Err(DecodeError::InvalidField {
                field: "driver_id",
                message: format!("expected a string, got {other}"),
            })
        }
    };
    let seq = uint(field(&obj, "seq")?, "seq")?;
    let sent_at = uint(field(&obj, "sent_at")?, "sent_at")?;
    let payload = obj
        .remove("payload")
        .ok_or(DecodeError::MissingField("payload"))?;
    let payload =
        Payload::from_value(msg_type, payload).map_err(|e| DecodeError::InvalidField {
            field: "payload",
            message: e.to_string(),
        })?;
    Ok(Envelope {
        version,
        driver_id,
        seq,
        sent_at,
        payload,
    })
}

/// Hex SHA-256 of the serialized payload.
pub fn payload_digest(payload: &Payload) -> String {
    let body = serde_json::to_vec(payload).unwrap_or_default();
    hex::encode(Sha256::digest(&body))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    BanSink,
    EnvGateway,
    Camera,
    OnVehicle,
    Edge,
    Cloud,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::BanSink => "ban_sink",
            NodeKind::EnvGateway => "env_gateway",
            NodeKind::Camera => "camera",
            NodeKind::OnVehicle => "on_vehicle",
            NodeKind::Edge => "edge",
            NodeKind::Cloud => "cloud",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Directed link between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: NodeKind,
    pub to: NodeKind,
    #[serde(default)]
    pub latency_ms: u64,
    /// Messages in flight before the oldest is dropped.
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

fn default_capacity() -> usize {
    64
}

/// Routes every node uses; manifest links override latency and capacity.
pub fn default_links() -> Vec<LinkSpec> {
    use NodeKind::*;
    [
        (Camera, Edge),
        (BanSink, Edge),
        (EnvGateway, Edge),
        (OnVehicle, Edge),
        (Edge, OnVehicle),
        (Edge, Cloud),
        (OnVehicle, Cloud),
        (Cloud, OnVehicle),
    ]
    .into_iter()
    .map(|(from, to)| LinkSpec {
        from,
        to,
        latency_ms: 0,
        capacity: default_capacity(),
    })
    .collect()
}

/// Node outage: the node sends nothing and everything addressed to it is
/// dropped during `[from_ms, to_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureWindow {
    pub node: NodeKind,
    pub from_ms: u64,
    pub to_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timing {
    pub activity_tick_ms: u64,
    pub mood_period_ms: u64,
    /// Rules are re-mined every this many processed periods.
    pub mining_every: u64,
    /// Samples per body-area channel sent for each period.
    pub points_per_period: usize,
    /// Trailing environment samples used for the snapshot.
    pub env_window: usize,
    /// Delay after a period boundary before the edge processes it; must
    /// exceed the sensor link latencies.
    pub edge_grace_ms: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            activity_tick_ms: 300,
            mood_period_ms: 120_000,
            mining_every: 5,
            points_per_period: 8064,
            env_window: crate::sigproc::ENV_WINDOW,
            edge_grace_ms: 1000,
        }
    }
}

/// Sampling rate per channel in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub emg: f64,
    pub ecg: f64,
    pub eda: f64,
    pub eeg: f64,
    pub light: f64,
    pub temperature: f64,
    pub humidity: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            emg: Channel::Emg.default_rate(),
            ecg: Channel::Ecg.default_rate(),
            eda: Channel::Eda.default_rate(),
            eeg: Channel::Eeg.default_rate(),
            light: Channel::Light.default_rate(),
            temperature: Channel::Temperature.default_rate(),
            humidity: Channel::Humidity.default_rate(),
        }
    }
}

impl Rates {
    pub fn rate(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Emg => self.emg,
            Channel::Ecg => self.ecg,
            Channel::Eda => self.eda,
            Channel::Eeg => self.eeg,
            Channel::Light => self.light,
            Channel::Temperature => self.temperature,
            Channel::Humidity => self.humidity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningSettings {
    pub min_support: f64,
    pub min_confidence: f64,
}

impl Default for MiningSettings {
    fn default() -> Self {
        Self {
            min_support: DEFAULT_MIN_SUPPORT,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

mod as_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for StateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanningSettings {
    #[serde(with = "as_string")]
    pub target: Target,
    pub horizon: usize,
    pub alpha: f64,
    #[serde(with = "as_string")]
    pub state_space: StateSpace,
}

impl Default for PlanningSettings {
    fn default() -> Self {
        Self {
            target: Target::default(),
            horizon: DEFAULT_HORIZON,
            alpha: DEFAULT_ALPHA,
            state_space: StateSpace::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysioPaths {
    pub emg: PathBuf,
    pub ecg: PathBuf,
    pub eda: PathBuf,
    pub eeg: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvPaths {
    pub light: PathBuf,
    pub temperature: PathBuf,
    pub humidity: PathBuf,
}

/// Replay inputs, relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayPaths {
    pub activity: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub playback: Option<PathBuf>,
    /// Absent: the stub estimator maps EDA spread to arousal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mood_trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    /// Builtin profile name or a path to a confusion-matrix TSV.
    pub profile: String,
    pub environment: EnvPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physio: Option<PhysioPaths>,
}

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("replay data {path}: {message}")]
    Replay { path: PathBuf, message: String },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
}

/// Scenario manifest (`manifest.toml`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub driver_id: String,
    pub seed: u64,
    pub duration_ms: u64,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub rates: Rates,
    #[serde(default)]
    pub mining: MiningSettings,
    #[serde(default)]
    pub planning: PlanningSettings,
    #[serde(default)]
    pub thresholds: EnvThresholds,
    #[serde(default)]
    pub stub: StubMapping,
    /// Wall-clock speed-up in realtime mode.
    #[serde(default = "default_speed")]
    pub realtime_speed: f64,
    pub replay: ReplayPaths,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailureWindow>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_speed() -> f64 {
    1.0
}

impl Manifest {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, NetError> {
        let mut m: Manifest =
            toml::from_str(text).map_err(|e| NetError::Manifest(e.to_string()))?;
        m.base_dir = base_dir.into();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = fs::read_to_string(path)
            .map_err(|e| NetError::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> Result<String, NetError> {
        toml::to_string(self).map_err(|e| NetError::Manifest(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Manifest(m));
        let t = &self.timing;
        if self.duration_ms == 0
            || t.activity_tick_ms == 0
            || t.mood_period_ms == 0
            || t.mining_every == 0
        {
            return bad("duration, tick intervals and mining cadence must be positive".into());
        }
        if t.points_per_period == 0 {
            return bad("points_per_period must be positive".into());
        }
        if !(self.realtime_speed > 0.0 && self.realtime_speed.is_finite()) {
            return bad(format!(
                "realtime_speed must be positive, got {}",
                self.realtime_speed
            ));
        }
        if self.planning.horizon == 0 {
            return bad("planning horizon must be at least 1".into());
        }
        for link in &self.links {
            if link.capacity == 0 {
                return bad(format!(
                    "link {} -> {} has zero capacity",
                    link.from, link.to
                ));
            }
        }
        for f in &self.failures {
            if f.to_ms <= f.from_ms {
                return bad(format!(
                    "failure window for {} ends before it starts",
                    f.node
                ));
            }
        }
        Ok(())
    }

    fn path(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Effective link table: defaults overridden by manifest entries.
    pub fn links(&self) -> Vec<LinkSpec> {
        let mut links = default_links();
        for spec in &self.links {
            match links
                .iter_mut()
                .find(|l| l.from == spec.from && l.to == spec.to)
            {
                Some(l) => *l = *spec,
                None => links.push(*spec),
            }
        }
        links
    }
}

/// Replay data loaded and checked before a run starts.
#[derive(Debug, Clone)]
pub struct ScenarioInputs {
    pub activity: ActivityTimeline,
    pub playback: PlaybackSchedule,
    pub estimator: MoodEstimator,
    pub catalog: Catalog,
    pub profile: ClassifierProfile,
    /// EMG, ECG, EDA, EEG series as `(t_ms, value)`.
    pub physio: Option<[Vec<(f64, f64)>; 4]>,
    /// Light, temperature, humidity series.
    pub environment: [Vec<(f64, f64)>; 3],
}

impl ScenarioInputs {
    pub fn load(manifest: &Manifest) -> Result<Self, NetError> {
        let read = |p: &Path| {
            let path = manifest.path(p);
            fs::read_to_string(&path).map_err(|e| NetError::Replay {
                path: path.clone(),
                message: e.to_string(),
            })
        };
        let replay_err = |p: &Path, e: &dyn fmt::Display| NetError::Replay {
            path: manifest.path(p),
            message: e.to_string(),
        };
        let series =
            |p: &Path| read(p).and_then(|t| read_sensor_csv(&t).map_err(|e| replay_err(p, &e)));

        let r = &manifest.replay;
        let activity = ActivityTimeline::from_tsv(&read(&r.activity)?)
            .map_err(|e| replay_err(&r.activity, &e))?;
        activity
            .check_covers(manifest.duration_ms)
            .map_err(|e| replay_err(&r.activity, &e))?;
        let playback = match &r.playback {
            Some(p) => PlaybackSchedule::from_tsv(&read(p)?).map_err(|e| replay_err(p, &e))?,
            None => PlaybackSchedule::default(),
        };
        let estimator = match &r.mood_trace {
            Some(p) => MoodEstimator::Replay(
                MoodTrace::from_tsv(&read(p)?).map_err(|e| replay_err(p, &e))?,
            ),
            None => MoodEstimator::Stub(manifest.stub),
        };
        let catalog = match &r.catalog {
            Some(p) => Catalog::from_tsv(&read(p)?).map_err(|e| replay_err(p, &e))?,
            None => Catalog::builtin().clone(),
        };
        let profile = match builtin_profile(&r.profile, manifest.seed) {
            Some(p) => p,
            None => {
                let p = Path::new(&r.profile);
                ClassifierProfile::from_tsv(&read(p)?, manifest.seed)
                    .map_err(|e| replay_err(p, &e))?
            }
        };
        let physio = match &r.physio {
            Some(p) => Some([
                series(&p.emg)?,
                series(&p.ecg)?,
                series(&p.eda)?,
                series(&p.eeg)?,
            ]),
            None => None,
        };
        let e = &r.environment;
        let environment = [
            series(&e.light)?,
            series(&e.temperature)?,
            series(&e.humidity)?,
        ];
        Ok(Self {
            activity,
            playback,
            estimator,
            catalog,
            profile,
            physio,
            environment,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Discrete-event clock; deterministic.
    #[default]
    Simulated,
    /// The same schedule paced against the wall clock.
    Realtime,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulated" => Ok(Mode::Simulated),
            "realtime" => Ok(Mode::Realtime),
            other => Err(format!("unknown mode `{other}` (simulated|realtime)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Deliver,
    Drop,
    NodeDown,
    NodeUp,
    PlanCheck,
    Note,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t_ms: u64,
    pub event: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<NodeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<NodeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg_type: Option<MsgType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Hex of the full frame, so the log can be decoded again.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
}

impl LogEntry {
    fn bare(t_ms: u64, event: EventKind, node: NodeKind) -> Self {
        Self {
            t_ms,
            event,
            node: Some(node),
            from: None,
            to: None,
            msg_type: None,
            seq: None,
            payload_digest: None,
            ok: None,
            reason: None,
            frame: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub notifications: u64,
    pub deliveries: u64,
    pub drops: u64,
    pub periods_processed: u64,
    pub transactions: u64,
    pub rule_sets: u64,
    pub plans_sent: u64,
    pub plans_validated: u64,
    pub plans_rejected: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub entries: Vec<LogEntry>,
    pub report: RunReport,
}

impl RunOutput {
    /// Event log as JSON lines.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    /// Decoded envelopes of delivered messages of one type, in log order.
    pub fn delivered(&self, msg_type: MsgType) -> Vec<Envelope> {
        self.entries
            .iter()
            .filter(|e| e.event == EventKind::Deliver && e.msg_type == Some(msg_type))
            .filter_map(|e| e.frame.as_deref())
            .filter_map(|f| hex::decode(f).ok())
            .filter_map(|f| decode(&f).ok())
            .collect()
    }
}

/// Parses an event log and decodes every frame it carries, checking each
/// against its recorded digest and header fields.
pub fn replay_log(text: &str) -> Result<Vec<(LogEntry, Option<Envelope>)>, NetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| NetError::Log {
            line: i + 1,
            message,
        };
        let entry: LogEntry = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let env = match &entry.frame {
            Some(f) => {
                let bytes = hex::decode(f).map_err(|e| bad(e.to_string()))?;
                let env = decode(&bytes).map_err(|e| bad(e.to_string()))?;
                if entry.payload_digest.as_deref() != Some(payload_digest(&env.payload).as_str()) {
                    return Err(bad("payload digest mismatch".into()));
                }
                if entry.seq != Some(env.seq) || entry.msg_type != Some(env.msg_type()) {
                    return Err(bad("header fields disagree with the frame".into()));
                }
                Some(env)
            }
            None => None,
        };
        out.push((entry, env));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    RequestCatalog,
    ActivityTick(u64),
    PeriodTick(u64),
    EdgeProcess(u64),
    Deliver { link: usize, id: u64 },
    NodeDown(NodeKind),
    NodeUp(NodeKind),
}

#[derive(Debug, PartialEq, Eq)]
struct Scheduled {
    t: u64,
    order: u64,
    action: Action,
}

impl Ord for Scheduled {
    // min-heap on (t, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.t, other.order).cmp(&(self.t, self.order))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct InFlight {
    id: u64,
    env: Envelope,
    frame: Vec<u8>,
}

struct Link {
    spec: LinkSpec,
    queue: VecDeque<InFlight>,
}

#[derive(Default)]
struct PeriodBuffer {
    activity: Vec<ActivityObservation>,
    physio: Option<Vec<SensorFrame>>,
    environment: Option<Vec<SensorFrame>>,
    playback: Option<ContentId>,
}

struct EdgeState {
    classifier: ActivityClassifier,
    periods: BTreeMap<u64, PeriodBuffer>,
    transactions: Vec<ContextTransaction>,
    shipped: usize,
    previous: Option<(u64, AffectiveState, Option<ContentId>)>,
    model: TransitionModel,
    processed: u64,
    snapshots: BTreeMap<String, TransitionModel>,
}

#[derive(Default)]
struct VehicleState {
    catalog: Vec<ContentId>,
    rules: Vec<AssociationRule>,
    model: Option<(TransitionModel, String)>,
}

struct Sim<'a> {
    manifest: &'a Manifest,
    inputs: &'a ScenarioInputs,
    now: u64,
    heap: BinaryHeap<Scheduled>,
    order: u64,
    next_msg: u64,
    links: Vec<Link>,
    seqs: BTreeMap<(NodeKind, MsgType), u64>,
    down: BTreeSet<NodeKind>,
    log: Vec<LogEntry>,
    report: RunReport,
    edge: EdgeState,
    vehicle: VehicleState,
}

/// Runs the scenario named by `manifest`. Replay data is loaded and checked
/// before the clock starts.
pub fn run_scenario(manifest: &Manifest, mode: Mode) -> Result<RunOutput, NetError> {
    let inputs = ScenarioInputs::load(manifest)?;
    run_with_inputs(manifest, &inputs, mode)
}

pub fn run_with_inputs(
    manifest: &Manifest,
    inputs: &ScenarioInputs,
    mode: Mode,
) -> Result<RunOutput, NetError> {
    manifest.validate()?;
    let model = TransitionModel::new(manifest.planning.state_space, manifest.planning.alpha)
        .map_err(|e| NetError::Manifest(e.to_string()))?;
    let mut sim = Sim {
        manifest,
        inputs,
        now: 0,
        heap: BinaryHeap::new(),
        order: 0,
        next_msg: 0,
        links: manifest
            .links()
            .into_iter()
            .map(|spec| Link {
                spec,
                queue: VecDeque::new(),
            })
            .collect(),
        seqs: BTreeMap::new(),
        down: BTreeSet::new(),
        log: Vec::new(),
        report: RunReport::default(),
        edge: EdgeState {
            classifier: ActivityClassifier::new(inputs.profile.clone()),
            periods: BTreeMap::new(),
            transactions: Vec::new(),
            shipped: 0,
            previous: None,
            model,
            processed: 0,
            snapshots: BTreeMap::new(),
        },
        vehicle: VehicleState::default(),
    };
    sim.seed_schedule();
    let wall = Instant::now();
    while let Some(ev) = sim.heap.pop() {
        if mode == Mode::Realtime {
            let due = Duration::from_secs_f64(ev.t as f64 / 1000.0 / manifest.realtime_speed);
            if let Some(wait) = due.checked_sub(wall.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        sim.now = ev.t;
        sim.step(ev.action)?;
    }
    Ok(RunOutput {
        entries: sim.log,
        report: sim.report,
    })
}

fn window(series: &[(f64, f64)], from_ms: f64, to_ms: f64, max_points: usize) -> &[(f64, f64)] {
    let lo = series.partition_point(|s| s.0 < from_ms);
    let hi = series.partition_point(|s| s.0 < to_ms);
    &series[lo.max(hi.saturating_sub(max_points))..hi]
}

fn notification_text(activity: u8, meta: Meta) -> String {
    let what = ActivityTable::builtin()
        .get(activity)
        .map(|c| c.description.clone())
        .unwrap_or_else(|_| format!("activity {activity}"));
    match meta {
        Meta::SafeDriving => format!("Safe driving: {what}"),
        Meta::DistractedDriving => format!("Distracted driving detected: {what}"),
    }
}

impl Sim<'_> {
    fn schedule(&mut self, t: u64, action: Action) {
        self.order += 1;
        self.heap.push(Scheduled {
            t,
            order: self.order,
            action,
        });
    }

    fn seed_schedule(&mut self) {
        let m = self.manifest;
        for f in &m.failures {
            self.schedule(f.from_ms, Action::NodeDown(f.node));
            self.schedule(f.to_ms, Action::NodeUp(f.node));
        }
        self.schedule(0, Action::RequestCatalog);
        self.schedule(0, Action::ActivityTick(0));
        if m.timing.mood_period_ms <= m.duration_ms {
            self.schedule(m.timing.mood_period_ms, Action::PeriodTick(0));
        }
    }

    fn up(&self, node: NodeKind) -> bool {
        !self.down.contains(&node)
    }

    fn note(&mut self, node: NodeKind, reason: String) {
        let mut e = LogEntry::bare(self.now, EventKind::Note, node);
        e.reason = Some(reason);
        self.log.push(e);
    }

    fn message_entry(&self, event: EventKind, link: &LinkSpec, msg: &InFlight) -> LogEntry {
        LogEntry {
            t_ms: self.now,
            event,
            node: None,
            from: Some(link.from),
            to: Some(link.to),
            msg_type: Some(msg.env.msg_type()),
            seq: Some(msg.env.seq),
            payload_digest: Some(payload_digest(&msg.env.payload)),
            ok: None,
            reason: None,
            frame: Some(hex::encode(&msg.frame)),
        }
    }

    fn send(&mut self, from: NodeKind, to: NodeKind, payload: Payload) -> Result<(), NetError> {
        let Some(link) = self
            .links
            .iter()
            .position(|l| l.spec.from == from && l.spec.to == to)
        else {
            self.note(from, format!("no link to {to}"));
            return Ok(());
        };
        let seq = self.seqs.entry((from, payload.msg_type())).or_insert(0);
        let env = Envelope::new(self.manifest.driver_id.clone(), *seq, self.now, payload);
        *seq += 1;
        let frame = encode(&env)?;
        self.next_msg += 1;
        let id = self.next_msg;
        let spec = self.links[link].spec;
        if self.links[link].queue.len() >= spec.capacity {
            let oldest = self.links[link]
                .queue
                .pop_front()
                .expect("capacity is at least 1");
            let mut entry = self.message_entry(EventKind::Drop, &spec, &oldest);
            entry.reason = Some("overflow".into());
            self.log.push(entry);
            self.report.drops += 1;
        }
        self.links[link]
            .queue
            .push_back(InFlight { id, env, frame });
        self.schedule(self.now + spec.latency_ms, Action::Deliver { link, id });
        Ok(())
    }

    fn step(&mut self, action: Action) -> Result<(), NetError> {
        match action {
            Action::NodeDown(n) => {
                self.down.insert(n);
                self.log
                    .push(LogEntry::bare(self.now, EventKind::NodeDown, n));
            }
            Action::NodeUp(n) => {
                self.down.remove(&n);
                self.log
                    .push(LogEntry::bare(self.now, EventKind::NodeUp, n));
            }
            Action::RequestCatalog => {
                if self.up(NodeKind::OnVehicle) {
                    self.send(
                        NodeKind::OnVehicle,
                        NodeKind::Cloud,
                        Payload::CatalogRequest(CatalogRequest {}),
                    )?;
                }
            }
            Action::ActivityTick(k) => self.activity_tick(k)?,
            Action::PeriodTick(p) => self.period_tick(p)?,
            Action::EdgeProcess(p) => {
                if self.up(NodeKind::Edge) {
                    self.edge_process(p)?;
                } else {
                    self.edge.periods.remove(&p);
                }
            }
            Action::Deliver { link, id } => {
                if let Some(msg) = self.links[link].queue.pop_front_if(|m| m.id == id) {
                    let spec = self.links[link].spec;
                    if self.up(spec.to) {
                        self.log
                            .push(self.message_entry(EventKind::Deliver, &spec, &msg));
                        self.report.deliveries += 1;
                        self.receive(spec.to, msg.env)?;
                    } else {
                        let mut entry = self.message_entry(EventKind::Drop, &spec, &msg);
                        entry.reason = Some("node_down".into());
                        self.log.push(entry);
                        self.report.drops += 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn activity_tick(&mut self, k: u64) -> Result<(), NetError> {
        let tick = self.manifest.timing.activity_tick_ms;
        let t = k * tick;
        if self.up(NodeKind::Camera) {
            if let Some(activity) = self.inputs.activity.at(t) {
                let ev = ActivityEvent { t_ms: t, activity };
                self.send(NodeKind::Camera, NodeKind::Edge, Payload::ActivityEvent(ev))?;
            }
        }
        if (k + 1) * tick < self.manifest.duration_ms {
            self.schedule((k + 1) * tick, Action::ActivityTick(k + 1));
        }
        Ok(())
    }

    fn period_tick(&mut self, p: u64) -> Result<(), NetError> {
        let m = self.manifest;
        let period = m.timing.mood_period_ms;
        let (from, to) = ((p * period) as f64, ((p + 1) * period) as f64);
        let frames = |series: &[(f64, f64)], channel: Channel, max: usize| {
            let w = window(series, from, to, max);
            let samples = w.iter().map(|s| s.1).collect();
            SensorFrame::new(
                channel,
                w.first().map_or(from, |s| s.0),
                m.rates.rate(channel),
                samples,
            )
            .ok()
        };
        if let Some(physio) = &self.inputs.physio {
            if self.up(NodeKind::BanSink) {
                let n = m.timing.points_per_period;
                let batch: Option<Vec<SensorFrame>> = Channel::PHYSIOLOGICAL
                    .iter()
                    .zip(physio)
                    .map(|(&c, s)| frames(s, c, n))
                    .collect();
                if let Some(frames) = batch {
                    let b = SensorBatch::Physio { period: p, frames };
                    self.send(NodeKind::BanSink, NodeKind::Edge, Payload::SensorBatch(b))?;
                }
            }
        }
        if self.up(NodeKind::EnvGateway) {
            let batch: Option<Vec<SensorFrame>> = Channel::ENVIRONMENT
                .iter()
                .zip(&self.inputs.environment)
                .map(|(&c, s)| frames(s, c, usize::MAX))
                .collect();
            if let Some(frames) = batch {
                let b = SensorBatch::Environment { period: p, frames };
                self.send(
                    NodeKind::EnvGateway,
                    NodeKind::Edge,
                    Payload::SensorBatch(b),
                )?;
            }
        }
        if self.up(NodeKind::OnVehicle) {
            let b = SensorBatch::Playback {
                period: p,
                content: self.inputs.playback.get(p),
            };
            self.send(NodeKind::OnVehicle, NodeKind::Edge, Payload::SensorBatch(b))?;
        }
        self.schedule(self.now + m.timing.edge_grace_ms, Action::EdgeProcess(p));
        if (p + 2) * period <= m.duration_ms {
            self.schedule((p + 2) * period, Action::PeriodTick(p + 1));
        }
        Ok(())
    }

    fn receive(&mut self, node: NodeKind, env: Envelope) -> Result<(), NetError> {
        match (node, env.payload) {
            (NodeKind::Edge, Payload::ActivityEvent(ev)) => self.edge_activity(ev),
            (NodeKind::Edge, Payload::SensorBatch(b)) => {
                let buf = self.edge.periods.entry(b.period()).or_default();
                match b {
                    SensorBatch::Physio { frames, .. } => buf.physio = Some(frames),
                    SensorBatch::Environment { frames, .. } => buf.environment = Some(frames),
                    SensorBatch::Playback { content, .. } => buf.playback = content,
                }
                Ok(())
            }
            (NodeKind::Edge, Payload::RepairPlanMsg(msg)) => {
                self.edge_check_plan(env.seq, &msg);
                Ok(())
            }
            (NodeKind::OnVehicle, Payload::SafetyNotification(_)) => {
                self.report.notifications += 1;
                Ok(())
            }
            (NodeKind::OnVehicle, Payload::CatalogResponse(c)) => {
                self.vehicle.catalog = c.entries.iter().map(|e| e.id).collect();
                Ok(())
            }
            (NodeKind::OnVehicle, Payload::RuleSet(rs)) => {
                self.vehicle_rules(rs);
                Ok(())
            }
            (NodeKind::OnVehicle, Payload::MoodResult(mr)) => self.vehicle_plan(mr),
            (NodeKind::Cloud, Payload::CatalogRequest(_)) => {
                let entries = self.inputs.catalog.entries().to_vec();
                self.send(
                    NodeKind::Cloud,
                    NodeKind::OnVehicle,
                    Payload::CatalogResponse(CatalogResponse { entries }),
                )
            }
            (NodeKind::Cloud, Payload::TransactionBatch(_)) => Ok(()),
            (node, payload) => {
                self.note(node, format!("unexpected {}", payload.msg_type()));
                Ok(())
            }
        }
    }

    fn edge_activity(&mut self, ev: ActivityEvent) -> Result<(), NetError> {
        let obs = match self.edge.classifier.classify(ev.activity, ev.t_ms) {
            Ok(obs) => obs,
            Err(e) => {
                self.note(NodeKind::Edge, e.to_string());
                return Ok(());
            }
        };
        let period = ev.t_ms / self.manifest.timing.mood_period_ms;
        self.edge
            .periods
            .entry(period)
            .or_default()
            .activity
            .push(obs);
        let meta = obs.meta();
        let note = SafetyNotification {
            t_ms: ev.t_ms,
            activity: obs.activity,
            meta,
            confidence: obs.confidence,
            message: notification_text(obs.activity, meta),
        };
        self.send(
            NodeKind::Edge,
            NodeKind::OnVehicle,
            Payload::SafetyNotification(note),
        )
    }

    fn edge_process(&mut self, p: u64) -> Result<(), NetError> {
        let m = self.manifest;
        let buf = self.edge.periods.remove(&p).unwrap_or_default();

        // most frequent classified activity; ties go to the lower id
        let mut counts = [0usize; ACTIVITY_COUNT];
        for o in &buf.activity {
            counts[o.activity as usize] += 1;
        }
        let modal = (0..ACTIVITY_COUNT)
            .rev()
            .max_by_key(|&c| counts[c])
            .filter(|&c| counts[c] > 0);
        let Some(activity) = modal.and_then(|c| {
            buf.activity
                .iter()
                .rev()
                .find(|o| o.activity as usize == c)
                .copied()
        }) else {
            self.note(
                NodeKind::Edge,
                format!("period {p}: no activity observations"),
            );
            return Ok(());
        };

        let features = buf.physio.as_ref().and_then(|f| match f.as_slice() {
            [emg, ecg, eda, eeg] => physio_features(emg, ecg, eda, eeg, MOVING_AVERAGE_WINDOW).ok(),
            _ => None,
        });
        let mood = match estimate_mood(features.as_ref(), &self.inputs.estimator, p) {
            Ok(mood) => mood,
            Err(e) => {
                self.note(NodeKind::Edge, format!("period {p}: {e}"));
                return Ok(());
            }
        };
        let env = buf.environment.as_ref().and_then(|f| match f.as_slice() {
            [light, temp, hum] => env_snapshot(light, temp, hum, m.timing.env_window).ok(),
            _ => None,
        });
        let Some(env) = env else {
            self.note(NodeKind::Edge, format!("period {p}: no environment window"));
            return Ok(());
        };
        let fusion = FusionConfig {
            period_ms: m.timing.mood_period_ms,
            env_thresholds: m.thresholds,
        };
        let tx = match fuse_context(&activity, &mood, &env, buf.playback, &fusion) {
            Ok(tx) => tx,
            Err(e) => {
                self.note(NodeKind::Edge, format!("period {p}: {e}"));
                return Ok(());
            }
        };
        let context: Vec<Item> = tx.context_only().into_iter().collect();
        self.edge.transactions.push(tx);
        self.report.transactions += 1;

        if let Some((prev, state, Some(content))) = self.edge.previous {
            if prev + 1 == p {
                self.edge.model.observe(state, content, mood.state);
            }
        }
        self.edge.previous = Some((p, mood.state, buf.playback));
        self.edge.processed += 1;
        self.report.periods_processed += 1;

        if self.edge.processed.is_multiple_of(m.timing.mining_every) {
            let rules = match mine_rules(
                &self.edge.transactions,
                m.mining.min_support,
                m.mining.min_confidence,
            ) {
                Ok(rules) => rules,
                Err(e) => {
                    self.note(NodeKind::Edge, format!("mining: {e}"));
                    Vec::new()
                }
            };
            let model = self.edge.model.to_tsv();
            let model_hash = self.edge.model.snapshot_hash();
            self.edge
                .snapshots
                .insert(model_hash.clone(), self.edge.model.clone());
            let rs = RuleSet {
                period: p,
                rules,
                model,
                model_hash,
            };
            self.report.rule_sets += 1;
            self.send(NodeKind::Edge, NodeKind::OnVehicle, Payload::RuleSet(rs))?;
            let batch = TransactionBatch {
                transactions: self.edge.transactions[self.edge.shipped..].to_vec(),
            };
            self.edge.shipped = self.edge.transactions.len();
            self.send(
                NodeKind::Edge,
                NodeKind::Cloud,
                Payload::TransactionBatch(batch),
            )?;
        }

        let result = MoodResult {
            period: p,
            state: mood.state,
            label: MoodTable::builtin().label(mood.state).to_string(),
            source: mood.source,
            context,
        };
        self.send(
            NodeKind::Edge,
            NodeKind::OnVehicle,
            Payload::MoodResult(result),
        )
    }

    fn edge_check_plan(&mut self, seq: u64, msg: &RepairPlanMsg) {
        let ok = self
            .edge
            .snapshots
            .get(&msg.model_hash)
            .is_some_and(|model| {
                plan_repair(model, msg.start, &msg.target, msg.horizon, &msg.candidates).ok()
                    == Some(msg.plan.clone())
            });
        if ok {
            self.report.plans_validated += 1;
        } else {
            self.report.plans_rejected += 1;
        }
        let mut e = LogEntry::bare(self.now, EventKind::PlanCheck, NodeKind::Edge);
        e.seq = Some(seq);
        e.msg_type = Some(MsgType::RepairPlanMsg);
        e.ok = Some(ok);
        self.log.push(e);
    }

    fn vehicle_rules(&mut self, rs: RuleSet) {
        match TransitionModel::from_tsv(&rs.model) {
            Ok(model) if model.snapshot_hash() == rs.model_hash => {
                self.vehicle.rules = rs.rules;
                self.vehicle.model = Some((model, rs.model_hash));
            }
            Ok(_) => self.note(NodeKind::OnVehicle, "model snapshot hash mismatch".into()),
            Err(e) => self.note(NodeKind::OnVehicle, format!("model snapshot: {e}")),
        }
    }

    fn vehicle_plan(&mut self, mr: MoodResult) -> Result<(), NetError> {
        let planning = self.manifest.planning;
        if planning.target.accepts(mr.state) {
            return Ok(());
        }
        let Some((model, hash)) = &self.vehicle.model else {
            return Ok(());
        };
        let context: BTreeSet<Item> = mr.context.iter().copied().collect();
        let candidates = candidate_contents(&self.vehicle.rules, &context, &self.vehicle.catalog);
        if candidates.is_empty() {
            self.note(
                NodeKind::OnVehicle,
                format!("period {}: no candidate contents", mr.period),
            );
            return Ok(());
        }
        let plan = match plan_repair(
            model,
            mr.state,
            &planning.target,
            planning.horizon,
            &candidates,
        ) {
            Ok(plan) => plan,
            Err(e) => {
                self.note(NodeKind::OnVehicle, format!("period {}: {e}", mr.period));
                return Ok(());
            }
        };
        let msg = RepairPlanMsg {
            period: mr.period,
            start: mr.state,
            target: planning.target,
            horizon: planning.horizon,
            candidates,
            plan,
            model_hash: hash.clone(),
        };
        self.report.plans_sent += 1;
        self.send(
            NodeKind::OnVehicle,
            NodeKind::Edge,
            Payload::RepairPlanMsg(msg),
        )
    }
}
