//! Scripted driver sessions: activity timelines, mood trajectories, cabin
//! and body-area waveforms, written out as a replay bundle that the network
//! simulator runs directly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cpsnet::{
    EnvPaths, FailureWindow, LinkSpec, Manifest, MiningSettings, PhysioPaths, PlanningSettings,
    Rates, ReplayPaths, Timing,
};
use crate::domain::{AffectiveState, Catalog, ContentId, EnvThresholds, ACTIVITY_COUNT};
use crate::inference::{ClassifierProfile, MoodTrace};
use crate::sigproc::{Channel, SensorFrame};
use crate::tsv::{self, TsvError};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid script: {0}")]
    Script(String),
    #[error("activity segments overlap at {at_ms} ms")]
    Overlap { at_ms: u64 },
    #[error("activity timeline has a gap at {at_ms} ms")]
    Gap { at_ms: u64 },
    #[error("{file}: {source}")]
    Table {
        file: String,
        #[source]
        source: TsvError,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Sinusoidal component of a synthetic waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub freq_hz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Baseline, linear drift per second, sinusoids and Gaussian noise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveProfile {
    pub baseline: f64,
    pub drift_per_s: f64,
    pub sigma: f64,
    pub components: Vec<Sinusoid>,
}

impl WaveProfile {
    pub fn constant(baseline: f64) -> Self {
        Self {
            baseline,
            ..Self::default()
        }
    }

    fn with(baseline: f64, sigma: f64, components: Vec<Sinusoid>) -> Self {
        Self {
            baseline,
            drift_per_s: 0.0,
            sigma,
            components,
        }
    }
}

/// `baseline + drift * t + sum of sinusoids + N(0, sigma^2)` sampled at
/// `rate` over `[0, duration_s)`.
pub fn synth_waveform(
    channel: Channel,
    profile: &WaveProfile,
    duration_s: f64,
    rate: f64,
    seed: u64,
) -> Result<SensorFrame, ScenarioError> {
    let n = (duration_s * rate - 1e-9).ceil();
    if !(n >= 1.0 && n.is_finite()) {
        return Err(ScenarioError::Script(format!(
            "{} waveform of {duration_s} s at {rate} Hz has no samples",
            channel.name()
        )));
    }
    let noise = Normal::new(0.0, profile.sigma)
        .map_err(|e| ScenarioError::Script(format!("{} noise: {e}", channel.name())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    let samples = (0..n as usize)
        .map(|i| {
            let t = i as f64 / rate;
            let mut x = profile.baseline + profile.drift_per_s * t;
            for c in &profile.components {
                x += c.amplitude * (tau * c.freq_hz * t + c.phase).sin();
            }
            if profile.sigma > 0.0 {
                x += noise.sample(&mut rng);
            }
            x
        })
        .collect();
    SensorFrame::new(channel, 0.0, rate, samples).map_err(|e| ScenarioError::Script(e.to_string()))
}

/// One ground-truth activity segment, `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_ms: u64,
    pub end_ms: u64,
    pub activity: u8,
}

/// Ground-truth activity labels over time (`activity.tsv`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActivityTimeline {
    segments: Vec<Segment>,
}

impl ActivityTimeline {
    /// Sorts and checks that segments are non-empty and do not overlap.
    pub fn new(mut segments: Vec<Segment>) -> Result<Self, ScenarioError> {
        segments.sort_by_key(|s| s.start_ms);
        for s in &segments {
            if s.end_ms <= s.start_ms {
                return Err(ScenarioError::Script(format!(
                    "empty segment at {} ms",
                    s.start_ms
                )));
            }
            if s.activity as usize >= ACTIVITY_COUNT {
                return Err(ScenarioError::Script(format!(
                    "unknown activity {}",
                    s.activity
                )));
            }
        }
        for w in segments.windows(2) {
            if w[1].start_ms < w[0].end_ms {
                return Err(ScenarioError::Overlap {
                    at_ms: w[1].start_ms,
                });
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Errors unless the segments tile `[0, duration_ms)` without gaps.
    pub fn check_covers(&self, duration_ms: u64) -> Result<(), ScenarioError> {
        let mut at = 0;
        for s in &self.segments {
            if s.start_ms != at {
                return Err(ScenarioError::Gap { at_ms: at });
            }
            at = s.end_ms;
        }
        if at < duration_ms {
            return Err(ScenarioError::Gap { at_ms: at });
        }
        Ok(())
    }

    pub fn at(&self, t_ms: u64) -> Option<u8> {
        let i = self.segments.partition_point(|s| s.end_ms <= t_ms);
        self.segments
            .get(i)
            .filter(|s| s.start_ms <= t_ms)
            .map(|s| s.activity)
    }

    pub fn from_tsv(text: &str) -> Result<Self, ScenarioError> {
        let table = |source| ScenarioError::Table {
            file: "activity.tsv".into(),
            source,
        };
        let mut segments = Vec::new();
        for row in tsv::rows(text, "start_ms").map_err(table)? {
            segments.push(Segment {
                start_ms: row.parse(0, "start_ms").map_err(table)?,
                end_ms: row.parse(1, "end_ms").map_err(table)?,
                activity: row.parse(2, "activity").map_err(table)?,
            });
        }
        Self::new(segments)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("start_ms\tend_ms\tactivity\n");
        for s in &self.segments {
            out.push_str(&format!("{}\t{}\t{}\n", s.start_ms, s.end_ms, s.activity));
        }
        out
    }
}

/// Content playing in each observation period (`playback.tsv`). Periods
/// without a row play nothing.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlaybackSchedule {
    entries: BTreeMap<u64, ContentId>,
}

impl PlaybackSchedule {
    pub fn new(entries: impl IntoIterator<Item = (u64, ContentId)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, period: u64) -> Option<ContentId> {
        self.entries.get(&period).copied()
    }

    pub fn from_tsv(text: &str) -> Result<Self, ScenarioError> {
        let table = |source| ScenarioError::Table {
            file: "playback.tsv".into(),
            source,
        };
        let mut entries = BTreeMap::new();
        for row in tsv::rows(text, "period").map_err(table)? {
            let period = row.parse(0, "period").map_err(table)?;
            entries.insert(period, ContentId(row.parse(1, "content").map_err(table)?));
        }
        Ok(Self { entries })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("period\tcontent\n");
        for (p, c) in &self.entries {
            out.push_str(&format!("{p}\t{}\n", c.0));
        }
        out
    }
}

/// Parses a `t_ms,value` sensor replay file.
pub fn read_sensor_csv(text: &str) -> Result<Vec<(f64, f64)>, TsvError> {
    let mut out = Vec::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != "t_ms,value" {
                return Err(TsvError {
                    line: i + 1,
                    message: "expected header `t_ms,value`".into(),
                });
            }
            header = true;
            continue;
        }
        let bad = || TsvError {
            line: i + 1,
            message: format!("bad sample `{line}`"),
        };
        let (t, v) = line.split_once(',').ok_or_else(bad)?;
        let t: f64 = t.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        if !(t.is_finite() && v.is_finite()) {
            return Err(bad());
        }
        out.push((t, v));
    }
    if !header {
        return Err(TsvError {
            line: 0,
            message: "expected header `t_ms,value`".into(),
        });
    }
    Ok(out)
}

pub fn write_sensor_csv(frame: &SensorFrame) -> String {
    let mut out = String::with_capacity(frame.len() * 24 + 16);
    out.push_str("t_ms,value\n");
    let dt = 1000.0 / frame.rate;
    for (i, v) in frame.samples.iter().enumerate() {
        out.push_str(&format!("{},{}\n", frame.t0_ms + i as f64 * dt, v));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptSegment {
    pub start_s: u64,
    pub end_s: u64,
    pub activity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoodWaypoint {
    pub period: u64,
    pub valence: u8,
    pub arousal: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaybackEntry {
    pub period: u64,
    pub content: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvProfile {
    pub light: WaveProfile,
    pub temperature: WaveProfile,
    pub humidity: WaveProfile,
}

impl Default for EnvProfile {
    fn default() -> Self {
        Self {
            light: WaveProfile::with(400.0, 10.0, Vec::new()),
            temperature: WaveProfile::with(22.0, 0.2, Vec::new()),
            humidity: WaveProfile::with(45.0, 1.0, Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysioProfile {
    pub emg: WaveProfile,
    pub ecg: WaveProfile,
    pub eda: WaveProfile,
    pub eeg: WaveProfile,
}

impl Default for PhysioProfile {
    fn default() -> Self {
        let sin = |freq_hz, amplitude| Sinusoid {
            freq_hz,
            amplitude,
            phase: 0.0,
        };
        Self {
            emg: WaveProfile::with(0.0, 0.2, vec![sin(40.0, 1.0), sin(80.0, 0.5)]),
            ecg: WaveProfile::with(0.0, 0.05, vec![sin(1.2, 1.0), sin(2.4, 0.3)]),
            eda: WaveProfile::with(2.0, 0.02, vec![sin(0.05, 0.2)]),
            eeg: WaveProfile::with(0.0, 0.1, vec![sin(2.0, 1.0)]),
        }
    }
}

/// A scripted session. Mood between waypoints holds the last waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionScript {
    #[serde(default = "default_driver")]
    pub driver_id: String,
    pub duration_s: u64,
    pub seed: u64,
    #[serde(default)]
    pub activity: Vec<ScriptSegment>,
    #[serde(default)]
    pub mood: Vec<MoodWaypoint>,
    #[serde(default)]
    pub playback: Vec<PlaybackEntry>,
    #[serde(default)]
    pub env: EnvProfile,
    #[serde(default)]
    pub physio: PhysioProfile,
    /// `false` leaves the body-area channels out of the bundle.
    #[serde(default = "default_true")]
    pub include_physio: bool,
    /// Builtin profile name (`identity`, `test_set`, `realtime`).
    #[serde(default = "default_profile")]
    pub profile: String,
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
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub failures: Vec<FailureWindow>,
}

fn default_driver() -> String {
    "driver-01".into()
}

fn default_true() -> bool {
    true
}

fn default_profile() -> String {
    "identity".into()
}

impl SessionScript {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Script(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Script(e.to_string()))
    }

    pub fn duration_ms(&self) -> u64 {
        self.duration_s * 1000
    }

    /// Whole observation periods in the session.
    pub fn periods(&self) -> u64 {
        self.duration_ms() / self.timing.mood_period_ms.max(1)
    }

    pub fn timeline(&self) -> Result<ActivityTimeline, ScenarioError> {
        let tl = ActivityTimeline::new(
            self.activity
                .iter()
                .map(|s| Segment {
                    start_ms: s.start_s * 1000,
                    end_ms: s.end_s * 1000,
                    activity: s.activity,
                })
                .collect(),
        )?;
        tl.check_covers(self.duration_ms())?;
        Ok(tl)
    }

    /// Per-period mood, held stepwise from each waypoint; periods before the
    /// first waypoint take the first waypoint's state.
    pub fn mood_trace(&self) -> Result<Option<MoodTrace>, ScenarioError> {
        if self.mood.is_empty() {
            return Ok(None);
        }
        for w in self.mood.windows(2) {
            if w[1].period <= w[0].period {
                return Err(ScenarioError::Script(format!(
                    "mood waypoint periods must increase ({} after {})",
                    w[1].period, w[0].period
                )));
            }
        }
        let states = self
            .mood
            .iter()
            .map(|w| AffectiveState::new(w.valence as i64, w.arousal as i64))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ScenarioError::Script(e.to_string()))?;
        let rows = (0..self.periods()).map(|p| {
            let i = self.mood.partition_point(|w| w.period <= p);
            (p, states[i.saturating_sub(1)])
        });
        Ok(Some(MoodTrace::new(rows)))
    }

    pub fn playback_schedule(&self) -> PlaybackSchedule {
        PlaybackSchedule::new(
            self.playback
                .iter()
                .map(|e| (e.period, ContentId(e.content))),
        )
    }

    pub fn classifier_profile(&self) -> Result<ClassifierProfile, ScenarioError> {
        builtin_profile(&self.profile, self.seed).ok_or_else(|| {
            ScenarioError::Script(format!("unknown classifier profile `{}`", self.profile))
        })
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.duration_s == 0 {
            return Err(ScenarioError::Script("duration_s must be positive".into()));
        }
        self.timeline()?;
        self.mood_trace()?;
        self.classifier_profile()?;
        Ok(())
    }
}

pub(crate) fn builtin_profile(name: &str, seed: u64) -> Option<ClassifierProfile> {
    match name {
        "identity" => Some(ClassifierProfile::identity(seed)),
        "test_set" => Some(ClassifierProfile::test_set(seed)),
        "realtime" => Some(ClassifierProfile::realtime(seed)),
        _ => None,
    }
}

/// Files written by [`emit_session`].
#[derive(Debug, Clone, PartialEq)]
pub struct SessionBundle {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub files: Vec<PathBuf>,
}

fn channel_seed(seed: u64, channel: Channel) -> u64 {
    seed ^ (channel as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Writes the replay bundle for `script` into `dir`: one `t_ms,value` CSV
/// per channel, the activity ground truth, mood trace, playback schedule,
/// catalog, classifier profile and a `manifest.toml` that runs it.
pub fn emit_session(script: &SessionScript, dir: &Path) -> Result<SessionBundle, ScenarioError> {
    script.validate()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    let mut write = |name: &str, body: &str| -> Result<PathBuf, ScenarioError> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        files.push(path);
        Ok(PathBuf::from(name))
    };
    let duration = script.duration_s as f64;
    let mut wave = |channel: Channel, profile: &WaveProfile| -> Result<PathBuf, ScenarioError> {
        let frame = synth_waveform(
            channel,
            profile,
            duration,
            script.rates.rate(channel),
            channel_seed(script.seed, channel),
        )?;
        write(
            &format!("{}.csv", channel.name()),
            &write_sensor_csv(&frame),
        )
    };

    let environment = EnvPaths {
        light: wave(Channel::Light, &script.env.light)?,
        temperature: wave(Channel::Temperature, &script.env.temperature)?,
        humidity: wave(Channel::Humidity, &script.env.humidity)?,
    };
    let physio = match script.include_physio.then_some(&script.physio) {
        Some(p) => Some(PhysioPaths {
            emg: wave(Channel::Emg, &p.emg)?,
            ecg: wave(Channel::Ecg, &p.ecg)?,
            eda: wave(Channel::Eda, &p.eda)?,
            eeg: wave(Channel::Eeg, &p.eeg)?,
        }),
        None => None,
    };

    let activity = write("activity.tsv", &script.timeline()?.to_tsv())?;
    let playback = write("playback.tsv", &script.playback_schedule().to_tsv())?;
    let mood_trace = match script.mood_trace()? {
        Some(trace) => Some(write("mood_trace.tsv", &trace.to_tsv())?),
        None => None,
    };
    let catalog = write("catalog.tsv", &Catalog::builtin().to_tsv())?;
    let profile = write("profile.tsv", &script.classifier_profile()?.to_tsv())?;

    let manifest = Manifest {
        driver_id: script.driver_id.clone(),
        seed: script.seed,
        duration_ms: script.duration_ms(),
        timing: script.timing,
        replay: ReplayPaths {
            activity,
            playback: Some(playback),
            mood_trace,
            catalog: Some(catalog),
            profile: profile.to_string_lossy().into_owned(),
            physio,
            environment,
        },
        rates: script.rates,
        mining: script.mining,
        planning: script.planning,
        thresholds: script.thresholds,
        stub: Default::default(),
        links: script.links.clone(),
        failures: script.failures.clone(),
        realtime_speed: 1.0,
        base_dir: dir.to_path_buf(),
    };
    let text = manifest
        .to_toml()
        .map_err(|e| ScenarioError::Script(e.to_string()))?;
    let manifest_path = dir.join("manifest.toml");
    fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))?;
    files.push(manifest_path.clone());
    Ok(SessionBundle {
        dir: dir.to_path_buf(),
        manifest: manifest_path,
        files,
    })
}
