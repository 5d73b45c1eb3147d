//! Browser bindings for the demo page. Each operation has a plain Rust
//! function returning JSON text and a thin `wasm_bindgen` export.

use drivesafe::domain::{mood_lookup, AffectiveState, ContentId};
use drivesafe::evalstats::{binom_ci, CiMethod};
use drivesafe::recommend::{learn_transitions, plan_repair, Target};
use drivesafe::sigproc::{bandpass_filter, Channel, SensorFrame};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// All five binomial intervals for `x` successes out of `n`.
pub fn interval_table(x: u32, n: u32, level: f64) -> Result<Value, String> {
    let rows = CiMethod::ALL
        .iter()
        .map(|&m| {
            binom_ci(x.into(), n.into(), level, m)
                .map(|ci| json!({"method": m.to_string(), "prevalence": ci.prevalence, "lower": ci.lower, "upper": ci.upper}))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Value::Array(rows))
}

/// Light smoothing so a handful of demo observations outweigh the 81-state
/// prior.
const DEMO_ALPHA: f64 = 0.02;

/// Transitions behind the demo planner: calming content (1, 2) lifts
/// valence, upbeat content (20) lifts it further, news (4) lowers it.
fn demo_history() -> Vec<(AffectiveState, ContentId, AffectiveState)> {
    let mut history = Vec::new();
    for v in 1..=9 {
        for a in 1..=9 {
            let s = AffectiveState::new(v, a).unwrap();
            let up = |dv: i64, da: i64| {
                AffectiveState::new((v + dv).clamp(1, 9), (a + da).clamp(1, 9)).unwrap()
            };
            history.push((s, ContentId(1), up(1, -1)));
            history.push((s, ContentId(2), up(2, -2)));
            history.push((s, ContentId(20), up(3, 0)));
            history.push((s, ContentId(20), up(3, 0)));
            history.push((s, ContentId(4), up(-1, 1)));
        }
    }
    history
}

/// Mood label of a state and a repair plan towards `target` over the demo
/// model.
pub fn mood_and_plan(
    valence: i64,
    arousal: i64,
    target: &str,
    horizon: usize,
) -> Result<Value, String> {
    let start = AffectiveState::new(valence, arousal).map_err(|e| e.to_string())?;
    let target: Target = target
        .parse()
        .map_err(|e: drivesafe::recommend::RecommendError| e.to_string())?;
    let label = mood_lookup(start);
    let model = learn_transitions(&demo_history(), DEMO_ALPHA).map_err(|e| e.to_string())?;
    let candidates = [ContentId(1), ContentId(2), ContentId(4), ContentId(20)];
    let plan =
        plan_repair(&model, start, &target, horizon, &candidates).map_err(|e| e.to_string())?;
    let plan = plan.map(|p| {
        let steps: Vec<Value> = p
            .contents
            .iter()
            .zip(&p.predicted_states)
            .map(|(c, s)| {
                json!({"content": c.0, "valence": s.valence(), "arousal": s.arousal(), "mood": mood_lookup(*s).name})
            })
            .collect();
        json!({"steps": steps, "log_likelihood": p.log_likelihood})
    });
    Ok(json!({"mood": label.name, "polarity": format!("{:?}", label.polarity), "plan": plan}))
}

/// Single-sided amplitude of `xs` at `freq` by direct projection.
fn tone_gain(xs: &[f64], rate: f64, freq: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq / rate;
    let (re, im) = xs.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, x)| {
        (re + x * (w * i as f64).cos(), im - x * (w * i as f64).sin())
    });
    2.0 * (re * re + im * im).sqrt() / xs.len() as f64
}

/// Magnitude response of the band-pass stage, measured by passing unit tones
/// at `points` frequencies between 1 Hz and just below Nyquist.
pub fn bandpass_response(
    low_hz: f64,
    high_hz: f64,
    rate: f64,
    points: usize,
) -> Result<Value, String> {
    let n = (rate * 4.0).round() as usize;
    let nyquist = rate / 2.0;
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        // frequencies on whole 0.25 Hz bins so every tone fits the window
        let f =
            ((1.0 + (nyquist - 2.0) * k as f64 / (points.max(2) - 1) as f64) * 4.0).round() / 4.0;
        let tone: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / rate).sin())
            .collect();
        let frame = SensorFrame::new(Channel::Emg, 0.0, rate, tone).map_err(|e| e.to_string())?;
        let out = bandpass_filter(&frame, low_hz, high_hz).map_err(|e| e.to_string())?;
        let gain = tone_gain(&out.samples, rate, f);
        rows.push(json!({"freq_hz": f, "gain": gain, "gain_db": 20.0 * gain.max(1e-12).log10()}));
    }
    Ok(Value::Array(rows))
}

#[wasm_bindgen(js_name = intervalTable)]
pub fn interval_table_js(x: u32, n: u32, level: f64) -> Result<String, JsError> {
    interval_table(x, n, level)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = moodAndPlan)]
pub fn mood_and_plan_js(
    valence: i32,
    arousal: i32,
    target: &str,
    horizon: usize,
) -> Result<String, JsError> {
    mood_and_plan(valence.into(), arousal.into(), target, horizon)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bandpassResponse)]
pub fn bandpass_response_js(
    low_hz: f64,
    high_hz: f64,
    rate: f64,
    points: usize,
) -> Result<String, JsError> {
    bandpass_response(low_hz, high_hz, rate, points)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}
