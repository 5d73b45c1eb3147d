//! Sensor-stream preprocessing and window feature extraction.
//!
//! Physiological channels run through a zero-phase Butterworth bandpass
//! (one second-order high-pass and one second-order low-pass section, applied
//! forward and backward) followed by a moving-average smoother. Window
//! features are the six summary statistics used for both physiological and
//! cabin-environment channels; all standard deviations here use divisor N.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("invalid band [{low}, {high}] Hz for Nyquist {nyquist} Hz")]
    InvalidBand { low: f64, high: f64, nyquist: f64 },
    #[error("need at least {needed} samples, got {got}")]
    Degenerate { needed: usize, got: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Emg,
    Ecg,
    Eda,
    Eeg,
    Light,
    Temperature,
    Humidity,
}

impl Channel {
    pub const PHYSIOLOGICAL: [Channel; 4] =
        [Channel::Emg, Channel::Ecg, Channel::Eda, Channel::Eeg];
    pub const ENVIRONMENT: [Channel; 3] = [Channel::Light, Channel::Temperature, Channel::Humidity];

    /// Default acquisition rate in samples per second. Environment channels
    /// deliver 30 points per two-minute observation period.
    pub fn default_rate(self) -> f64 {
        match self {
            Channel::Emg | Channel::Ecg | Channel::Eda => 256.0,
            Channel::Eeg => 8.0,
            Channel::Light | Channel::Temperature | Channel::Humidity => 0.25,
        }
    }

    /// Default preprocessing band for physiological channels.
    pub fn default_band(self) -> Option<Band> {
        match self {
            Channel::Emg => Some(Band::BandPass {
                low_hz: 20.0,
                high_hz: 120.0,
            }),
            Channel::Ecg => Some(Band::BandPass {
                low_hz: 0.5,
                high_hz: 40.0,
            }),
            Channel::Eda => Some(Band::LowPass { cutoff_hz: 1.0 }),
            Channel::Eeg => Some(Band::BandPass {
                low_hz: 0.5,
                high_hz: 3.9,
            }),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Emg => "emg",
            Channel::Ecg => "ecg",
            Channel::Eda => "eda",
            Channel::Eeg => "eeg",
            Channel::Light => "light",
            Channel::Temperature => "temperature",
            Channel::Humidity => "humidity",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "emg" => Ok(Channel::Emg),
            "ecg" => Ok(Channel::Ecg),
            "eda" => Ok(Channel::Eda),
            "eeg" => Ok(Channel::Eeg),
            "light" => Ok(Channel::Light),
            "temperature" => Ok(Channel::Temperature),
            "humidity" => Ok(Channel::Humidity),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub channel: Channel,
    /// Timestamp of the first sample, in milliseconds.
    pub t0_ms: f64,
    pub rate: f64,
    pub samples: Vec<f64>,
}

impl SensorFrame {
    pub fn new(
        channel: Channel,
        t0_ms: f64,
        rate: f64,
        samples: Vec<f64>,
    ) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate));
        }
        if samples.is_empty() {
            return Err(SignalError::Degenerate { needed: 1, got: 0 });
        }
        Ok(Self {
            channel,
            t0_ms,
            rate,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn with_samples(&self, t0_ms: f64, samples: Vec<f64>) -> SensorFrame {
        SensorFrame {
            channel: self.channel,
            t0_ms,
            rate: self.rate,
            samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Band {
    BandPass { low_hz: f64, high_hz: f64 },
    LowPass { cutoff_hz: f64 },
}

/// Second-order section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Butterworth low-pass via the bilinear transform with pre-warping.
    pub fn butter_lowpass(cutoff_hz: f64, rate: f64) -> Biquad {
        let k = (std::f64::consts::PI * cutoff_hz / rate).tan();
        let norm = 1.0 / (1.0 + std::f64::consts::SQRT_2 * k + k * k);
        let b0 = k * k * norm;
        Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [
                2.0 * (k * k - 1.0) * norm,
                (1.0 - std::f64::consts::SQRT_2 * k + k * k) * norm,
            ],
        }
    }

    pub fn butter_highpass(cutoff_hz: f64, rate: f64) -> Biquad {
        let k = (std::f64::consts::PI * cutoff_hz / rate).tan();
        let norm = 1.0 / (1.0 + std::f64::consts::SQRT_2 * k + k * k);
        Biquad {
            b: [norm, -2.0 * norm, norm],
            a: [
                2.0 * (k * k - 1.0) * norm,
                (1.0 - std::f64::consts::SQRT_2 * k + k * k) * norm,
            ],
        }
    }

    /// Gain at DC.
    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / (1.0 + self.a[0] + self.a[1])
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, rate: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / rate;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = -(self.b[1] * s1 + self.b[2] * s2);
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = -(self.a[0] * s1 + self.a[1] * s2);
        ((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im)).sqrt()
    }

    /// State that makes a unit step input produce a steady output from the
    /// first sample.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[1] * g]
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    sections: Vec<Biquad>,
}

impl Sos {
    pub fn new(sections: Vec<Biquad>) -> Self {
        Self { sections }
    }

    pub fn design(band: Band, rate: f64) -> Result<Sos, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate));
        }
        let nyquist = rate / 2.0;
        match band {
            Band::BandPass { low_hz, high_hz } => {
                if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
                    return Err(SignalError::InvalidBand {
                        low: low_hz,
                        high: high_hz,
                        nyquist,
                    });
                }
                Ok(Sos::new(vec![
                    Biquad::butter_highpass(low_hz, rate),
                    Biquad::butter_lowpass(high_hz, rate),
                ]))
            }
            Band::LowPass { cutoff_hz } => {
                if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
                    return Err(SignalError::InvalidBand {
                        low: 0.0,
                        high: cutoff_hz,
                        nyquist,
                    });
                }
                Ok(Sos::new(vec![Biquad::butter_lowpass(cutoff_hz, rate)]))
            }
        }
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Edge padding used by [`Sos::filtfilt`]; inputs must be strictly longer.
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Single-pass magnitude response.
    pub fn magnitude(&self, freq_hz: f64, rate: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.magnitude(freq_hz, rate))
            .product()
    }

    fn filter_in_place(&self, xs: &mut [f64]) {
        let first = xs[0];
        let mut gain = 1.0;
        for sec in &self.sections {
            let unit = sec.step_state();
            let mut z = [unit[0] * gain * first, unit[1] * gain * first];
            for x in xs.iter_mut() {
                let y = sec.b[0] * *x + z[0];
                z[0] = sec.b[1] * *x - sec.a[0] * y + z[1];
                z[1] = sec.b[2] * *x - sec.a[1] * y;
                *x = y;
            }
            gain *= sec.dc_gain();
        }
    }

    /// Zero-phase forward-backward filtering with odd edge extension and
    /// steady-state initial conditions. The result has the squared magnitude
    /// response of a single pass.
    pub fn filtfilt(&self, xs: &[f64]) -> Result<Vec<f64>, SignalError> {
        let pad = self.pad_len();
        let n = xs.len();
        if n <= pad {
            return Err(SignalError::Degenerate {
                needed: pad + 1,
                got: n,
            });
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * xs[0] - xs[i]));
        ext.extend_from_slice(xs);
        ext.extend((1..=pad).map(|i| 2.0 * xs[n - 1] - xs[n - 1 - i]));
        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

pub fn apply_band(frame: &SensorFrame, band: Band) -> Result<SensorFrame, SignalError> {
    let sos = Sos::design(band, frame.rate)?;
    Ok(frame.with_samples(frame.t0_ms, sos.filtfilt(&frame.samples)?))
}

/// Zero-phase Butterworth bandpass; same length and rate as the input.
pub fn bandpass_filter(
    frame: &SensorFrame,
    low_hz: f64,
    high_hz: f64,
) -> Result<SensorFrame, SignalError> {
    apply_band(frame, Band::BandPass { low_hz, high_hz })
}

pub fn lowpass_filter(frame: &SensorFrame, cutoff_hz: f64) -> Result<SensorFrame, SignalError> {
    apply_band(frame, Band::LowPass { cutoff_hz })
}

/// Default smoothing window, in samples.
pub const MOVING_AVERAGE_WINDOW: usize = 15;

/// Trailing means over `window` samples; output has `len - window + 1` points.
pub fn moving_average_values(xs: &[f64], window: usize) -> Result<Vec<f64>, SignalError> {
    if window == 0 {
        return Err(SignalError::ZeroWindow);
    }
    if xs.len() < window {
        return Err(SignalError::Degenerate {
            needed: window,
            got: xs.len(),
        });
    }
    Ok(xs
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect())
}

/// Moving average over a frame. The output frame starts at the timestamp of
/// the last sample of the first full window.
pub fn moving_average(frame: &SensorFrame, window: usize) -> Result<SensorFrame, SignalError> {
    let out = moving_average_values(&frame.samples, window)?;
    let shift = (window - 1) as f64 * 1000.0 / frame.rate;
    Ok(frame.with_samples(frame.t0_ms + shift, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatures {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub end_start_diff: f64,
    pub max_min_diff: f64,
}

pub fn window_features(xs: &[f64]) -> Result<WindowFeatures, SignalError> {
    if xs.len() < 2 {
        return Err(SignalError::Degenerate {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    // rounding in the sum can push the mean a hair outside [min, max]
    let mean = (xs.iter().sum::<f64>() / n).clamp(min, max);
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(WindowFeatures {
        mean,
        min,
        max,
        std: var.sqrt(),
        end_start_diff: xs[xs.len() - 1] - xs[0],
        max_min_diff: max - min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeFeatures {
    pub mean: f64,
    pub variance: f64,
    pub d1_mean: f64,
    pub d2_mean: f64,
}

/// Signal mean and population variance plus the means of the first and
/// second finite differences, scaled to per-second units.
pub fn derivative_features(xs: &[f64], rate: f64) -> Result<DerivativeFeatures, SignalError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SignalError::InvalidRate(rate));
    }
    if xs.len() < 3 {
        return Err(SignalError::Degenerate {
            needed: 3,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let d1: Vec<f64> = xs.windows(2).map(|w| (w[1] - w[0]) * rate).collect();
    let d2_mean = d1.windows(2).map(|w| (w[1] - w[0]) * rate).sum::<f64>() / (d1.len() - 1) as f64;
    Ok(DerivativeFeatures {
        mean,
        variance,
        d1_mean: d1.iter().sum::<f64>() / d1.len() as f64,
        d2_mean,
    })
}

/// Default number of trailing points per environment channel.
pub const ENV_WINDOW: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub light: WindowFeatures,
    pub temperature: WindowFeatures,
    pub humidity: WindowFeatures,
    pub window_len: usize,
}

impl EnvSnapshot {
    pub fn bucket(
        &self,
        thresholds: &crate::domain::EnvThresholds,
    ) -> crate::domain::EnvironmentBucket {
        thresholds.bucket(self.light.mean, self.temperature.mean, self.humidity.mean)
    }
}

fn trailing(frame: &SensorFrame, window_len: usize) -> Result<&[f64], SignalError> {
    let n = frame.samples.len();
    if n < window_len || window_len < 2 {
        return Err(SignalError::Degenerate {
            needed: window_len.max(2),
            got: n,
        });
    }
    Ok(&frame.samples[n - window_len..])
}

/// Window features over the trailing `window_len` samples of each cabin
/// channel. Mean and population variance are the Gaussian maximum-likelihood
/// estimates for the window.
pub fn env_snapshot(
    light: &SensorFrame,
    temperature: &SensorFrame,
    humidity: &SensorFrame,
    window_len: usize,
) -> Result<EnvSnapshot, SignalError> {
    Ok(EnvSnapshot {
        light: window_features(trailing(light, window_len)?)?,
        temperature: window_features(trailing(temperature, window_len)?)?,
        humidity: window_features(trailing(humidity, window_len)?)?,
        window_len,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFeatures {
    pub window: WindowFeatures,
    pub derivatives: DerivativeFeatures,
}

/// Feature bundle handed to mood estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysioFeatures {
    pub emg: ChannelFeatures,
    pub ecg: ChannelFeatures,
    pub eda: ChannelFeatures,
    pub eeg: ChannelFeatures,
}

/// Band filter followed by moving-average smoothing.
pub fn preprocess(
    frame: &SensorFrame,
    band: Band,
    ma_window: usize,
) -> Result<SensorFrame, SignalError> {
    moving_average(&apply_band(frame, band)?, ma_window)
}

pub fn channel_features(
    frame: &SensorFrame,
    band: Option<Band>,
    ma_window: usize,
) -> Result<ChannelFeatures, SignalError> {
    let cleaned = match band {
        Some(b) => preprocess(frame, b, ma_window)?,
        None => moving_average(frame, ma_window)?,
    };
    Ok(ChannelFeatures {
        window: window_features(&cleaned.samples)?,
        derivatives: derivative_features(&cleaned.samples, cleaned.rate)?,
    })
}

/// Preprocesses the four body-area channels with their default bands.
pub fn physio_features(
    emg: &SensorFrame,
    ecg: &SensorFrame,
    eda: &SensorFrame,
    eeg: &SensorFrame,
    ma_window: usize,
) -> Result<PhysioFeatures, SignalError> {
    let f = |frame: &SensorFrame| channel_features(frame, frame.channel.default_band(), ma_window);
    Ok(PhysioFeatures {
        emg: f(emg)?,
        ecg: f(ecg)?,
        eda: f(eda)?,
        eeg: f(eeg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frame(rate: f64, samples: Vec<f64>) -> SensorFrame {
        SensorFrame::new(Channel::Emg, 0.0, rate, samples).unwrap()
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(
            moving_average_values(&[1.0, 2.0, 3.0, 4.0, 5.0], 3).unwrap(),
            vec![2.0, 3.0, 4.0]
        );
        let xs = [3.5, -1.0, 7.25];
        assert_eq!(moving_average_values(&xs, 1).unwrap(), xs.to_vec());
        assert!(moving_average_values(&[7.0; 40], 15)
            .unwrap()
            .iter()
            .all(|&v| v == 7.0));
        assert_eq!(
            moving_average_values(&[1.0, 2.0], 3),
            Err(SignalError::Degenerate { needed: 3, got: 2 })
        );
        assert_eq!(
            moving_average_values(&[1.0], 0),
            Err(SignalError::ZeroWindow)
        );
    }

    #[test]
    fn moving_average_frame_shifts_timestamp() {
        let f =
            SensorFrame::new(Channel::Eeg, 1000.0, 8.0, (0..20).map(f64::from).collect()).unwrap();
        let out = moving_average(&f, 5).unwrap();
        assert_eq!(out.len(), 16);
        assert_abs_diff_eq!(out.t0_ms, 1500.0);
    }

    #[test]
    fn window_feature_examples() {
        let f = window_features(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(f.mean, 2.5);
        assert_eq!((f.min, f.max), (1.0, 4.0));
        assert_abs_diff_eq!(f.std, 1.25f64.sqrt(), epsilon = 1e-15);
        assert_eq!((f.end_start_diff, f.max_min_diff), (3.0, 3.0));

        let c = window_features(&[7.0; 30]).unwrap();
        assert_eq!(
            (c.mean, c.std, c.end_start_diff, c.max_min_diff),
            (7.0, 0.0, 0.0, 0.0)
        );

        let d = window_features(&[5.0, 1.0]).unwrap();
        assert_eq!((d.end_start_diff, d.max_min_diff), (-4.0, 4.0));

        assert!(matches!(
            window_features(&[1.0]),
            Err(SignalError::Degenerate { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let d = derivative_features(&[0.0, 1.0, 4.0, 9.0], 1.0).unwrap();
        assert_abs_diff_eq!(d.d1_mean, 3.0);
        assert_abs_diff_eq!(d.d2_mean, 2.0);
        let ramp: Vec<f64> = (0..50).map(|i| 2.5 * i as f64).collect();
        let d = derivative_features(&ramp, 1.0).unwrap();
        assert_abs_diff_eq!(d.d1_mean, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.d2_mean, 0.0, epsilon = 1e-12);
        let d = derivative_features(&[4.0; 10], 256.0).unwrap();
        assert_eq!((d.d1_mean, d.d2_mean, d.variance), (0.0, 0.0, 0.0));
        assert!(derivative_features(&[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn invalid_bands_rejected() {
        let f = frame(256.0, vec![0.0; 100]);
        for (lo, hi) in [(0.0, 10.0), (30.0, 20.0), (20.0, 128.0), (-1.0, 5.0)] {
            assert!(matches!(
                bandpass_filter(&f, lo, hi),
                Err(SignalError::InvalidBand { .. })
            ));
        }
        let short = frame(256.0, vec![0.0; 15]);
        assert_eq!(
            bandpass_filter(&short, 20.0, 120.0),
            Err(SignalError::Degenerate {
                needed: 16,
                got: 15
            })
        );
    }

    #[test]
    fn dc_is_removed() {
        let f = frame(256.0, vec![3.0; 512]);
        let out = bandpass_filter(&f, 20.0, 120.0).unwrap();
        let rms = (out.samples.iter().map(|x| x * x).sum::<f64>() / out.len() as f64).sqrt();
        assert!(rms <= 0.01 * 3.0, "rms {rms}");
        assert_eq!(out.len(), 512);
    }

    #[test]
    fn lowpass_keeps_dc() {
        let f = frame(256.0, vec![2.0; 300]);
        let out = lowpass_filter(&f, 1.0).unwrap();
        assert!(out.samples.iter().all(|x| (x - 2.0).abs() < 1e-9));
    }

    #[test]
    fn env_snapshot_uses_trailing_window() {
        let ramp: Vec<f64> = (0..40).map(f64::from).collect();
        let light = SensorFrame::new(Channel::Light, 0.0, 0.25, ramp.clone()).unwrap();
        let temp = SensorFrame::new(Channel::Temperature, 0.0, 0.25, vec![21.0; 30]).unwrap();
        let hum = SensorFrame::new(Channel::Humidity, 0.0, 0.25, vec![40.0; 30]).unwrap();
        let snap = env_snapshot(&light, &temp, &hum, ENV_WINDOW).unwrap();
        assert_eq!(snap.light.min, 10.0);
        assert_eq!(snap.light.end_start_diff, 29.0);
        assert_eq!(snap.temperature.std, 0.0);
        let short = SensorFrame::new(Channel::Humidity, 0.0, 0.25, vec![40.0; 29]).unwrap();
        assert!(env_snapshot(&light, &temp, &short, ENV_WINDOW).is_err());
    }

    #[test]
    fn frame_validation() {
        assert_eq!(
            SensorFrame::new(Channel::Ecg, 0.0, 0.0, vec![1.0]),
            Err(SignalError::InvalidRate(0.0))
        );
        assert!(SensorFrame::new(Channel::Ecg, 0.0, 256.0, vec![]).is_err());
    }
}
