//! Autocorrelation-based fundamental frequency tracking.

use serde::Serialize;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const FRAME_SECONDS: f64 = 0.025;
const HOP_SECONDS: f64 = 0.010;
/// Minimum normalized autocorrelation for a frame to count as voiced.
pub const VOICING_THRESHOLD: f64 = 0.5;
/// Minimum frame RMS for a frame to count as voiced.
pub const RMS_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PitchFrame {
    pub time: f64,
    /// None when the frame is unvoiced.
    pub f0: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PitchTrack {
    pub frames: Vec<PitchFrame>,
}

impl PitchTrack {
    pub fn voiced_fraction(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().filter(|f| f.f0.is_some()).count() as f64 / self.frames.len() as f64
    }

    pub fn mean_voiced_f0(&self) -> Result<f64> {
        let voiced: Vec<f64> = self.frames.iter().filter_map(|f| f.f0).collect();
        if voiced.is_empty() {
            return Err(Error::EmptyPitchTrack);
        }
        Ok(voiced.iter().sum::<f64>() / voiced.len() as f64)
    }

    /// CSV export: `time,f0,voiced` with empty f0 for unvoiced frames.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,f0,voiced\n");
        for f in &self.frames {
            match f.f0 {
                Some(v) => out.push_str(&format!("{:.3},{:.3},1\n", f.time, v)),
                None => out.push_str(&format!("{:.3},,0\n", f.time)),
            }
        }
        out
    }
}

/// Track f0 per 25 ms frame (10 ms hop) with normalized autocorrelation over
/// the lag range implied by `[f_min, f_max]` and parabolic refinement of the
/// selected peak.
pub fn track_pitch(audio: &AudioBuffer, f_min: f64, f_max: f64) -> Result<PitchTrack> {
    let rate = audio.sample_rate as f64;
    if !(f_min > 0.0 && f_min < f_max && f_max < rate / 2.0) {
        return Err(Error::Config(format!(
            "need 0 < f_min < f_max < rate/2, got [{f_min}, {f_max}] at {rate} Hz"
        )));
    }
    let frame_len = (FRAME_SECONDS * rate).round() as usize;
    let hop = (HOP_SECONDS * rate).round() as usize;
    let lag_min = (rate / f_max).floor().max(1.0) as usize;
    let lag_max = (rate / f_min).ceil() as usize;

    // need at least one full frame with room for the longest lag
    let needed = frame_len + lag_max;
    if audio.len() < needed {
        return Ok(PitchTrack { frames: Vec::new() });
    }

    let mut frames = Vec::new();
    let mut start = 0usize;
    while start + needed <= audio.len() {
        let x = &audio.samples[start..start + frame_len + lag_max];
        let base = &x[..frame_len];
        let rms = (base.iter().map(|v| v * v).sum::<f64>() / frame_len as f64).sqrt();

        let mut f0 = None;
        if rms >= RMS_THRESHOLD {
            let e0: f64 = base.iter().map(|v| v * v).sum();
            let mut corr = vec![0.0f64; lag_max + 1];
            for lag in lag_min..=lag_max {
                let shifted = &x[lag..lag + frame_len];
                let dot: f64 = base.iter().zip(shifted).map(|(a, b)| a * b).sum();
                let e1: f64 = shifted.iter().map(|v| v * v).sum();
                let denom = (e0 * e1).sqrt();
                corr[lag] = if denom > 1e-12 { dot / denom } else { 0.0 };
            }
            let peak = corr[lag_min..=lag_max]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            if peak >= VOICING_THRESHOLD {
                // smallest-lag strong local maximum, to avoid octave-down
                // locking when the true period and its multiples all
                // correlate near 1
                let accept = (0.9 * peak).max(VOICING_THRESHOLD);
                let mut best = None;
                for lag in lag_min..=lag_max {
                    let c = corr[lag];
                    let left = if lag > lag_min { corr[lag - 1] } else { f64::NEG_INFINITY };
                    let right = if lag < lag_max { corr[lag + 1] } else { f64::NEG_INFINITY };
                    if c >= accept && c >= left && c >= right {
                        best = Some(lag);
                        break;
                    }
                }
                if let Some(lag) = best {
                    let refined = if lag > lag_min && lag < lag_max {
                        let (a, b, c) = (corr[lag - 1], corr[lag], corr[lag + 1]);
                        let denom = a - 2.0 * b + c;
                        if denom.abs() > 1e-12 {
                            lag as f64 + 0.5 * (a - c) / denom
                        } else {
                            lag as f64
                        }
                    } else {
                        lag as f64
                    };
                    let hz = rate / refined;
                    if hz >= f_min && hz <= f_max {
                        f0 = Some(hz);
                    }
                }
            }
        }

        frames.push(PitchFrame {
            time: start as f64 / rate,
            f0,
        });
        start += hop;
    }

    Ok(PitchTrack { frames })
}
