//! Frame-sequential iterative spectrogram inversion with look-ahead.
//!
//! Frames are committed left-to-right. Each incoming frame gets its phase
//! from the overlap-add of already-committed and buffered frames (zero phase
//! where nothing has been committed yet), then K projection iterations run
//! over the look-ahead buffer before the oldest buffered frame is committed.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::stft::{FftPair, MagnitudeSpectrogram, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtisiConfig {
    /// Projection iterations per committed frame (K).
    pub iterations_per_frame: usize,
    /// Look-ahead buffer length in frames (L).
    pub lookahead_frames: usize,
    pub stft: StftConfig,
}

impl RtisiConfig {
    pub fn new(iterations_per_frame: usize, lookahead_frames: usize, stft: StftConfig) -> Result<Self> {
        if iterations_per_frame == 0 {
            return Err(Error::Config("iterations_per_frame must be >= 1".into()));
        }
        stft.validate()?;
        Ok(RtisiConfig {
            iterations_per_frame,
            lookahead_frames,
            stft,
        })
    }

    /// K=8 iterations, L=3 look-ahead, speech-default STFT.
    pub fn speech_default(sample_rate: u32) -> Self {
        RtisiConfig {
            iterations_per_frame: 8,
            lookahead_frames: 3,
            stft: StftConfig::speech_default(sample_rate),
        }
    }
}

struct Workspace {
    fft: FftPair,
    window: Vec<f64>,
    frame_length: usize,
}

impl Workspace {
    /// Analyze the segment of `signal` starting at `start` (windowed).
    fn analyze_at(&self, signal: &[f64], start: usize) -> Vec<Complex<f64>> {
        let mut frame = vec![0.0f64; self.frame_length];
        for j in 0..self.frame_length {
            if start + j < signal.len() {
                frame[j] = signal[start + j] * self.window[j];
            }
        }
        self.fft.analyze(&frame)
    }

    /// Add the synthesis-windowed time frame of `half` into `acc` at `start`.
    fn add_frame(&self, acc: &mut [f64], half: &[Complex<f64>], start: usize) {
        let time = self.fft.synthesize(half);
        for j in 0..self.frame_length {
            if start + j < acc.len() {
                acc[start + j] += time[j] * self.window[j];
            }
        }
    }
}

fn with_magnitude(mag: &[f64], phases_from: &[Complex<f64>]) -> Vec<Complex<f64>> {
    mag.iter()
        .zip(phases_from)
        .map(|(&m, c)| {
            let n = c.norm();
            if n > 1e-300 {
                c * (m / n)
            } else {
                Complex::new(m, 0.0)
            }
        })
        .collect()
}

/// Reconstruct a time-domain signal from a magnitude spectrogram.
///
/// The seed is reserved for randomized phase initialization variants; the
/// default initialization is deterministic (zero phase where no committed
/// energy exists), so identical inputs give bit-identical output.
pub fn rtisi_la(
    target: &MagnitudeSpectrogram,
    config: &RtisiConfig,
    _seed: u64,
) -> Result<AudioBuffer> {
    let stft_cfg = &config.stft;
    stft_cfg.validate()?;
    if config.iterations_per_frame == 0 {
        return Err(Error::Config("iterations_per_frame must be >= 1".into()));
    }
    if target.frames.iter().any(|f| f.iter().any(|&v| v < 0.0)) {
        return Err(Error::Config("magnitude spectrogram has negative entries".into()));
    }

    let n = stft_cfg.frame_length;
    let hop = stft_cfg.synthesis_hop;
    let t_frames = target.frames.len();
    if t_frames == 0 {
        return Err(Error::DegenerateInput("empty spectrogram".into()));
    }
    let total = (t_frames - 1) * hop + n;

    let ws = Workspace {
        fft: FftPair::new(stft_cfg.fft_size),
        window: stft_cfg.window.coefficients(n),
        frame_length: n,
    };

    // committed contributions in padded coordinates
    let mut committed = vec![0.0f64; total];
    // current phase estimates for buffered frames: (frame index, half spectrum)
    let mut buffer: Vec<(usize, Vec<Complex<f64>>)> = Vec::new();

    let build_partial = |committed: &[f64], buffer: &[(usize, Vec<Complex<f64>>)]| -> Vec<f64> {
        let mut partial = committed.to_vec();
        for (idx, est) in buffer {
            ws.add_frame(&mut partial, est, idx * hop);
        }
        partial
    };

    for t in 0..t_frames {
        // initialize the newest frame's phase from what is already there
        let partial = build_partial(&committed, &buffer);
        let seg_start = t * hop;
        let has_energy = partial[seg_start..(seg_start + n).min(total)]
            .iter()
            .any(|&v| v != 0.0);
        let init = if has_energy {
            let analyzed = ws.analyze_at(&partial, seg_start);
            with_magnitude(&target.frames[t], &analyzed)
        } else {
            target.frames[t]
                .iter()
                .map(|&m| Complex::new(m, 0.0))
                .collect()
        };
        buffer.push((t, init));

        for _ in 0..config.iterations_per_frame {
            let partial = build_partial(&committed, &buffer);
            for (idx, est) in buffer.iter_mut() {
                let analyzed = ws.analyze_at(&partial, *idx * hop);
                *est = with_magnitude(&target.frames[*idx], &analyzed);
            }
        }

        if buffer.len() > config.lookahead_frames {
            let (idx, est) = buffer.remove(0);
            ws.add_frame(&mut committed, &est, idx * hop);
        }
    }

    // flush the look-ahead buffer
    while !buffer.is_empty() {
        let (idx, est) = buffer.remove(0);
        ws.add_frame(&mut committed, &est, idx * hop);
    }

    // normalize by the squared-window overlap sum and strip padding
    let mut wsum = vec![0.0f64; total];
    let w = &ws.window;
    for t in 0..t_frames {
        let start = t * hop;
        for j in 0..n {
            if start + j < total {
                wsum[start + j] += w[j] * w[j];
            }
        }
    }
    for (v, &s) in committed.iter_mut().zip(&wsum) {
        if s > 1e-12 {
            *v /= s;
        }
    }

    let out_len = if target.num_samples > 0 {
        target.num_samples
    } else {
        (t_frames - 1) * hop
    };
    let half = n / 2;
    let mut out = vec![0.0f64; out_len];
    for i in 0..out_len {
        if half + i < committed.len() {
            out[i] = committed[half + i];
        }
    }
    AudioBuffer::new(out, target.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::{spectral_convergence, stft, MagnitudeSpectrogram, StftConfig, Window};
    use std::f64::consts::PI;

    fn chirp(rate: u32, seconds: f64, f0: f64, f1: f64) -> AudioBuffer {
        let n = (rate as f64 * seconds) as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / rate as f64;
                let f = f0 + (f1 - f0) * t / seconds;
                0.5 * (2.0 * PI * f * t).sin()
            })
            .collect();
        AudioBuffer::new(samples, rate).unwrap()
    }

    fn mag_of(a: &AudioBuffer, cfg: &StftConfig) -> MagnitudeSpectrogram {
        MagnitudeSpectrogram::from_complex(&stft(a, cfg).unwrap())
    }

    fn cfg() -> RtisiConfig {
        RtisiConfig::new(
            8,
            3,
            StftConfig::new(512, 128, 128, Window::Hann, 512).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn reconstructs_chirp_reasonably() {
        let a = chirp(16000, 1.0, 150.0, 1200.0);
        let target = mag_of(&a, &cfg().stft);
        let out = rtisi_la(&target, &cfg(), 0).unwrap();
        assert_eq!(out.len(), a.len());
        let conv = spectral_convergence(&target, &out).unwrap();
        assert!(conv <= 0.15, "convergence {conv}");
    }

    #[test]
    fn zero_target_gives_zero_audio_and_convergence_errors() {
        let zero = AudioBuffer::new(vec![0.0; 8000], 16000).unwrap();
        let target = mag_of(&zero, &cfg().stft);
        let out = rtisi_la(&target, &cfg(), 0).unwrap();
        assert!(out.samples.iter().all(|&x| x == 0.0));
        assert!(spectral_convergence(&target, &out).is_err());
    }

    #[test]
    fn more_iterations_do_not_hurt() {
        let a = chirp(16000, 0.6, 200.0, 900.0);
        let target = mag_of(&a, &cfg().stft);
        let mut c1 = cfg();
        c1.iterations_per_frame = 1;
        let mut c8 = cfg();
        c8.iterations_per_frame = 8;
        let conv1 = spectral_convergence(&target, &rtisi_la(&target, &c1, 0).unwrap()).unwrap();
        let conv8 = spectral_convergence(&target, &rtisi_la(&target, &c8, 0).unwrap()).unwrap();
        assert!(conv8 <= conv1, "K=8 {conv8} vs K=1 {conv1}");
    }

    #[test]
    fn deterministic_across_runs() {
        let a = chirp(16000, 0.4, 180.0, 600.0);
        let target = mag_of(&a, &cfg().stft);
        let x = rtisi_la(&target, &cfg(), 7).unwrap();
        let y = rtisi_la(&target, &cfg(), 7).unwrap();
        assert_eq!(x.samples, y.samples);
    }

    #[test]
    fn rejects_zero_iterations() {
        assert!(RtisiConfig::new(0, 3, StftConfig::speech_default(16000)).is_err());
    }
}
