//! Framing, windowing, forward/inverse STFT and spectral convergence.
//!
//! Frame `t` covers samples `[t*hop, t*hop + frame_length)` of the signal
//! padded with `frame_length/2` zeros at each end, so frame centers sit at
//! `t*hop` in original-sample coordinates.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Periodic window coefficients.
    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Hamming => (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hann" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            "rectangular" | "rect" => Ok(Window::Rectangular),
            other => Err(Error::Config(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_length: usize,
    pub analysis_hop: usize,
    pub synthesis_hop: usize,
    pub window: Window,
    pub fft_size: usize,
}

impl StftConfig {
    pub fn new(
        frame_length: usize,
        analysis_hop: usize,
        synthesis_hop: usize,
        window: Window,
        fft_size: usize,
    ) -> Result<Self> {
        let cfg = StftConfig {
            frame_length,
            analysis_hop,
            synthesis_hop,
            window,
            fft_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 32 ms frames, 8 ms hop, Hann, fft = next power of two >= frame length.
    pub fn speech_default(sample_rate: u32) -> Self {
        let frame_length = ((0.032 * sample_rate as f64).round() as usize).max(4);
        let hop = (frame_length / 4).max(1);
        let fft_size = frame_length.next_power_of_two();
        StftConfig {
            frame_length,
            analysis_hop: hop,
            synthesis_hop: hop,
            window: Window::Hann,
            fft_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 {
            return Err(Error::Config("frame_length must be positive".into()));
        }
        for (name, hop) in [
            ("analysis_hop", self.analysis_hop),
            ("synthesis_hop", self.synthesis_hop),
        ] {
            if hop == 0 || hop > self.frame_length {
                return Err(Error::Config(format!(
                    "{name} must satisfy 0 < hop <= frame_length, got {hop}"
                )));
            }
        }
        if self.fft_size < self.frame_length {
            return Err(Error::Config(format!(
                "fft_size {} < frame_length {}",
                self.fft_size, self.frame_length
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// True when the squared window summed over shifts of `hop` is constant
    /// to within 1e-6 relative (the condition for exact weighted
    /// overlap-add reconstruction).
    pub fn is_cola(&self, hop: usize) -> bool {
        let w = self.window.coefficients(self.frame_length);
        // evaluate the shifted sum on the interior period [frame_length, frame_length+hop)
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..hop {
            let pos = self.frame_length + n;
            let mut acc = 0.0;
            let mut k = 0usize;
            while k * hop <= pos {
                let idx = pos - k * hop;
                if idx < self.frame_length {
                    acc += w[idx] * w[idx];
                }
                k += 1;
            }
            lo = lo.min(acc);
            hi = hi.max(acc);
        }
        hi > 0.0 && (hi - lo) / hi <= 1e-6
    }
}

#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    /// `T x (fft_size/2 + 1)` half spectra.
    pub frames: Vec<Vec<Complex<f64>>>,
    pub config: StftConfig,
    pub sample_rate: u32,
    /// Length of the source signal in samples; used to trim after synthesis.
    pub num_samples: usize,
}

#[derive(Debug, Clone)]
pub struct MagnitudeSpectrogram {
    pub frames: Vec<Vec<f64>>,
    pub config: StftConfig,
    pub sample_rate: u32,
    pub num_samples: usize,
}

impl MagnitudeSpectrogram {
    pub fn from_complex(spec: &ComplexSpectrogram) -> Self {
        MagnitudeSpectrogram {
            frames: spec
                .frames
                .iter()
                .map(|f| f.iter().map(|c| c.norm()).collect())
                .collect(),
            config: spec.config,
            sample_rate: spec.sample_rate,
            num_samples: spec.num_samples,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
    pub size: usize,
}

impl FftPair {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            size,
        }
    }

    /// Analyze one already-windowed frame into a half spectrum.
    pub fn analyze(&self, frame: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.size)
            .collect();
        self.forward.process(&mut buf);
        buf.truncate(self.size / 2 + 1);
        buf
    }

    /// Half spectrum back to a real frame of `fft_size` samples.
    pub fn synthesize(&self, half: &[Complex<f64>]) -> Vec<f64> {
        let bins = self.size / 2 + 1;
        debug_assert_eq!(half.len(), bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        buf[..bins].copy_from_slice(half);
        for k in 1..self.size - bins + 1 {
            buf[self.size - k] = half[k].conj();
        }
        self.inverse.process(&mut buf);
        let norm = 1.0 / self.size as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }
}

pub(crate) fn frame_count(len: usize, hop: usize) -> usize {
    if len == 0 {
        1
    } else {
        len.div_ceil(hop)
    }
}

/// Forward STFT.
pub fn stft(audio: &AudioBuffer, config: &StftConfig) -> Result<ComplexSpectrogram> {
    config.validate()?;
    if audio.is_empty() {
        return Err(Error::DegenerateInput("empty audio".into()));
    }
    let n = config.frame_length;
    let hop = config.analysis_hop;
    let t_frames = frame_count(audio.len(), hop);
    let half = n / 2;

    let mut padded = vec![0.0f64; half + audio.len() + n + hop];
    padded[half..half + audio.len()].copy_from_slice(&audio.samples);

    let w = config.window.coefficients(n);
    let fft = FftPair::new(config.fft_size);

    let mut frames = Vec::with_capacity(t_frames);
    let mut scratch = vec![0.0f64; n];
    for t in 0..t_frames {
        let start = t * hop;
        for j in 0..n {
            scratch[j] = padded[start + j] * w[j];
        }
        frames.push(fft.analyze(&scratch));
    }

    Ok(ComplexSpectrogram {
        frames,
        config: *config,
        sample_rate: audio.sample_rate,
        num_samples: audio.len(),
    })
}

/// Weighted overlap-add of synthesis-windowed frames in padded coordinates.
/// Returns the accumulated signal and the per-sample squared-window sum.
pub(crate) fn overlap_add(
    frames: &[Vec<Complex<f64>>],
    config: &StftConfig,
    fft: &FftPair,
) -> (Vec<f64>, Vec<f64>) {
    let n = config.frame_length;
    let hop = config.synthesis_hop;
    let t_frames = frames.len();
    let total = (t_frames.saturating_sub(1)) * hop + n;
    let mut acc = vec![0.0f64; total];
    let mut wsum = vec![0.0f64; total];
    let w = config.window.coefficients(n);
    for (t, half) in frames.iter().enumerate() {
        let time = fft.synthesize(half);
        let start = t * hop;
        for j in 0..n {
            acc[start + j] += time[j] * w[j];
            wsum[start + j] += w[j] * w[j];
        }
    }
    (acc, wsum)
}

pub(crate) fn normalize_and_trim(
    mut acc: Vec<f64>,
    wsum: &[f64],
    config: &StftConfig,
    out_len: usize,
) -> Vec<f64> {
    for (v, &ws) in acc.iter_mut().zip(wsum) {
        if ws > 1e-12 {
            *v /= ws;
        }
    }
    let half = config.frame_length / 2;
    let mut out = vec![0.0f64; out_len];
    for i in 0..out_len {
        if half + i < acc.len() {
            out[i] = acc[half + i];
        }
    }
    out
}

/// Inverse STFT with weighted overlap-add.
pub fn istft(spec: &ComplexSpectrogram) -> Result<AudioBuffer> {
    let config = &spec.config;
    config.validate()?;
    if !config.is_cola(config.synthesis_hop) {
        return Err(Error::Config(format!(
            "window {:?} with synthesis hop {} does not satisfy constant overlap-add",
            config.window, config.synthesis_hop
        )));
    }
    let fft = FftPair::new(config.fft_size);
    let (acc, wsum) = overlap_add(&spec.frames, config, &fft);
    let out_len = if config.synthesis_hop == config.analysis_hop {
        spec.num_samples
    } else {
        ((spec.num_samples as f64) * config.synthesis_hop as f64 / config.analysis_hop as f64)
            .round() as usize
    };
    let samples = normalize_and_trim(acc, &wsum, config, out_len);
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Normalized Frobenius distance between a target magnitude spectrogram and
/// the STFT magnitude of a candidate signal analyzed with the same config.
pub fn spectral_convergence(
    target: &MagnitudeSpectrogram,
    candidate: &AudioBuffer,
) -> Result<f64> {
    let denom = target.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroTarget);
    }
    let cand = stft(candidate, &target.config)?;
    let cand_mag = MagnitudeSpectrogram::from_complex(&cand);

    let bins = target.config.bins();
    let t_max = target.frames.len().max(cand_mag.frames.len());
    let zero = vec![0.0f64; bins];
    let mut num = 0.0f64;
    for t in 0..t_max {
        let a = target.frames.get(t).unwrap_or(&zero);
        let b = cand_mag.frames.get(t).unwrap_or(&zero);
        for k in 0..bins {
            let d = a[k] - b[k];
            num += d * d;
        }
    }
    Ok(num.sqrt() / denom)
}
