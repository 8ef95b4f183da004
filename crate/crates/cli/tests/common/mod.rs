//! Shared signal generators for integration tests.
#![allow(dead_code)] // not every test binary uses every generator


use std::f64::consts::PI;

use prosokit_core::AudioBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tone(freq: f64, rate: u32, seconds: f64) -> AudioBuffer {
    let n = (rate as f64 * seconds) as usize;
    AudioBuffer::new(
        (0..n)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect(),
        rate,
    )
    .unwrap()
}

pub fn chirp(rate: u32, seconds: f64, f0: f64, f1: f64) -> AudioBuffer {
    let n = (rate as f64 * seconds) as usize;
    AudioBuffer::new(
        (0..n)
            .map(|i| {
                let t = i as f64 / rate as f64;
                let f = f0 + (f1 - f0) * t / (2.0 * seconds); // instantaneous sweep
                0.5 * (2.0 * PI * f * t).sin()
            })
            .collect(),
        rate,
    )
    .unwrap()
}

pub fn seeded_noise(seed: u64, rate: u32, len: usize, amp: f64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioBuffer::new(
        (0..len).map(|_| rng.gen_range(-amp..amp)).collect(),
        rate,
    )
    .unwrap()
}

/// Harmonic source with a slowly moving f0, formant-like spectral shaping,
/// amplitude modulation and a little noise. Stands in for recorded speech.
pub fn speech_like(seed: u64, rate: u32, seconds: f64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (rate as f64 * seconds) as usize;
    let base_f0 = rng.gen_range(140.0..260.0);
    let vibrato = rng.gen_range(2.0..6.0);
    let formants = [
        (rng.gen_range(500.0..900.0), 1.0),
        (rng.gen_range(1200.0..1900.0), 0.5),
        (rng.gen_range(2400.0..3200.0), 0.25),
    ];
    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate as f64;
        let f0 = base_f0 * (1.0 + 0.04 * (2.0 * PI * vibrato * t).sin());
        phase += 2.0 * PI * f0 / rate as f64;
        // harmonics weighted by proximity to the formant centers
        let mut v = 0.0;
        for h in 1..=12 {
            let fh = f0 * h as f64;
            let mut gain = 1.0 / h as f64;
            for (fc, g) in formants {
                let bw = 300.0f64;
                gain += g * (-((fh - fc) / bw).powi(2)).exp();
            }
            v += gain * (phase * h as f64).sin();
        }
        // syllable-rate amplitude envelope and breath noise
        let env = 0.55 + 0.45 * (2.0 * PI * 3.0 * t + seed as f64).sin();
        let noise = rng.gen_range(-0.02..0.02);
        samples.push(0.12 * env * v + noise);
    }
    let peak = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > 0.99 {
        for s in samples.iter_mut() {
            *s *= 0.99 / peak;
        }
    }
    AudioBuffer::new(samples, rate).unwrap()
}
