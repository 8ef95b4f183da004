//! Speaking-rate and pitch-scale modification on magnitude spectrograms,
//! plus the batch augmentation recipes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, write_wav, AudioBuffer};
use crate::corpus::DataDir;
use crate::error::{Error, Result};
use crate::rtisi::{rtisi_la, RtisiConfig};
use crate::stft::{stft, MagnitudeSpectrogram};

/// Speaking-rate factor. `alpha > 1` means faster speech: duration scales
/// by `1/alpha` while pitch is preserved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScaleSpec {
    pub alpha: f64,
}

impl TimeScaleSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.25..=4.0).contains(&alpha) {
            return Err(Error::Config(format!(
                "speaking-rate factor alpha must be in [0.25, 4], got {alpha}"
            )));
        }
        Ok(TimeScaleSpec { alpha })
    }
}

/// Pitch-scale factor. `s < 1` lowers the pitch; duration is preserved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchScaleSpec {
    pub s: f64,
}

impl PitchScaleSpec {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 2.0) {
            return Err(Error::Config(format!(
                "pitch-scale factor s must be in (0, 2], got {s}"
            )));
        }
        Ok(PitchScaleSpec { s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariantKind {
    TimeScale,
    PitchScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub kind: VariantKind,
    pub factor: f64,
}

impl Variant {
    /// Utterance-id suffix, e.g. `sr110` for time scale 1.1, `p085` for
    /// pitch scale 0.85.
    pub fn suffix(&self) -> String {
        let code = (self.factor * 100.0).round() as u32;
        match self.kind {
            VariantKind::TimeScale => format!("sr{code:03}"),
            VariantKind::PitchScale => format!("p{code:03}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecipeName {
    Sr,
    P,
    SrP,
    Sr2P2,
}

impl std::str::FromStr for RecipeName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sr" => Ok(RecipeName::Sr),
            "p" => Ok(RecipeName::P),
            "sr-p" | "sr_p" => Ok(RecipeName::SrP),
            "sr2-p2" | "sr2_p2" => Ok(RecipeName::Sr2P2),
            other => Err(Error::Config(format!(
                "unknown recipe '{other}' (expected sr, p, sr-p or sr2-p2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecipe {
    pub name: RecipeName,
    pub variants: Vec<Variant>,
}

impl AugmentRecipe {
    pub fn named(name: RecipeName) -> Self {
        let ts = |f| Variant {
            kind: VariantKind::TimeScale,
            factor: f,
        };
        let ps = |f| Variant {
            kind: VariantKind::PitchScale,
            factor: f,
        };
        let variants = match name {
            RecipeName::Sr => vec![ts(1.1)],
            RecipeName::P => vec![ps(0.9)],
            RecipeName::SrP => vec![ts(1.1), ps(0.9)],
            RecipeName::Sr2P2 => vec![ts(1.1), ps(0.9), ts(1.2), ps(0.85)],
        };
        AugmentRecipe { name, variants }
    }

    /// Output size relative to the input corpus (original + one copy per
    /// variant).
    pub fn size_multiplier(&self) -> usize {
        1 + self.variants.len()
    }
}

/// Resample a magnitude sequence along the time axis so frame `j` of the
/// output takes the linearly interpolated value at input position `j*alpha`.
pub fn time_scale_magnitude(
    mag: &MagnitudeSpectrogram,
    spec: TimeScaleSpec,
) -> Result<MagnitudeSpectrogram> {
    let t_old = mag.frames.len();
    if t_old == 0 {
        return Err(Error::DegenerateInput("empty spectrogram".into()));
    }
    let hop = mag.config.analysis_hop;
    let new_len = (mag.num_samples as f64 / spec.alpha).round() as usize;
    if new_len < mag.config.frame_length {
        return Err(Error::DegenerateInput(format!(
            "output of {new_len} samples is shorter than one frame"
        )));
    }
    let t_new = crate::stft::frame_count(new_len, hop);
    let mut frames = Vec::with_capacity(t_new);
    for j in 0..t_new {
        let pos = j as f64 * spec.alpha;
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        let a = &mag.frames[i0.min(t_old - 1)];
        let b = &mag.frames[(i0 + 1).min(t_old - 1)];
        frames.push(
            a.iter()
                .zip(b)
                .map(|(&x, &y)| x * (1.0 - frac) + y * frac)
                .collect(),
        );
    }
    Ok(MagnitudeSpectrogram {
        frames,
        config: mag.config,
        sample_rate: mag.sample_rate,
        num_samples: new_len,
    })
}

/// Frequency-axis remap: target bin `k` takes the interpolated source value
/// at position `k/s`; bins whose source position exceeds Nyquist are zeroed.
pub fn pitch_scale_magnitude(
    mag: &MagnitudeSpectrogram,
    spec: PitchScaleSpec,
) -> Result<MagnitudeSpectrogram> {
    let bins = mag.config.bins();
    if spec.s * (bins as f64 - 1.0) < 1.0 {
        return Err(Error::DegenerateInput(format!(
            "pitch scale {} maps all content above Nyquist",
            spec.s
        )));
    }
    let frames = mag
        .frames
        .iter()
        .map(|frame| {
            (0..bins)
                .map(|k| {
                    let pos = k as f64 / spec.s;
                    if pos > bins as f64 - 1.0 {
                        0.0
                    } else {
                        let i0 = pos.floor() as usize;
                        let frac = pos - i0 as f64;
                        let a = frame[i0];
                        let b = frame[(i0 + 1).min(bins - 1)];
                        a * (1.0 - frac) + b * frac
                    }
                })
                .collect()
        })
        .collect();
    Ok(MagnitudeSpectrogram {
        frames,
        config: mag.config,
        sample_rate: mag.sample_rate,
        num_samples: mag.num_samples,
    })
}

/// Time-scale modification: magnitude-domain frame resampling followed by
/// phase reconstruction. Pitch is preserved.
pub fn time_scale(
    audio: &AudioBuffer,
    spec: TimeScaleSpec,
    rtisi: &RtisiConfig,
    seed: u64,
) -> Result<AudioBuffer> {
    if audio.is_empty() {
        return Err(Error::DegenerateInput("empty audio".into()));
    }
    let mag = MagnitudeSpectrogram::from_complex(&stft(audio, &rtisi.stft)?);
    let scaled = time_scale_magnitude(&mag, spec)?;
    rtisi_la(&scaled, rtisi, seed)
}

/// Pitch-scale modification: per-frame frequency-axis remap followed by
/// phase reconstruction. Duration is preserved.
pub fn pitch_scale(
    audio: &AudioBuffer,
    spec: PitchScaleSpec,
    rtisi: &RtisiConfig,
    seed: u64,
) -> Result<AudioBuffer> {
    if audio.is_empty() {
        return Err(Error::DegenerateInput("empty audio".into()));
    }
    let mag = MagnitudeSpectrogram::from_complex(&stft(audio, &rtisi.stft)?);
    let scaled = pitch_scale_magnitude(&mag, spec)?;
    rtisi_la(&scaled, rtisi, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestRow {
    pub new_utt_id: String,
    pub src_utt_id: String,
    pub kind: String,
    pub factor: String,
    pub status: String,
    pub out_wav_path: String,
}

impl ManifestRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.new_utt_id, self.src_utt_id, self.kind, self.factor, self.status, self.out_wav_path
        )
    }
}

pub struct ApplyOutcome {
    pub datadir: DataDir,
    pub manifest: Vec<ManifestRow>,
    pub failures: usize,
}

fn load_utterance(dir: &DataDir, utt: &str) -> Result<AudioBuffer> {
    if let Some(segments) = &dir.segments {
        if let Some(seg) = segments.get(utt) {
            let rec_path = dir.wav.get(&seg.recording).ok_or_else(|| {
                Error::Validation(format!(
                    "segment {utt} references unknown recording {}",
                    seg.recording
                ))
            })?;
            let audio = read_wav(rec_path)?;
            return audio.slice_seconds(seg.begin, seg.end);
        }
    }
    let path = dir
        .wav
        .get(utt)
        .ok_or_else(|| Error::Validation(format!("no audio for utterance {utt}")))?;
    read_wav(path)
}

/// Apply every variant of a recipe to every utterance of a data directory,
/// writing modified WAVs, a Kaldi-style output directory (original plus
/// modified entries) and a sorted CSV manifest.
pub fn apply_recipe(
    datadir: &DataDir,
    recipe: &AugmentRecipe,
    out_root: impl AsRef<Path>,
    rtisi: &RtisiConfig,
    seed: u64,
) -> Result<ApplyOutcome> {
    let out_root = out_root.as_ref();
    let wav_dir = out_root.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;

    let utts: Vec<&String> = datadir.text.keys().collect();
    let jobs: Vec<(usize, &String, &Variant)> = utts
        .iter()
        .flat_map(|u| recipe.variants.iter().map(move |v| (*u, v)))
        .enumerate()
        .map(|(i, (u, v))| (i, u, v))
        .collect();

    let rows: Vec<(ManifestRow, Option<PathBuf>)> = jobs
        .par_iter()
        .map(|(i, utt, variant)| {
            let new_id = format!("{}-{}", utt, variant.suffix());
            let out_path = wav_dir.join(format!("{new_id}.wav"));
            let job_seed = seed.wrapping_add(*i as u64);
            let result = load_utterance(datadir, utt).and_then(|audio| {
                let modified = match variant.kind {
                    VariantKind::TimeScale => {
                        time_scale(&audio, TimeScaleSpec::new(variant.factor)?, rtisi, job_seed)
                    }
                    VariantKind::PitchScale => {
                        pitch_scale(&audio, PitchScaleSpec::new(variant.factor)?, rtisi, job_seed)
                    }
                }?;
                write_wav(&modified, &out_path)
            });
            let kind = match variant.kind {
                VariantKind::TimeScale => "time_scale",
                VariantKind::PitchScale => "pitch_scale",
            };
            match result {
                Ok(()) => (
                    ManifestRow {
                        new_utt_id: new_id,
                        src_utt_id: (*utt).clone(),
                        kind: kind.into(),
                        factor: format!("{}", variant.factor),
                        status: "ok".into(),
                        out_wav_path: out_path.display().to_string(),
                    },
                    Some(out_path),
                ),
                Err(e) => {
                    log::warn!("augmentation failed for {utt} ({kind} {}): {e}", variant.factor);
                    (
                        ManifestRow {
                            new_utt_id: new_id,
                            src_utt_id: (*utt).clone(),
                            kind: kind.into(),
                            factor: format!("{}", variant.factor),
                            status: format!("error: {e}"),
                            out_wav_path: String::new(),
                        },
                        None,
                    )
                }
            }
        })
        .collect();

    let mut manifest: Vec<ManifestRow> = rows.iter().map(|(r, _)| r.clone()).collect();
    manifest.sort();
    let failures = manifest.iter().filter(|r| r.status != "ok").count();

    // assemble the output directory: originals plus successful variants
    let mut wav: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut text: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut utt2spk: BTreeMap<String, String> = BTreeMap::new();
    for utt in &utts {
        // originals resolve segments to sliced copies so the output dir
        // is always a plain wav.scp directory
        if datadir.segments.as_ref().is_some_and(|s| s.contains_key(*utt)) {
            let out_path = wav_dir.join(format!("{utt}.wav"));
            if let Ok(audio) = load_utterance(datadir, utt) {
                write_wav(&audio, &out_path)?;
                wav.insert((*utt).clone(), out_path);
            }
        } else if let Some(p) = datadir.wav.get(*utt) {
            wav.insert((*utt).clone(), p.clone());
        }
        text.insert((*utt).clone(), datadir.text[*utt].clone());
        utt2spk.insert((*utt).clone(), datadir.utt2spk[*utt].clone());
    }
    for (row, path) in &rows {
        if let Some(p) = path {
            wav.insert(row.new_utt_id.clone(), p.clone());
            text.insert(row.new_utt_id.clone(), datadir.text[&row.src_utt_id].clone());
            utt2spk.insert(
                row.new_utt_id.clone(),
                datadir.utt2spk[&row.src_utt_id].clone(),
            );
        }
    }

    let out = DataDir {
        root: Some(out_root.to_path_buf()),
        wav,
        text,
        utt2spk,
        segments: None,
        spk2group: datadir.spk2group.clone(),
    };
    out.write(out_root)?;

    let manifest_path = out_root.join("manifest.csv");
    let mut f = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    writeln!(f, "new_utt_id,src_utt_id,kind,factor,status,out_wav_path")
        .map_err(|e| Error::io(&manifest_path, e))?;
    for row in &manifest {
        writeln!(f, "{}", row.csv_line()).map_err(|e| Error::io(&manifest_path, e))?;
    }

    Ok(ApplyOutcome {
        datadir: out,
        manifest,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::{StftConfig, Window};
    use std::f64::consts::PI;

    fn tone(freq: f64, rate: u32, seconds: f64) -> AudioBuffer {
        let n = (rate as f64 * seconds) as usize;
        AudioBuffer::new(
            (0..n)
                .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / rate as f64).sin())
                .collect(),
            rate,
        )
        .unwrap()
    }

    fn rtisi() -> RtisiConfig {
        RtisiConfig::new(
            8,
            3,
            StftConfig::new(512, 128, 128, Window::Hann, 512).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn duration_scales_inverse_alpha() {
        let a = tone(220.0, 16000, 1.0);
        let out = time_scale(&a, TimeScaleSpec::new(1.1).unwrap(), &rtisi(), 0).unwrap();
        let expected = (16000.0 / 1.1f64).round() as usize;
        let hop = 128usize;
        assert!(
            (out.len() as i64 - expected as i64).unsigned_abs() as usize <= 2 * hop,
            "got {} expected {expected}",
            out.len()
        );
    }

    #[test]
    fn alpha_one_preserves_magnitudes_and_reconstructs() {
        let a = tone(300.0, 16000, 0.8);
        let cfg = rtisi();
        let mag = MagnitudeSpectrogram::from_complex(&stft(&a, &cfg.stft).unwrap());
        let scaled = time_scale_magnitude(&mag, TimeScaleSpec::new(1.0).unwrap()).unwrap();
        assert_eq!(scaled.frames.len(), mag.frames.len());
        for (x, y) in mag.frames.iter().zip(&scaled.frames) {
            for (a, b) in x.iter().zip(y) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let out = time_scale(&a, TimeScaleSpec::new(1.0).unwrap(), &cfg, 0).unwrap();
        let conv = crate::stft::spectral_convergence(&mag, &out).unwrap();
        assert!(conv <= 0.15, "convergence {conv}");
    }

    #[test]
    fn pitch_identity_at_s_one() {
        let a = tone(250.0, 16000, 0.5);
        let cfg = rtisi();
        let mag = MagnitudeSpectrogram::from_complex(&stft(&a, &cfg.stft).unwrap());
        let scaled = pitch_scale_magnitude(&mag, PitchScaleSpec::new(1.0).unwrap()).unwrap();
        for (x, y) in mag.frames.iter().zip(&scaled.frames) {
            for (a, b) in x.iter().zip(y) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pitch_scale_preserves_duration() {
        let a = tone(300.0, 16000, 0.7);
        let out = pitch_scale(&a, PitchScaleSpec::new(0.9).unwrap(), &rtisi(), 0).unwrap();
        assert_eq!(out.len(), a.len());
    }

    #[test]
    fn degenerate_time_scale_errors() {
        let a = tone(220.0, 16000, 0.02); // 320 samples
        assert!(matches!(
            time_scale(&a, TimeScaleSpec::new(4.0).unwrap(), &rtisi(), 0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn recipe_variant_suffixes() {
        let r = AugmentRecipe::named(RecipeName::Sr2P2);
        let suffixes: Vec<String> = r.variants.iter().map(|v| v.suffix()).collect();
        assert_eq!(suffixes, vec!["sr110", "p090", "sr120", "p085"]);
        assert_eq!(r.size_multiplier(), 5);
        assert_eq!(AugmentRecipe::named(RecipeName::Sr).size_multiplier(), 2);
        assert_eq!(AugmentRecipe::named(RecipeName::P).size_multiplier(), 2);
        assert_eq!(AugmentRecipe::named(RecipeName::SrP).size_multiplier(), 3);
    }

    #[test]
    fn spec_bounds_enforced() {
        assert!(TimeScaleSpec::new(0.1).is_err());
        assert!(TimeScaleSpec::new(5.0).is_err());
        assert!(PitchScaleSpec::new(0.0).is_err());
        assert!(PitchScaleSpec::new(2.5).is_err());
    }
}
