//! Kaldi-style data directories and corpus descriptive statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::pitch::track_pitch;

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub recording: String,
    pub begin: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataDir {
    pub root: Option<PathBuf>,
    /// utt -> wav path, or recording -> wav path when segments are present.
    pub wav: BTreeMap<String, PathBuf>,
    pub text: BTreeMap<String, Vec<String>>,
    pub utt2spk: BTreeMap<String, String>,
    pub segments: Option<BTreeMap<String, Segment>>,
    pub spk2group: Option<BTreeMap<String, String>>,
}

impl DataDir {
    pub fn num_utterances(&self) -> usize {
        self.text.len()
    }

    pub fn speakers(&self) -> BTreeSet<&String> {
        self.utt2spk.values().collect()
    }

    /// Write `wav.scp`, `text`, `utt2spk` (and `spk2group` if present).
    pub fn write(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let mut scp = String::new();
        for (utt, path) in &self.wav {
            scp.push_str(&format!("{utt} {}\n", path.display()));
        }
        write_file(&root.join("wav.scp"), &scp)?;
        let mut text = String::new();
        for (utt, tokens) in &self.text {
            text.push_str(&format!("{utt} {}\n", tokens.join(" ")));
        }
        write_file(&root.join("text"), &text)?;
        let mut u2s = String::new();
        for (utt, spk) in &self.utt2spk {
            u2s.push_str(&format!("{utt} {spk}\n"));
        }
        write_file(&root.join("utt2spk"), &u2s)?;
        if let Some(groups) = &self.spk2group {
            let mut g = String::new();
            for (spk, grp) in groups {
                g.push_str(&format!("{spk} {grp}\n"));
            }
            write_file(&root.join("spk2group"), &g)?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(content.as_bytes()).map_err(|e| Error::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_kv_file(path: &Path, what: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let content = read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let key = it.next().unwrap().to_string();
        let rest: Vec<String> = it.map(String::from).collect();
        if out.insert(key.clone(), rest).is_some() {
            return Err(Error::Format(format!(
                "duplicate id {key} in {what} (line {})",
                i + 1
            )));
        }
    }
    Ok(out)
}

/// Load and cross-validate a Kaldi-style data directory.
pub fn load_datadir(root: impl AsRef<Path>) -> Result<DataDir> {
    let root = root.as_ref();
    for required in ["text", "utt2spk"] {
        if !root.join(required).exists() {
            return Err(Error::Validation(format!(
                "missing required file {}",
                root.join(required).display()
            )));
        }
    }
    if !root.join("wav.scp").exists() {
        return Err(Error::Validation(format!(
            "missing required file {}",
            root.join("wav.scp").display()
        )));
    }

    let text: BTreeMap<String, Vec<String>> = parse_kv_file(&root.join("text"), "text")?;
    let utt2spk: BTreeMap<String, String> = parse_kv_file(&root.join("utt2spk"), "utt2spk")?
        .into_iter()
        .map(|(k, v)| {
            if v.len() != 1 {
                Err(Error::Format(format!("utt2spk entry {k} must have one speaker")))
            } else {
                Ok((k, v.into_iter().next().unwrap()))
            }
        })
        .collect::<Result<_>>()?;
    let wav: BTreeMap<String, PathBuf> = parse_kv_file(&root.join("wav.scp"), "wav.scp")?
        .into_iter()
        .map(|(k, v)| (k, PathBuf::from(v.join(" "))))
        .collect();

    let segments = if root.join("segments").exists() {
        let raw = parse_kv_file(&root.join("segments"), "segments")?;
        let mut map = BTreeMap::new();
        for (utt, fields) in raw {
            if fields.len() != 3 {
                return Err(Error::Format(format!(
                    "segments entry {utt} must be 'utt rec begin end'"
                )));
            }
            let begin: f64 = fields[1]
                .parse()
                .map_err(|_| Error::Format(format!("segments entry {utt}: bad begin")))?;
            let end: f64 = fields[2]
                .parse()
                .map_err(|_| Error::Format(format!("segments entry {utt}: bad end")))?;
            if !(begin < end) {
                return Err(Error::Format(format!(
                    "segments entry {utt}: begin {begin} must be < end {end}"
                )));
            }
            map.insert(
                utt,
                Segment {
                    recording: fields[0].clone(),
                    begin,
                    end,
                },
            );
        }
        Some(map)
    } else {
        None
    };

    let spk2group = if root.join("spk2group").exists() {
        Some(
            parse_kv_file(&root.join("spk2group"), "spk2group")?
                .into_iter()
                .map(|(k, v)| (k, v.join(" ")))
                .collect(),
        )
    } else {
        None
    };

    // cross-validate key sets
    let text_keys: BTreeSet<&String> = text.keys().collect();
    let spk_keys: BTreeSet<&String> = utt2spk.keys().collect();
    let audio_keys: BTreeSet<&String> = match &segments {
        Some(segs) => segs.keys().collect(),
        None => wav.keys().collect(),
    };
    let mut problems = Vec::new();
    for (name, keys) in [("utt2spk", &spk_keys), ("audio", &audio_keys)] {
        let missing: Vec<&str> = text_keys.difference(keys).map(|s| s.as_str()).collect();
        if !missing.is_empty() {
            problems.push(format!("in text but not {name}: {}", missing.join(", ")));
        }
        let extra: Vec<&str> = keys.difference(&text_keys).map(|s| s.as_str()).collect();
        if !extra.is_empty() {
            problems.push(format!("in {name} but not text: {}", extra.join(", ")));
        }
    }
    if let Some(segs) = &segments {
        for (utt, seg) in segs {
            if !wav.contains_key(&seg.recording) {
                problems.push(format!(
                    "segment {utt} references unknown recording {}",
                    seg.recording
                ));
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems.join("; ")));
    }

    Ok(DataDir {
        root: Some(root.to_path_buf()),
        wav,
        text,
        utt2spk,
        segments,
        spk2group,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupStats {
    pub n_words: usize,
    pub duration_s: f64,
    pub words_per_second: f64,
    /// Duration-weighted mean of per-utterance mean voiced f0; absent when
    /// no utterance in the group had voiced frames.
    pub mean_pitch_hz: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub n_words: usize,
    pub n_speakers: usize,
    pub n_utterances: usize,
    pub duration_hours: f64,
    pub per_group: BTreeMap<String, GroupStats>,
    /// Utterances skipped because their audio could not be read.
    pub skipped: Vec<String>,
}

struct UttMeasure {
    utt: String,
    group: String,
    n_words: usize,
    duration_s: f64,
    mean_f0: Option<f64>,
    failed: bool,
}

/// Word counts, durations, words/second and duration-weighted mean pitch,
/// overall and per speaker group.
pub fn compute_stats(dir: &DataDir, f_min: f64, f_max: f64) -> Result<CorpusStats> {
    let measures: Vec<UttMeasure> = dir
        .text
        .par_iter()
        .map(|(utt, tokens)| {
            let spk = &dir.utt2spk[utt];
            let group = dir
                .spk2group
                .as_ref()
                .and_then(|g| g.get(spk).cloned())
                .unwrap_or_else(|| "all".to_string());
            let audio = match &dir.segments {
                Some(segs) => segs.get(utt).ok_or_else(|| {
                    Error::Validation(format!("no segment for {utt}"))
                }).and_then(|seg| {
                    let path = dir.wav.get(&seg.recording).ok_or_else(|| {
                        Error::Validation(format!("unknown recording {}", seg.recording))
                    })?;
                    read_wav(path)?.slice_seconds(seg.begin, seg.end)
                }),
                None => dir
                    .wav
                    .get(utt)
                    .ok_or_else(|| Error::Validation(format!("no audio for {utt}")))
                    .and_then(|p| read_wav(p)),
            };
            match audio {
                Ok(audio) => {
                    let mean_f0 = track_pitch(&audio, f_min, f_max)
                        .ok()
                        .and_then(|t| t.mean_voiced_f0().ok());
                    UttMeasure {
                        utt: utt.clone(),
                        group,
                        n_words: tokens.len(),
                        duration_s: audio.duration_seconds(),
                        mean_f0,
                        failed: false,
                    }
                }
                Err(e) => {
                    log::warn!("skipping {utt}: {e}");
                    UttMeasure {
                        utt: utt.clone(),
                        group,
                        n_words: tokens.len(),
                        duration_s: 0.0,
                        mean_f0: None,
                        failed: true,
                    }
                }
            }
        })
        .collect();

    let mut per_group: BTreeMap<String, (usize, f64, f64, f64)> = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut total_words = 0usize;
    let mut total_duration = 0.0f64;
    for m in &measures {
        if m.failed {
            skipped.push(m.utt.clone());
            continue;
        }
        total_words += m.n_words;
        total_duration += m.duration_s;
        let e = per_group.entry(m.group.clone()).or_insert((0, 0.0, 0.0, 0.0));
        e.0 += m.n_words;
        e.1 += m.duration_s;
        if let Some(f0) = m.mean_f0 {
            e.2 += f0 * m.duration_s;
            e.3 += m.duration_s;
        }
    }
    skipped.sort();

    let per_group = per_group
        .into_iter()
        .filter(|(_, (w, d, _, _))| *w > 0 || *d > 0.0)
        .map(|(g, (w, d, f0_weighted, f0_dur))| {
            (
                g,
                GroupStats {
                    n_words: w,
                    duration_s: d,
                    words_per_second: if d > 0.0 { w as f64 / d } else { 0.0 },
                    mean_pitch_hz: if f0_dur > 0.0 {
                        Some(f0_weighted / f0_dur)
                    } else {
                        None
                    },
                },
            )
        })
        .collect();

    Ok(CorpusStats {
        n_words: total_words,
        n_speakers: dir.speakers().len(),
        n_utterances: dir.num_utterances(),
        duration_hours: total_duration / 3600.0,
        per_group,
        skipped,
    })
}
