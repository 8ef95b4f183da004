//! Stochastic time warping and time/frequency masking of feature matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `T x D` feature matrix (time by feature dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub frame_shift: f64,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>, frame_shift: f64) -> Result<Self> {
        if let Some(first) = rows.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::Config("feature dimension must be >= 1".into()));
            }
            for (i, r) in rows.iter().enumerate() {
                if r.len() != d {
                    return Err(Error::Config(format!(
                        "row {i} has {} columns, expected {d}",
                        r.len()
                    )));
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("row {i} has non-finite entries")));
                }
            }
        }
        Ok(FeatureMatrix { rows, frame_shift })
    }

    pub fn num_frames(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecAugPolicy {
    /// Time-warp displacement bound W, in frames. 0 disables warping.
    pub time_warp_w: usize,
    /// Maximum frequency-mask width F, in bins.
    pub freq_mask_f: usize,
    pub n_freq_masks: usize,
    /// Maximum time-mask width, in frames.
    pub time_mask_t: usize,
    pub n_time_masks: usize,
    /// Cap on the total masked time fraction (p).
    pub max_time_mask_ratio: f64,
}

impl SpecAugPolicy {
    /// The LD ("Librispeech double") policy constants.
    pub fn librispeech_double() -> Self {
        SpecAugPolicy {
            time_warp_w: 80,
            freq_mask_f: 27,
            n_freq_masks: 2,
            time_mask_t: 100,
            n_time_masks: 2,
            max_time_mask_ratio: 1.0,
        }
    }

    pub fn identity() -> Self {
        SpecAugPolicy {
            time_warp_w: 0,
            freq_mask_f: 0,
            n_freq_masks: 0,
            time_mask_t: 0,
            n_time_masks: 0,
            max_time_mask_ratio: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_time_mask_ratio > 0.0 && self.max_time_mask_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "max_time_mask_ratio must be in (0,1], got {}",
                self.max_time_mask_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SpecAugOutcome {
    pub features: FeatureMatrix,
    /// False when the matrix was too short for the requested warp.
    pub warp_applied: bool,
}

/// Piecewise-linear remap of frame indices: the anchor frame `t0` moves to
/// `t0 + d` with endpoints fixed, rows resampled by linear interpolation.
fn time_warp(rows: &[Vec<f64>], t0: usize, d: i64) -> Vec<Vec<f64>> {
    let t = rows.len();
    let last = (t - 1) as f64;
    let pivot = (t0 as i64 + d) as f64;
    let mut out = Vec::with_capacity(t);
    for u in 0..t {
        let uf = u as f64;
        let src = if uf <= pivot {
            if pivot <= 0.0 {
                0.0
            } else {
                uf * t0 as f64 / pivot
            }
        } else if pivot >= last {
            last
        } else {
            t0 as f64 + (uf - pivot) * (last - t0 as f64) / (last - pivot)
        };
        let src = src.clamp(0.0, last);
        let i0 = src.floor() as usize;
        let frac = src - i0 as f64;
        let a = &rows[i0];
        let b = &rows[(i0 + 1).min(t - 1)];
        out.push(
            a.iter()
                .zip(b)
                .map(|(&x, &y)| x * (1.0 - frac) + y * frac)
                .collect(),
        );
    }
    out
}

/// Apply warp then frequency masks then time masks, all driven by a seeded
/// RNG. Identical seeds give identical output.
pub fn spec_augment(
    feat: &FeatureMatrix,
    policy: &SpecAugPolicy,
    seed: u64,
) -> Result<SpecAugOutcome> {
    policy.validate()?;
    let t = feat.num_frames();
    let d = feat.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = feat.rows.clone();
    let mut warp_applied = false;

    if policy.time_warp_w > 0 {
        let w = policy.time_warp_w;
        if t > 2 * w {
            let t0 = rng.gen_range(w..t - w);
            let disp = rng.gen_range(-(w as i64)..=w as i64);
            rows = time_warp(&rows, t0, disp);
            warp_applied = true;
        } else {
            log::warn!("matrix of {t} frames too short for time warp W={w}; warp skipped");
        }
    }

    for _ in 0..policy.n_freq_masks {
        let width = rng.gen_range(0..=policy.freq_mask_f.min(d));
        if width == 0 || width >= d {
            continue;
        }
        let start = rng.gen_range(0..=d - width);
        for row in rows.iter_mut() {
            for k in start..start + width {
                row[k] = 0.0;
            }
        }
    }

    let budget = (policy.max_time_mask_ratio * t as f64).floor() as usize;
    let mut masked_frames = 0usize;
    for _ in 0..policy.n_time_masks {
        let width = rng.gen_range(0..=policy.time_mask_t.min(t));
        let width = width.min(budget.saturating_sub(masked_frames));
        if width == 0 {
            continue;
        }
        let start = rng.gen_range(0..=t - width);
        for row in rows.iter_mut().skip(start).take(width) {
            for v in row.iter_mut() {
                *v = 0.0;
            }
        }
        masked_frames += width;
    }

    Ok(SpecAugOutcome {
        features: FeatureMatrix {
            rows,
            frame_shift: feat.frame_shift,
        },
        warp_applied,
    })
}

/// Parse a Kaldi text archive: `utt-id [` then one row per line until `]`.
pub fn parse_feature_archive(content: &str, frame_shift: f64) -> Result<Vec<(String, FeatureMatrix)>> {
    let mut out = Vec::new();
    let mut current: Option<(String, Vec<Vec<f64>>)> = None;
    for (i, line) in content.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match &mut current {
            None => {
                let (utt, rest) = trimmed.split_once(char::is_whitespace).ok_or_else(|| {
                    Error::Format(format!("archive line {}: expected 'utt ['", i + 1))
                })?;
                if rest.trim() != "[" {
                    return Err(Error::Format(format!(
                        "archive line {}: expected '[' after utterance id",
                        i + 1
                    )));
                }
                current = Some((utt.to_string(), Vec::new()));
            }
            Some((utt, rows)) => {
                let (row_text, closes) = match trimmed.strip_suffix(']') {
                    Some(prefix) => (prefix.trim(), true),
                    None => (trimmed, false),
                };
                if !row_text.is_empty() {
                    let row: Vec<f64> = row_text
                        .split_whitespace()
                        .map(|v| {
                            v.parse::<f64>().map_err(|_| {
                                Error::Format(format!("archive line {}: bad number '{v}'", i + 1))
                            })
                        })
                        .collect::<Result<_>>()?;
                    rows.push(row);
                }
                if closes {
                    let (utt, rows) = (utt.clone(), std::mem::take(rows));
                    out.push((utt, FeatureMatrix::new(rows, frame_shift)?));
                    current = None;
                }
            }
        }
    }
    if current.is_some() {
        return Err(Error::Format("archive ends inside a matrix".into()));
    }
    Ok(out)
}

pub fn format_feature_archive(mats: &[(String, FeatureMatrix)]) -> String {
    let mut out = String::new();
    for (utt, mat) in mats {
        out.push_str(utt);
        out.push_str("  [\n");
        for (i, row) in mat.rows.iter().enumerate() {
            out.push_str("  ");
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{v}"));
            }
            if i + 1 == mat.rows.len() {
                out.push_str(" ]");
            }
            out.push('\n');
        }
        if mat.rows.is_empty() {
            out.push_str("  ]\n");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(t: usize, d: usize) -> FeatureMatrix {
        FeatureMatrix::new(vec![vec![1.0; d]; t], 0.01).unwrap()
    }

    #[test]
    fn identity_policy_is_identity() {
        let m = ones(50, 13);
        let out = spec_augment(&m, &SpecAugPolicy::identity(), 123).unwrap();
        assert_eq!(out.features.rows, m.rows);
        assert!(!out.warp_applied);
    }

    #[test]
    fn shape_preserved() {
        let m = ones(300, 40);
        let out = spec_augment(&m, &SpecAugPolicy::librispeech_double(), 7).unwrap();
        assert_eq!(out.features.num_frames(), 300);
        assert_eq!(out.features.dim(), 40);
    }

    #[test]
    fn masks_are_exact_zeros_on_ones() {
        let m = ones(100, 40);
        let policy = SpecAugPolicy {
            time_warp_w: 0,
            freq_mask_f: 5,
            n_freq_masks: 1,
            time_mask_t: 10,
            n_time_masks: 1,
            max_time_mask_ratio: 1.0,
        };
        for seed in 0..20u64 {
            let out = spec_augment(&m, &policy, seed).unwrap();
            for row in &out.features.rows {
                for &v in row {
                    assert!(v == 0.0 || v == 1.0);
                }
            }
        }
    }

    #[test]
    fn single_freq_mask_is_one_contiguous_run() {
        let m = ones(60, 30);
        let policy = SpecAugPolicy {
            time_warp_w: 0,
            freq_mask_f: 5,
            n_freq_masks: 1,
            time_mask_t: 0,
            n_time_masks: 0,
            max_time_mask_ratio: 1.0,
        };
        let out = spec_augment(&m, &policy, 11).unwrap();
        let zero_cols: Vec<usize> = (0..30)
            .filter(|&k| out.features.rows.iter().all(|r| r[k] == 0.0))
            .collect();
        assert!(zero_cols.len() <= 5);
        if zero_cols.len() > 1 {
            for pair in zero_cols.windows(2) {
                assert_eq!(pair[1], pair[0] + 1);
            }
        }
    }

    #[test]
    fn time_mask_budget_respected() {
        let m = ones(40, 10);
        let policy = SpecAugPolicy {
            time_warp_w: 0,
            freq_mask_f: 0,
            n_freq_masks: 0,
            time_mask_t: 30,
            n_time_masks: 3,
            max_time_mask_ratio: 0.5,
        };
        for seed in 0..100u64 {
            let out = spec_augment(&m, &policy, seed).unwrap();
            let masked = out
                .features
                .rows
                .iter()
                .filter(|r| r.iter().all(|&v| v == 0.0))
                .count();
            assert!(masked <= 20, "seed {seed}: {masked} masked frames");
        }
    }

    #[test]
    fn short_matrix_skips_warp_masks_still_apply() {
        let m = ones(10, 8);
        let policy = SpecAugPolicy {
            time_warp_w: 80,
            freq_mask_f: 3,
            n_freq_masks: 1,
            time_mask_t: 2,
            n_time_masks: 1,
            max_time_mask_ratio: 1.0,
        };
        let out = spec_augment(&m, &policy, 3).unwrap();
        assert!(!out.warp_applied);
        assert_eq!(out.features.num_frames(), 10);
    }

    #[test]
    fn seeded_determinism_and_sensitivity() {
        let m = ones(200, 40);
        let policy = SpecAugPolicy::librispeech_double();
        let a = spec_augment(&m, &policy, 1).unwrap();
        let b = spec_augment(&m, &policy, 1).unwrap();
        assert_eq!(a.features.rows, b.features.rows);
        let mut distinct = 0;
        for seed in 0..100u64 {
            let x = spec_augment(&m, &policy, seed).unwrap();
            if x.features.rows != a.features.rows {
                distinct += 1;
            }
        }
        assert!(distinct >= 95, "only {distinct}/100 seeds differ");
    }

    #[test]
    fn archive_roundtrip() {
        let m = FeatureMatrix::new(vec![vec![1.0, 2.5], vec![-3.0, 0.125]], 0.01).unwrap();
        let text = format_feature_archive(&[("u1".into(), m.clone())]);
        let parsed = parse_feature_archive(&text, 0.01).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].0, "u1");
        assert_eq!(parsed[0].1.rows, m.rows);
    }

    #[test]
    fn archive_rejects_truncation() {
        assert!(parse_feature_archive("u1 [\n1.0 2.0\n", 0.01).is_err());
        assert!(parse_feature_archive("u1 nobracket\n", 0.01).is_err());
    }
}
