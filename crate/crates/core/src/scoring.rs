//! Levenshtein alignment, token-filtered WER, CTM confidence filtering and
//! the threshold sweep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{filter_tokens, TokenFilterRules};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum EditOp {
    /// (ref index, hyp index)
    Match(usize, usize),
    Substitute(usize, usize),
    Delete(usize),
    Insert(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
}

impl Alignment {
    pub fn substitutions(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, EditOp::Substitute(_, _))).count()
    }
    pub fn deletions(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, EditOp::Delete(_))).count()
    }
    pub fn insertions(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, EditOp::Insert(_))).count()
    }
    pub fn matches(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, EditOp::Match(_, _))).count()
    }
    pub fn edits(&self) -> usize {
        self.ops.len() - self.matches()
    }
}

/// Minimum-edit-distance alignment with unit costs. Backtrace ties prefer
/// match > substitution > deletion > insertion.
pub fn align(reference: &[String], hypothesis: &[String]) -> Alignment {
    let n = reference.len();
    let m = hypothesis.len();
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[i - 1][j] + 1;
            let ins = d[i][j - 1] + 1;
            d[i][j] = sub.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && reference[i - 1] == hypothesis[j - 1] && d[i][j] == d[i - 1][j - 1] {
            ops.push(EditOp::Match(i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1 {
            ops.push(EditOp::Substitute(i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(EditOp::Delete(i - 1));
            i -= 1;
        } else {
            ops.push(EditOp::Insert(j - 1));
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct UttScore {
    pub n_ref: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub matches: usize,
    pub wer: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct WerReport {
    pub n_ref: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub matches: usize,
    pub wer: f64,
    /// Tokens removed from each side by the non-English filter.
    pub filtered_ref_tokens: usize,
    pub filtered_hyp_tokens: usize,
    pub per_utt: BTreeMap<String, UttScore>,
}

fn wer_value(errors: usize, n_ref: usize) -> f64 {
    if n_ref == 0 {
        if errors == 0 {
            0.0
        } else {
            errors as f64
        }
    } else {
        errors as f64 / n_ref as f64
    }
}

/// Corpus-pooled WER after removing non-English tokens from both sides of
/// every utterance. Hypothesis utterances missing from `hyp` count as empty.
pub fn modified_wer(
    reference: &BTreeMap<String, Vec<String>>,
    hypothesis: &BTreeMap<String, Vec<String>>,
    rules: &TokenFilterRules,
) -> Result<WerReport> {
    for utt in hypothesis.keys() {
        if !reference.contains_key(utt) {
            return Err(Error::Format(format!(
                "hypothesis utterance {utt} not present in reference"
            )));
        }
    }

    let empty: Vec<String> = Vec::new();
    let mut report = WerReport::default();
    for (utt, ref_tokens) in reference {
        let hyp_tokens = hypothesis.get(utt).unwrap_or(&empty);
        let ref_filtered = filter_tokens(ref_tokens, rules);
        let hyp_filtered = filter_tokens(hyp_tokens, rules);
        report.filtered_ref_tokens += ref_tokens.len() - ref_filtered.len();
        report.filtered_hyp_tokens += hyp_tokens.len() - hyp_filtered.len();

        let alignment = align(&ref_filtered, &hyp_filtered);
        let score = UttScore {
            n_ref: ref_filtered.len(),
            substitutions: alignment.substitutions(),
            deletions: alignment.deletions(),
            insertions: alignment.insertions(),
            matches: alignment.matches(),
            wer: wer_value(alignment.edits(), ref_filtered.len()),
        };
        report.n_ref += score.n_ref;
        report.substitutions += score.substitutions;
        report.deletions += score.deletions;
        report.insertions += score.insertions;
        report.matches += score.matches;
        report.per_utt.insert(utt.clone(), score);
    }
    report.wer = wer_value(
        report.substitutions + report.deletions + report.insertions,
        report.n_ref,
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtmEntry {
    pub utt_id: String,
    pub channel: String,
    pub begin: f64,
    pub duration: f64,
    pub word: String,
    pub confidence: f64,
}

/// Parse CTM lines: `utt chan begin dur word [conf]`. A missing confidence
/// is treated as 1.0. Blank lines and `;;` comments are skipped.
pub fn parse_ctm(content: &str) -> Result<Vec<CtmEntry>> {
    let mut entries = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(";;") {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 5 || fields.len() > 6 {
            return Err(Error::Format(format!(
                "ctm line {}: expected 5 or 6 fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        let begin: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Format(format!("ctm line {}: bad begin time", i + 1)))?;
        let duration: f64 = fields[3]
            .parse()
            .map_err(|_| Error::Format(format!("ctm line {}: bad duration", i + 1)))?;
        let confidence: f64 = match fields.get(5) {
            Some(c) => c
                .parse()
                .map_err(|_| Error::Format(format!("ctm line {}: bad confidence", i + 1)))?,
            None => 1.0,
        };
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Format(format!(
                "ctm line {}: confidence {confidence} outside [0,1]",
                i + 1
            )));
        }
        if begin < 0.0 || duration < 0.0 {
            return Err(Error::Format(format!(
                "ctm line {}: negative time field",
                i + 1
            )));
        }
        entries.push(CtmEntry {
            utt_id: fields[0].to_string(),
            channel: fields[1].to_string(),
            begin,
            duration,
            word: fields[4].to_string(),
            confidence,
        });
    }
    Ok(entries)
}

pub fn format_ctm(entries: &[CtmEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{} {} {:.3} {:.3} {} {:.3}\n",
            e.utt_id, e.channel, e.begin, e.duration, e.word, e.confidence
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceFilterConfig {
    /// Entries with confidence >= threshold are kept.
    pub threshold: f64,
}

impl ConfidenceFilterConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "threshold must be in [0,1], got {threshold}"
            )));
        }
        Ok(ConfidenceFilterConfig { threshold })
    }
}

/// Keep entries with confidence >= threshold, in (utt_id, begin) order.
pub fn filter_ctm(entries: &[CtmEntry], config: ConfidenceFilterConfig) -> Result<Vec<CtmEntry>> {
    for e in entries {
        if !(0.0..=1.0).contains(&e.confidence) {
            return Err(Error::Format(format!(
                "confidence {} outside [0,1] for {} '{}'",
                e.confidence, e.utt_id, e.word
            )));
        }
    }
    let mut sorted: Vec<CtmEntry> = entries.to_vec();
    sorted.sort_by(|a, b| {
        a.utt_id
            .cmp(&b.utt_id)
            .then(a.begin.partial_cmp(&b.begin).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(sorted
        .into_iter()
        .filter(|e| e.confidence >= config.threshold)
        .collect())
}

/// Group CTM entries into per-utterance token sequences (by begin time).
pub fn ctm_to_transcripts(entries: &[CtmEntry]) -> BTreeMap<String, Vec<String>> {
    let mut sorted: Vec<&CtmEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| {
        a.utt_id
            .cmp(&b.utt_id)
            .then(a.begin.partial_cmp(&b.begin).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for e in sorted {
        out.entry(e.utt_id.clone()).or_default().push(e.word.clone());
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub best_threshold: f64,
    pub best_wer: f64,
    pub curve: Vec<(f64, f64)>,
}

/// Evaluate modified WER of the confidence-filtered hypothesis at thresholds
/// `{0, step, 2*step, ..., 1}` and return the minimizer (ties broken toward
/// the smallest threshold).
pub fn sweep_threshold(
    entries: &[CtmEntry],
    reference: &BTreeMap<String, Vec<String>>,
    rules: &TokenFilterRules,
    grid_step: f64,
) -> Result<SweepResult> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Config(format!(
            "grid_step must be in (0,1], got {grid_step}"
        )));
    }
    if reference.is_empty() {
        return Err(Error::Format("empty reference".into()));
    }

    let mut thresholds = Vec::new();
    let mut t = 0.0f64;
    while t < 1.0 - 1e-12 {
        thresholds.push(t);
        t += grid_step;
    }
    thresholds.push(1.0);

    let mut curve = Vec::with_capacity(thresholds.len());
    let mut best: Option<(f64, f64)> = None;
    for &threshold in &thresholds {
        let kept = filter_ctm(entries, ConfidenceFilterConfig { threshold })?;
        let hyp = ctm_to_transcripts(&kept);
        let report = modified_wer(reference, &hyp, rules)?;
        curve.push((threshold, report.wer));
        if best.is_none() || report.wer < best.unwrap().1 {
            best = Some((threshold, report.wer));
        }
    }
    let (best_threshold, best_wer) = best.unwrap();
    Ok(SweepResult {
        best_threshold,
        best_wer,
        curve,
    })
}

/// Parse Kaldi-style transcripts (`utt-id token token ...`), rejecting
/// duplicate utterance ids.
pub fn parse_transcripts(content: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out = BTreeMap::new();
    for line in content.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let utt = it.next().unwrap().to_string();
        let tokens: Vec<String> = it.map(String::from).collect();
        if out.insert(utt.clone(), tokens).is_some() {
            return Err(Error::Format(format!("duplicate utterance id {utt}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    /// Brute-force edit distance over all edit scripts; independent of the
    /// DP implementation's backtrace.
    fn oracle_distance(r: &[String], h: &[String]) -> usize {
        if r.is_empty() {
            return h.len();
        }
        if h.is_empty() {
            return r.len();
        }
        let sub = oracle_distance(&r[1..], &h[1..]) + usize::from(r[0] != h[0]);
        let del = oracle_distance(&r[1..], h) + 1;
        let ins = oracle_distance(r, &h[1..]) + 1;
        sub.min(del).min(ins)
    }

    #[test]
    fn identical_sequences_zero_edits() {
        let a = align(&toks("a b c"), &toks("a b c"));
        assert_eq!(a.edits(), 0);
        assert_eq!(a.matches(), 3);
    }

    #[test]
    fn table3_filtered_pair_two_edits() {
        let a = align(
            &toks("in the people i watch the"),
            &toks("interesting in people i watch the"),
        );
        assert_eq!(a.edits(), 2);
    }

    #[test]
    fn empty_hypothesis_all_deletions() {
        let a = align(&toks("a b"), &[]);
        assert_eq!(a.deletions(), 2);
        assert_eq!(a.edits(), 2);
    }

    #[test]
    fn matches_oracle_on_small_pairs() {
        let alphabet = ["a", "b", "c"];
        for seed in 0..200u64 {
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 33) as usize
            };
            let rl = next() % 6;
            let hl = next() % 6;
            let r: Vec<String> = (0..rl).map(|_| alphabet[next() % 3].to_string()).collect();
            let h: Vec<String> = (0..hl).map(|_| alphabet[next() % 3].to_string()).collect();
            assert_eq!(align(&r, &h).edits(), oracle_distance(&r, &h), "r={r:?} h={h:?}");
        }
    }

    fn one_utt(s: &str) -> BTreeMap<String, Vec<String>> {
        let mut m = BTreeMap::new();
        m.insert("u1".to_string(), toks(s));
        m
    }

    #[test]
    fn table3_modified_wer() {
        let rules = TokenFilterRules::default();
        let reference = one_utt("<unk> in <unk> the people i watch the");
        let filtered_hyp = one_utt("interesting in people i watch the");
        let report = modified_wer(&reference, &filtered_hyp, &rules).unwrap();
        assert_eq!(report.n_ref, 6);
        assert_eq!(report.substitutions + report.deletions + report.insertions, 2);
        assert!((report.wer - 2.0 / 6.0).abs() < 1e-12);

        let unfiltered_hyp = one_utt("@uh interesting ping in work people i watch the");
        let worse = modified_wer(&reference, &unfiltered_hyp, &rules).unwrap();
        assert!(worse.wer > report.wer, "{} !> {}", worse.wer, report.wer);
    }

    #[test]
    fn identical_transcripts_zero_wer() {
        let rules = TokenFilterRules::default();
        let r = one_utt("<unk> hello @uh world pro-");
        let report = modified_wer(&r, &r, &rules).unwrap();
        assert_eq!(report.wer, 0.0);
    }

    #[test]
    fn missing_hypothesis_is_empty() {
        let rules = TokenFilterRules::default();
        let reference = one_utt("a b c");
        let hyp = BTreeMap::new();
        let report = modified_wer(&reference, &hyp, &rules).unwrap();
        assert_eq!(report.deletions, 3);
        assert_eq!(report.wer, 1.0);
    }

    #[test]
    fn unknown_hyp_utt_errors() {
        let rules = TokenFilterRules::default();
        let reference = one_utt("a");
        let mut hyp = BTreeMap::new();
        hyp.insert("ghost".to_string(), toks("a"));
        assert!(modified_wer(&reference, &hyp, &rules).is_err());
    }

    #[test]
    fn ctm_parse_and_filter() {
        let ctm = "u1 1 0.00 0.30 hello 0.9\nu1 1 0.30 0.20 there 0.3\nu1 1 0.50 0.40 world 0.99\n";
        let entries = parse_ctm(ctm).unwrap();
        assert_eq!(entries.len(), 3);
        let kept = filter_ctm(&entries, ConfidenceFilterConfig::new(0.5).unwrap()).unwrap();
        let words: Vec<&str> = kept.iter().map(|e| e.word.as_str()).collect();
        assert_eq!(words, vec!["hello", "world"]);
        // threshold 0 is the identity
        let all = filter_ctm(&entries, ConfidenceFilterConfig::new(0.0).unwrap()).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn ctm_missing_confidence_is_one() {
        let entries = parse_ctm("u1 1 0.0 0.3 hello\n").unwrap();
        assert_eq!(entries[0].confidence, 1.0);
    }

    #[test]
    fn ctm_rejects_bad_confidence() {
        assert!(parse_ctm("u1 1 0.0 0.3 hello 1.5\n").is_err());
    }

    #[test]
    fn monotone_filtering() {
        let ctm = "u1 1 0.0 0.1 a 0.2\nu1 1 0.1 0.1 b 0.5\nu1 1 0.2 0.1 c 0.8\n";
        let entries = parse_ctm(ctm).unwrap();
        let mut prev = usize::MAX;
        for t in [0.0, 0.3, 0.6, 0.9, 1.0] {
            let kept = filter_ctm(&entries, ConfidenceFilterConfig::new(t).unwrap()).unwrap();
            assert!(kept.len() <= prev);
            prev = kept.len();
        }
    }

    #[test]
    fn sweep_separable_fixture() {
        // wrong words below 0.5, right words above
        let ctm = "u1 1 0.0 0.1 wrong 0.3\nu1 1 0.1 0.1 a 0.9\nu1 1 0.2 0.1 b 0.8\nu1 1 0.3 0.1 bad 0.4\n";
        let entries = parse_ctm(ctm).unwrap();
        let reference = one_utt("a b");
        let rules = TokenFilterRules::default();
        let sweep = sweep_threshold(&entries, &reference, &rules, 0.05).unwrap();
        assert_eq!(sweep.best_wer, 0.0);
        assert!(sweep.best_threshold > 0.4 && sweep.best_threshold <= 0.8);
        // minimum over a grid containing 0 cannot exceed the threshold-0 value
        let at_zero = sweep.curve.iter().find(|(t, _)| *t == 0.0).unwrap().1;
        assert!(sweep.best_wer <= at_zero);
    }

    #[test]
    fn sweep_all_correct_high_confidence() {
        let ctm = "u1 1 0.0 0.1 a 1.0\nu1 1 0.1 0.1 b 1.0\n";
        let entries = parse_ctm(ctm).unwrap();
        let reference = one_utt("a b");
        let sweep =
            sweep_threshold(&entries, &reference, &TokenFilterRules::default(), 0.1).unwrap();
        assert_eq!(sweep.best_threshold, 0.0);
        assert_eq!(sweep.best_wer, 0.0);
    }

    #[test]
    fn sweep_empty_reference_errors() {
        let entries = parse_ctm("u1 1 0.0 0.1 a 1.0\n").unwrap();
        let reference = BTreeMap::new();
        assert!(sweep_threshold(&entries, &reference, &TokenFilterRules::default(), 0.1).is_err());
    }

    #[test]
    fn transcripts_reject_duplicates() {
        assert!(parse_transcripts("u1 a b\nu1 c\n").is_err());
        let ok = parse_transcripts("u1 a b\nu2 c\n").unwrap();
        assert_eq!(ok.len(), 2);
    }
}
