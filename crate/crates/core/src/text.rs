//! Transcript token classification, non-English filtering, spelling
//! normalization and partial-word (false-start) noise injection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TokenClass {
    English,
    Unk,
    Filler,
    FalseStart,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFilterRules {
    pub unk_tokens: Vec<String>,
    pub filler_prefix: char,
    pub false_start_suffix: char,
}

impl Default for TokenFilterRules {
    fn default() -> Self {
        TokenFilterRules {
            unk_tokens: vec!["<unk>".into(), "<unk-it>".into(), "<unk-de>".into()],
            filler_prefix: '@',
            false_start_suffix: '-',
        }
    }
}

impl TokenFilterRules {
    /// Parse a rules file: `unk <token>`, `filler-prefix <char>` or
    /// `false-start-suffix <char>`, one directive per line. Blank lines and
    /// `#` comments are skipped. Unlisted settings keep their defaults,
    /// except that any `unk` directive replaces the default unk set.
    pub fn parse(content: &str) -> Result<Self> {
        let mut rules = TokenFilterRules::default();
        let mut unk: Vec<String> = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::Format(format!("rules line {}: expected 'directive value'", i + 1))
            })?;
            let value = value.trim();
            match key {
                "unk" => unk.push(value.to_string()),
                "filler-prefix" | "false-start-suffix" => {
                    let mut chars = value.chars();
                    let c = chars.next().ok_or_else(|| {
                        Error::Format(format!("rules line {}: empty value", i + 1))
                    })?;
                    if chars.next().is_some() {
                        return Err(Error::Format(format!(
                            "rules line {}: {key} takes a single character",
                            i + 1
                        )));
                    }
                    if key == "filler-prefix" {
                        rules.filler_prefix = c;
                    } else {
                        rules.false_start_suffix = c;
                    }
                }
                other => {
                    return Err(Error::Format(format!(
                        "rules line {}: unknown directive '{other}'",
                        i + 1
                    )))
                }
            }
        }
        if !unk.is_empty() {
            rules.unk_tokens = unk;
        }
        Ok(rules)
    }
}

/// Classify one token. Precedence: Unk > Filler > FalseStart > English.
pub fn classify_token(token: &str, rules: &TokenFilterRules) -> Result<TokenClass> {
    if token.is_empty() {
        return Err(Error::Format("cannot classify empty token".into()));
    }
    if rules.unk_tokens.iter().any(|u| u == token) {
        return Ok(TokenClass::Unk);
    }
    if token.starts_with(rules.filler_prefix) {
        return Ok(TokenClass::Filler);
    }
    if token.chars().count() >= 2 && token.ends_with(rules.false_start_suffix) {
        return Ok(TokenClass::FalseStart);
    }
    Ok(TokenClass::English)
}

/// Keep only English-classified tokens, order preserved.
pub fn filter_tokens(tokens: &[String], rules: &TokenFilterRules) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| matches!(classify_token(t, rules), Ok(TokenClass::English)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub word_probability: f64,
    pub min_word_length: usize,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(word_probability: f64, min_word_length: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&word_probability) {
            return Err(Error::Config(format!(
                "word_probability must be in [0,1], got {word_probability}"
            )));
        }
        if min_word_length < 3 {
            return Err(Error::Config(format!(
                "min_word_length must be >= 3, got {min_word_length}"
            )));
        }
        Ok(NoiseConfig {
            word_probability,
            min_word_length,
            seed,
        })
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            word_probability: 0.1,
            min_word_length: 3,
            seed: 0,
        }
    }
}

fn noise_with_rng(
    tokens: &[String],
    config: &NoiseConfig,
    rules: &TokenFilterRules,
    rng: &mut impl Rng,
) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for token in tokens {
        let eligible = token.chars().count() >= config.min_word_length
            && matches!(classify_token(token, rules), Ok(TokenClass::English));
        if eligible && rng.gen_bool(config.word_probability) {
            let chars: Vec<char> = token.chars().collect();
            let j = rng.gen_range(1..chars.len());
            let mut partial: String = chars[..j].iter().collect();
            partial.push('-');
            out.push(partial);
        }
        out.push(token.clone());
    }
    out
}

/// Replace each eligible token `w` (independently, with the configured
/// probability) with the pair `w[..j]-`, `w` for a uniform split point.
pub fn inject_partial_words(tokens: &[String], config: &NoiseConfig) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    noise_with_rng(tokens, config, &TokenFilterRules::default(), &mut rng)
}

/// Per-line RNG stream derived from (seed, line index), so lines can be
/// processed independently.
pub fn noise_corpus_line(tokens: &[String], config: &NoiseConfig, line_index: u64) -> Vec<String> {
    let mut seed_bytes = [0u8; 32];
    seed_bytes[..8].copy_from_slice(&config.seed.to_le_bytes());
    seed_bytes[8..16].copy_from_slice(&line_index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed_bytes);
    noise_with_rng(tokens, config, &TokenFilterRules::default(), &mut rng)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpellingRule {
    pub pattern: Vec<String>,
    pub replacement: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpellingRules {
    pub rules: Vec<SpellingRule>,
}

impl Default for SpellingRules {
    fn default() -> Self {
        SpellingRules {
            rules: vec![
                SpellingRule {
                    pattern: vec!["favorite".into()],
                    replacement: vec!["favourite".into()],
                },
                SpellingRule {
                    pattern: vec!["coca-cola".into()],
                    replacement: vec!["coca".into(), "cola".into()],
                },
            ],
        }
    }
}

impl SpellingRules {
    /// Parse `match<TAB>replacement` lines; both sides are whitespace
    /// tokenized. Blank lines and `#` comments are skipped.
    pub fn parse(content: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lhs, rhs) = line.split_once('\t').ok_or_else(|| {
                Error::Format(format!("spelling rule line {} has no tab separator", i + 1))
            })?;
            let pattern: Vec<String> = lhs.split_whitespace().map(String::from).collect();
            if pattern.is_empty() {
                return Err(Error::Format(format!("empty match on line {}", i + 1)));
            }
            rules.push(SpellingRule {
                pattern,
                replacement: rhs.split_whitespace().map(String::from).collect(),
            });
        }
        if rules.is_empty() {
            return Err(Error::Format("no spelling rules found".into()));
        }
        Ok(SpellingRules { rules })
    }
}

/// Apply spelling rules left-to-right, longest match first at each position.
pub fn normalize_spelling(tokens: &[String], rules: &SpellingRules) -> Vec<String> {
    let mut sorted: Vec<&SpellingRule> = rules.rules.iter().collect();
    sorted.sort_by_key(|r| std::cmp::Reverse(r.pattern.len()));

    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = false;
        for rule in &sorted {
            let n = rule.pattern.len();
            if i + n <= tokens.len() && tokens[i..i + n] == rule.pattern[..] {
                out.extend(rule.replacement.iter().cloned());
                i += n;
                matched = true;
                break;
            }
        }
        if !matched {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}

pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(String::from).collect()
}
