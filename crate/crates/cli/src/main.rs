//! `prosokit` — speech corpus augmentation and scoring from the command
//! line. JSON results go to stdout, logs to stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use prosokit_core::audio::{read_wav, write_wav};
use prosokit_core::corpus::{compute_stats, load_datadir};
use prosokit_core::prosody::{
    apply_recipe, pitch_scale, time_scale, AugmentRecipe, PitchScaleSpec, RecipeName,
    TimeScaleSpec,
};
use prosokit_core::rtisi::RtisiConfig;
use prosokit_core::scoring::{
    ctm_to_transcripts, filter_ctm, format_ctm, modified_wer, parse_ctm, parse_transcripts,
    sweep_threshold, ConfidenceFilterConfig,
};
use prosokit_core::specaug::{
    format_feature_archive, parse_feature_archive, spec_augment, SpecAugPolicy,
};
use prosokit_core::stft::{StftConfig, Window};
use prosokit_core::text::{noise_corpus_line, tokenize, NoiseConfig, TokenFilterRules};

const EXIT_OK: u8 = 0;
const EXIT_FATAL: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "prosokit", version, about = "Speech corpus augmentation and ASR scoring toolkit")]
struct Cli {
    /// Seed for all randomized operations.
    #[arg(long, global = true, env = "PROSOKIT_SEED", default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = number of cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Log level for stderr diagnostics.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StftArgs {
    /// Analysis frame length in samples (default: 32 ms at the input rate).
    #[arg(long)]
    frame_length: Option<usize>,
    /// Hop in samples (default: frame-length / 4).
    #[arg(long)]
    hop: Option<usize>,
    /// Window function: hann, hamming or rectangular.
    #[arg(long, default_value = "hann")]
    window: String,
    /// Iterations per committed frame.
    #[arg(long, default_value_t = 8)]
    iterations: usize,
    /// Look-ahead buffer length in frames.
    #[arg(long, default_value_t = 3)]
    lookahead: usize,
}

impl StftArgs {
    fn rtisi(&self, sample_rate: u32) -> Result<RtisiConfig, prosokit_core::Error> {
        let mut stft = StftConfig::speech_default(sample_rate);
        if let Some(fl) = self.frame_length {
            stft.frame_length = fl;
            stft.fft_size = fl.next_power_of_two();
        }
        if let Some(hop) = self.hop {
            stft.analysis_hop = hop;
            stft.synthesis_hop = hop;
        } else if self.frame_length.is_some() {
            stft.analysis_hop = (stft.frame_length / 4).max(1);
            stft.synthesis_hop = stft.analysis_hop;
        }
        stft.window = self.window.parse::<Window>()?;
        stft.validate()?;
        RtisiConfig::new(self.iterations, self.lookahead, stft)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Augment a data directory with prosody-modified copies.
    Augment {
        /// Kaldi-style input directory (wav.scp, text, utt2spk).
        #[arg(long)]
        datadir: PathBuf,
        /// Recipe: sr, p, sr-p or sr2-p2.
        #[arg(long)]
        recipe: String,
        /// Output directory root.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        stft: StftArgs,
    },
    /// Time-scale one WAV (alpha > 1 shortens, pitch preserved).
    Tsm {
        #[arg(long, value_name = "WAV")]
        input: PathBuf,
        #[arg(long, value_name = "WAV")]
        output: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        stft: StftArgs,
    },
    /// Pitch-scale one WAV (s < 1 lowers, duration preserved).
    Pitch {
        #[arg(long, value_name = "WAV")]
        input: PathBuf,
        #[arg(long, value_name = "WAV")]
        output: PathBuf,
        #[arg(long)]
        scale: f64,
        #[command(flatten)]
        stft: StftArgs,
    },
    /// Mask and warp feature matrices in a Kaldi text archive.
    Specaug {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 80)]
        time_warp: usize,
        #[arg(long, default_value_t = 27)]
        freq_mask: usize,
        #[arg(long, default_value_t = 2)]
        n_freq_masks: usize,
        #[arg(long, default_value_t = 100)]
        time_mask: usize,
        #[arg(long, default_value_t = 2)]
        n_time_masks: usize,
        #[arg(long, default_value_t = 1.0)]
        max_time_mask_ratio: f64,
        /// Frame shift in seconds recorded in the matrices.
        #[arg(long, default_value_t = 0.01)]
        frame_shift: f64,
    },
    /// Inject partial-word (false start) noise into a text corpus.
    NoiseText {
        /// One sentence per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        probability: f64,
        #[arg(long, default_value_t = 3)]
        min_word_length: usize,
    },
    /// Token-filtered WER between reference and hypothesis transcripts.
    Score {
        /// Reference transcripts: `utt-id token ...`.
        #[arg(long, value_name = "FILE")]
        reference: PathBuf,
        /// Hypothesis transcripts, same format.
        #[arg(long, value_name = "FILE")]
        hypothesis: PathBuf,
        /// Token-filter rules file (`unk <tok>` / `filler-prefix <c>` /
        /// `false-start-suffix <c>` directives); defaults used otherwise.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Include per-utterance detail in the JSON report.
        #[arg(long)]
        per_utt: bool,
    },
    /// Filter a CTM by confidence, or sweep thresholds against a reference.
    FilterCtm {
        #[arg(long)]
        input: PathBuf,
        /// Filtered CTM output (required unless sweeping).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, conflicts_with = "sweep_ref")]
        threshold: Option<f64>,
        /// Reference transcripts: sweep thresholds and report the best.
        #[arg(long)]
        sweep_ref: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
    },
    /// Descriptive corpus statistics (words, speakers, duration, pitch).
    Stats {
        #[arg(long)]
        datadir: PathBuf,
        /// Optional speaker-to-group map file.
        #[arg(long)]
        spk2group: Option<PathBuf>,
        #[arg(long, default_value_t = 100.0)]
        f_min: f64,
        #[arg(long, default_value_t = 500.0)]
        f_max: f64,
    },
}

fn read_file(path: &PathBuf) -> Result<String, prosokit_core::Error> {
    std::fs::read_to_string(path).map_err(|e| prosokit_core::Error::io(path, e))
}

fn run(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Augment {
            datadir,
            recipe,
            out,
            stft,
        } => {
            let dir = load_datadir(&datadir)?;
            let name: RecipeName = recipe.parse()?;
            let recipe = AugmentRecipe::named(name);
            let rate = dir
                .wav
                .values()
                .next()
                .map(|p| read_wav(p).map(|a| a.sample_rate))
                .transpose()?
                .unwrap_or(16000);
            let rtisi = stft.rtisi(rate)?;
            let outcome = apply_recipe(&dir, &recipe, &out, &rtisi, cli.seed)?;
            let summary = serde_json::json!({
                "recipe": format!("{name:?}"),
                "input_utterances": dir.num_utterances(),
                "output_utterances": outcome.datadir.num_utterances(),
                "failures": outcome.failures,
                "manifest": out.join("manifest.csv"),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if outcome.failures > 0 { EXIT_PARTIAL } else { EXIT_OK })
        }
        Command::Tsm {
            input,
            output,
            alpha,
            stft,
        } => {
            let audio = read_wav(&input)?;
            let rtisi = stft.rtisi(audio.sample_rate)?;
            let out = time_scale(&audio, TimeScaleSpec::new(alpha)?, &rtisi, cli.seed)?;
            write_wav(&out, &output)?;
            Ok(EXIT_OK)
        }
        Command::Pitch {
            input,
            output,
            scale,
            stft,
        } => {
            let audio = read_wav(&input)?;
            let rtisi = stft.rtisi(audio.sample_rate)?;
            let out = pitch_scale(&audio, PitchScaleSpec::new(scale)?, &rtisi, cli.seed)?;
            write_wav(&out, &output)?;
            Ok(EXIT_OK)
        }
        Command::Specaug {
            input,
            output,
            time_warp,
            freq_mask,
            n_freq_masks,
            time_mask,
            n_time_masks,
            max_time_mask_ratio,
            frame_shift,
        } => {
            let policy = SpecAugPolicy {
                time_warp_w: time_warp,
                freq_mask_f: freq_mask,
                n_freq_masks,
                time_mask_t: time_mask,
                n_time_masks,
                max_time_mask_ratio,
            };
            let mats = parse_feature_archive(&read_file(&input)?, frame_shift)?;
            let mut out = Vec::with_capacity(mats.len());
            for (i, (utt, mat)) in mats.into_iter().enumerate() {
                let outcome = spec_augment(&mat, &policy, cli.seed.wrapping_add(i as u64))?;
                out.push((utt, outcome.features));
            }
            std::fs::write(&output, format_feature_archive(&out))
                .map_err(|e| prosokit_core::Error::io(&output, e))?;
            Ok(EXIT_OK)
        }
        Command::NoiseText {
            input,
            output,
            probability,
            min_word_length,
        } => {
            let cfg = NoiseConfig::new(probability, min_word_length, cli.seed)?;
            let content = read_file(&input)?;
            let mut out = String::new();
            for (i, line) in content.lines().enumerate() {
                let tokens = tokenize(line);
                let noised = noise_corpus_line(&tokens, &cfg, i as u64);
                out.push_str(&noised.join(" "));
                out.push('\n');
            }
            std::fs::write(&output, out).map_err(|e| prosokit_core::Error::io(&output, e))?;
            Ok(EXIT_OK)
        }
        Command::Score {
            reference,
            hypothesis,
            rules,
            per_utt,
        } => {
            let reference = parse_transcripts(&read_file(&reference)?)?;
            let hypothesis = parse_transcripts(&read_file(&hypothesis)?)?;
            let rules = match rules {
                Some(path) => TokenFilterRules::parse(&read_file(&path)?)?,
                None => TokenFilterRules::default(),
            };
            let mut report = modified_wer(&reference, &hypothesis, &rules)?;
            if !per_utt {
                report.per_utt.clear();
            }
            let mut value = serde_json::to_value(&report)?;
            if let serde_json::Value::Object(map) = &mut value {
                map.insert(
                    "tool_version".into(),
                    serde_json::Value::String(env!("CARGO_PKG_VERSION").into()),
                );
                if !per_utt {
                    map.remove("per_utt");
                }
            }
            println!("{}", serde_json::to_string_pretty(&value)?);
            Ok(EXIT_OK)
        }
        Command::FilterCtm {
            input,
            output,
            threshold,
            sweep_ref,
            grid_step,
        } => {
            let entries = parse_ctm(&read_file(&input)?)?;
            match sweep_ref {
                Some(ref_path) => {
                    let reference = parse_transcripts(&read_file(&ref_path)?)?;
                    let rules = TokenFilterRules::default();
                    let sweep = sweep_threshold(&entries, &reference, &rules, grid_step)?;
                    if let Some(out_path) = output {
                        let kept = filter_ctm(
                            &entries,
                            ConfidenceFilterConfig::new(sweep.best_threshold)?,
                        )?;
                        std::fs::write(&out_path, format_ctm(&kept))
                            .map_err(|e| prosokit_core::Error::io(&out_path, e))?;
                    }
                    println!("{}", serde_json::to_string_pretty(&sweep)?);
                    Ok(EXIT_OK)
                }
                None => {
                    let t = threshold.ok_or_else(|| {
                        prosokit_core::Error::Config(
                            "either --threshold or --sweep-ref is required".into(),
                        )
                    })?;
                    let out_path = output.ok_or_else(|| {
                        prosokit_core::Error::Config("--output is required with --threshold".into())
                    })?;
                    let kept = filter_ctm(&entries, ConfidenceFilterConfig::new(t)?)?;
                    std::fs::write(&out_path, format_ctm(&kept))
                        .map_err(|e| prosokit_core::Error::io(&out_path, e))?;
                    let summary = serde_json::json!({
                        "threshold": t,
                        "input_words": entries.len(),
                        "kept_words": kept.len(),
                        "hypotheses": ctm_to_transcripts(&kept).len(),
                    });
                    println!("{}", serde_json::to_string_pretty(&summary)?);
                    Ok(EXIT_OK)
                }
            }
        }
        Command::Stats {
            datadir,
            spk2group,
            f_min,
            f_max,
        } => {
            let mut dir = load_datadir(&datadir)?;
            if let Some(path) = spk2group {
                let content = read_file(&path)?;
                let mut map = std::collections::BTreeMap::new();
                for line in content.lines() {
                    let mut it = line.split_whitespace();
                    if let (Some(spk), Some(group)) = (it.next(), it.next()) {
                        map.insert(spk.to_string(), group.to_string());
                    }
                }
                dir.spk2group = Some(map);
            }
            let stats = compute_stats(&dir, f_min, f_max)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(if stats.skipped.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::from(EXIT_OK)
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(EXIT_USAGE)
                }
            }
        }
    };

    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .target(env_logger::Target::Stderr)
        .init();

    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            log::warn!("could not configure worker pool: {e}");
        }
    }

    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
