//! Speech-corpus augmentation and ASR-evaluation toolkit.
//!
//! The crate is organized around a small DSP core (WAV I/O, STFT/ISTFT,
//! spectral convergence) with prosody modification built on frame-sequential
//! iterative spectrogram inversion, plus feature-matrix masking, pitch
//! tracking, transcript noising, token-filtered WER scoring and Kaldi-style
//! corpus handling.

pub mod audio;
pub mod corpus;
pub mod error;
pub mod pitch;
pub mod prosody;
pub mod rtisi;
pub mod scoring;
pub mod specaug;
pub mod stft;
pub mod text;

pub use audio::AudioBuffer;
pub use corpus::{CorpusStats, DataDir};
pub use error::{Error, Result};
pub use pitch::PitchTrack;
pub use prosody::{AugmentRecipe, PitchScaleSpec, RecipeName, TimeScaleSpec};
pub use rtisi::RtisiConfig;
pub use scoring::{CtmEntry, WerReport};
pub use specaug::{FeatureMatrix, SpecAugPolicy};
pub use stft::{ComplexSpectrogram, MagnitudeSpectrogram, StftConfig, Window};
pub use text::TokenFilterRules;
