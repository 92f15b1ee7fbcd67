//! Procedural acoustic token transport.
//!
//! Text is tokenized over a fixed 128-symbol alphabet, each token becomes a
//! 60 ms three-harmonic chip, and the resulting waveform can be pushed through
//! a seeded acoustic channel simulator, decoded with a matched-filter bank and
//! scored with CER, WER and exact-match rate.
//!
//! ```
//! use acoustok::{receiver, synth, vocab};
//!
//! let v = vocab::build_vocab();
//! let ids = v.tokenize("<GO> dock 3");
//! let wave = synth::synth_message(&ids, 16_000).unwrap();
//! let bank = receiver::TemplateBank::build(16_000);
//! let decoded = receiver::decode(&wave, &bank, &receiver::DecodeOptions::default()).unwrap();
//! assert_eq!(v.detokenize(&decoded.tokens), "<GO> dock 3");
//! ```

pub mod audio;
pub mod channel;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod receiver;
pub mod rng;
pub mod synth;
pub mod vocab;

pub use audio::Waveform;
pub use error::{Error, Result};

/// The guide's code samples, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/vocabulary.md")]
    pub struct Vocabulary;
    #[doc = include_str!("../../../book/src/synthesis.md")]
    pub struct Synthesis;
    #[doc = include_str!("../../../book/src/mel.md")]
    pub struct Mel;
    #[doc = include_str!("../../../book/src/channel.md")]
    pub struct Channel;
    #[doc = include_str!("../../../book/src/receiver.md")]
    pub struct Receiver;
    #[doc = include_str!("../../../book/src/corpus.md")]
    pub struct Corpus;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
