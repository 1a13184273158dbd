//! Joint intent detection and slot filling.
//!
//! The tagger embeds each token from its word and characters, mixes in local context with
//! windowed multi-head self-attention, encodes the sentence with a bidirectional LSTM,
//! classifies the intent from the sentence summary, and decodes slot labels with a
//! linear-chain CRF whose emissions also see a prior `P(slot | intent)` mixed by the
//! predicted intent distribution.
//!
//! Around the tagger sit dataset loading, chunk-level evaluation, and a rule-based
//! dialog manager with template responses.

pub mod corpus;
pub mod crf;
pub mod dst;
pub mod eval;
pub mod exec;
pub mod heads;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod params;
