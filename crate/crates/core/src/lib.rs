//! Character-level event trigger identification.
//!
//! A window-based neural tagger over trainable character embeddings emits
//! per-character {B, I, O} distributions that a Viterbi decoder combines
//! with a tag-transition model. Embeddings can be pretrained on raw text
//! with skip-gram and negative sampling. A maximum-entropy tagger over
//! lexical features serves as the baseline, and predictions are scored by
//! exact-match span precision, recall and F1.

pub mod baseline;
pub mod corpus;
pub mod decoder;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod kv;
pub mod model_io;
pub mod network;
pub mod rng;
pub mod sweep;

pub use corpus::{Tag, TaggedSentence, TriggerSpan, Vocabulary, Window};
pub use decoder::{Emissions, Tagger, TransitionModel};
pub use embeddings::EmbeddingTable;
pub use error::{Error, Result};
pub use eval::Score;
pub use network::{Mlp, TrainConfig};
