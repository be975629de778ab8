//! Dynamic program induction: the decoder state machine that only admits
//! tokens leading to well-formed programs with non-empty executions.

mod decode;
mod gold;
mod state;
mod vocab;

pub use decode::{decode, enumerate_hypotheses, DecodeConfig, DecodeError, DecodeOutput, Hypothesis};
pub use gold::{gold_path, ForcedStep, GoldError, GoldPath};
pub use state::{Context, DecoderState, Inducer, InductionError, SamplingCap, StoreEntry, Token};
pub use vocab::{SchemaFilter, VocabItem, Vocabulary, EOS_TEXT, SPECIAL_COUNT};
