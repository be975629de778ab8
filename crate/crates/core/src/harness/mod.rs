//! Datasets, literal identification, metrics, evaluation, the synthetic
//! corpus and the enumeration baseline.

mod baseline;
mod dataset;
mod eval;
mod literals;
pub mod synth;

pub use baseline::{enumerate_two_hop, rank_two_hop, sequence_log_prob};
pub use dataset::{
    apply_entity_links, prepare, question_words, read_entity_links, read_examples, validate, write_examples, DatasetError,
    Diagnostic, EntityLinks, Example, LinkedEntity, Prepared,
};
pub use eval::{
    build_vocabulary, evaluate, exact_match, f1, oracle_for, training_example, EvalReport, ExampleResult, VocabMode,
};
pub use literals::{identify_literals, LiteralSpan};
