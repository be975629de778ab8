//! Step scorers: the scoring contract, test scorers, the built-in
//! recurrent model, and the wire protocol for out-of-process scorers.

mod embedding;
mod model;
mod tape;
mod train;
mod traits;
mod wire;

pub use embedding::{tokenize, EmbeddingError, EmbeddingTable};
pub use model::{CheckpointError, Model, ModelConfig, Pending, Session, RECENCY_SLOTS, TENSOR_NAMES};
pub use tape::{log_softmax, sigmoid, softmax, Mat, Tape, Var};
pub use train::{train, Adam, TrainConfig, TrainExample};
pub use traits::{Candidate, CandidateKind, OracleScorer, Scorer, ScorerError, UniformScorer, OFF_PATH_LOG_PROB};
pub use wire::{
    decode_request, decode_response, encode_request, encode_response, serve, ChildTransport, Loopback, RemoteScorer,
    Request, Response, Server, StreamTransport, Transport, WireCandidate, PROTOCOL_VERSION,
};
