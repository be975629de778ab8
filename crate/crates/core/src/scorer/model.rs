//! The built-in step scorer: static word vectors, a recurrent question
//! encoder, and a recurrent decoder with attention that scores the
//! admissible tokens of each step.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embedding::{tokenize, EmbeddingTable};
use super::tape::{log_softmax, softmax, Mat, Tape, Var};
use super::traits::{Candidate, CandidateKind, Scorer, ScorerError};
use crate::induction::{ForcedStep, SPECIAL_COUNT};

pub const RECENCY_SLOTS: usize = 8;

/// Parameter tensors, in storage order.
pub const TENSOR_NAMES: [&str; 10] = [
    "words", "enc_w_ih", "enc_w_hh", "enc_b", "dec_w_ih", "dec_w_hh", "dec_b", "proj", "special", "recency",
];

const WORDS: usize = 0;
// Each recurrent cell owns three consecutive tensors: w_ih, w_hh, b.
const ENC_W_IH: usize = 1;
const DEC_W_IH: usize = 4;
const PROJ: usize = 7;
const SPECIAL: usize = 8;
const RECENCY: usize = 9;

const CHECKPOINT_FORMAT: &str = "kbqa-step-scorer";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden size of encoder and decoder.
    pub d: usize,
    pub freeze_embeddings: bool,
    pub seed: u64,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { d: 64, freeze_embeddings: true, seed: 0, init_scale: 0.08 }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a scorer checkpoint (format `{0}`)")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("tensor `{name}` has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Shape { name: String, rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("missing tensor `{0}`")]
    Missing(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    word_dim: usize,
    /// Words of rows 1.. of the `words` tensor; row 0 is the OOV vector.
    vocab: Vec<String>,
    tensors: Vec<NamedTensor>,
}

/// The trainable scorer.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    word_dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    params: Vec<Mat>,
}

/// Per-beam decoder state.
#[derive(Debug, Clone)]
pub struct Session(Arc<SessionState>);

#[derive(Debug)]
struct SessionState {
    q: Arc<Mat>,
    h: Mat,
    c: Mat,
    x: Mat,
}

/// What `step` computed: the new recurrent state and the candidate matrix.
#[derive(Debug, Clone)]
pub struct Pending {
    h: Mat,
    c: Mat,
    w: Mat,
}

fn shapes(d: usize, dw: usize, words: usize) -> [(usize, usize); 10] {
    [
        (words + 1, dw),
        (4 * d, dw),
        (4 * d, d),
        (4 * d, 1),
        (4 * d, 2 * d),
        (4 * d, d),
        (4 * d, 1),
        (d, dw),
        (SPECIAL_COUNT, d),
        (RECENCY_SLOTS, d),
    ]
}

impl Model {
    /// A freshly initialized model whose word vectors come from `table`.
    pub fn new(table: &EmbeddingTable, config: ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let s = config.init_scale;
        let params = shapes(config.d, table.dim, table.len())
            .into_iter()
            .map(|(r, c)| Mat::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-s..=s)).collect()))
            .collect::<Vec<_>>();
        let mut model = Model { config, word_dim: table.dim, vocab: table.words.clone(), index: HashMap::new(), params };
        model.params[WORDS].data[table.dim..].copy_from_slice(&table.vectors);
        model.rebuild_index();
        model
    }

    fn rebuild_index(&mut self) {
        self.index.clear();
        for (i, w) in self.vocab.iter().enumerate() {
            self.index.entry(w.clone()).or_insert(i + 1);
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn word_dim(&self) -> usize {
        self.word_dim
    }

    pub fn params(&self) -> &[Mat] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Mat] {
        &mut self.params
    }

    pub fn tensor(&self, name: &str) -> Option<&Mat> {
        TENSOR_NAMES.iter().position(|n| *n == name).map(|i| &self.params[i])
    }

    /// Whether parameter tensor `i` is updated during training.
    pub fn trainable(&self, i: usize) -> bool {
        i != WORDS || !self.config.freeze_embeddings
    }

    /// Row indices of the word pieces of `text` (0 for out-of-vocabulary).
    pub fn word_rows(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|w| self.index.get(w).copied().unwrap_or(0)).collect()
    }

    fn question_rows(&self, question: &[String]) -> Vec<usize> {
        let rows: Vec<usize> = question.iter().flat_map(|w| self.word_rows(w)).collect();
        if rows.is_empty() {
            vec![0]
        } else {
            rows
        }
    }

    fn lstm(&self, tape: &mut Tape<'_>, base: usize, x: Var, h: Var, c: Var) -> (Var, Var) {
        let d = self.config.d;
        let w_ih = tape.param(base);
        let w_hh = tape.param(base + 1);
        let b = tape.param(base + 2);
        let a = tape.matmul(w_ih, x);
        let r = tape.matmul(w_hh, h);
        let ar = tape.add(a, r);
        let g = tape.add(ar, b);
        let i = tape.slice_rows(g, 0, d);
        let f = tape.slice_rows(g, d, d);
        let u = tape.slice_rows(g, 2 * d, d);
        let o = tape.slice_rows(g, 3 * d, d);
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let u = tape.tanh(u);
        let o = tape.sigmoid(o);
        let fc = tape.mul(f, c);
        let iu = tape.mul(i, u);
        let c = tape.add(fc, iu);
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc);
        (h, c)
    }

    /// Question states, one row per word piece.
    fn encode(&self, tape: &mut Tape<'_>, question: &[String]) -> Var {
        let rows = self.question_rows(question);
        let words = tape.param(WORDS);
        let x = tape.mean_gather(words, rows.iter().map(|&r| vec![r]).collect());
        let d = self.config.d;
        let mut h = tape.constant(Mat::zeros(d, 1));
        let mut c = tape.constant(Mat::zeros(d, 1));
        let mut states = Vec::with_capacity(rows.len());
        for t in 0..rows.len() {
            let xt = tape.slice_rows(x, t, 1);
            let xt = tape.transpose(xt);
            (h, c) = self.lstm(tape, ENC_W_IH, xt, h, c);
            states.push(tape.transpose(h));
        }
        tape.concat_rows(&states)
    }

    /// The m x d matrix of candidate embeddings: learned vectors for syntax
    /// and functions, projected mean word vectors for everything else, plus
    /// a recency vector for references.
    fn candidate_matrix(&self, tape: &mut Tape<'_>, candidates: &[Candidate]) -> Var {
        let m = candidates.len();
        let mut pieces = Vec::with_capacity(m);
        let mut special = Mat::zeros(m, SPECIAL_COUNT);
        let mut recency = Mat::zeros(m, RECENCY_SLOTS);
        let (mut any_special, mut any_recency) = (false, false);
        for (i, c) in candidates.iter().enumerate() {
            match c.kind {
                CandidateKind::Special { index } => {
                    special.data[i * SPECIAL_COUNT + index] = 1.0;
                    any_special = true;
                    pieces.push(Vec::new());
                }
                CandidateKind::SubRef { distance } => {
                    recency.data[i * RECENCY_SLOTS + distance.min(RECENCY_SLOTS - 1)] = 1.0;
                    any_recency = true;
                    pieces.push(self.surface_rows(&c.surface));
                }
                CandidateKind::Schema | CandidateKind::Constant => pieces.push(self.surface_rows(&c.surface)),
            }
        }
        let words = tape.param(WORDS);
        let means = tape.mean_gather(words, pieces);
        let proj = tape.param(PROJ);
        let proj_t = tape.transpose(proj);
        let mut w = tape.matmul(means, proj_t);
        if any_special {
            let sel = tape.constant(special);
            let table = tape.param(SPECIAL);
            let part = tape.matmul(sel, table);
            w = tape.add(w, part);
        }
        if any_recency {
            let sel = tape.constant(recency);
            let table = tape.param(RECENCY);
            let part = tape.matmul(sel, table);
            w = tape.add(w, part);
        }
        w
    }

    fn surface_rows(&self, surface: &str) -> Vec<usize> {
        let rows = self.word_rows(surface);
        if rows.is_empty() {
            vec![0]
        } else {
            rows
        }
    }

    /// Teacher-forced loss `-sum log p(gold)` of one example, recorded on
    /// `tape`.
    pub fn forced_loss(&self, tape: &mut Tape<'_>, question: &[String], steps: &[ForcedStep]) -> Var {
        let d = self.config.d;
        let q = self.encode(tape, question);
        let q_t = tape.transpose(q);
        let mut h = tape.constant(Mat::zeros(d, 1));
        let mut c = tape.constant(Mat::zeros(d, 1));
        let zeros = tape.constant(Mat::zeros(d, 1));
        let mean = tape.mean_rows(q);
        let mean = tape.transpose(mean);
        let mut x = tape.concat_rows(&[zeros, mean]);
        let mut losses = Vec::with_capacity(steps.len());
        for step in steps {
            (h, c) = self.lstm(tape, DEC_W_IH, x, h, c);
            let w = self.candidate_matrix(tape, &step.candidates);
            let logits = tape.matmul(w, h);
            losses.push(tape.neg_log_softmax_at(logits, step.gold));
            let scores = tape.matmul(q, h);
            let attn = tape.softmax(scores);
            let context = tape.matmul(q_t, attn);
            let chosen = tape.slice_rows(w, step.gold, 1);
            let chosen = tape.transpose(chosen);
            x = tape.concat_rows(&[chosen, context]);
        }
        if losses.is_empty() {
            return tape.constant(Mat::zeros(1, 1));
        }
        tape.sum(&losses)
    }

    /// Loss and parameter gradients of one example.
    pub fn loss_and_grads(&self, question: &[String], steps: &[ForcedStep]) -> (f64, Vec<Option<Mat>>) {
        let mut tape = Tape::new(&self.params);
        let loss = self.forced_loss(&mut tape, question, steps);
        let value = tape.value(loss).data[0];
        (value, tape.backward(loss))
    }

    pub fn loss(&self, question: &[String], steps: &[ForcedStep]) -> f64 {
        let mut tape = Tape::new(&self.params);
        let loss = self.forced_loss(&mut tape, question, steps);
        tape.value(loss).data[0]
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), CheckpointError> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config,
            word_dim: self.word_dim,
            vocab: self.vocab.clone(),
            tensors: TENSOR_NAMES
                .iter()
                .zip(&self.params)
                .map(|(n, m)| NamedTensor { name: n.to_string(), rows: m.rows, cols: m.cols, data: m.data.clone() })
                .collect(),
        };
        serde_json::to_writer(out, &ckpt)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self, CheckpointError> {
        let ckpt: Checkpoint = serde_json::from_reader(input)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(ckpt.format));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(ckpt.version));
        }
        let expected = shapes(ckpt.config.d, ckpt.word_dim, ckpt.vocab.len());
        let mut params = Vec::with_capacity(TENSOR_NAMES.len());
        for (name, (er, ec)) in TENSOR_NAMES.iter().zip(expected) {
            let t = ckpt
                .tensors
                .iter()
                .find(|t| t.name == *name)
                .ok_or_else(|| CheckpointError::Missing(name.to_string()))?;
            if (t.rows, t.cols) != (er, ec) || t.data.len() != er * ec {
                return Err(CheckpointError::Shape {
                    name: name.to_string(),
                    rows: t.rows,
                    cols: t.cols,
                    expected_rows: er,
                    expected_cols: ec,
                });
            }
            params.push(Mat::from_vec(er, ec, t.data.clone()));
        }
        let mut model = Model { config: ckpt.config, word_dim: ckpt.word_dim, vocab: ckpt.vocab, index: HashMap::new(), params };
        model.rebuild_index();
        Ok(model)
    }
}

impl Scorer for Model {
    type Session = Session;
    type Pending = Pending;

    fn reset(&self, question: &[String]) -> Result<Session, ScorerError> {
        let d = self.config.d;
        let mut tape = Tape::new(&self.params);
        let q = self.encode(&mut tape, question);
        let q = tape.value(q).clone();
        let mut x = vec![0.0; 2 * d];
        for r in 0..q.rows {
            for (k, v) in q.row(r).iter().enumerate() {
                x[d + k] += v / q.rows as f64;
            }
        }
        Ok(Session(Arc::new(SessionState { q: Arc::new(q), h: Mat::zeros(d, 1), c: Mat::zeros(d, 1), x: Mat::column(x) })))
    }

    fn step(&self, session: &Session, candidates: &[Candidate]) -> Result<(Vec<f64>, Pending), ScorerError> {
        if candidates.is_empty() {
            return Err(ScorerError::Empty);
        }
        let s = &session.0;
        let mut tape = Tape::new(&self.params);
        let x = tape.constant(s.x.clone());
        let h = tape.constant(s.h.clone());
        let c = tape.constant(s.c.clone());
        let (h, c) = self.lstm(&mut tape, DEC_W_IH, x, h, c);
        let w = self.candidate_matrix(&mut tape, candidates);
        let logits = tape.matmul(w, h);
        let scores = log_softmax(&tape.value(logits).data);
        let pending = Pending { h: tape.value(h).clone(), c: tape.value(c).clone(), w: tape.value(w).clone() };
        Ok((scores, pending))
    }

    fn commit(&self, session: &Session, pending: &Pending, choice: usize) -> Result<Session, ScorerError> {
        if choice >= pending.w.rows {
            return Err(ScorerError::BadChoice { choice, len: pending.w.rows });
        }
        let q = &session.0.q;
        let attn = softmax(&q.matmul(&pending.h).data);
        let context = q.transpose().matmul(&Mat::column(attn));
        let mut x = pending.w.row(choice).to_vec();
        x.extend_from_slice(&context.data);
        Ok(Session(Arc::new(SessionState { q: Arc::clone(q), h: pending.h.clone(), c: pending.c.clone(), x: Mat::column(x) })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        let words = ["wine", "alcohol", "percentage", "region", "which"].iter().map(|s| s.to_string()).collect();
        EmbeddingTable::random(words, 6, 3)
    }

    fn cand(surface: &str, kind: CandidateKind) -> Candidate {
        Candidate { text: surface.into(), surface: surface.into(), kind }
    }

    #[test]
    fn singleton_gets_probability_one() {
        let m = Model::new(&table(), ModelConfig { d: 8, ..Default::default() });
        let s = m.reset(&["which".into(), "wine".into()]).unwrap();
        let (lp, _) = m.step(&s, &[cand("wine.wine.region", CandidateKind::Schema)]).unwrap();
        assert_eq!(lp, vec![0.0]);
    }

    #[test]
    fn duplicate_rows_score_equally() {
        let m = Model::new(&table(), ModelConfig { d: 8, ..Default::default() });
        let s = m.reset(&["which".into()]).unwrap();
        let c = [
            cand("wine.alcohol", CandidateKind::Schema),
            cand("region", CandidateKind::Schema),
            cand("wine.alcohol", CandidateKind::Schema),
        ];
        let (lp, _) = m.step(&s, &c).unwrap();
        assert_eq!(lp[0], lp[2]);
        let total: f64 = lp.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let m = Model::new(&table(), ModelConfig { d: 8, seed: 11, ..Default::default() });
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = Model::load(buf.as_slice()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(back.config, m.config);
    }
}
