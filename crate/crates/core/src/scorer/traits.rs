use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How a candidate token should be embedded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CandidateKind {
    /// `(`, `)`, EOS or a function name; `index` selects a learned vector.
    Special { index: usize },
    /// A relation or class.
    Schema,
    /// A reference to a stored subprogram, `distance` positions back from
    /// the newest one.
    SubRef { distance: usize },
    /// A CONS/TC constant.
    Constant,
}

/// One admissible token as the scorer sees it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    /// Canonical token text. References print as the full program they
    /// stand for, so the text does not depend on store numbering.
    pub text: String,
    /// Natural-language-ish surface form that gets embedded.
    pub surface: String,
    pub kind: CandidateKind,
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("no candidates to score")]
    Empty,
    #[error("choice {choice} out of range for {len} candidates")]
    BadChoice { choice: usize, len: usize },
    #[error("scorer returned {got} scores for {expected} candidates")]
    Misaligned { expected: usize, got: usize },
    #[error("remote scorer: {0}")]
    Remote(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A step scorer: log-probabilities over the admissible tokens at each
/// decoding step, conditioned on the question and the tokens chosen so far.
///
/// Sessions are values. `commit` returns a new session and leaves the old one
/// usable, so one parent can be extended with several choices during beam
/// search.
pub trait Scorer {
    type Session: Clone;
    /// Whatever `step` computed that `commit` needs again.
    type Pending;

    fn reset(&self, question: &[String]) -> Result<Self::Session, ScorerError>;

    fn step(&self, session: &Self::Session, candidates: &[Candidate]) -> Result<(Vec<f64>, Self::Pending), ScorerError>;

    fn commit(&self, session: &Self::Session, pending: &Self::Pending, choice: usize) -> Result<Self::Session, ScorerError>;

    /// Called when the decoder drops a session for good.
    fn release(&self, _session: Self::Session) {}
}

/// Log-probability given to tokens off the gold path by [`OracleScorer`].
pub const OFF_PATH_LOG_PROB: f64 = -1e9;

/// Puts all mass on the next gold token. Used to test decoding independently
/// of learning.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    gold: Vec<String>,
}

impl OracleScorer {
    /// `gold` is the candidate text of each gold token in order.
    pub fn new(gold: Vec<String>) -> Self {
        OracleScorer { gold }
    }
}

impl Scorer for OracleScorer {
    type Session = usize;
    type Pending = ();

    fn reset(&self, _question: &[String]) -> Result<usize, ScorerError> {
        Ok(0)
    }

    fn step(&self, &t: &usize, candidates: &[Candidate]) -> Result<(Vec<f64>, ()), ScorerError> {
        let want = self.gold.get(t);
        let scores = candidates
            .iter()
            .map(|c| if Some(&c.text) == want { 0.0 } else { OFF_PATH_LOG_PROB })
            .collect();
        Ok((scores, ()))
    }

    fn commit(&self, &t: &usize, _: &(), _choice: usize) -> Result<usize, ScorerError> {
        Ok(t + 1)
    }
}

/// Uniform distribution over the admissible set.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformScorer;

impl Scorer for UniformScorer {
    type Session = ();
    type Pending = ();

    fn reset(&self, _question: &[String]) -> Result<(), ScorerError> {
        Ok(())
    }

    fn step(&self, _: &(), candidates: &[Candidate]) -> Result<(Vec<f64>, ()), ScorerError> {
        if candidates.is_empty() {
            return Err(ScorerError::Empty);
        }
        let lp = -(candidates.len() as f64).ln();
        Ok((vec![lp; candidates.len()], ()))
    }

    fn commit(&self, _: &(), _: &(), _choice: usize) -> Result<(), ScorerError> {
        Ok(())
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    type Session = S::Session;
    type Pending = S::Pending;

    fn reset(&self, question: &[String]) -> Result<S::Session, ScorerError> {
        (**self).reset(question)
    }

    fn step(&self, session: &S::Session, candidates: &[Candidate]) -> Result<(Vec<f64>, S::Pending), ScorerError> {
        (**self).step(session, candidates)
    }

    fn commit(&self, session: &S::Session, pending: &S::Pending, choice: usize) -> Result<S::Session, ScorerError> {
        (**self).commit(session, pending, choice)
    }

    fn release(&self, session: S::Session) {
        (**self).release(session)
    }
}
