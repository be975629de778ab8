use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::state::{DecoderState, Inducer, InductionError, SamplingCap, Token};
use super::vocab::SchemaFilter;
use crate::kb::{KnowledgeBase, Literal};
use crate::scorer::{Scorer, ScorerError};
use crate::sexpr::{Denotation, Program, SubprogramSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub max_steps: usize,
    pub cap: SamplingCap,
    /// Most linked entities whose subsets are tried.
    pub hypothesis_cap: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam_width: 5, max_steps: 40, cap: SamplingCap::default(), hypothesis_cap: 6 }
    }
}

/// A finished decode.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    /// The entity subset the store was initialized with.
    pub entities: Vec<String>,
    pub program: Program,
    pub sequence: SubprogramSequence,
    pub tokens: Vec<Token>,
    /// Sum of token log-probabilities.
    pub log_prob: f64,
    /// `log_prob` divided by the number of tokens; hypotheses rank by this.
    pub score: f64,
    pub denotation: Denotation,
}

#[derive(Debug, Clone, Default)]
pub struct DecodeOutput {
    /// Distinct programs, best first.
    pub hypotheses: Vec<Hypothesis>,
    pub diagnostics: Vec<String>,
    /// Sum and count of admissible-set sizes over all expanded states.
    pub admissible_total: usize,
    pub admissible_steps: usize,
}

impl DecodeOutput {
    pub fn best(&self) -> Option<&Hypothesis> {
        self.hypotheses.first()
    }

    pub fn mean_admissible(&self) -> f64 {
        if self.admissible_steps == 0 {
            0.0
        } else {
            self.admissible_total as f64 / self.admissible_steps as f64
        }
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Induction(#[from] InductionError),
}

/// Entity subsets to try, largest first, then lexicographic by position in
/// `entities` (which is expected in linker-score order). Only the first
/// `cap` entities are used; the flag reports whether any were dropped.
pub fn enumerate_hypotheses(entities: &[String], cap: usize) -> (Vec<Vec<String>>, bool) {
    let mut unique: Vec<&String> = Vec::new();
    for e in entities {
        if !unique.contains(&e) {
            unique.push(e);
        }
    }
    let truncated = unique.len() > cap;
    unique.truncate(cap);
    let n = unique.len();
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let out = subsets.into_iter().map(|s| s.into_iter().map(|i| unique[i].clone()).collect()).collect();
    (out, truncated)
}

struct Beam<S> {
    state: DecoderState,
    session: S,
    log_prob: f64,
}

/// Beam search over one entity hypothesis.
fn search<S: Scorer>(
    inducer: &Inducer<'_>,
    scorer: &S,
    question: &[String],
    entities: &[String],
    literals: &[Literal],
    beam_width: usize,
    out: &mut DecodeOutput,
) -> Result<Vec<Hypothesis>, DecodeError> {
    let state = inducer.init_state(entities, literals)?;
    let mut alive = vec![Beam { state, session: scorer.reset(question)?, log_prob: 0.0 }];
    let mut finished = Vec::new();
    while !alive.is_empty() && finished.len() < beam_width {
        let mut expansions: Vec<(f64, usize, usize)> = Vec::new();
        let mut expanded: Vec<Option<(Vec<Token>, S::Pending)>> = Vec::with_capacity(alive.len());
        for (b, beam) in alive.iter().enumerate() {
            let tokens = inducer.admissible(&beam.state);
            if tokens.is_empty() || beam.state.step() >= inducer.max_steps {
                expanded.push(None);
                continue;
            }
            out.admissible_total += tokens.len();
            out.admissible_steps += 1;
            let candidates = inducer.candidates(&beam.state, &tokens);
            let (scores, pending) = scorer.step(&beam.session, &candidates)?;
            if scores.len() != tokens.len() {
                return Err(ScorerError::Misaligned { expected: tokens.len(), got: scores.len() }.into());
            }
            expansions.extend(scores.iter().enumerate().map(|(j, s)| (beam.log_prob + s, b, j)));
            expanded.push(Some((tokens, pending)));
        }
        expansions.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(Ordering::Equal).then((x.1, x.2).cmp(&(y.1, y.2))));
        expansions.truncate(beam_width - finished.len());
        let mut next = Vec::with_capacity(expansions.len());
        for (log_prob, b, j) in expansions {
            let (tokens, pending) = expanded[b].as_ref().expect("expanded beam");
            let parent = &alive[b];
            let state = inducer.advance_unchecked(&parent.state, tokens[j])?;
            if state.is_closed() {
                let answer = state.answer().expect("closed states have an answer");
                if answer.denotation.is_empty() {
                    out.diagnostics.push(format!("dropped unfaithful program {}", answer.nested));
                    continue;
                }
                let len = state.history.len() as f64;
                finished.push(Hypothesis {
                    entities: entities.to_vec(),
                    program: answer.nested.clone(),
                    sequence: state.sequence(),
                    tokens: state.history.clone(),
                    log_prob,
                    score: log_prob / len,
                    denotation: answer.denotation.clone(),
                });
            } else {
                let session = scorer.commit(&parent.session, pending, j)?;
                next.push(Beam { state, session, log_prob });
            }
        }
        for beam in std::mem::replace(&mut alive, next) {
            scorer.release(beam.session);
        }
    }
    for beam in alive {
        scorer.release(beam.session);
    }
    Ok(finished)
}

/// Decodes a question into ranked, distinct programs. Every entity subset
/// from [`enumerate_hypotheses`] is searched, and the finished beams are
/// merged. With no linked entities the store starts with the literals alone.
#[allow(clippy::too_many_arguments)]
pub fn decode<S: Scorer>(
    kb: &KnowledgeBase,
    scorer: &S,
    question: &[String],
    entities: &[String],
    literals: &[Literal],
    config: &DecodeConfig,
    filter: Option<&SchemaFilter>,
) -> Result<DecodeOutput, DecodeError> {
    let inducer = Inducer::new(kb).with_cap(config.cap).with_max_steps(config.max_steps).with_filter(filter);
    let mut out = DecodeOutput::default();
    let (mut subsets, truncated) = enumerate_hypotheses(entities, config.hypothesis_cap);
    if truncated {
        out.diagnostics.push(format!("entity hypotheses limited to the top {} linked entities", config.hypothesis_cap));
    }
    if subsets.is_empty() {
        subsets.push(Vec::new());
    }
    let mut best: HashMap<String, Hypothesis> = HashMap::new();
    for subset in &subsets {
        if subset.is_empty() && literals.is_empty() {
            continue;
        }
        for h in search(&inducer, scorer, question, subset, literals, config.beam_width.max(1), &mut out)? {
            let key = h.program.normalize().to_string();
            match best.get(&key) {
                Some(old) if old.score >= h.score => {}
                _ => {
                    best.insert(key, h);
                }
            }
        }
    }
    let mut ranked: Vec<(String, Hypothesis)> = best.into_iter().collect();
    ranked.sort_by(|(ka, a), (kb_, b)| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| ka.cmp(kb_)));
    out.hypotheses = ranked.into_iter().map(|(_, h)| h).collect();
    if out.hypotheses.is_empty() {
        out.diagnostics.push(format!("no finished beam within {} steps", config.max_steps));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn power_set_order() {
        let (h, t) = enumerate_hypotheses(&names(&["e1"]), 6);
        assert_eq!(h, vec![names(&["e1"])]);
        assert!(!t);
        let (h, _) = enumerate_hypotheses(&names(&["e1", "e2"]), 6);
        assert_eq!(h, vec![names(&["e1", "e2"]), names(&["e1"]), names(&["e2"])]);
        let (h, _) = enumerate_hypotheses(&names(&["a", "b", "c"]), 6);
        assert_eq!(h.len(), 7);
    }

    #[test]
    fn over_cap_keeps_top_entities() {
        let (h, t) = enumerate_hypotheses(&names(&["a", "b", "c"]), 2);
        assert!(t);
        assert_eq!(h, vec![names(&["a", "b"]), names(&["a"]), names(&["b"])]);
    }
}
