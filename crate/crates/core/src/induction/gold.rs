use thiserror::Error;

use super::state::{DecoderState, Inducer, InductionError, Token};
use crate::kb::{Literal, Node};
use crate::scorer::Candidate;
use crate::sexpr::{denest_onto, Function, Program, SequenceError};

#[derive(Debug, Error)]
pub enum GoldError {
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Induction(#[from] InductionError),
    #[error("`{0}` is not in the knowledge base")]
    Unresolvable(String),
    #[error("a bare leaf is not a derivable answer")]
    LeafAnswer,
    #[error("gold token `{token}` is not admissible at step {step}")]
    NotAdmissible { step: usize, token: String },
}

/// One teacher-forced step: the admissible candidates and the gold index.
#[derive(Debug, Clone)]
pub struct ForcedStep {
    pub candidates: Vec<Candidate>,
    pub gold: usize,
}

/// The gold token path of a program, checked against the admissible sets.
#[derive(Debug, Clone)]
pub struct GoldPath {
    pub tokens: Vec<Token>,
    /// Candidate text of each gold token (what an oracle scorer matches).
    pub texts: Vec<String>,
    pub steps: Vec<ForcedStep>,
    pub final_state: DecoderState,
}

fn step_tokens(inducer: &Inducer<'_>, step: &Program) -> Result<Vec<Token>, GoldError> {
    let kb = inducer.kb;
    let Program::Call(func, args) = step else { return Err(GoldError::LeafAnswer) };
    let relation = |p: &Program| match p {
        Program::Relation(name) => kb.relation_id(name).map(Token::Relation).ok_or_else(|| GoldError::Unresolvable(name.clone())),
        other => Err(GoldError::Unresolvable(other.to_string())),
    };
    let subref = |p: &Program| match p {
        Program::SubRef(k) => Ok(Token::SubRef(*k)),
        other => Err(GoldError::Unresolvable(other.to_string())),
    };
    let mut out = vec![Token::Open, Token::Func(*func), subref(&args[0])?];
    match func {
        Function::Count => {}
        Function::And => out.push(match &args[1] {
            Program::Class(name) => Token::Class(kb.class_id(name).ok_or_else(|| GoldError::Unresolvable(name.clone()))?),
            other => subref(other)?,
        }),
        Function::Cons | Function::Tc => {
            out.push(relation(&args[1])?);
            let constant = match &args[2] {
                Program::Entity(name) => Node::Entity(kb.entity_id(name).ok_or_else(|| GoldError::Unresolvable(name.clone()))?),
                Program::Literal(l) => Node::Literal(kb.literal_id(l).ok_or_else(|| GoldError::Unresolvable(l.to_string()))?),
                other => return Err(GoldError::Unresolvable(other.to_string())),
            };
            out.push(Token::Constant(constant));
        }
        _ => out.push(relation(&args[1])?),
    }
    out.push(Token::Close);
    Ok(out)
}

/// Derives the gold token sequence for `program` from a store initialized
/// with `entities` and `literals`, checking that every gold token is
/// admissible when it is taken.
pub fn gold_path(inducer: &Inducer<'_>, entities: &[String], literals: &[Literal], program: &Program) -> Result<GoldPath, GoldError> {
    let mut initial: Vec<Program> = entities.iter().cloned().map(Program::Entity).collect();
    initial.extend(literals.iter().cloned().map(Program::Literal));
    let seq = denest_onto(program, &initial)?;
    if seq.len() == initial.len() {
        return Err(GoldError::LeafAnswer);
    }
    let mut state = inducer.init_state(entities, literals)?;
    let mut tokens = Vec::new();
    for step in &seq.steps[initial.len()..] {
        tokens.extend(step_tokens(inducer, step)?);
    }
    tokens.push(Token::Eos);
    let mut texts = Vec::with_capacity(tokens.len());
    let mut steps = Vec::with_capacity(tokens.len());
    for &t in &tokens {
        let admissible = inducer.admissible(&state);
        let text = inducer.token_text(&state, t);
        let Some(gold) = admissible.iter().position(|&a| a == t) else {
            return Err(GoldError::NotAdmissible { step: state.step(), token: text });
        };
        steps.push(ForcedStep { candidates: inducer.candidates(&state, &admissible), gold });
        texts.push(text);
        state = inducer.advance_unchecked(&state, t)?;
    }
    Ok(GoldPath { tokens, texts, steps, final_state: state })
}
