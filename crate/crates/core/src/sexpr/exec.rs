use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use super::denest::{SequenceError, SubprogramSequence};
use super::program::{Function, Program};
use crate::kb::{Comparator, EntityId, KnowledgeBase, Literal, LiteralError, Node, RelationId};

/// The result of executing a program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Denotation {
    Entities(BTreeSet<EntityId>),
    Literals(BTreeSet<Literal>),
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DenotationKind {
    Entities,
    Literals,
    Count,
}

impl std::fmt::Display for DenotationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DenotationKind::Entities => "an entity set",
            DenotationKind::Literals => "a literal set",
            DenotationKind::Count => "a count",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("reference #{0} does not name an earlier subprogram")]
    BadRef(usize),
    #[error("{func} expects {expected}, got {found}")]
    TypeMismatch { func: Function, expected: &'static str, found: String },
    #[error("`{0}` cannot be evaluated as a set")]
    NotASet(String),
    #[error(transparent)]
    Literal(#[from] LiteralError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

impl Denotation {
    pub fn kind(&self) -> DenotationKind {
        match self {
            Denotation::Entities(_) => DenotationKind::Entities,
            Denotation::Literals(_) => DenotationKind::Literals,
            Denotation::Count(_) => DenotationKind::Count,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Denotation::Entities(s) => s.len(),
            Denotation::Literals(s) => s.len(),
            Denotation::Count(_) => 1,
        }
    }

    /// Empty sets and a zero count are empty.
    pub fn is_empty(&self) -> bool {
        match self {
            Denotation::Entities(s) => s.is_empty(),
            Denotation::Literals(s) => s.is_empty(),
            Denotation::Count(n) => *n == 0,
        }
    }

    pub fn entities(&self) -> Option<&BTreeSet<EntityId>> {
        match self {
            Denotation::Entities(s) => Some(s),
            _ => None,
        }
    }

    /// Members as KB nodes (a count has none). Literals absent from the KB
    /// are skipped.
    pub fn nodes(&self, kb: &KnowledgeBase) -> Vec<Node> {
        match self {
            Denotation::Entities(s) => s.iter().map(|&e| Node::Entity(e)).collect(),
            Denotation::Literals(s) => s.iter().filter_map(|l| kb.literal_id(l)).map(Node::Literal).collect(),
            Denotation::Count(_) => Vec::new(),
        }
    }

    /// Answer strings for set-based scoring: entity names, literal atoms,
    /// or the count as a single number.
    pub fn answer_strings(&self, kb: &KnowledgeBase) -> BTreeSet<String> {
        match self {
            Denotation::Entities(s) => s.iter().map(|&e| kb.entity_name(e).to_string()).collect(),
            Denotation::Literals(s) => s.iter().map(Literal::to_string).collect(),
            Denotation::Count(n) => BTreeSet::from([n.to_string()]),
        }
    }

    fn describe(&self) -> String {
        self.kind().to_string()
    }
}

fn relation(kb: &KnowledgeBase, p: &Program) -> Result<RelationId, ExecError> {
    match p {
        Program::Relation(name) => kb.relation_id(name).ok_or_else(|| ExecError::UnknownRelation(name.clone())),
        other => Err(ExecError::NotASet(other.to_string())),
    }
}

fn entity_set(func: Function, d: Denotation) -> Result<BTreeSet<EntityId>, ExecError> {
    match d {
        Denotation::Entities(s) => Ok(s),
        other => Err(ExecError::TypeMismatch { func, expected: "an entity set", found: other.describe() }),
    }
}

fn nodes_to_denotation(kb: &KnowledgeBase, rel: RelationId, nodes: BTreeSet<Node>) -> Denotation {
    let literal_valued = !rel.is_inverse() && kb.relation_meta(rel).is_literal_valued();
    if literal_valued {
        Denotation::Literals(
            nodes
                .into_iter()
                .filter_map(|n| match n {
                    Node::Literal(l) => Some(kb.literal(l).clone()),
                    Node::Entity(_) => None,
                })
                .collect(),
        )
    } else {
        Denotation::Entities(
            nodes
                .into_iter()
                .filter_map(|n| match n {
                    Node::Entity(e) => Some(e),
                    Node::Literal(_) => None,
                })
                .collect(),
        )
    }
}

/// Elements of `set` whose best `rel` value (of the relation's comparable
/// tag) is the overall extreme. Elements without such a value are ignored.
fn superlative(kb: &KnowledgeBase, set: &BTreeSet<EntityId>, rel: RelationId, max: bool) -> BTreeSet<EntityId> {
    let mut out = BTreeSet::new();
    if rel.is_inverse() {
        return out;
    }
    let Some(tag) = kb.relation_meta(rel).comparable_tag() else { return out };
    let better = |a: &Literal, b: &Literal| {
        let ord = a.extreme_cmp(b).expect("same comparable tag");
        if max {
            ord == Ordering::Greater
        } else {
            ord == Ordering::Less
        }
    };
    let mut best: Option<Literal> = None;
    for &e in set {
        let mut own: Option<&Literal> = None;
        for o in kb.objects(e, rel) {
            if let Node::Literal(l) = o {
                let lit = kb.literal(*l);
                if lit.tag() == tag && own.is_none_or(|cur| better(lit, cur)) {
                    own = Some(lit);
                }
            }
        }
        let Some(own) = own else { continue };
        match &best {
            Some(b) if better(own, b) => {
                best = Some(own.clone());
                out.clear();
                out.insert(e);
            }
            Some(b) if own.extreme_cmp(b) == Some(Ordering::Equal) => {
                out.insert(e);
            }
            Some(_) => {}
            None => {
                best = Some(own.clone());
                out.insert(e);
            }
        }
    }
    out
}

/// Subjects with a `rel` value satisfying `value op`. A relation whose
/// literals all carry another comparable tag is a cross-tag comparison.
fn comparative(kb: &KnowledgeBase, value: &Literal, rel: RelationId, op: Comparator) -> Result<BTreeSet<EntityId>, ExecError> {
    if rel.is_inverse() {
        return Ok(BTreeSet::new());
    }
    if let Some(tag) = kb.relation_meta(rel).literal_tag() {
        if tag != value.tag() {
            return Err(LiteralError::CrossTag { left: tag, right: value.tag() }.into());
        }
    }
    Ok(kb.compare_subjects(rel, value, op)?)
}

fn eval(kb: &KnowledgeBase, p: &Program, memo: &[Denotation]) -> Result<Denotation, ExecError> {
    match p {
        Program::Entity(name) => {
            let e = kb.entity_id(name).ok_or_else(|| ExecError::UnknownEntity(name.clone()))?;
            Ok(Denotation::Entities(BTreeSet::from([e])))
        }
        Program::Literal(l) => Ok(Denotation::Literals(BTreeSet::from([l.clone()]))),
        Program::SubRef(k) => memo.get(k.wrapping_sub(1)).cloned().ok_or(ExecError::BadRef(*k)),
        Program::Class(_) | Program::Relation(_) => Err(ExecError::NotASet(p.to_string())),
        Program::Call(func, args) => {
            let func = *func;
            match func {
                Function::Join => {
                    let rel = relation(kb, &args[1])?;
                    let heads = match eval(kb, &args[0], memo)? {
                        Denotation::Count(_) => {
                            return Err(ExecError::TypeMismatch { func, expected: "a set", found: "a count".into() })
                        }
                        d => d.nodes(kb),
                    };
                    Ok(nodes_to_denotation(kb, rel, kb.join_neighbors(&heads, rel)))
                }
                Function::And => {
                    let left = entity_set(func, eval(kb, &args[0], memo)?)?;
                    let right = match &args[1] {
                        Program::Class(name) => {
                            let c = kb.class_id(name).ok_or_else(|| ExecError::UnknownClass(name.clone()))?;
                            kb.class_members(c).clone()
                        }
                        other => entity_set(func, eval(kb, other, memo)?)?,
                    };
                    Ok(Denotation::Entities(left.intersection(&right).copied().collect()))
                }
                Function::Argmax | Function::Argmin => {
                    let set = entity_set(func, eval(kb, &args[0], memo)?)?;
                    let rel = relation(kb, &args[1])?;
                    Ok(Denotation::Entities(superlative(kb, &set, rel, func == Function::Argmax)))
                }
                Function::Lt | Function::Le | Function::Gt | Function::Ge => {
                    let value = match eval(kb, &args[0], memo)? {
                        Denotation::Literals(s) if s.len() == 1 => s.into_iter().next().unwrap(),
                        other => {
                            return Err(ExecError::TypeMismatch {
                                func,
                                expected: "a single literal",
                                found: format!("{} of size {}", other.describe(), other.len()),
                            })
                        }
                    };
                    let rel = relation(kb, &args[1])?;
                    let op = func.comparator().expect("comparative");
                    Ok(Denotation::Entities(comparative(kb, &value, rel, op)?))
                }
                Function::Count => Ok(Denotation::Count(entity_set(func, eval(kb, &args[0], memo)?)?.len())),
                Function::Cons | Function::Tc => {
                    let set = entity_set(func, eval(kb, &args[0], memo)?)?;
                    let rel = relation(kb, &args[1])?;
                    let constant = match &args[2] {
                        Program::Entity(name) => {
                            Some(Node::Entity(kb.entity_id(name).ok_or_else(|| ExecError::UnknownEntity(name.clone()))?))
                        }
                        Program::Literal(l) => kb.literal_id(l).map(Node::Literal),
                        other => return Err(ExecError::NotASet(other.to_string())),
                    };
                    let Some(c) = constant else { return Ok(Denotation::Entities(BTreeSet::new())) };
                    Ok(Denotation::Entities(
                        set.into_iter().filter(|&e| kb.has_edge(Node::Entity(e), rel, c)).collect(),
                    ))
                }
            }
        }
    }
}

/// Executes every subprogram in order and returns all denotations.
pub fn execute_all(kb: &KnowledgeBase, seq: &SubprogramSequence) -> Result<Vec<Denotation>, ExecError> {
    seq.validate()?;
    let mut memo = Vec::with_capacity(seq.len());
    for step in &seq.steps {
        let d = eval(kb, step, &memo)?;
        memo.push(d);
    }
    Ok(memo)
}

/// Executes a sequence and returns the answer subprogram's denotation.
pub fn execute(kb: &KnowledgeBase, seq: &SubprogramSequence) -> Result<Denotation, ExecError> {
    Ok(execute_all(kb, seq)?.pop().expect("validated non-empty"))
}

/// Executes a nested program directly.
pub fn execute_program(kb: &KnowledgeBase, p: &Program) -> Result<Denotation, ExecError> {
    eval(kb, p, &[])
}

/// Executes one subprogram against the denotations of earlier positions.
pub fn execute_step(kb: &KnowledgeBase, step: &Program, earlier: &[Denotation]) -> Result<Denotation, ExecError> {
    eval(kb, step, earlier)
}
