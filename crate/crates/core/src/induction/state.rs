use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::vocab::{SchemaFilter, EOS_TEXT};
use crate::kb::{ClassId, EntityId, KnowledgeBase, Literal, Node, RelationId};
use crate::scorer::{Candidate, CandidateKind};
use crate::sexpr::{execute_step, Denotation, ExecError, Function, Program, SubprogramSequence};

/// One decoding action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Open,
    Close,
    Eos,
    Func(Function),
    Relation(RelationId),
    Class(ClassId),
    /// Reference to store position `k` (1-based).
    SubRef(usize),
    Constant(Node),
}

impl Token {
    /// Index of the learned vector for syntax and function tokens.
    pub fn special_index(self) -> Option<usize> {
        match self {
            Token::Open => Some(0),
            Token::Close => Some(1),
            Token::Eos => Some(2),
            Token::Func(f) => Some(3 + Function::ALL.iter().position(|&g| g == f).unwrap()),
            _ => None,
        }
    }
}

/// Reduces large denotations to a seeded uniform sample before they are
/// used in KB queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingCap {
    /// Largest denotation queried in full; 0 disables sampling.
    pub max_entities: usize,
    pub seed: u64,
}

impl Default for SamplingCap {
    fn default() -> Self {
        SamplingCap { max_entities: 100, seed: 0 }
    }
}

impl SamplingCap {
    pub fn disabled() -> Self {
        SamplingCap { max_entities: 0, seed: 0 }
    }

    fn sample(&self, nodes: Vec<Node>, position: usize) -> Vec<Node> {
        if self.max_entities == 0 || nodes.len() <= self.max_entities {
            return nodes;
        }
        let seed = self.seed ^ (position as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, nodes.len(), self.max_entities).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| nodes[i]).collect()
    }
}

/// A stored subprogram with its cached execution.
#[derive(Debug, Clone)]
pub struct StoreEntry {
    /// The subprogram with `#k` references.
    pub program: Program,
    /// The same subprogram with references expanded.
    pub nested: Program,
    pub denotation: Denotation,
    /// Members used for KB queries (all of them unless capped).
    pub sample: Vec<Node>,
    /// False for the linked entities and literals the store starts with.
    pub composed: bool,
}

impl StoreEntry {
    fn sample_entities(&self) -> Vec<EntityId> {
        self.sample
            .iter()
            .filter_map(|n| match n {
                Node::Entity(e) => Some(*e),
                Node::Literal(_) => None,
            })
            .collect()
    }

    fn entity_set(&self) -> Option<&BTreeSet<EntityId>> {
        self.denotation.entities().filter(|s| !s.is_empty())
    }

    /// The value of a single comparable literal.
    fn comparable_value(&self) -> Option<&Literal> {
        match &self.denotation {
            Denotation::Literals(s) if s.len() == 1 => s.iter().next().filter(|l| l.tag().is_comparable()),
            _ => None,
        }
    }
}

/// Where the decoder is inside the grammar.
#[derive(Debug, Clone, PartialEq)]
pub enum Context {
    /// Between subprograms: `(` or EOS.
    Outside,
    /// After `(`: a function name.
    ExpectFunction,
    /// After a function name: a reference to the subprogram it expands.
    ExpectSubRef(Function),
    /// After `( F #k`: the second argument.
    ExpectArg(Function, usize),
    /// After `( CONS #k r`: the constant.
    ExpectConstant(Function, usize, RelationId),
    /// The subprogram is complete; only `)` remains.
    ExpectClose(Program),
    Closed,
}

/// Functions and, per function, the references that have at least one
/// non-empty expansion. Recomputed whenever the store grows.
#[derive(Debug, Clone, Default)]
struct Viability {
    subrefs: Vec<(Function, Vec<usize>)>,
}

impl Viability {
    fn of(&self, f: Function) -> &[usize] {
        self.subrefs.iter().find(|(g, _)| *g == f).map(|(_, v)| v.as_slice()).unwrap_or(&[])
    }
}

/// Decoder state. Cloning is cheap; [`Inducer::advance`] returns a new state.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub history: Vec<Token>,
    pub store: Vec<Arc<StoreEntry>>,
    pub context: Context,
    viability: Arc<Viability>,
    initial: usize,
}

impl DecoderState {
    pub fn step(&self) -> usize {
        self.history.len()
    }

    pub fn is_closed(&self) -> bool {
        self.context == Context::Closed
    }

    /// Number of store entries the state was initialized with.
    pub fn initial_len(&self) -> usize {
        self.initial
    }

    pub fn has_composed(&self) -> bool {
        self.store.len() > self.initial
    }

    /// The store as a subprogram sequence.
    pub fn sequence(&self) -> SubprogramSequence {
        SubprogramSequence { steps: self.store.iter().map(|e| e.program.clone()).collect() }
    }

    /// The last composed subprogram, once closed.
    pub fn answer(&self) -> Option<&StoreEntry> {
        if self.has_composed() {
            self.store.last().map(|e| e.as_ref())
        } else {
            None
        }
    }
}

#[derive(Debug, Error)]
pub enum InductionError {
    #[error("`{0}` is not in the knowledge base")]
    Unresolvable(String),
    #[error("token {token} is not admissible at step {step}")]
    Inadmissible { token: String, step: usize },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Tokens needed for the longest subprogram, `( CONS #k r c )`, plus EOS.
const LONGEST_TAIL: usize = 7;

/// Computes admissible tokens and applies them, against one knowledge base.
#[derive(Debug, Clone, Copy)]
pub struct Inducer<'a> {
    pub kb: &'a KnowledgeBase,
    pub cap: SamplingCap,
    pub max_steps: usize,
    /// When set, relations and classes outside it are never admissible.
    pub filter: Option<&'a SchemaFilter>,
}

impl<'a> Inducer<'a> {
    pub fn new(kb: &'a KnowledgeBase) -> Self {
        Inducer { kb, cap: SamplingCap::default(), max_steps: 40, filter: None }
    }

    pub fn with_cap(mut self, cap: SamplingCap) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_filter(mut self, filter: Option<&'a SchemaFilter>) -> Self {
        self.filter = filter;
        self
    }

    fn relation_ok(&self, r: RelationId) -> bool {
        self.filter.is_none_or(|f| f.relation(r))
    }

    fn class_ok(&self, c: ClassId) -> bool {
        self.filter.is_none_or(|f| f.class(c))
    }

    fn entry(&self, program: Program, nested: Program, denotation: Denotation, position: usize, composed: bool) -> StoreEntry {
        let sample = self.cap.sample(denotation.nodes(self.kb), position);
        StoreEntry { program, nested, denotation, sample, composed }
    }

    /// A state whose store holds one singleton subprogram per entity and
    /// literal, in the given order.
    pub fn init_state(&self, entities: &[String], literals: &[Literal]) -> Result<DecoderState, InductionError> {
        let mut store = Vec::new();
        for name in entities {
            let e = self.kb.entity_id(name).ok_or_else(|| InductionError::Unresolvable(name.clone()))?;
            let p = Program::Entity(name.clone());
            let d = Denotation::Entities(BTreeSet::from([e]));
            store.push(Arc::new(self.entry(p.clone(), p, d, store.len(), false)));
        }
        for lit in literals {
            let p = Program::Literal(lit.clone());
            let d = Denotation::Literals(BTreeSet::from([lit.clone()]));
            store.push(Arc::new(self.entry(p.clone(), p, d, store.len(), false)));
        }
        let initial = store.len();
        let viability = Arc::new(self.viability(&store));
        Ok(DecoderState { history: Vec::new(), store, context: Context::Outside, viability, initial })
    }

    /// Second-argument tokens for `( F #k`, restricted to the filter.
    fn arg_tokens(&self, store: &[Arc<StoreEntry>], func: Function, k: usize) -> Vec<Token> {
        let entry = &store[k - 1];
        let kb = self.kb;
        let rels = |set: BTreeSet<RelationId>| -> Vec<Token> {
            set.into_iter().filter(|&r| self.relation_ok(r)).map(Token::Relation).collect()
        };
        match func {
            Function::Join => {
                if matches!(entry.denotation, Denotation::Count(_)) {
                    return Vec::new();
                }
                rels(kb.outgoing_relations(&entry.sample))
            }
            Function::And => {
                let Some(own) = entry.entity_set() else { return Vec::new() };
                let mut out: Vec<Token> = kb
                    .classes_of(&entry.sample_entities())
                    .into_iter()
                    .filter(|&c| self.class_ok(c))
                    .map(Token::Class)
                    .collect();
                for (i, other) in store.iter().enumerate() {
                    if i + 1 == k {
                        continue;
                    }
                    if let Some(set) = other.entity_set() {
                        if own.intersection(set).next().is_some() {
                            out.push(Token::SubRef(i + 1));
                        }
                    }
                }
                out
            }
            Function::Argmax | Function::Argmin => {
                if entry.entity_set().is_none() {
                    return Vec::new();
                }
                rels(kb.numeric_relations(&entry.sample_entities()))
            }
            Function::Lt | Function::Le | Function::Gt | Function::Ge => {
                let Some(value) = entry.comparable_value() else { return Vec::new() };
                let op = func.comparator().expect("comparative");
                rels(kb.comparative_relations(value, op).expect("comparable value"))
            }
            Function::Count => {
                if entry.entity_set().is_some() {
                    vec![Token::Close]
                } else {
                    Vec::new()
                }
            }
            Function::Cons | Function::Tc => {
                if entry.entity_set().is_none() {
                    return Vec::new();
                }
                rels(kb.constraint_relations(&entry.sample_entities(), func == Function::Tc))
            }
        }
    }

    fn viability(&self, store: &[Arc<StoreEntry>]) -> Viability {
        let subrefs = Function::ALL
            .into_iter()
            .map(|f| {
                let ks = (1..=store.len()).filter(|&k| !self.arg_tokens(store, f, k).is_empty()).collect();
                (f, ks)
            })
            .collect();
        Viability { subrefs }
    }

    /// The admissible tokens, sorted. Empty exactly when the state is
    /// closed or no subprogram can be started from the initial store.
    pub fn admissible(&self, state: &DecoderState) -> Vec<Token> {
        let mut out = match &state.context {
            Context::Closed => Vec::new(),
            Context::Outside => {
                let mut out = Vec::new();
                let any_viable = state.viability.subrefs.iter().any(|(_, ks)| !ks.is_empty());
                if any_viable && state.step() + LONGEST_TAIL <= self.max_steps {
                    out.push(Token::Open);
                }
                if state.has_composed() {
                    out.push(Token::Eos);
                }
                out
            }
            Context::ExpectFunction => state
                .viability
                .subrefs
                .iter()
                .filter(|(_, ks)| !ks.is_empty())
                .map(|(f, _)| Token::Func(*f))
                .collect(),
            Context::ExpectSubRef(f) => state.viability.of(*f).iter().map(|&k| Token::SubRef(k)).collect(),
            Context::ExpectArg(Function::Count, _) | Context::ExpectClose(_) => vec![Token::Close],
            Context::ExpectArg(f, k) => self.arg_tokens(&state.store, *f, *k),
            Context::ExpectConstant(f, k, r) => {
                let heads = state.store[k - 1].sample_entities();
                self.kb
                    .constraint_constants(&heads, *r, *f == Function::Tc)
                    .into_iter()
                    .map(Token::Constant)
                    .collect()
            }
        };
        out.sort();
        out
    }

    /// Applies `token`, checking admissibility first.
    pub fn advance(&self, state: &DecoderState, token: Token) -> Result<DecoderState, InductionError> {
        if !self.admissible(state).contains(&token) {
            return Err(InductionError::Inadmissible { token: self.token_text(state, token), step: state.step() });
        }
        self.advance_unchecked(state, token)
    }

    /// Applies a token already known to be admissible.
    pub fn advance_unchecked(&self, state: &DecoderState, token: Token) -> Result<DecoderState, InductionError> {
        let mut next = state.clone();
        next.history.push(token);
        let relation = |r: RelationId| Program::Relation(self.kb.relation_name(r));
        next.context = match (&state.context, token) {
            (Context::Outside, Token::Open) => Context::ExpectFunction,
            (Context::Outside, Token::Eos) => Context::Closed,
            (Context::ExpectFunction, Token::Func(f)) => Context::ExpectSubRef(f),
            (Context::ExpectSubRef(f), Token::SubRef(k)) => Context::ExpectArg(*f, k),
            (Context::ExpectArg(Function::Count, k), Token::Close) => {
                return self.close(next, Program::Call(Function::Count, vec![Program::SubRef(*k)]));
            }
            (Context::ExpectArg(f @ (Function::Cons | Function::Tc), k), Token::Relation(r)) => {
                Context::ExpectConstant(*f, *k, r)
            }
            (Context::ExpectArg(f, k), Token::Relation(r)) => {
                Context::ExpectClose(Program::Call(*f, vec![Program::SubRef(*k), relation(r)]))
            }
            (Context::ExpectArg(Function::And, k), Token::SubRef(v)) => {
                Context::ExpectClose(Program::Call(Function::And, vec![Program::SubRef(*k), Program::SubRef(v)]))
            }
            (Context::ExpectArg(Function::And, k), Token::Class(c)) => Context::ExpectClose(Program::Call(
                Function::And,
                vec![Program::SubRef(*k), Program::Class(self.kb.class_name(c).to_string())],
            )),
            (Context::ExpectConstant(f, k, r), Token::Constant(n)) => {
                let constant = match n {
                    Node::Entity(e) => Program::Entity(self.kb.entity_name(e).to_string()),
                    Node::Literal(l) => Program::Literal(self.kb.literal(l).clone()),
                };
                Context::ExpectClose(Program::Call(*f, vec![Program::SubRef(*k), relation(*r), constant]))
            }
            (Context::ExpectClose(p), Token::Close) => {
                let p = p.clone();
                return self.close(next, p);
            }
            _ => {
                return Err(InductionError::Inadmissible { token: self.token_text(state, token), step: state.step() });
            }
        };
        Ok(next)
    }

    fn close(&self, mut next: DecoderState, program: Program) -> Result<DecoderState, InductionError> {
        let denotations: Vec<Denotation> = next.store.iter().map(|e| e.denotation.clone()).collect();
        let denotation = execute_step(self.kb, &program, &denotations)?;
        let nested = match &program {
            Program::Call(f, args) => Program::Call(
                *f,
                args.iter()
                    .map(|a| match a {
                        Program::SubRef(k) => next.store[k - 1].nested.clone(),
                        other => other.clone(),
                    })
                    .collect(),
            ),
            leaf => leaf.clone(),
        };
        let position = next.store.len();
        next.store.push(Arc::new(self.entry(program, nested, denotation, position, true)));
        next.viability = Arc::new(self.viability(&next.store));
        next.context = Context::Outside;
        Ok(next)
    }

    /// Canonical text of a token in a state. References print as the
    /// program they stand for.
    pub fn token_text(&self, state: &DecoderState, token: Token) -> String {
        match token {
            Token::Open => "(".into(),
            Token::Close => ")".into(),
            Token::Eos => EOS_TEXT.into(),
            Token::Func(f) => f.name().into(),
            Token::Relation(r) => self.kb.relation_name(r),
            Token::Class(c) => self.kb.class_name(c).into(),
            Token::SubRef(k) => match state.store.get(k.wrapping_sub(1)) {
                Some(e) => e.nested.to_string(),
                None => format!("#{k}"),
            },
            Token::Constant(n) => self.kb.node_name(n),
        }
    }

    /// What the scorer sees for each token.
    pub fn candidates(&self, state: &DecoderState, tokens: &[Token]) -> Vec<Candidate> {
        tokens
            .iter()
            .map(|&t| {
                let text = self.token_text(state, t);
                let (surface, kind) = match t {
                    Token::Relation(_) | Token::Class(_) => (text.clone(), CandidateKind::Schema),
                    Token::SubRef(k) => {
                        let surface = match &state.store[k - 1].nested {
                            Program::Literal(l) => l.value_text(),
                            p => p.to_string(),
                        };
                        (surface, CandidateKind::SubRef { distance: state.store.len() - k })
                    }
                    Token::Constant(Node::Literal(l)) => (self.kb.literal(l).value_text(), CandidateKind::Constant),
                    Token::Constant(_) => (text.clone(), CandidateKind::Constant),
                    special => (text.clone(), CandidateKind::Special { index: special.special_index().unwrap() }),
                };
                Candidate { text, surface, kind }
            })
            .collect()
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Open => f.write_str("("),
            Token::Close => f.write_str(")"),
            Token::Eos => f.write_str(EOS_TEXT),
            Token::Func(func) => write!(f, "{func}"),
            Token::Relation(r) => write!(f, "relation:{}{}", r.base_index(), if r.is_inverse() { "_inv" } else { "" }),
            Token::Class(c) => write!(f, "class:{}", c.index()),
            Token::SubRef(k) => write!(f, "#{k}"),
            Token::Constant(n) => write!(f, "constant:{n:?}"),
        }
    }
}
