//! Random knowledge bases and programs, plus brute-force oracles that work
//! from the raw triple list alone.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeSet;

pub mod scorer_oracle;
pub mod wire_fuzz;

use kbqa_core::induction::{DecoderState, Inducer, Token};
use kbqa_core::kb::{Comparator, KbBuilder, KnowledgeBase, Literal, LiteralTag, Node, Object};
use kbqa_core::sexpr::{Denotation, Function, Program};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ENTITY_RELATIONS: [&str; 4] = ["ns.t.link0", "ns.t.link1", "ns.t.link2", "ns.t.link3"];
pub const NUMERIC_RELATIONS: [&str; 2] = ["ns.t.num0", "ns.t.num1"];
pub const DATETIME_RELATION: &str = "ns.t.when";
pub const STRING_RELATION: &str = "ns.t.label";
/// Carries both numeric and datetime objects.
pub const MIXED_RELATION: &str = "ns.t.mixed";
pub const CLASSES: [&str; 3] = ["ns.kind0", "ns.kind1", "ns.kind2"];

pub fn numeric_pool() -> Vec<Literal> {
    [1.0, 2.0, 2.5, 7.0, 10.0].iter().map(|&v| Literal::Numeric(v)).collect()
}

pub fn datetime_pool() -> Vec<Literal> {
    ["1990", "2000", "2000-05", "2000-05-03", "2010-01-01"]
        .iter()
        .map(|s| Literal::parse_tagged(s, LiteralTag::Datetime).unwrap())
        .collect()
}

pub fn string_pool() -> Vec<Literal> {
    vec![Literal::String("red".into()), Literal::String("blue".into())]
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawObject {
    Entity(String),
    Literal(Literal),
}

/// A knowledge base as plain records.
#[derive(Debug, Clone)]
pub struct RawKb {
    pub entities: Vec<String>,
    pub triples: Vec<(String, String, RawObject)>,
    pub classes: Vec<(String, String)>,
}

impl RawKb {
    pub fn random(rng: &mut ChaCha8Rng, max_records: usize) -> RawKb {
        let n = rng.gen_range(6..=20);
        let entities: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
        let records = rng.gen_range(max_records / 3..=max_records);
        let mut triples: Vec<(String, String, RawObject)> = Vec::new();
        let mut classes: Vec<(String, String)> = Vec::new();
        let (nums, dates, strs) = (numeric_pool(), datetime_pool(), string_pool());
        for _ in 0..records {
            let s = entities.choose(rng).unwrap().clone();
            let roll = rng.gen_range(0..100);
            if roll < 15 {
                let c = CLASSES.choose(rng).unwrap().to_string();
                if !classes.contains(&(s.clone(), c.clone())) {
                    classes.push((s, c));
                }
                continue;
            }
            let (r, o) = match roll {
                15..=59 => (ENTITY_RELATIONS.choose(rng).unwrap().to_string(), RawObject::Entity(entities.choose(rng).unwrap().clone())),
                60..=74 => (NUMERIC_RELATIONS.choose(rng).unwrap().to_string(), RawObject::Literal(nums.choose(rng).unwrap().clone())),
                75..=84 => (DATETIME_RELATION.to_string(), RawObject::Literal(dates.choose(rng).unwrap().clone())),
                85..=91 => (STRING_RELATION.to_string(), RawObject::Literal(strs.choose(rng).unwrap().clone())),
                _ => {
                    let pool = if rng.gen_bool(0.5) { &nums } else { &dates };
                    (MIXED_RELATION.to_string(), RawObject::Literal(pool.choose(rng).unwrap().clone()))
                }
            };
            if !triples.iter().any(|t| t.0 == s && t.1 == r && t.2 == o) {
                triples.push((s, r, o));
            }
        }
        RawKb { entities, triples, classes }
    }

    pub fn build(&self) -> KnowledgeBase {
        let mut b = KbBuilder::new();
        for e in &self.entities {
            b.entity(e).unwrap();
        }
        for (s, r, o) in &self.triples {
            let o = match o {
                RawObject::Entity(e) => Object::Entity(e.clone()),
                RawObject::Literal(l) => Object::Literal(l.clone()),
            };
            b.add(s, r, o).unwrap();
        }
        for (e, c) in &self.classes {
            b.add_class(e, c).unwrap();
        }
        b.build()
    }

    pub fn relation_names(&self) -> Vec<String> {
        let base: BTreeSet<&String> = self.triples.iter().map(|t| &t.1).collect();
        base.into_iter().flat_map(|r| [r.clone(), format!("{r}_inv")]).collect()
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.1.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn literals(&self) -> Vec<Literal> {
        let mut out: Vec<Literal> = Vec::new();
        for t in &self.triples {
            if let RawObject::Literal(l) = &t.2 {
                if !out.contains(l) {
                    out.push(l.clone());
                }
            }
        }
        out
    }

    fn literal_tags(&self, rel: &str) -> BTreeSet<LiteralTag> {
        self.triples
            .iter()
            .filter(|t| t.1 == rel)
            .filter_map(|t| match &t.2 {
                RawObject::Literal(l) => Some(l.tag()),
                _ => None,
            })
            .collect()
    }
}

/// Oracle denotation: names instead of ids.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleValue {
    Entities(BTreeSet<String>),
    Literals(Vec<Literal>),
    Count(usize),
}

impl OracleValue {
    pub fn is_empty(&self) -> bool {
        match self {
            OracleValue::Entities(s) => s.is_empty(),
            OracleValue::Literals(s) => s.is_empty(),
            OracleValue::Count(n) => *n == 0,
        }
    }

    pub fn from_denotation(kb: &KnowledgeBase, d: &Denotation) -> OracleValue {
        match d {
            Denotation::Entities(s) => OracleValue::Entities(s.iter().map(|&e| kb.entity_name(e).to_string()).collect()),
            Denotation::Literals(s) => OracleValue::Literals(sorted(s.iter().cloned().collect())),
            Denotation::Count(n) => OracleValue::Count(*n),
        }
    }
}

fn sorted(mut v: Vec<Literal>) -> Vec<Literal> {
    v.sort_by_key(|l| l.to_string());
    v.dedup();
    v
}

/// Straightforward recursive evaluation over the raw records. `Err(())`
/// marks a type error.
pub fn oracle_eval(raw: &RawKb, p: &Program, memo: &[OracleValue]) -> Result<OracleValue, ()> {
    let entities = |v: OracleValue| match v {
        OracleValue::Entities(s) => Ok(s),
        _ => Err(()),
    };
    let rel_name = |p: &Program| match p {
        Program::Relation(r) => Ok(r.clone()),
        _ => Err(()),
    };
    match p {
        Program::Entity(e) => Ok(OracleValue::Entities(BTreeSet::from([e.clone()]))),
        Program::Literal(l) => Ok(OracleValue::Literals(vec![l.clone()])),
        Program::SubRef(k) => memo.get(k - 1).cloned().ok_or(()),
        Program::Class(_) | Program::Relation(_) => Err(()),
        Program::Call(f, args) => match f {
            Function::Join => {
                let heads = oracle_eval(raw, &args[0], memo)?;
                let r = rel_name(&args[1])?;
                let head_objects: Vec<RawObject> = match heads {
                    OracleValue::Entities(s) => s.into_iter().map(RawObject::Entity).collect(),
                    OracleValue::Literals(s) => s.into_iter().map(RawObject::Literal).collect(),
                    OracleValue::Count(_) => return Err(()),
                };
                if let Some(base) = r.strip_suffix("_inv") {
                    let out = raw
                        .triples
                        .iter()
                        .filter(|t| t.1 == base && head_objects.contains(&t.2))
                        .map(|t| t.0.clone())
                        .collect();
                    return Ok(OracleValue::Entities(out));
                }
                let objs: Vec<&RawObject> = raw
                    .triples
                    .iter()
                    .filter(|t| t.1 == r && head_objects.contains(&RawObject::Entity(t.0.clone())))
                    .map(|t| &t.2)
                    .collect();
                if raw.literal_tags(&r).is_empty() {
                    Ok(OracleValue::Entities(
                        objs.into_iter()
                            .filter_map(|o| match o {
                                RawObject::Entity(e) => Some(e.clone()),
                                _ => None,
                            })
                            .collect(),
                    ))
                } else {
                    Ok(OracleValue::Literals(sorted(
                        objs.into_iter()
                            .filter_map(|o| match o {
                                RawObject::Literal(l) => Some(l.clone()),
                                _ => None,
                            })
                            .collect(),
                    )))
                }
            }
            Function::And => {
                let left = entities(oracle_eval(raw, &args[0], memo)?)?;
                let right: BTreeSet<String> = match &args[1] {
                    Program::Class(c) => raw.classes.iter().filter(|x| &x.1 == c).map(|x| x.0.clone()).collect(),
                    other => entities(oracle_eval(raw, other, memo)?)?,
                };
                Ok(OracleValue::Entities(left.intersection(&right).cloned().collect()))
            }
            Function::Argmax | Function::Argmin => {
                let set = entities(oracle_eval(raw, &args[0], memo)?)?;
                let r = rel_name(&args[1])?;
                if r.ends_with("_inv") {
                    return Ok(OracleValue::Entities(BTreeSet::new()));
                }
                let count = |tag| raw.triples.iter().filter(|t| t.1 == r && matches!(&t.2, RawObject::Literal(l) if l.tag() == tag)).count();
                let (n, d) = (count(LiteralTag::Numeric), count(LiteralTag::Datetime));
                let tag = match (n, d) {
                    (0, 0) => return Ok(OracleValue::Entities(BTreeSet::new())),
                    (n, d) if n >= d => LiteralTag::Numeric,
                    _ => LiteralTag::Datetime,
                };
                let want = if *f == Function::Argmax { Ordering::Greater } else { Ordering::Less };
                // every (entity, value) pair, then the extreme value, then its holders
                let pairs: Vec<(String, Literal)> = raw
                    .triples
                    .iter()
                    .filter(|t| t.1 == r && set.contains(&t.0))
                    .filter_map(|t| match &t.2 {
                        RawObject::Literal(l) if l.tag() == tag => Some((t.0.clone(), l.clone())),
                        _ => None,
                    })
                    .collect();
                let Some(extreme) = pairs
                    .iter()
                    .map(|p| &p.1)
                    .find(|v| pairs.iter().all(|q| q.1.extreme_cmp(v) != Some(want)))
                else {
                    return Ok(OracleValue::Entities(BTreeSet::new()));
                };
                Ok(OracleValue::Entities(
                    pairs.iter().filter(|p| p.1.extreme_cmp(extreme) == Some(Ordering::Equal)).map(|p| p.0.clone()).collect(),
                ))
            }
            Function::Lt | Function::Le | Function::Gt | Function::Ge => {
                let value = match oracle_eval(raw, &args[0], memo)? {
                    OracleValue::Literals(s) if s.len() == 1 => s[0].clone(),
                    _ => return Err(()),
                };
                let r = rel_name(&args[1])?;
                if r.ends_with("_inv") {
                    return Ok(OracleValue::Entities(BTreeSet::new()));
                }
                let tags = raw.literal_tags(&r);
                if tags.len() == 1 && !tags.contains(&value.tag()) {
                    return Err(());
                }
                if !value.tag().is_comparable() {
                    return Err(());
                }
                let op = match f {
                    Function::Lt => Comparator::Lt,
                    Function::Le => Comparator::Le,
                    Function::Gt => Comparator::Gt,
                    _ => Comparator::Ge,
                };
                Ok(OracleValue::Entities(
                    raw.triples
                        .iter()
                        .filter(|t| t.1 == r)
                        .filter(|t| matches!(&t.2, RawObject::Literal(l) if l.tag() == value.tag() && l.compare(op, &value).unwrap()))
                        .map(|t| t.0.clone())
                        .collect(),
                ))
            }
            Function::Count => Ok(OracleValue::Count(entities(oracle_eval(raw, &args[0], memo)?)?.len())),
            Function::Cons | Function::Tc => {
                let set = entities(oracle_eval(raw, &args[0], memo)?)?;
                let r = rel_name(&args[1])?;
                let c = match &args[2] {
                    Program::Entity(e) => RawObject::Entity(e.clone()),
                    Program::Literal(l) => RawObject::Literal(l.clone()),
                    _ => return Err(()),
                };
                let keep = |e: &String| match r.strip_suffix("_inv") {
                    Some(base) => matches!(&c, RawObject::Entity(ce) if raw.triples.iter().any(|t| &t.0 == ce && t.1 == base && t.2 == RawObject::Entity(e.clone()))),
                    None => raw.triples.iter().any(|t| &t.0 == e && t.1 == r && t.2 == c),
                };
                Ok(OracleValue::Entities(set.into_iter().filter(|e| keep(e)).collect()))
            }
        },
    }
}

/// A random program over the KB's vocabulary. Mostly type-correct, with
/// some deliberate mismatches that both executors must reject.
pub fn random_program(raw: &RawKb, rng: &mut ChaCha8Rng, depth: usize) -> Program {
    let p = random_set(raw, rng, depth);
    if rng.gen_bool(0.15) {
        Program::Call(Function::Count, vec![p])
    } else {
        p
    }
}

fn random_relation(raw: &RawKb, rng: &mut ChaCha8Rng) -> Program {
    Program::Relation(raw.relation_names().choose(rng).unwrap().clone())
}

fn random_literal(raw: &RawKb, rng: &mut ChaCha8Rng) -> Literal {
    let mut pool = numeric_pool();
    pool.extend(datetime_pool());
    if rng.gen_bool(0.1) {
        pool.extend(string_pool());
    }
    pool.push(Literal::Numeric(rng.gen_range(0..12) as f64));
    let kb_literals = raw.literals();
    if !kb_literals.is_empty() && rng.gen_bool(0.5) {
        return kb_literals.choose(rng).unwrap().clone();
    }
    pool.choose(rng).unwrap().clone()
}

fn random_set(raw: &RawKb, rng: &mut ChaCha8Rng, depth: usize) -> Program {
    if depth == 0 || rng.gen_bool(0.2) {
        return Program::Entity(raw.entities.choose(rng).unwrap().clone());
    }
    let sub = |rng: &mut ChaCha8Rng| random_set(raw, rng, depth - 1);
    match rng.gen_range(0..10) {
        0..=3 => {
            let head = if rng.gen_bool(0.15) { Program::Literal(random_literal(raw, rng)) } else { sub(rng) };
            Program::Call(Function::Join, vec![head, random_relation(raw, rng)])
        }
        4 => {
            let classes = raw.class_names();
            let right = if !classes.is_empty() && rng.gen_bool(0.5) {
                Program::Class(classes.choose(rng).unwrap().clone())
            } else {
                sub(rng)
            };
            Program::Call(Function::And, vec![sub(rng), right])
        }
        5 => {
            let f = *[Function::Argmax, Function::Argmin].choose(rng).unwrap();
            Program::Call(f, vec![sub(rng), random_relation(raw, rng)])
        }
        6 | 7 => {
            let f = *[Function::Lt, Function::Le, Function::Gt, Function::Ge].choose(rng).unwrap();
            let value = if rng.gen_bool(0.8) {
                Program::Literal(random_literal(raw, rng))
            } else {
                // a literal-valued set that may hold several values
                let known = raw.relation_names();
                let present: Vec<&str> =
                    [NUMERIC_RELATIONS[0], DATETIME_RELATION].into_iter().filter(|r| known.iter().any(|k| k == r)).collect();
                let r = match present.choose(rng) {
                    Some(r) => Program::Relation(r.to_string()),
                    None => random_relation(raw, rng),
                };
                Program::Call(Function::Join, vec![sub(rng), r])
            };
            Program::Call(f, vec![value, random_relation(raw, rng)])
        }
        8 => {
            let constant = if rng.gen_bool(0.5) {
                Program::Entity(raw.entities.choose(rng).unwrap().clone())
            } else {
                Program::Literal(random_literal(raw, rng))
            };
            Program::Call(Function::Cons, vec![sub(rng), random_relation(raw, rng), constant])
        }
        _ => {
            let constant = Program::Literal(datetime_pool().choose(rng).unwrap().clone());
            Program::Call(Function::Tc, vec![sub(rng), random_relation(raw, rng), constant])
        }
    }
}

/// Every token the vocabulary could ever offer in `state`.
pub fn all_tokens(kb: &KnowledgeBase, state: &DecoderState) -> Vec<Token> {
    let mut out = vec![Token::Open, Token::Close, Token::Eos];
    out.extend(Function::ALL.into_iter().map(Token::Func));
    for r in kb.relations() {
        out.push(Token::Relation(r));
        out.push(Token::Relation(r.inverted()));
    }
    out.extend(kb.classes().map(Token::Class));
    out.extend((1..=state.store.len()).map(Token::SubRef));
    out.extend(kb.entities().map(|e| Node::Entity(e)).map(Token::Constant));
    out.extend(kb.literal_ids().map(|l| Node::Literal(l)).map(Token::Constant));
    out
}

/// Token sequences `( F #k args.. )` of every one-step program over the
/// store that is well-typed and executes to a non-empty value under the
/// brute-force oracle.
pub fn complete_steps(raw: &RawKb, kb: &KnowledgeBase, state: &DecoderState) -> Vec<Vec<Token>> {
    let memo: Vec<OracleValue> = {
        let mut memo = Vec::new();
        for e in &state.store {
            memo.push(oracle_eval(raw, &e.nested, &[]).expect("store entries execute"));
        }
        memo
    };
    let n = state.store.len();
    let rel_tokens: Vec<Token> = kb.relations().flat_map(|r| [Token::Relation(r), Token::Relation(r.inverted())]).collect();
    let name = |t: Token| -> Program {
        match t {
            Token::Relation(r) => Program::Relation(kb.relation_name(r)),
            Token::Class(c) => Program::Class(kb.class_name(c).to_string()),
            Token::SubRef(k) => Program::SubRef(k),
            Token::Constant(Node::Entity(e)) => Program::Entity(kb.entity_name(e).to_string()),
            Token::Constant(Node::Literal(l)) => Program::Literal(kb.literal(l).clone()),
            other => panic!("not an argument token: {other:?}"),
        }
    };
    let constants: Vec<Token> = kb
        .entities()
        .map(Node::Entity)
        .chain(kb.literal_ids().map(Node::Literal))
        .map(Token::Constant)
        .collect();
    let mut out = Vec::new();
    let mut try_step = |f: Function, args: Vec<Token>| {
        let mut prog_args = vec![Program::SubRef(match args[0] {
            Token::SubRef(k) => k,
            _ => unreachable!(),
        })];
        prog_args.extend(args[1..].iter().map(|&t| name(t)));
        let p = Program::Call(f, prog_args);
        if let Ok(v) = oracle_eval(raw, &p, &memo) {
            if !v.is_empty() {
                let mut seq = vec![Token::Open, Token::Func(f)];
                seq.extend(args);
                seq.push(Token::Close);
                out.push(seq);
            }
        }
    };
    for k in 1..=n {
        let sk = Token::SubRef(k);
        for f in Function::ALL {
            match f {
                Function::Count => try_step(f, vec![sk]),
                Function::And => {
                    for c in kb.classes() {
                        try_step(f, vec![sk, Token::Class(c)]);
                    }
                    for v in (1..=n).filter(|&v| v != k) {
                        try_step(f, vec![sk, Token::SubRef(v)]);
                    }
                }
                Function::Cons | Function::Tc => {
                    // skip the constant scan when the head is not an entity set
                    if !matches!(memo[k - 1], OracleValue::Entities(_)) {
                        continue;
                    }
                    for &r in &rel_tokens {
                        for &c in &constants {
                            if f == Function::Tc && !kb.is_datetime(match c {
                                Token::Constant(n) => n,
                                _ => unreachable!(),
                            }) {
                                continue;
                            }
                            try_step(f, vec![sk, r, c]);
                        }
                    }
                }
                _ => {
                    for &r in &rel_tokens {
                        try_step(f, vec![sk, r]);
                    }
                }
            }
        }
    }
    out
}

/// Admissible tokens by brute force: the next tokens of complete steps that
/// extend the current partial step, plus the rules for `(` and EOS.
pub fn oracle_admissible(inducer: &Inducer<'_>, state: &DecoderState, steps: &[Vec<Token>]) -> Vec<Token> {
    if state.history.last() == Some(&Token::Eos) {
        return Vec::new();
    }
    let partial: Vec<Token> = {
        let mut cur = Vec::new();
        for &t in &state.history {
            cur.push(t);
            if t == Token::Close {
                cur.clear();
            }
        }
        cur
    };
    let mut out: BTreeSet<Token> = BTreeSet::new();
    if partial.is_empty() {
        if !steps.is_empty() && state.step() + 7 <= inducer.max_steps {
            out.insert(Token::Open);
        }
        if state.store.len() > state.initial_len() {
            out.insert(Token::Eos);
        }
    } else {
        for s in steps {
            if s.len() > partial.len() && s[..partial.len()] == partial[..] {
                out.insert(s[partial.len()]);
            }
        }
    }
    out.into_iter().collect()
}

/// Random linked entities and literals for a store.
pub fn random_store(raw: &RawKb, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<Literal>) {
    let k = rng.gen_range(1..=3);
    let mut entities: Vec<String> = raw.entities.choose_multiple(rng, k).cloned().collect();
    entities.shuffle(rng);
    let mut literals = Vec::new();
    if rng.gen_bool(0.4) {
        literals.push(random_literal(raw, rng));
    }
    (entities, literals)
}

fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome counts of a trial.
#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub cases: usize,
    pub kbs: usize,
    /// Cases whose result was a non-empty value (executor) or a finished
    /// walk (walks).
    pub positive: usize,
}

/// Executes random programs nested, denested and printed-then-parsed, and
/// compares each with the brute-force evaluation.
pub fn executor_trial(seed: u64, kbs: usize, per_kb: usize) -> Result<Tally, String> {
    use kbqa_core::sexpr::{denest, execute, execute_program, parse};
    let mut tally = Tally::default();
    for i in 0..kbs {
        let mut r = rng(seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
        let raw = RawKb::random(&mut r, 200);
        let kb = raw.build();
        tally.kbs += 1;
        for _ in 0..per_kb {
            let depth = r.gen_range(1..=4);
            let p = random_program(&raw, &mut r, depth);
            let expected = oracle_eval(&raw, &p, &[]);
            let nested = execute_program(&kb, &p).map(|d| OracleValue::from_denotation(&kb, &d));
            let seq = denest(&p);
            let stepped = execute(&kb, &seq).map(|d| OracleValue::from_denotation(&kb, &d));
            let text = p.to_string();
            let reparsed = parse(&text, &kb).map_err(|e| format!("`{text}` does not parse: {e}"))?;
            if reparsed != p {
                return Err(format!("`{text}` parses to a different program"));
            }
            let ok = |got: &Result<OracleValue, _>| match (&expected, got) {
                (Ok(a), Ok(b)) => a == b,
                (Err(()), Err(_)) => true,
                _ => false,
            };
            if !ok(&nested) || !ok(&stepped) {
                return Err(format!("kb {i}: `{text}`: oracle {expected:?}, nested {nested:?}, denested {stepped:?}"));
            }
            if matches!(&expected, Ok(v) if !v.is_empty()) {
                tally.positive += 1;
            }
            tally.cases += 1;
        }
    }
    Ok(tally)
}

/// Walks random admissible paths and compares every visited state's
/// admissible set with the brute-force enumeration.
pub fn admissible_trial(seed: u64, min_states: usize) -> Result<Tally, String> {
    use kbqa_core::induction::SamplingCap;
    let mut tally = Tally::default();
    let mut kb_index = 0u64;
    while tally.cases < min_states {
        let mut r = rng(seed.wrapping_mul(7_919).wrapping_add(kb_index));
        kb_index += 1;
        let raw = RawKb::random(&mut r, 80);
        let kb = raw.build();
        tally.kbs += 1;
        let inducer = Inducer::new(&kb).with_cap(SamplingCap::disabled()).with_max_steps(r.gen_range(8..=30));
        for _ in 0..4 {
            let (entities, literals) = random_store(&raw, &mut r);
            let mut state = inducer.init_state(&entities, &literals).map_err(|e| e.to_string())?;
            let mut steps = complete_steps(&raw, &kb, &state);
            let mut store_len = state.store.len();
            loop {
                if state.store.len() != store_len {
                    steps = complete_steps(&raw, &kb, &state);
                    store_len = state.store.len();
                }
                let got = inducer.admissible(&state);
                let want = oracle_admissible(&inducer, &state, &steps);
                tally.cases += 1;
                if got != want {
                    let show = |ts: &[Token]| ts.iter().map(|&t| inducer.token_text(&state, t)).collect::<Vec<_>>();
                    return Err(format!(
                        "kb {}: after {:?}: admissible {:?}, oracle {:?}",
                        kb_index - 1,
                        show(&state.history),
                        show(&got),
                        show(&want)
                    ));
                }
                let Some(&t) = got.choose(&mut r) else { break };
                state = inducer.advance(&state, t).map_err(|e| e.to_string())?;
            }
            tally.positive += 1;
        }
    }
    Ok(tally)
}

/// Follows uniformly random admissible tokens to the end and checks that
/// every finished sequence parses back and executes to a non-empty value.
pub fn walk_trial(seed: u64, walks: usize) -> Result<Tally, String> {
    use kbqa_core::induction::SamplingCap;
    use kbqa_core::sexpr::{execute, execute_program, parse, SubprogramSequence};
    let mut tally = Tally::default();
    let mut r = rng(seed);
    let mut raw = RawKb::random(&mut r, 200);
    let mut kb = raw.build();
    for w in 0..walks {
        if w % 25 == 0 {
            raw = RawKb::random(&mut r, 200);
            kb = raw.build();
            tally.kbs += 1;
        }
        // small caps exercise sampled admissible sets
        let cap = match r.gen_range(0..3) {
            0 => SamplingCap::disabled(),
            1 => SamplingCap { max_entities: 2, seed: r.gen() },
            _ => SamplingCap::default(),
        };
        let inducer = Inducer::new(&kb).with_cap(cap).with_max_steps(r.gen_range(8..=40));
        let (entities, literals) = random_store(&raw, &mut r);
        let mut state = inducer.init_state(&entities, &literals).map_err(|e| e.to_string())?;
        tally.cases += 1;
        if inducer.admissible(&state).is_empty() {
            // a dead initial store is a legitimate end
            continue;
        }
        while !state.is_closed() {
            let ts = inducer.admissible(&state);
            let Some(&t) = ts.choose(&mut r) else {
                return Err(format!("dead end after {:?}", state.history));
            };
            state = inducer.advance(&state, t).map_err(|e| e.to_string())?;
        }
        let seq = state.sequence();
        let text = seq.to_string();
        let parsed = SubprogramSequence::parse(&text, &kb).map_err(|e| format!("`{text}` does not parse: {e}"))?;
        let d = execute(&kb, &parsed).map_err(|e| format!("`{text}` fails: {e}"))?;
        if d.is_empty() {
            return Err(format!("`{text}` executes to an empty value"));
        }
        let nested = seq.renest().map_err(|e| e.to_string())?;
        let nested_text = nested.to_string();
        let reparsed = parse(&nested_text, &kb).map_err(|e| format!("`{nested_text}` does not parse: {e}"))?;
        let d2 = execute_program(&kb, &reparsed).map_err(|e| format!("`{nested_text}` fails: {e}"))?;
        if d2 != d {
            return Err(format!("`{nested_text}` and its sequence disagree"));
        }
        tally.positive += 1;
    }
    Ok(tally)
}

/// Literal identification against the packaged labels.
#[derive(Debug, Clone, Copy)]
pub struct LiteralScore {
    pub utterances: usize,
    /// Utterances whose identified spans equal the labels exactly.
    pub correct: usize,
    pub gold_spans: usize,
    pub found_spans: usize,
    pub matched_spans: usize,
}

impl LiteralScore {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.utterances as f64
    }
}

pub fn score_literals() -> (LiteralScore, Vec<String>) {
    use kbqa_core::fixtures::literal_utterances;
    use kbqa_core::harness::identify_literals;
    let items = literal_utterances();
    let mut score = LiteralScore { utterances: items.len(), correct: 0, gold_spans: 0, found_spans: 0, matched_spans: 0 };
    let mut misses = Vec::new();
    for u in &items {
        let gold: Vec<(String, String)> = u.literals.iter().map(|l| (l.text.clone(), l.value.clone())).collect();
        let found: Vec<(String, String)> = identify_literals(&u.question).into_iter().map(|s| (s.text, s.literal.to_string())).collect();
        score.gold_spans += gold.len();
        score.found_spans += found.len();
        score.matched_spans += found.iter().filter(|f| gold.contains(f)).count();
        if found == gold {
            score.correct += 1;
        } else {
            misses.push(format!("{:?}: found {found:?}, labeled {gold:?}", u.question));
        }
    }
    (score, misses)
}
