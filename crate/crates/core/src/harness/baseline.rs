//! Ranking-style baseline: enumerate every program within two hops of the
//! linked entities, execute each one, and score each with the step scorer.

use std::collections::BTreeSet;

use crate::induction::{gold_path, Inducer};
use crate::kb::{Comparator, KnowledgeBase, Literal, Node};
use crate::scorer::Scorer;
use crate::sexpr::{execute_program, Denotation, Function, Program};

fn entity_set(kb: &KnowledgeBase, p: &Program) -> Option<Vec<Node>> {
    match execute_program(kb, p).ok()? {
        Denotation::Entities(s) if !s.is_empty() => Some(s.into_iter().map(Node::Entity).collect()),
        _ => None,
    }
}

fn call(f: Function, args: Vec<Program>) -> Program {
    Program::Call(f, args)
}

/// Every non-empty program reachable from the entities by one or two JOINs,
/// optionally topped with COUNT, ARGMAX/ARGMIN or a CONS constraint, plus
/// every comparative over the literals. Each candidate is executed from
/// scratch.
pub fn enumerate_two_hop(kb: &KnowledgeBase, entities: &[String], literals: &[Literal]) -> Vec<Program> {
    let mut sets: Vec<Program> = Vec::new();
    for e in entities {
        let leaf = Program::Entity(e.clone());
        let Some(heads) = entity_set(kb, &leaf) else { continue };
        for r in kb.outgoing_relations(&heads) {
            let one = call(Function::Join, vec![leaf.clone(), Program::Relation(kb.relation_name(r))]);
            if let Some(mid) = entity_set(kb, &one) {
                for r2 in kb.outgoing_relations(&mid) {
                    sets.push(call(Function::Join, vec![one.clone(), Program::Relation(kb.relation_name(r2))]));
                }
            }
            sets.push(one);
        }
    }
    for l in literals {
        for op in Comparator::ALL {
            let f = match op {
                Comparator::Lt => Function::Lt,
                Comparator::Le => Function::Le,
                Comparator::Gt => Function::Gt,
                Comparator::Ge => Function::Ge,
            };
            for r in kb.relations().flat_map(|r| [r, r.inverted()]) {
                sets.push(call(f, vec![Program::Literal(l.clone()), Program::Relation(kb.relation_name(r))]));
            }
        }
    }
    let mut out = Vec::new();
    for s in sets {
        let Ok(d) = execute_program(kb, &s) else { continue };
        if d.is_empty() {
            continue;
        }
        if let Denotation::Entities(members) = &d {
            let members: Vec<_> = members.iter().copied().collect();
            out.push(call(Function::Count, vec![s.clone()]));
            for r in kb.numeric_relations(&members) {
                for f in [Function::Argmax, Function::Argmin] {
                    out.push(call(f, vec![s.clone(), Program::Relation(kb.relation_name(r))]));
                }
            }
            for (r, c) in kb.constraint_pairs(&members, false) {
                let constant = match c {
                    Node::Entity(e) => Program::Entity(kb.entity_name(e).to_string()),
                    Node::Literal(l) => Program::Literal(kb.literal(l).clone()),
                };
                out.push(call(Function::Cons, vec![s.clone(), Program::Relation(kb.relation_name(r)), constant]));
            }
        }
        out.push(s);
    }
    let mut seen = BTreeSet::new();
    out.retain(|p| seen.insert(p.to_string()) && execute_program(kb, p).is_ok_and(|d| !d.is_empty()));
    out
}

/// Sum of the scorer's log-probabilities along the program's token path.
pub fn sequence_log_prob<S: Scorer>(
    inducer: &Inducer<'_>,
    scorer: &S,
    question: &[String],
    entities: &[String],
    literals: &[Literal],
    program: &Program,
) -> Option<f64> {
    let path = gold_path(inducer, entities, literals, program).ok()?;
    let mut session = scorer.reset(question).ok()?;
    let mut total = 0.0;
    for step in &path.steps {
        let (scores, pending) = scorer.step(&session, &step.candidates).ok()?;
        total += scores[step.gold];
        session = scorer.commit(&session, &pending, step.gold).ok()?;
    }
    Some(total / path.tokens.len().max(1) as f64)
}

/// Enumerates, executes and scores every candidate; best first.
pub fn rank_two_hop<S: Scorer>(
    kb: &KnowledgeBase,
    scorer: &S,
    question: &[String],
    entities: &[String],
    literals: &[Literal],
) -> Vec<(Program, f64)> {
    let inducer = Inducer::new(kb);
    let mut ranked: Vec<(Program, f64)> = enumerate_two_hop(kb, entities, literals)
        .into_iter()
        .filter_map(|p| sequence_log_prob(&inducer, scorer, question, entities, literals, &p).map(|s| (p, s)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}
