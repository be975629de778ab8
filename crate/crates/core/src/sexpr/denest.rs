use std::fmt;

use thiserror::Error;

use super::parse::{parse, ParseError, SymbolTable};
use super::program::{Function, Program, Slot};

/// A program flattened into subprograms that refer to earlier ones by `#k`.
/// The last subprogram is the answer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubprogramSequence {
    pub steps: Vec<Program>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("empty sequence")]
    Empty,
    #[error("subprogram {position} refers to #{target}, which is not an earlier subprogram")]
    ForwardRef { position: usize, target: usize },
    #[error("subprogram {position} nests a function call; arguments must be leaves or references")]
    Nested { position: usize },
    #[error("subprogram {position} is a bare reference")]
    BareRef { position: usize },
    #[error("leaf `{0}` is not among the initial subprograms")]
    MissingLeaf(String),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
}

/// Whether argument `i` of `func` is a position that takes a subprogram (as
/// opposed to a relation, class or constant written inline).
fn is_set_position(func: Function, i: usize, arg: &Program) -> bool {
    match func.slots()[i] {
        Slot::Set => true,
        Slot::SetOrClass => !matches!(arg, Program::Class(_)),
        _ => false,
    }
}

fn collect_set_leaves(p: &Program, out: &mut Vec<Program>) {
    if let Program::Call(func, args) = p {
        for (i, a) in args.iter().enumerate() {
            if a.is_leaf() {
                if is_set_position(*func, i, a)
                    && matches!(a, Program::Entity(_) | Program::Literal(_))
                    && !out.contains(a)
                {
                    out.push(a.clone());
                }
            } else {
                collect_set_leaves(a, out);
            }
        }
    }
}

/// Entity and literal leaves in set positions, in order of first appearance.
/// These are the subprograms a decoder store is initialized with.
pub fn set_leaves(p: &Program) -> Vec<Program> {
    let mut out = Vec::new();
    if p.is_leaf() {
        out.push(p.clone());
    } else {
        collect_set_leaves(p, &mut out);
    }
    out
}

fn flatten(p: &Program, steps: &mut Vec<Program>) -> Result<Program, SequenceError> {
    match p {
        Program::Call(func, args) => {
            let mut flat = Vec::with_capacity(args.len());
            for (i, a) in args.iter().enumerate() {
                if a.is_leaf() && !is_set_position(*func, i, a) {
                    flat.push(a.clone());
                } else if let Program::SubRef(k) = a {
                    flat.push(Program::SubRef(*k));
                } else if a.is_leaf() {
                    let k = steps.iter().position(|s| s == a).ok_or_else(|| SequenceError::MissingLeaf(a.to_string()))?;
                    flat.push(Program::SubRef(k + 1));
                } else {
                    let inner = flatten(a, steps)?;
                    steps.push(inner);
                    flat.push(Program::SubRef(steps.len()));
                }
            }
            Ok(Program::Call(*func, flat))
        }
        leaf => Ok(leaf.clone()),
    }
}

/// Flattens `p` innermost-first. Entity and literal leaves in set positions
/// become the leading subprograms; every function call then gets its own
/// position, children before parents.
pub fn denest(p: &Program) -> SubprogramSequence {
    denest_onto(p, &set_leaves(p)).expect("set leaves are all present")
}

/// Like [`denest`], but with a given list of initial leaf subprograms (for
/// example the linked entities of a question). Fails when a set-position
/// leaf of `p` is not among them.
pub fn denest_onto(p: &Program, initial: &[Program]) -> Result<SubprogramSequence, SequenceError> {
    let mut steps = initial.to_vec();
    if p.is_leaf() {
        if !steps.contains(p) {
            return Err(SequenceError::MissingLeaf(p.to_string()));
        }
        if steps.len() == 1 {
            return Ok(SubprogramSequence { steps });
        }
        let k = steps.iter().position(|s| s == p).unwrap();
        let last = steps.remove(k);
        steps.push(last);
        return Ok(SubprogramSequence { steps });
    }
    let root = flatten(p, &mut steps)?;
    steps.push(root);
    Ok(SubprogramSequence { steps })
}

impl SubprogramSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn answer(&self) -> Option<&Program> {
        self.steps.last()
    }

    /// Checks that references point backwards and that no function call
    /// is nested inside another.
    pub fn validate(&self) -> Result<(), SequenceError> {
        if self.steps.is_empty() {
            return Err(SequenceError::Empty);
        }
        for (i, step) in self.steps.iter().enumerate() {
            let position = i + 1;
            match step {
                Program::SubRef(_) => return Err(SequenceError::BareRef { position }),
                Program::Call(_, args) => {
                    for a in args {
                        match a {
                            Program::Call(..) => return Err(SequenceError::Nested { position }),
                            Program::SubRef(k) if *k == 0 || *k >= position => {
                                return Err(SequenceError::ForwardRef { position, target: *k })
                            }
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Substitutes references back into a single nested program.
    pub fn renest(&self) -> Result<Program, SequenceError> {
        self.validate()?;
        let mut expanded: Vec<Program> = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let full = match step {
                Program::Call(func, args) => Program::Call(
                    *func,
                    args.iter()
                        .map(|a| match a {
                            Program::SubRef(k) => expanded[k - 1].clone(),
                            other => other.clone(),
                        })
                        .collect(),
                ),
                leaf => leaf.clone(),
            };
            expanded.push(full);
        }
        Ok(expanded.pop().expect("validated non-empty"))
    }

    /// Parses one subprogram per non-blank line.
    pub fn parse<S: SymbolTable + ?Sized>(text: &str, symbols: &S) -> Result<Self, SequenceError> {
        let mut steps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            steps.push(parse(line, symbols).map_err(|source| SequenceError::Parse { line: i + 1, source })?);
        }
        let seq = SubprogramSequence { steps };
        seq.validate()?;
        Ok(seq)
    }
}

impl fmt::Display for SubprogramSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::parse::NamingConvention;

    fn p(text: &str) -> Program {
        parse(text, &NamingConvention).unwrap()
    }

    #[test]
    fn wine_program_has_three_subprograms() {
        let prog = p("(ARGMAX (JOIN wine.wine_sub_region.wines_inv Tulum_Valley) wine.wine.percentage_alcohol)");
        let seq = denest(&prog);
        let printed: Vec<String> = seq.steps.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            printed,
            [
                "Tulum_Valley",
                "(JOIN wine.wine_sub_region.wines_inv #1)",
                "(ARGMAX #2 wine.wine.percentage_alcohol)"
            ]
        );
        assert_eq!(seq.renest().unwrap(), prog);
    }

    #[test]
    fn single_leaf_is_one_step() {
        let seq = denest(&p("e1"));
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.renest().unwrap(), p("e1"));
    }

    #[test]
    fn shared_leaves_are_stored_once() {
        let prog = p("(AND (JOIN a.b.c e1) (JOIN a.b.d e1))");
        let seq = denest(&prog);
        assert_eq!(seq.len(), 4);
        assert_eq!(seq.steps[0], p("e1"));
        assert_eq!(seq.renest().unwrap(), prog);
    }

    #[test]
    fn constants_and_classes_stay_inline() {
        let prog = p("(AND a.b (CONS (JOIN a.b.c e1) a.b.g Male))");
        let seq = denest(&prog);
        assert_eq!(seq.len(), 4);
        assert_eq!(seq.steps[3].to_string(), "(AND a.b #3)");
        assert_eq!(seq.steps[2].to_string(), "(CONS #2 a.b.g Male)");
    }

    #[test]
    fn denest_onto_respects_initial_order() {
        let prog = p("(JOIN a.b.c e2)");
        let seq = denest_onto(&prog, &[p("e1"), p("e2")]).unwrap();
        assert_eq!(seq.steps[2].to_string(), "(JOIN a.b.c #2)");
        assert!(matches!(denest_onto(&prog, &[p("e1")]), Err(SequenceError::MissingLeaf(_))));
    }

    #[test]
    fn validation_rejects_forward_refs() {
        let seq = SubprogramSequence { steps: vec![p("e1"), p("(JOIN a.b.c #2)")] };
        assert_eq!(seq.validate(), Err(SequenceError::ForwardRef { position: 2, target: 2 }));
        let nested = SubprogramSequence { steps: vec![p("(COUNT (JOIN a.b.c e1))")] };
        assert_eq!(nested.validate(), Err(SequenceError::Nested { position: 1 }));
    }

    #[test]
    fn sequence_text_round_trips() {
        let seq = denest(&p("(COUNT (JOIN a.b.c_inv e1))"));
        let back = SubprogramSequence::parse(&seq.to_string(), &NamingConvention).unwrap();
        assert_eq!(back, seq);
    }
}
