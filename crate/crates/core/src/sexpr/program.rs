use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kb::{Comparator, Literal, LiteralTag, INVERSE_SUFFIX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Function {
    Join,
    And,
    Argmax,
    Argmin,
    Lt,
    Le,
    Gt,
    Ge,
    Count,
    Cons,
    Tc,
}

/// What an argument position accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// An expression denoting a set (or, for comparatives, a literal value).
    Set,
    /// A set expression or a class.
    SetOrClass,
    Relation,
    /// An entity or literal constant.
    Constant,
    /// A datetime literal constant.
    Temporal,
}

impl Function {
    pub const ALL: [Function; 11] = [
        Function::Join,
        Function::And,
        Function::Argmax,
        Function::Argmin,
        Function::Lt,
        Function::Le,
        Function::Gt,
        Function::Ge,
        Function::Count,
        Function::Cons,
        Function::Tc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Join => "JOIN",
            Function::And => "AND",
            Function::Argmax => "ARGMAX",
            Function::Argmin => "ARGMIN",
            Function::Lt => "LT",
            Function::Le => "LE",
            Function::Gt => "GT",
            Function::Ge => "GE",
            Function::Count => "COUNT",
            Function::Cons => "CONS",
            Function::Tc => "TC",
        }
    }

    /// Argument slots in internal order (the set-like argument first).
    pub fn slots(self) -> &'static [Slot] {
        match self {
            Function::Join | Function::Argmax | Function::Argmin => &[Slot::Set, Slot::Relation],
            Function::Lt | Function::Le | Function::Gt | Function::Ge => &[Slot::Set, Slot::Relation],
            Function::And => &[Slot::Set, Slot::SetOrClass],
            Function::Count => &[Slot::Set],
            Function::Cons => &[Slot::Set, Slot::Relation, Slot::Constant],
            Function::Tc => &[Slot::Set, Slot::Relation, Slot::Temporal],
        }
    }

    pub fn arity(self) -> usize {
        self.slots().len()
    }

    pub fn comparator(self) -> Option<Comparator> {
        match self {
            Function::Lt => Some(Comparator::Lt),
            Function::Le => Some(Comparator::Le),
            Function::Gt => Some(Comparator::Gt),
            Function::Ge => Some(Comparator::Ge),
            _ => None,
        }
    }

    pub fn is_comparative(self) -> bool {
        self.comparator().is_some()
    }
}

impl FromStr for Function {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Function::ALL.into_iter().find(|f| f.name() == s).ok_or(())
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An S-expression program. Function arguments are kept in internal order
/// (see [`Function::slots`]); [`fmt::Display`] prints the surface order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Program {
    Call(Function, Vec<Program>),
    Entity(String),
    Literal(Literal),
    Class(String),
    /// Full relation name, including an `_inv` suffix for the inverse view.
    Relation(String),
    /// Back-reference `#k` to the k-th subprogram (1-based).
    SubRef(usize),
}

impl Program {
    pub fn call(func: Function, args: Vec<Program>) -> Program {
        Program::Call(func, args)
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self, Program::Call(..))
    }

    pub fn function(&self) -> Option<Function> {
        match self {
            Program::Call(f, _) => Some(*f),
            _ => None,
        }
    }

    /// Number of function nodes.
    pub fn size(&self) -> usize {
        match self {
            Program::Call(_, args) => 1 + args.iter().map(Program::size).sum::<usize>(),
            _ => 0,
        }
    }

    /// Calls `visit` on every node, children before parents.
    pub fn walk_post<'a>(&'a self, visit: &mut impl FnMut(&'a Program)) {
        if let Program::Call(_, args) = self {
            for a in args {
                a.walk_post(visit);
            }
        }
        visit(self);
    }

    /// Canonical form for exact-match comparison: AND operands (when both are
    /// set expressions) sorted by printed text, applied bottom-up.
    pub fn normalize(&self) -> Program {
        match self {
            Program::Call(func, args) => {
                let mut args: Vec<Program> = args.iter().map(Program::normalize).collect();
                if *func == Function::And && !matches!(args[1], Program::Class(_)) {
                    let (a, b) = (args[0].to_string(), args[1].to_string());
                    if b < a {
                        args.swap(0, 1);
                    }
                }
                Program::Call(*func, args)
            }
            leaf => leaf.clone(),
        }
    }

    /// Schema items (relations and classes) used anywhere in the program.
    pub fn schema_items(&self) -> Vec<&Program> {
        let mut out = Vec::new();
        self.walk_post(&mut |p| {
            if matches!(p, Program::Relation(_) | Program::Class(_)) {
                out.push(p);
            }
        });
        out
    }
}

/// Inverts a relation name: `r` ↔ `r_inv`.
pub fn invert_relation_name(name: &str) -> String {
    match name.strip_suffix(INVERSE_SUFFIX) {
        Some(base) => base.to_string(),
        None => format!("{name}{INVERSE_SUFFIX}"),
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Entity(s) | Program::Class(s) | Program::Relation(s) => f.write_str(s),
            Program::Literal(l) => write!(f, "{l}"),
            Program::SubRef(k) => write!(f, "#{k}"),
            Program::Call(func, args) => {
                write!(f, "({func}")?;
                let order: Vec<&Program> = match func {
                    Function::Join | Function::Lt | Function::Le | Function::Gt | Function::Ge => {
                        vec![&args[1], &args[0]]
                    }
                    Function::And if matches!(args[1], Program::Class(_)) => vec![&args[1], &args[0]],
                    _ => args.iter().collect(),
                };
                for a in order {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Literal tag of a literal leaf, if any.
pub(crate) fn leaf_tag(p: &Program) -> Option<LiteralTag> {
    match p {
        Program::Literal(l) => Some(l.tag()),
        _ => None,
    }
}
